#include "lrsbe/solvers.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace lrsbe {

namespace {

constexpr double kRcondFloor = 16.0 * std::numeric_limits<double>::epsilon();

template <typename Factor>
void check_factor(const Factor& llt, double sigma2, const char* where) {
    if (llt.info() != Eigen::Success || !(llt.rcond() > kRcondFloor))
        throw NumericalError(std::string(where) +
                             ": system matrix A Gamma A^H + sigma2 I is singular (sigma2 = " +
                             std::to_string(sigma2) + ", rcond = " + std::to_string(llt.rcond()) +
                             ")");
}

// S_b = W (x) C + sigma2 I with row index n L + l.
CMat kron_plus_identity(const CMat& w, const CMat& c, double sigma2) {
    const Index n = w.rows();
    const Index l = c.rows();
    CMat s(n * l, n * l);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) s.block(i * l, j * l, l, l) = w(i, j) * c;
    s.diagonal().array() += sigma2;
    return s;
}

// Each block lies inside one user: slot b of every user couples only with
// slot b of the other users, through the N x N pilot Gram weights.
Posterior e_step_split(const PilotSet& p, const CVec& r, const SolverState& st, double sigma2,
                       Index m) {
    const Index l = st.block_len();
    const Index n = p.n_pilots;
    const Index k_users = p.k_users;
    const Index slots = m / l;
    const CMat& c = st.corr_c;

    Posterior out;
    out.mu = CVec::Zero(m * k_users);
    out.sigma_blocks = CMat::Zero(l, st.n_blocks() * l);

    CVec rb(n * l);
    for (Index b = 0; b < slots; ++b) {
        CMat w = CMat::Zero(n, n);
        bool any = false;
        for (Index k = 0; k < k_users; ++k) {
            const double g = st.gamma(k * slots + b);
            if (g <= 0.0) continue;
            any = true;
            w.noalias() += g * p.pilots.col(k) * p.pilots.col(k).adjoint();
        }
        if (!any) continue;

        const CMat s = kron_plus_identity(w, c, sigma2);
        Eigen::LLT<CMat> llt(s);
        check_factor(llt, sigma2, "sbl_e_step");

        for (Index nn = 0; nn < n; ++nn) rb.segment(nn * l, l) = r.segment(nn * m + b * l, l);
        const CMat s_inv = llt.solve(CMat::Identity(n * l, n * l));
        const CVec z = s_inv * rb;
        const auto zm = z.reshaped(l, n);

        // (x^H (x) I) S^-1 (x (x) I) depends on the user only through its
        // pilot, so it is formed once per sequence.
        std::vector<CMat> gram(static_cast<std::size_t>(n));
        std::vector<char> have(static_cast<std::size_t>(n), 0);
        for (Index k = 0; k < k_users; ++k) {
            const Index g_idx = k * slots + b;
            const double g = st.gamma(g_idx);
            if (g <= 0.0) continue;
            const auto x = p.pilots.col(k);
            out.mu.segment(g_idx * l, l) = g * (c * (zm * x.conjugate()));

            const auto seq = static_cast<std::size_t>(p.sequence_of(k));
            if (!have[seq]) {
                CMat pk = CMat::Zero(l, l);
                for (Index j = 0; j < n; ++j)
                    for (Index i = 0; i < n; ++i)
                        pk.noalias() += (std::conj(x(i)) * x(j)) * s_inv.block(i * l, j * l, l, l);
                gram[seq] = std::move(pk);
                have[seq] = 1;
            }
            CMat sig = g * c - (g * g) * (c * gram[seq] * c);
            out.sigma_blocks.middleCols(g_idx * l, l) = 0.5 * (sig + sig.adjoint());
        }
    }
    return out;
}

// Blocks straddle user boundaries: factor the full (M N)-sized system.
Posterior e_step_dense(const PilotSet& p, const CVec& r, const SolverState& st, double sigma2,
                       Index m) {
    const Index l = st.block_len();
    const Index n = p.n_pilots;
    const Index mn = m * n;
    const Index blocks = st.n_blocks();
    const CMat& c = st.corr_c;

    // Columns of A belonging to block g: entry X(n, k) at row n M + m for
    // the flat index j = k M + m.
    auto block_columns = [&](Index g) {
        CMat a = CMat::Zero(mn, l);
        for (Index ll = 0; ll < l; ++ll) {
            const Index j = g * l + ll;
            const Index k = j / m;
            const Index mm = j % m;
            for (Index nn = 0; nn < n; ++nn) a(nn * m + mm, ll) = p.pilots(nn, k);
        }
        return a;
    };

    CMat s = CMat::Zero(mn, mn);
    for (Index g = 0; g < blocks; ++g) {
        if (st.gamma(g) <= 0.0) continue;
        const CMat a = block_columns(g);
        s.noalias() += st.gamma(g) * (a * c * a.adjoint());
    }
    s.diagonal().array() += sigma2;
    Eigen::LLT<CMat> llt(s);
    check_factor(llt, sigma2, "sbl_e_step");
    const CVec z = llt.solve(r);

    Posterior out;
    out.mu = CVec::Zero(blocks * l);
    out.sigma_blocks = CMat::Zero(l, blocks * l);
    for (Index g = 0; g < blocks; ++g) {
        const double gam = st.gamma(g);
        if (gam <= 0.0) continue;
        const CMat a = block_columns(g);
        out.mu.segment(g * l, l) = gam * (c * (a.adjoint() * z));
        const CMat pk = a.adjoint() * llt.solve(a);
        CMat sig = gam * c - (gam * gam) * (c * pk * c);
        out.sigma_blocks.middleCols(g * l, l) = 0.5 * (sig + sig.adjoint());
    }
    return out;
}

} // namespace

Posterior sbl_e_step(const PilotSet& p, const CVec& r_s, const SolverState& state, double sigma2) {
    const Index l = state.block_len();
    if (l <= 0 || state.corr_c.cols() != l)
        throw DimensionError("sbl_e_step: correlation matrix must be square and non-empty");
    const Index mk = state.n_blocks() * l;
    if (mk % p.k_users != 0)
        throw DimensionError("sbl_e_step: G L = " + std::to_string(mk) +
                             " is not a multiple of K");
    const Index m = mk / p.k_users;
    if (r_s.size() != m * p.n_pilots)
        throw DimensionError("sbl_e_step: residual length " + std::to_string(r_s.size()) +
                             ", expected M N = " + std::to_string(m * p.n_pilots));
    if (!(sigma2 >= 0.0)) throw ParameterError("sbl_e_step: sigma2 must be >= 0");
    return (m % l == 0) ? e_step_split(p, r_s, state, sigma2, m)
                        : e_step_dense(p, r_s, state, sigma2, m);
}

BlockParams update_block_params(const CVec& mu, const CMat& sigma_blocks, const RVec& gamma,
                                double alpha, double c_reg) {
    const Index blocks = gamma.size();
    const Index l = sigma_blocks.rows();
    if (l <= 0 || sigma_blocks.cols() != blocks * l || mu.size() != blocks * l)
        throw DimensionError("update_block_params: inconsistent block layout");

    auto second_moment = [&](Index g) -> CMat {
        const auto m = mu.segment(g * l, l);
        return sigma_blocks.middleCols(g * l, l) + m * m.adjoint();
    };

    CMat c = CMat::Zero(l, l);
    Index active = 0;
    for (Index g = 0; g < blocks; ++g) {
        if (gamma(g) <= 0.0) continue;
        c.noalias() += second_moment(g) / gamma(g);
        ++active;
    }
    if (active == 0) throw EmptyModelError("update_block_params: every block is pruned");
    c /= double(active);
    c = 0.5 * (c + c.adjoint()).eval();
    c.diagonal().array() += c_reg;
    const double tr = c.trace().real();
    if (!std::isfinite(tr) || tr < 0.0)
        throw NumericalError("update_block_params: correlation matrix has trace " + std::to_string(tr));
    // All-zero statistics with no ridge: any C gives gamma = 0, keep the identity.
    if (tr == 0.0) c.setIdentity();
    else c *= double(l) / tr;

    BlockParams out;
    out.corr_c = c;
    out.gamma = RVec::Zero(blocks);
    Eigen::LDLT<CMat> ldlt(c);
    const double shrink = 1.0 / (1.0 + alpha);
    for (Index g = 0; g < blocks; ++g) {
        if (gamma(g) <= 0.0) continue;
        const double t = ldlt.solve(second_moment(g)).trace().real();
        out.gamma(g) = std::max(0.0, t / double(l) * shrink);
    }
    return out;
}

Hyperparams m_step(const CVec& y, const PilotSet& p, const SolverState& state,
                   const MStepInputs& in) {
    const Index mk = state.h_s.size();
    if (state.h_l.size() != mk || state.mu.size() != mk)
        throw DimensionError("m_step: estimate lengths disagree");
    const Index l = state.sigma_blocks.rows();

    const double resid = (y - forward(p, state.h_s + state.h_l)).squaredNorm();
    double weight_gap = 0.0;
    for (Index j = 0; j < mk; ++j) {
        const double var = l > 0 ? state.sigma_blocks(j % l, j).real() : 0.0;
        const double mu2 = std::norm(state.mu(j));
        double theta;
        if (var > 0.0)
            theta = mu2 / var;
        else
            theta = mu2 > 0.0 ? 1.0 : 0.0;
        weight_gap += 1.0 - std::clamp(theta, 0.0, 1.0);
    }

    const double mkd = double(mk);
    Hyperparams out{state.alpha, state.beta};
    const double den_a = resid + weight_gap / state.alpha;
    if (std::isnan(den_a)) throw NumericalError("m_step: alpha denominator is NaN");
    out.alpha = std::clamp(den_a > 0.0 ? mkd / den_a : kHyperMax, kHyperMin, kHyperMax);

    if (in.update_beta) {
        double tr_sigma_l = 0.0;
        if (in.trace_sigma_l_mode == TraceSigmaMode::NoiseOverStep) tr_sigma_l = mkd * in.sigma2 / in.t_step;
        const double den_b = state.h_l.squaredNorm() + tr_sigma_l;
        if (std::isnan(den_b)) throw NumericalError("m_step: beta denominator is NaN");
        out.beta = std::clamp(den_b > 0.0 ? mkd / den_b : kHyperMax, kHyperMin, kHyperMax);
    }
    return out;
}

} // namespace lrsbe
