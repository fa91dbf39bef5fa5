#include "lrsbe/prox.hpp"
#include "lrsbe/solvers.hpp"

#include <chrono>
#include <cmath>

namespace lrsbe {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void check_problem(const Measurement& y, const PilotSet& p, const ChannelDims& dims, const char* who) {
    check_dims(dims);
    if (dims.k_users != p.k_users) throw DimensionError(std::string(who) + ": pilot set and dims disagree on K");
    if (y.y.size() != dims.antennas() * p.n_pilots)
        throw DimensionError(std::string(who) + ": measurement length " + std::to_string(y.y.size()) +
                             ", expected M N = " + std::to_string(dims.antennas() * p.n_pilots));
}

void finish(EstimateResult& res, CVec h, Clock::time_point t0) {
    res.h_l_hat = CVec::Zero(h.size());
    res.h_s_hat = h;
    res.h_hat = std::move(h);
    res.runtime_ms = elapsed_ms(t0);
}

} // namespace

// Element-wise SBL: the block machinery with L = 1, C = 1 and the plain EM
// weight update gamma_j = Sigma_jj + |mu_j|^2.
EstimateResult sbe_estimate(const Measurement& y, const PilotSet& p, const ChannelDims& dims,
                            const SbeOptions& opts, const IterationObserver& obs) {
    const auto t0 = Clock::now();
    check_problem(y, p, dims, "SBE");
    if (opts.q_max < 1 || !(opts.tol > 0.0)) throw ParameterError("SBE: q_max >= 1 and tol > 0 required");
    const Index mk = dims.collective();
    const double sigma2 = effective_noise(y);

    SolverState st;
    st.gamma = RVec::Ones(mk);
    st.corr_c = CMat::Identity(1, 1);

    EstimateResult res;
    CVec h_prev = CVec::Zero(mk);
    CVec h = h_prev;
    for (int i = 1; i <= opts.q_max; ++i) {
        if (st.active_blocks() > 0) {
            Posterior post;
            try {
                post = sbl_e_step(p, y.y, st, sigma2);
            } catch (const NumericalError& e) {
                throw NumericalError(std::string(e.what()) + " [iteration " + std::to_string(i) + "]");
            }
            h = post.mu;
            const double top = (post.sigma_blocks.row(0).real().transpose().array() +
                                post.mu.cwiseAbs2().array()).maxCoeff();
            for (Index j = 0; j < mk; ++j) {
                if (st.gamma(j) <= 0.0) continue;
                const double g = post.sigma_blocks(0, j).real() + std::norm(post.mu(j));
                st.gamma(j) = (g > 0.0 && g >= opts.prune_threshold * top) ? g : 0.0;
            }
        } else {
            h.setZero();
        }

        const double rel = relative_change(h, h_prev);
        TraceEntry te;
        te.iter = i;
        te.rel_change = rel;
        te.residual_norm = (y.y - forward(p, h)).norm();
        te.nnz_blocks = st.active_blocks();
        te.objective = te.residual_norm * te.residual_norm;
        res.trace.push_back(te);
        res.iterations = i;
        if (obs) obs(i, h);
        if (rel <= opts.tol) {
            res.converged = true;
            break;
        }
        h_prev = h;
    }
    finish(res, h, t0);
    return res;
}

// Proximal gradient on ||y - A h||^2 + lambda ||h||_1 with step 1/T.
EstimateResult ista_estimate(const Measurement& y, const PilotSet& p, const ChannelDims& dims,
                             const IstaOptions& opts, const IterationObserver& obs) {
    const auto t0 = Clock::now();
    check_problem(y, p, dims, "ISTA");
    if (opts.q_max < 1 || !(opts.tol > 0.0)) throw ParameterError("ISTA: q_max >= 1 and tol > 0 required");
    const Index mk = dims.collective();
    const double t_step = step_length(p);
    const double lambda = opts.lambda >= 0.0
                              ? opts.lambda
                              : opts.lambda_scale * std::sqrt(y.sigma2) * std::sqrt(2.0 * std::log(double(mk)));
    const double tau = lambda / (2.0 * t_step);

    EstimateResult res;
    CVec h = CVec::Zero(mk);
    for (int i = 1; i <= opts.q_max; ++i) {
        const CVec resid = y.y - forward(p, h);
        CVec next = soft_threshold(CVec(h + adjoint(p, resid) / t_step), tau);
        const double rel = relative_change(next, h);
        h = std::move(next);

        TraceEntry te;
        te.iter = i;
        te.rel_change = rel;
        te.residual_norm = (y.y - forward(p, h)).norm();
        te.nnz_blocks = (h.array() != cplx(0.0)).count();
        te.objective = te.residual_norm * te.residual_norm + lambda * h.cwiseAbs().sum();
        res.trace.push_back(te);
        res.iterations = i;
        if (obs) obs(i, h);
        if (rel <= opts.tol) {
            res.converged = true;
            break;
        }
    }
    finish(res, h, t0);
    return res;
}

// Orthogonal matching pursuit on the columns a_(k,m) = x_k (x) e_m, with an
// incrementally maintained thin QR of the selected columns.
EstimateResult omp_estimate(const Measurement& y, const PilotSet& p, const ChannelDims& dims,
                            const OmpOptions& opts, const IterationObserver& obs) {
    const auto t0 = Clock::now();
    check_problem(y, p, dims, "OMP");
    const Index m = dims.antennas();
    const Index mn = m * p.n_pilots;
    const Index mk = dims.collective();
    const Index budget = std::min(opts.max_atoms > 0 ? opts.max_atoms : mn, std::min(mn, mk));
    const double y_norm = y.y.norm();
    const double stop = std::max(opts.residual_scale * std::sqrt(double(mn) * y.sigma2), 1e-12 * y_norm);

    EstimateResult res;
    CMat q(mn, budget);
    CMat r_fac = CMat::Zero(budget, budget);
    std::vector<Index> support;
    std::vector<char> excluded(static_cast<std::size_t>(mk), 0);
    CVec resid = y.y;
    CVec qty = CVec::Zero(budget);

    auto coefficients = [&]() {
        const Index s = Index(support.size());
        CVec h = CVec::Zero(mk);
        if (s == 0) return h;
        const CVec c = r_fac.topLeftCorner(s, s).triangularView<Eigen::Upper>().solve(qty.head(s));
        for (Index i = 0; i < s; ++i) h(support[std::size_t(i)]) = c(i);
        return h;
    };

    if (!(resid.norm() <= stop)) {
        while (Index(support.size()) < budget) {
            CVec corr = adjoint(p, resid);
            for (Index j = 0; j < mk; ++j)
                if (excluded[std::size_t(j)]) corr(j) = 0.0;
            Index best = 0;
            const double peak = corr.cwiseAbs().maxCoeff(&best);
            if (!(peak > 1e-14 * std::max(y_norm, 1e-300))) break;

            const Index k = best / m;
            const Index mm = best % m;
            CVec a = CVec::Zero(mn);
            for (Index nn = 0; nn < p.n_pilots; ++nn) a(nn * m + mm) = p.pilots(nn, k);
            const double a_norm = a.norm();

            const Index s = Index(support.size());
            CVec coef = CVec::Zero(s);
            for (int pass = 0; pass < 2; ++pass) { // re-orthogonalize once
                const CVec proj = q.leftCols(s).adjoint() * a;
                a -= q.leftCols(s) * proj;
                coef += proj;
            }
            const double rho = a.norm();
            excluded[std::size_t(best)] = 1;
            if (rho <= 1e-10 * a_norm) continue; // column already in the span

            q.col(s) = a / rho;
            r_fac.col(s).head(s) = coef;
            r_fac(s, s) = rho;
            qty(s) = q.col(s).dot(y.y);
            resid -= qty(s) * q.col(s);
            support.push_back(best);

            const int it = int(support.size());
            TraceEntry te;
            te.iter = it;
            te.residual_norm = resid.norm();
            te.rel_change = te.residual_norm / std::max(y_norm, 1e-300);
            te.nnz_blocks = Index(support.size());
            te.objective = te.residual_norm * te.residual_norm;
            res.trace.push_back(te);
            res.iterations = it;
            if (obs) obs(it, coefficients());
            if (te.residual_norm <= stop) {
                res.converged = true;
                break;
            }
        }
    } else {
        res.converged = true;
    }
    finish(res, coefficients(), t0);
    return res;
}

} // namespace lrsbe
