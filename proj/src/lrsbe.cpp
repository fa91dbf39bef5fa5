#include "lrsbe/solvers.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace lrsbe {

double relative_change(const CVec& next, const CVec& prev) {
    const double diff = (next - prev).norm();
    const double base = prev.norm();
    if (base == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return diff / base;
}

double effective_noise(const Measurement& y) {
    if (y.sigma2 > 0.0) return y.sigma2;
    const double power = y.y.size() ? y.y.squaredNorm() / double(y.y.size()) : 0.0;
    return power > 0.0 ? 1e-10 * power : 1e-30;
}

namespace {

void validate(const LrsbeOptions& o, Index mk) {
    if (o.q_max < 1) throw ParameterError("LRSBE: q_max must be >= 1");
    if (!(o.tol > 0.0)) throw ParameterError("LRSBE: tol must be > 0");
    if (!(o.alpha0 > 0.0) || !(o.beta0 > 0.0)) throw ParameterError("LRSBE: alpha0 and beta0 must be > 0");
    if (o.block_len < 0 || (o.block_len > 0 && mk % o.block_len != 0))
        throw ParameterError("LRSBE: block_len must divide M K");
}

void prune(RVec& gamma, double threshold) {
    const double top = gamma.size() ? gamma.maxCoeff() : 0.0;
    for (auto& g : gamma)
        if (!(g >= threshold * top) || g <= 0.0) g = 0.0;
}

} // namespace

EstimateResult lrsbe_estimate(const Measurement& meas, const PilotSet& p, const ChannelDims& dims,
                              const LrsbeOptions& opts, const IterationObserver& obs) {
    const auto t0 = std::chrono::steady_clock::now();
    check_dims(dims);
    const Index mk = dims.collective();
    const Index l = opts.block_len > 0 ? opts.block_len : dims.m_h;
    validate(opts, mk);
    if (dims.k_users != p.k_users) throw DimensionError("LRSBE: pilot set and dims disagree on K");
    if (meas.y.size() != dims.antennas() * p.n_pilots)
        throw DimensionError("LRSBE: measurement length " + std::to_string(meas.y.size()) +
                             ", expected M N = " + std::to_string(dims.antennas() * p.n_pilots));
    if (mk % l != 0) throw ParameterError("LRSBE: block_len must divide M K");

    const CVec& y = meas.y;
    const double sigma2 = effective_noise(meas);
    const double t_step = step_length(p);

    SolverState st;
    st.h_s = CVec::Zero(mk);
    st.h_l = CVec::Zero(mk);
    st.alpha = opts.alpha0;
    st.beta = opts.beta0;
    st.gamma = RVec::Ones(mk / l);
    st.corr_c = CMat::Identity(l, l);
    st.mu = CVec::Zero(mk);
    st.sigma_blocks = CMat::Zero(l, mk);

    EstimateResult res;
    CVec h_prev = CVec::Zero(mk);
    CVec h = h_prev;
    Index rank_hl = 0;
    double nuclear = 0.0;

    for (int i = 1; i <= opts.q_max; ++i) {
        st.iter = i;
        try {
            if (st.active_blocks() > 0) {
                const CVec r_s = y - forward(p, st.h_l);
                Posterior post = sbl_e_step(p, r_s, st, sigma2);
                BlockParams bp = update_block_params(post.mu, post.sigma_blocks, st.gamma, st.alpha, opts.c_reg);
                st.mu = std::move(post.mu);
                st.sigma_blocks = std::move(post.sigma_blocks);
                st.corr_c = std::move(bp.corr_c);
                st.gamma = std::move(bp.gamma);
                prune(st.gamma, opts.prune_threshold);
            } else {
                st.mu.setZero();
                st.sigma_blocks.setZero();
            }
            st.h_s = st.mu;

            if (opts.low_rank_branch) {
                const CVec r_l = y - forward(p, st.h_s);
                const CVec h_grad = lowrank_step(p, r_l, st.h_l, st.beta, t_step);
                SvtStep svt = svt_step(h_grad, st.beta, dims, opts.svt_mode);
                st.h_l = std::move(svt.h);
                rank_hl = svt.rank;
                nuclear = svt.nuclear_norm;
            }
            h = st.h_s + st.h_l;

            MStepInputs in;
            in.sigma2 = sigma2;
            in.t_step = t_step;
            in.trace_sigma_l_mode = opts.trace_sigma_l_mode;
            in.update_beta = opts.low_rank_branch;
            const Hyperparams hp = m_step(y, p, st, in);
            st.alpha = hp.alpha;
            st.beta = hp.beta;
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " [iteration " + std::to_string(i) + "]");
        }

        const double rel = relative_change(h, h_prev);
        TraceEntry te;
        te.iter = i;
        te.rel_change = rel;
        te.residual_norm = (y - forward(p, h)).norm();
        te.alpha = st.alpha;
        te.beta = st.beta;
        te.nnz_blocks = st.active_blocks();
        te.rank_hl = rank_hl;
        te.objective = te.residual_norm * te.residual_norm + st.alpha * st.h_s.cwiseAbs().sum() +
                       st.beta * nuclear;
        res.trace.push_back(te);
        res.iterations = i;
        if (obs) obs(i, h);
        if (rel <= opts.tol) {
            res.converged = true;
            break;
        }
        h_prev = h;
    }

    res.h_s_hat = st.h_s;
    res.h_l_hat = st.h_l;
    res.h_hat = res.h_s_hat + res.h_l_hat;
    res.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

EstimateResult bsbe_estimate(const Measurement& y, const PilotSet& p, const ChannelDims& dims,
                             LrsbeOptions opts, const IterationObserver& obs) {
    opts.low_rank_branch = false;
    return lrsbe_estimate(y, p, dims, opts, obs);
}

} // namespace lrsbe
