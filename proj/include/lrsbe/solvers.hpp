#pragma once

#include "lrsbe/measurement.hpp"
#include "lrsbe/types.hpp"

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace lrsbe {

/// How tr(Sigma^L) enters the beta update. h^L is a point estimate, so the
/// default treats its posterior as a point mass.
enum class TraceSigmaMode { Zero, NoiseOverStep };

/// Whether the singular-value threshold acts on the collective
/// M_h x (M_v K) matrix [H_1, ..., H_K] or on each H_k separately.
enum class SvtMode { Collective, PerUser };

struct LrsbeOptions {
    int q_max = 50;
    double tol = 1e-4;
    Index block_len = 0; // 0 selects M_h
    double alpha0 = 1.0;
    double beta0 = 1.0;
    double c_reg = 1e-6;
    double prune_threshold = 1e-8; // relative to max gamma
    TraceSigmaMode trace_sigma_l_mode = TraceSigmaMode::Zero;
    SvtMode svt_mode = SvtMode::Collective;
    bool low_rank_branch = true; // false gives BSBE
    bool deterministic = true;
};

struct SbeOptions {
    int q_max = 50;
    double tol = 1e-4;
    double prune_threshold = 1e-8;
};

struct IstaOptions {
    int q_max = 200;
    double tol = 1e-4;
    double lambda_scale = 1.0;
    double lambda = -1.0; // < 0: lambda_scale * sigma * sqrt(2 log(MK))
};

struct OmpOptions {
    Index max_atoms = 0; // 0 selects M N, the rank of A
    double residual_scale = 1.0;
};

struct TraceEntry {
    int iter = 0;
    double rel_change = 0.0;
    double residual_norm = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    Index nnz_blocks = 0;
    Index rank_hl = 0;
    double objective = 0.0;
};

struct EstimateResult {
    CVec h_hat;
    CVec h_s_hat;
    CVec h_l_hat;
    int iterations = 0;
    bool converged = false;
    double runtime_ms = 0.0;
    std::vector<TraceEntry> trace;
};

/// Called once per iteration with the combined estimate after that iteration.
using IterationObserver = std::function<void(int iter, const CVec& h_hat)>;

struct SolverState {
    CVec h_s;
    CVec h_l;
    double alpha = 1.0;
    double beta = 1.0;
    RVec gamma;  // G block weights, 0 = pruned
    CMat corr_c; // L x L
    CVec mu;
    CMat sigma_blocks; // L x (G L), block g in columns [g L, (g + 1) L)
    int iter = 0;

    Index block_len() const { return corr_c.rows(); }
    Index n_blocks() const { return gamma.size(); }
    Index active_blocks() const { return (gamma.array() > 0.0).count(); }
};

struct Posterior {
    CVec mu;
    CMat sigma_blocks; // L x (G L)
};

/// Block-SBL posterior of h^S given the sparse residual r^S:
///   mu    = Gamma A^H (A Gamma A^H + sigma2 I)^-1 r
///   Sigma = Gamma - Gamma A^H (A Gamma A^H + sigma2 I)^-1 A Gamma
/// with Gamma = blockdiag(gamma_g C). Only the diagonal L x L blocks of Sigma
/// are formed. When L divides M the system splits into M / L independent
/// (N L)-sized systems, otherwise the (M N)-sized system is factored once.
Posterior sbl_e_step(const PilotSet& p, const CVec& r_s, const SolverState& state, double sigma2);

struct BlockParams {
    CMat corr_c;
    RVec gamma;
};

/// Shared intra-block correlation and block weights from posterior moments.
/// C is Hermitian-symmetrized, ridged by c_reg and scaled to trace L; pruned
/// blocks (gamma = 0) stay at zero. Throws EmptyModelError if every block is
/// pruned.
BlockParams update_block_params(const CVec& mu, const CMat& sigma_blocks, const RVec& gamma,
                                double alpha, double c_reg = 1e-6);

/// One projected gradient step on ||r - A h||^2 followed by the complex soft
/// threshold with tau = beta / (2 T).
CVec lowrank_step(const PilotSet& p, const CVec& r_l, const CVec& h_l, double beta, double t_step);

struct SvtStep {
    CVec h;
    Index rank = 0;
    double nuclear_norm = 0.0;
};

/// Singular values of the reshaped low-rank estimate shrunk by sqrt(beta) / 2.
SvtStep svt_step(const CVec& h_l, double beta, const ChannelDims& dims,
                 SvtMode mode = SvtMode::Collective);

struct Hyperparams {
    double alpha = 1.0;
    double beta = 1.0;
};

constexpr double kHyperMin = 1e-8;
constexpr double kHyperMax = 1e12;

struct MStepInputs {
    double sigma2 = 0.0;
    double t_step = 1.0;
    TraceSigmaMode trace_sigma_l_mode = TraceSigmaMode::Zero;
    bool update_beta = true;
};

/// Hyperparameter refresh from the current estimates and E-step moments.
Hyperparams m_step(const CVec& y, const PilotSet& p, const SolverState& state,
                   const MStepInputs& in);

EstimateResult lrsbe_estimate(const Measurement& y, const PilotSet& p, const ChannelDims& dims,
                              const LrsbeOptions& opts = {}, const IterationObserver& obs = {});
/// LRSBE with the low-rank branch pinned to zero.
EstimateResult bsbe_estimate(const Measurement& y, const PilotSet& p, const ChannelDims& dims,
                             LrsbeOptions opts = {}, const IterationObserver& obs = {});
EstimateResult sbe_estimate(const Measurement& y, const PilotSet& p, const ChannelDims& dims,
                            const SbeOptions& opts = {}, const IterationObserver& obs = {});
EstimateResult ista_estimate(const Measurement& y, const PilotSet& p, const ChannelDims& dims,
                             const IstaOptions& opts = {}, const IterationObserver& obs = {});
EstimateResult omp_estimate(const Measurement& y, const PilotSet& p, const ChannelDims& dims,
                            const OmpOptions& opts = {}, const IterationObserver& obs = {});

/// Relative change ||a - b|| / ||b||; 0 when both vanish, +inf when only b does.
double relative_change(const CVec& next, const CVec& prev);

/// Noise power handed to the Bayesian solvers: the true sigma2, or a floor
/// of 1e-10 times the mean measurement power for noiseless data.
double effective_noise(const Measurement& y);

// ---------------------------------------------------------------------------
// Name-based dispatch.

struct SolverConfig {
    std::string name = "lrsbe";
    LrsbeOptions lrsbe;
    SbeOptions sbe;
    IstaOptions ista;
    OmpOptions omp;

    /// Iteration cap of the selected solver.
    int q_max(const ChannelDims& dims, Index n_pilots) const;
};

const std::vector<std::string>& solver_names();
bool is_solver_name(std::string_view name);

EstimateResult run_estimator(const SolverConfig& cfg, const Measurement& y, const PilotSet& p,
                             const ChannelDims& dims, const IterationObserver& obs = {});

} // namespace lrsbe
