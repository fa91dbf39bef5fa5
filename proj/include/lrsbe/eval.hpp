#pragma once

#include "lrsbe/beamspace.hpp"
#include "lrsbe/measurement.hpp"
#include "lrsbe/solvers.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lrsbe {

struct Nmse {
    double linear = 0.0;
    double db = 0.0; // -inf on exact recovery
};

inline double to_db(double linear) { return 10.0 * std::log10(linear); }

/// (1/K) sum_k ||h_k - hhat_k||^2 / ||h_k||^2 over the user partition.
Nmse nmse(const CVec& h_true, const CVec& h_hat, Index k_users);

struct EcdfPoint {
    double value = 0.0;
    double probability = 0.0;
};

/// Empirical CDF: sorted values paired with i/n (right-continuous steps).
std::vector<EcdfPoint> ecdf(std::vector<double> values);
/// Smallest sample value v with F(v) >= prob.
double ecdf_quantile(const std::vector<EcdfPoint>& cdf, double prob);

struct ExperimentConfig {
    ChannelDims dims{8, 8, 8};
    Index n_pilots = 4;
    std::vector<double> snr_grid{-10.0, 0.0, 10.0};
    int n_trials = 100;
    std::uint64_t base_seed = 1;
    GeneratorParams generator;
    std::vector<SolverConfig> solvers;
    std::optional<double> nmse_target;
    int jobs = 1; // worker threads; <= 0 means hardware concurrency
};

void validate(const ExperimentConfig& cfg);

struct ResultRecord {
    std::string solver;
    double snr_db = 0.0;
    int trial = 0;
    std::uint64_t seed = 0;
    double nmse_db = 0.0;
    double nmse_linear = 0.0;
    int iterations = 0;
    double runtime_ms = 0.0;
    bool converged = false;
    bool failed = false;
    std::string error;
    // Filled when the config carries an NMSE target.
    int target_iteration = 0;
    double target_runtime_ms = 0.0;
};

/// Stable per-trial seed from (base seed, SNR index, trial index).
std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t snr_index, int trial);

/// Ground truth, pilots and noisy measurement shared by every solver of one trial.
struct TrialData {
    ChannelRealization channel;
    PilotSet pilots;
    Measurement measurement;
};

TrialData make_trial(const ExperimentConfig& cfg, double snr_db, std::uint64_t seed);

/// Paired Monte-Carlo sweep. Records are ordered by (solver, snr, trial).
std::vector<ResultRecord> run_sweep(const ExperimentConfig& cfg);

struct TargetSummary {
    std::string solver;
    double mean_iterations = 0.0;
    double mean_runtime_ms = 0.0;
    int trials = 0;
};

/// Mean first iteration at which NMSE <= target (the solver's iteration cap
/// when never reached), per solver, over every SNR and trial of the config.
std::vector<TargetSummary> iterations_to_target(const ExperimentConfig& cfg, double nmse_target);
std::vector<TargetSummary> summarize_targets(const ExperimentConfig& cfg,
                                             const std::vector<ResultRecord>& records);

struct SummaryRow {
    std::string solver;
    double snr_db = 0.0;
    int trials = 0;
    int failed = 0;
    double mean_nmse_db = 0.0;     // mean of the per-trial dB values
    double median_nmse_db = 0.0;
    double nmse_db_of_mean = 0.0;  // 10 log10 of the mean linear NMSE
    double mean_iterations = 0.0;
    double mean_runtime_ms = 0.0;
    double mean_target_iterations = 0.0;
};

/// Per (solver, snr) aggregates of the successful records.
std::vector<SummaryRow> summarize(const std::vector<ResultRecord>& records);

} // namespace lrsbe
