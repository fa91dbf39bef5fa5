#pragma once

#include "lrsbe/eval.hpp"
#include "lrsbe/io.hpp"

#include <string>

namespace lrsbe {

/// Experiment description plus output locations, read from a JSON file.
///
/// Top-level keys: dims, n_pilots, snr_grid, n_trials, base_seed, generator,
/// solvers, nmse_target, jobs, deterministic, verbosity, output. Unknown keys
/// are rejected at every level so a misspelt hyperparameter cannot silently
/// fall back to its default.
struct CliConfig {
    ExperimentConfig experiment;
    std::string out_csv;
    std::string summary;
    std::string channel;
    std::string trace;
    int verbosity = 0;
    bool deterministic = true;
};

CliConfig parse_config(const json& doc);
SolverConfig parse_solver(const json& entry);
GeneratorParams parse_generator(const json& doc);

} // namespace lrsbe
