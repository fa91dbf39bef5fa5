// Command-line front end: generate | estimate | sweep.
//
// Exit codes: 0 success, 1 runtime failure, 2 validation or usage error.

#include "lrsbe/config.hpp"
#include "lrsbe/eval.hpp"
#include "lrsbe/io.hpp"
#include "lrsbe/random.hpp"

#include <CLI11.hpp>

#include <Eigen/SVD>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace lrsbe;

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Overrides {
    std::string config;
    std::string out;
    std::string summary;
    std::string channel;
    std::string trace;
    std::string solver;
    std::vector<double> snr;
    int trials = 0;
    long long seed = -1;
    int jobs = -1;
    bool deterministic = false;
};

CliConfig load(const Overrides& o) {
    if (o.config.empty()) throw UsageError("--config is required");
    CliConfig cfg = parse_config(read_json_file(o.config));
    auto& e = cfg.experiment;
    if (!o.snr.empty()) e.snr_grid = o.snr;
    if (o.trials > 0) e.n_trials = o.trials;
    if (o.seed >= 0) e.base_seed = std::uint64_t(o.seed);
    if (o.jobs >= 0) e.jobs = o.jobs;
    if (o.deterministic) cfg.deterministic = true;
    if (!o.solver.empty()) {
        if (!is_solver_name(o.solver)) {
            std::string names;
            for (const auto& n : solver_names()) names += (names.empty() ? "" : ", ") + n;
            throw UsageError("unknown solver '" + o.solver + "'; valid names: " + names);
        }
        // Keep per-solver options from the config when the solver is listed there.
        SolverConfig chosen = parse_solver(json(o.solver));
        for (const auto& s : e.solvers)
            if (s.name == o.solver) chosen = s;
        e.solvers = {chosen};
    }
    for (auto& s : e.solvers) s.lrsbe.deterministic = cfg.deterministic;
    validate(e);
    return cfg;
}

void ensure_writable(const std::string& path) {
    std::ofstream probe(path, std::ios::app);
    if (!probe) throw UsageError("output path '" + path + "' is not writable");
}

double top_share(const CMat& h, Index top) {
    Eigen::JacobiSVD<CMat> svd(h);
    const RVec s2 = svd.singularValues().array().square();
    const double total = s2.sum();
    return total > 0.0 ? s2.head(std::min(top, s2.size())).sum() / total : 0.0;
}

int cmd_generate(const Overrides& o) {
    const CliConfig cfg = load(o);
    const std::string out = !o.out.empty() ? o.out : cfg.channel;
    if (out.empty()) throw UsageError("generate: no output path (--out or output.channel)");
    ensure_writable(out);
    const auto& e = cfg.experiment;
    const ChannelRealization ch = synthesize_channel(e.generator, e.dims, e.base_seed);
    write_text_file(out, channel_to_json(ch).dump() + "\n");

    double lr_share = 0.0, full_share = 0.0;
    for (Index k = 0; k < e.dims.k_users; ++k) {
        lr_share += top_share(ch.lowrank.col(k).reshaped(e.dims.m_h, e.dims.m_v), 5);
        full_share += top_share(CMat(ch.beam().col(k).reshaped(e.dims.m_h, e.dims.m_v)), 5);
    }
    const double nnz = double((ch.sparse.array() != cplx(0.0)).count()) / double(ch.sparse.size());
    std::printf("wrote %s\n", out.c_str());
    std::printf("dims=%lldx%lldx%lld seed=%llu\n", (long long)e.dims.m_h, (long long)e.dims.m_v,
                (long long)e.dims.k_users, (unsigned long long)e.base_seed);
    std::printf("top5_energy_share_lowrank=%.6f\n", lr_share / double(e.dims.k_users));
    std::printf("top5_energy_share_channel=%.6f\n", full_share / double(e.dims.k_users));
    std::printf("sparse_nonzero_fraction=%.6f\n", nnz);
    return kOk;
}

int cmd_estimate(const Overrides& o) {
    const CliConfig cfg = load(o);
    const std::string path = !o.channel.empty() ? o.channel : cfg.channel;
    if (path.empty()) throw UsageError("estimate: no channel file (--channel or output.channel)");
    const std::string trace_path = !o.trace.empty() ? o.trace : cfg.trace;
    if (!trace_path.empty()) ensure_writable(trace_path);

    const ChannelRealization ch = channel_from_json(read_json_file(path));
    ExperimentConfig e = cfg.experiment;
    e.dims = ch.dims;
    if (e.n_pilots > e.dims.k_users) throw ParameterError("n_pilots exceeds K of the channel file");
    const SolverConfig& solver = e.solvers.front();
    const double snr = e.snr_grid.front();

    const PilotSet pilots = make_pilots(e.n_pilots, e.dims.k_users);
    const CVec truth = ch.collective();
    const Measurement meas = add_noise(forward(pilots, truth), snr, derive_seed({e.base_seed, 3}));
    const EstimateResult est = run_estimator(solver, meas, pilots, e.dims);
    const Nmse err = nmse(truth, est.h_hat, e.dims.k_users);

    std::printf("solver=%s snr_db=%s\n", solver.name.c_str(), format_double(snr).c_str());
    std::printf("nmse_db=%s\n", format_double(err.db).c_str());
    std::printf("iterations=%d\n", est.iterations);
    std::printf("converged=%s\n", est.converged ? "true" : "false");
    std::printf("runtime_ms=%.3f\n", est.runtime_ms);
    if (!trace_path.empty()) {
        std::ostringstream os;
        write_trace_csv(os, est.trace);
        write_text_file(trace_path, os.str());
    }
    return kOk;
}

int cmd_sweep(const Overrides& o) {
    const CliConfig cfg = load(o);
    const std::string out = !o.out.empty() ? o.out : cfg.out_csv;
    if (out.empty()) throw UsageError("sweep: no output path (--out or output.csv)");
    std::string summary = !o.summary.empty() ? o.summary : cfg.summary;
    if (summary.empty()) {
        const auto dot = out.rfind('.');
        summary = (dot == std::string::npos ? out : out.substr(0, dot)) + "_summary.json";
    }
    ensure_writable(out);
    ensure_writable(summary);

    const auto records = run_sweep(cfg.experiment);
    std::ostringstream csv;
    write_results_csv(csv, records);
    write_text_file(out, csv.str());
    std::vector<TargetSummary> targets;
    if (cfg.experiment.nmse_target) targets = summarize_targets(cfg.experiment, records);
    write_text_file(summary, summary_to_json(summarize(records), targets).dump(2) + "\n");

    std::size_t failed = 0;
    for (const auto& r : records) {
        if (!r.failed) continue;
        ++failed;
        if (cfg.verbosity > 0)
            std::fprintf(stderr, "failed: solver=%s snr=%g trial=%d: %s\n", r.solver.c_str(), r.snr_db, r.trial,
                         r.error.c_str());
    }
    std::printf("wrote %s (%zu records, %zu failed) and %s\n", out.c_str(), records.size(), failed,
                summary.c_str());
    return failed == records.size() ? kRuntime : kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint low-rank and sparse Bayesian beam-domain channel estimation"};
    app.require_subcommand(1);
    Overrides o;

    auto* gen = app.add_subcommand("generate", "synthesize a channel realization to JSON");
    gen->add_option("--config", o.config, "experiment JSON")->required();
    gen->add_option("--out", o.out, "channel JSON output");
    gen->add_option("--seed", o.seed, "override base_seed");

    auto* est = app.add_subcommand("estimate", "run one estimator on a channel file");
    est->add_option("--config", o.config, "experiment JSON")->required();
    est->add_option("--channel", o.channel, "channel JSON input");
    est->add_option("--solver", o.solver, "omp | ista | sbe | bsbe | lrsbe");
    est->add_option("--snr", o.snr, "SNR in dB (first value used)");
    est->add_option("--seed", o.seed, "override base_seed (noise)");
    est->add_option("--trace", o.trace, "per-iteration trace CSV output");
    est->add_flag("--deterministic", o.deterministic, "bitwise-reproducible execution");

    auto* sw = app.add_subcommand("sweep", "Monte-Carlo sweep over SNR, trials and solvers");
    sw->add_option("--config", o.config, "experiment JSON")->required();
    sw->add_option("--out", o.out, "results CSV output");
    sw->add_option("--summary", o.summary, "summary JSON output");
    sw->add_option("--solver", o.solver, "restrict to one solver");
    sw->add_option("--snr", o.snr, "override the SNR grid");
    sw->add_option("--trials", o.trials, "override n_trials");
    sw->add_option("--seed", o.seed, "override base_seed");
    sw->add_option("--jobs", o.jobs, "worker threads (0 = logical cores)");
    sw->add_flag("--deterministic", o.deterministic, "bitwise-reproducible execution");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*gen) return cmd_generate(o);
        if (*est) return cmd_estimate(o);
        if (*sw) return cmd_sweep(o);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    } catch (const ParameterError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kUsage;
    } catch (const DimensionError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kUsage;
    } catch (const json::exception& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRuntime;
    }
    return kUsage;
}
