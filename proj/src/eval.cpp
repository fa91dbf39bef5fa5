#include "lrsbe/eval.hpp"

#include "lrsbe/random.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <limits>
#include <map>
#include <thread>

namespace lrsbe {

Nmse nmse(const CVec& h_true, const CVec& h_hat, Index k_users) {
    if (k_users <= 0 || h_true.size() % k_users != 0)
        throw DimensionError("nmse: length is not a multiple of K");
    if (h_hat.size() != h_true.size()) throw DimensionError("nmse: estimate length differs from truth");
    const Index m = h_true.size() / k_users;
    double acc = 0.0;
    for (Index k = 0; k < k_users; ++k) {
        const double ref = h_true.segment(k * m, m).squaredNorm();
        if (!(ref > 0.0))
            throw DegenerateInputError("nmse: user " + std::to_string(k) + " has a zero channel");
        acc += (h_true.segment(k * m, m) - h_hat.segment(k * m, m)).squaredNorm() / ref;
    }
    Nmse out;
    out.linear = acc / double(k_users);
    out.db = out.linear > 0.0 ? to_db(out.linear) : -std::numeric_limits<double>::infinity();
    return out;
}

std::vector<EcdfPoint> ecdf(std::vector<double> values) {
    if (values.empty()) throw ParameterError("ecdf: empty sample");
    std::sort(values.begin(), values.end());
    const double n = double(values.size());
    std::vector<EcdfPoint> out;
    out.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        // Ties collapse onto the last occurrence so F(v) = #{x <= v} / n.
        if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
        out.push_back({values[i], double(i + 1) / n});
    }
    return out;
}

double ecdf_quantile(const std::vector<EcdfPoint>& cdf, double prob) {
    if (cdf.empty()) throw ParameterError("ecdf_quantile: empty CDF");
    for (const auto& pt : cdf)
        if (pt.probability >= prob) return pt.value;
    return cdf.back().value;
}

void validate(const ExperimentConfig& cfg) {
    validate(cfg.generator, cfg.dims);
    if (cfg.n_pilots < 1) throw DimensionError("n_pilots must be >= 1");
    if (cfg.n_pilots > cfg.dims.k_users) throw ParameterError("n_pilots must not exceed K");
    if (cfg.snr_grid.empty()) throw ParameterError("snr_grid must be non-empty");
    for (double s : cfg.snr_grid)
        if (std::isnan(s) || (std::isinf(s) && s < 0)) throw ParameterError("snr_grid entries must be finite or +inf");
    if (cfg.n_trials < 1) throw ParameterError("n_trials must be >= 1");
    if (cfg.solvers.empty()) throw ParameterError("at least one solver is required");
    for (const auto& s : cfg.solvers)
        if (!is_solver_name(s.name)) throw ParameterError("unknown solver '" + s.name + "'");
    if (cfg.nmse_target && !(*cfg.nmse_target > 0.0 && *cfg.nmse_target <= 1.0))
        throw ParameterError("nmse_target must lie in (0, 1]");
}

std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t snr_index, int trial) {
    return derive_seed({base_seed, std::uint64_t(snr_index), std::uint64_t(trial)});
}

TrialData make_trial(const ExperimentConfig& cfg, double snr_db, std::uint64_t seed) {
    TrialData d;
    d.channel = synthesize_channel(cfg.generator, cfg.dims, derive_seed({seed, 1}));
    d.pilots = make_pilots(cfg.n_pilots, cfg.dims.k_users, derive_seed({seed, 2}));
    const CVec clean = forward(d.pilots, d.channel.collective());
    d.measurement = add_noise(clean, snr_db, derive_seed({seed, 3}));
    return d;
}

namespace {

ResultRecord run_one(const ExperimentConfig& cfg, const SolverConfig& solver, const TrialData& data,
                     double snr_db, int trial, std::uint64_t seed) {
    ResultRecord rec;
    rec.solver = solver.name;
    rec.snr_db = snr_db;
    rec.trial = trial;
    rec.seed = seed;
    const CVec truth = data.channel.collective();
    const int cap = solver.q_max(cfg.dims, cfg.n_pilots);
    try {
        IterationObserver obs;
        int first_hit = 0;
        double hit_ms = 0.0;
        const auto t0 = std::chrono::steady_clock::now();
        if (cfg.nmse_target) {
            obs = [&, target = *cfg.nmse_target](int it, const CVec& h) {
                if (first_hit == 0 && nmse(truth, h, cfg.dims.k_users).linear <= target) {
                    first_hit = it;
                    hit_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
                }
            };
        }
        const EstimateResult est = run_estimator(solver, data.measurement, data.pilots, cfg.dims, obs);
        const Nmse e = nmse(truth, est.h_hat, cfg.dims.k_users);
        rec.nmse_linear = e.linear;
        rec.nmse_db = e.db;
        rec.iterations = est.iterations;
        rec.runtime_ms = est.runtime_ms;
        rec.converged = est.converged;
        if (cfg.nmse_target) {
            rec.target_iteration = first_hit > 0 ? first_hit : cap;
            rec.target_runtime_ms = first_hit > 0 ? hit_ms : est.runtime_ms;
        }
    } catch (const std::exception& ex) {
        rec.failed = true;
        rec.error = ex.what();
        rec.nmse_db = std::numeric_limits<double>::quiet_NaN();
        rec.nmse_linear = std::numeric_limits<double>::quiet_NaN();
        rec.target_iteration = cap;
    }
    return rec;
}

} // namespace

std::vector<ResultRecord> run_sweep(const ExperimentConfig& cfg) {
    validate(cfg);
    const std::size_t n_snr = cfg.snr_grid.size();
    const std::size_t n_trials = std::size_t(cfg.n_trials);
    const std::size_t n_solvers = cfg.solvers.size();
    const std::size_t tasks = n_snr * n_trials;
    std::vector<ResultRecord> records(tasks * n_solvers);

    // Record slot (solver, snr, trial) is written by exactly one task, so the
    // output order is independent of scheduling.
    auto slot = [&](std::size_t s, std::size_t snr, std::size_t t) {
        return (s * n_snr + snr) * n_trials + t;
    };
    auto work = [&](std::size_t task) {
        const std::size_t snr_idx = task / n_trials;
        const int trial = int(task % n_trials);
        const double snr = cfg.snr_grid[snr_idx];
        const std::uint64_t seed = trial_seed(cfg.base_seed, snr_idx, trial);
        std::optional<TrialData> data;
        std::string gen_error;
        try {
            data = make_trial(cfg, snr, seed);
        } catch (const std::exception& ex) {
            gen_error = ex.what();
        }
        for (std::size_t s = 0; s < n_solvers; ++s) {
            ResultRecord rec;
            if (data) {
                rec = run_one(cfg, cfg.solvers[s], *data, snr, trial, seed);
            } else {
                rec.solver = cfg.solvers[s].name;
                rec.snr_db = snr;
                rec.trial = trial;
                rec.seed = seed;
                rec.failed = true;
                rec.error = gen_error;
                rec.nmse_db = rec.nmse_linear = std::numeric_limits<double>::quiet_NaN();
            }
            records[slot(s, snr_idx, std::size_t(trial))] = std::move(rec);
        }
    };

    unsigned workers = cfg.jobs > 0 ? unsigned(cfg.jobs) : std::max(1u, std::thread::hardware_concurrency());
    workers = unsigned(std::min<std::size_t>(workers, tasks));
    if (workers <= 1) {
        for (std::size_t t = 0; t < tasks; ++t) work(t);
        return records;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t t = next++; t < tasks; t = next++) work(t);
        });
    for (auto& th : pool) th.join();
    return records;
}

std::vector<TargetSummary> summarize_targets(const ExperimentConfig& cfg,
                                             const std::vector<ResultRecord>& records) {
    std::vector<TargetSummary> out;
    for (const auto& s : cfg.solvers) {
        TargetSummary ts;
        ts.solver = s.name;
        for (const auto& r : records) {
            if (r.solver != s.name) continue;
            ts.mean_iterations += r.target_iteration;
            ts.mean_runtime_ms += r.target_runtime_ms;
            ++ts.trials;
        }
        if (ts.trials > 0) {
            ts.mean_iterations /= ts.trials;
            ts.mean_runtime_ms /= ts.trials;
        }
        out.push_back(ts);
    }
    return out;
}

std::vector<TargetSummary> iterations_to_target(const ExperimentConfig& cfg, double nmse_target) {
    ExperimentConfig c = cfg;
    c.nmse_target = nmse_target;
    return summarize_targets(c, run_sweep(c));
}

std::vector<SummaryRow> summarize(const std::vector<ResultRecord>& records) {
    // Preserve first-appearance order of solvers and SNRs.
    std::vector<std::pair<std::string, double>> keys;
    std::map<std::pair<std::string, double>, std::vector<const ResultRecord*>> groups;
    for (const auto& r : records) {
        const auto key = std::make_pair(r.solver, r.snr_db);
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) keys.push_back(key);
        it->second.push_back(&r);
    }
    std::vector<SummaryRow> out;
    for (const auto& key : keys) {
        const auto& g = groups[key];
        SummaryRow row;
        row.solver = key.first;
        row.snr_db = key.second;
        std::vector<double> dbs;
        double lin = 0.0;
        for (const auto* r : g) {
            if (r->failed) {
                ++row.failed;
                continue;
            }
            ++row.trials;
            dbs.push_back(r->nmse_db);
            lin += r->nmse_linear;
            row.mean_iterations += r->iterations;
            row.mean_runtime_ms += r->runtime_ms;
            row.mean_target_iterations += r->target_iteration;
        }
        const double nan = std::numeric_limits<double>::quiet_NaN();
        if (row.trials == 0) {
            row.mean_nmse_db = row.median_nmse_db = row.nmse_db_of_mean = nan;
            row.mean_iterations = row.mean_runtime_ms = row.mean_target_iterations = nan;
        } else {
            const double n = double(row.trials);
            double sum = 0.0;
            for (double d : dbs) sum += d;
            row.mean_nmse_db = sum / n;
            std::sort(dbs.begin(), dbs.end());
            const std::size_t h = dbs.size() / 2;
            row.median_nmse_db = dbs.size() % 2 ? dbs[h] : 0.5 * (dbs[h - 1] + dbs[h]);
            row.nmse_db_of_mean = lin > 0.0 ? to_db(lin / n) : -std::numeric_limits<double>::infinity();
            row.mean_iterations /= n;
            row.mean_runtime_ms /= n;
            row.mean_target_iterations /= n;
        }
        out.push_back(row);
    }
    return out;
}

} // namespace lrsbe
