#include "lrsbe/config.hpp"

#include <set>

namespace lrsbe {

namespace {

void check_keys(const json& doc, const std::set<std::string>& allowed, const std::string& where) {
    if (!doc.is_object()) throw ParameterError(where + ": expected an object");
    for (const auto& [key, _] : doc.items())
        if (!allowed.count(key)) throw ParameterError(where + ": unknown key '" + key + "'");
}

template <typename T>
void read(const json& doc, const char* key, T& dst) {
    if (!doc.contains(key)) return;
    try {
        dst = doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParameterError(std::string("'") + key + "': " + e.what());
    }
}

double parse_snr(const json& j) {
    if (j.is_string() && j.get<std::string>() == "inf") return kNoiseless;
    if (!j.is_number()) throw ParameterError("snr_grid entries must be numbers or \"inf\"");
    return j.get<double>();
}

} // namespace

GeneratorParams parse_generator(const json& doc) {
    check_keys(doc, {"rank_r", "sparse_blocks", "block_len_gen", "power_split", "energy_concentration"},
               "generator");
    GeneratorParams g;
    read(doc, "rank_r", g.rank_r);
    read(doc, "sparse_blocks", g.sparse_blocks);
    read(doc, "block_len_gen", g.block_len_gen);
    read(doc, "power_split", g.power_split);
    read(doc, "energy_concentration", g.energy_concentration);
    return g;
}

SolverConfig parse_solver(const json& entry) {
    SolverConfig s;
    if (entry.is_string()) {
        s.name = entry.get<std::string>();
        if (!is_solver_name(s.name)) throw ParameterError("unknown solver '" + s.name + "'");
        return s;
    }
    if (!entry.is_object() || !entry.contains("name"))
        throw ParameterError("solver entries must be a name or an object with a 'name'");
    s.name = entry["name"].get<std::string>();
    const std::string where = "solver '" + s.name + "'";
    if (s.name == "lrsbe" || s.name == "bsbe") {
        check_keys(entry, {"name", "q_max", "tol", "block_len", "alpha0", "beta0", "c_reg", "prune_threshold",
                           "trace_sigma_l_mode", "svt_mode"},
                   where);
        auto& o = s.lrsbe;
        read(entry, "q_max", o.q_max);
        read(entry, "tol", o.tol);
        read(entry, "block_len", o.block_len);
        read(entry, "alpha0", o.alpha0);
        read(entry, "beta0", o.beta0);
        read(entry, "c_reg", o.c_reg);
        read(entry, "prune_threshold", o.prune_threshold);
        if (entry.contains("trace_sigma_l_mode")) {
            const auto m = entry["trace_sigma_l_mode"].get<std::string>();
            if (m == "zero")
                o.trace_sigma_l_mode = TraceSigmaMode::Zero;
            else if (m == "noise_over_step")
                o.trace_sigma_l_mode = TraceSigmaMode::NoiseOverStep;
            else
                throw ParameterError(where + ": trace_sigma_l_mode must be 'zero' or 'noise_over_step'");
        }
        if (entry.contains("svt_mode")) {
            const auto m = entry["svt_mode"].get<std::string>();
            if (m == "collective")
                o.svt_mode = SvtMode::Collective;
            else if (m == "per_user")
                o.svt_mode = SvtMode::PerUser;
            else
                throw ParameterError(where + ": svt_mode must be 'collective' or 'per_user'");
        }
    } else if (s.name == "sbe") {
        check_keys(entry, {"name", "q_max", "tol", "prune_threshold"}, where);
        read(entry, "q_max", s.sbe.q_max);
        read(entry, "tol", s.sbe.tol);
        read(entry, "prune_threshold", s.sbe.prune_threshold);
    } else if (s.name == "ista") {
        check_keys(entry, {"name", "q_max", "tol", "lambda_scale", "lambda"}, where);
        read(entry, "q_max", s.ista.q_max);
        read(entry, "tol", s.ista.tol);
        read(entry, "lambda_scale", s.ista.lambda_scale);
        read(entry, "lambda", s.ista.lambda);
    } else if (s.name == "omp") {
        check_keys(entry, {"name", "max_atoms", "residual_scale"}, where);
        read(entry, "max_atoms", s.omp.max_atoms);
        read(entry, "residual_scale", s.omp.residual_scale);
    } else {
        throw ParameterError("unknown solver '" + s.name + "'");
    }
    return s;
}

CliConfig parse_config(const json& doc) {
    check_keys(doc, {"dims", "n_pilots", "snr_grid", "n_trials", "base_seed", "generator", "solvers",
                     "nmse_target", "jobs", "deterministic", "verbosity", "output"},
               "config");
    CliConfig cfg;
    auto& e = cfg.experiment;
    if (doc.contains("dims")) {
        const auto& d = doc["dims"];
        if (!d.is_array() || d.size() != 3) throw ParameterError("dims must be [M_h, M_v, K]");
        e.dims = {d[0].get<Index>(), d[1].get<Index>(), d[2].get<Index>()};
    }
    read(doc, "n_pilots", e.n_pilots);
    if (doc.contains("snr_grid")) {
        const auto& g = doc["snr_grid"];
        if (!g.is_array()) throw ParameterError("snr_grid must be an array");
        e.snr_grid.clear();
        for (const auto& v : g) e.snr_grid.push_back(parse_snr(v));
    }
    read(doc, "n_trials", e.n_trials);
    read(doc, "base_seed", e.base_seed);
    if (doc.contains("generator")) e.generator = parse_generator(doc["generator"]);
    if (doc.contains("solvers")) {
        const auto& s = doc["solvers"];
        if (!s.is_array()) throw ParameterError("solvers must be an array");
        for (const auto& entry : s) e.solvers.push_back(parse_solver(entry));
    } else {
        for (const auto& n : solver_names()) e.solvers.push_back(parse_solver(json(n)));
    }
    if (doc.contains("nmse_target") && !doc["nmse_target"].is_null()) e.nmse_target = doc["nmse_target"].get<double>();
    read(doc, "jobs", e.jobs);
    read(doc, "deterministic", cfg.deterministic);
    read(doc, "verbosity", cfg.verbosity);
    if (doc.contains("output")) {
        const auto& o = doc["output"];
        check_keys(o, {"csv", "summary", "channel", "trace"}, "output");
        read(o, "csv", cfg.out_csv);
        read(o, "summary", cfg.summary);
        read(o, "channel", cfg.channel);
        read(o, "trace", cfg.trace);
    }
    for (auto& s : e.solvers) s.lrsbe.deterministic = cfg.deterministic;
    validate(e);
    return cfg;
}

} // namespace lrsbe
