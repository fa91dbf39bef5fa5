#include "lrsbe/solvers.hpp"

#include <algorithm>

namespace lrsbe {

const std::vector<std::string>& solver_names() {
    static const std::vector<std::string> names{"omp", "ista", "sbe", "bsbe", "lrsbe"};
    return names;
}

bool is_solver_name(std::string_view name) {
    const auto& n = solver_names();
    return std::find(n.begin(), n.end(), name) != n.end();
}

int SolverConfig::q_max(const ChannelDims& dims, Index n_pilots) const {
    if (name == "omp") {
        const Index cap = std::min(dims.antennas() * n_pilots, dims.collective());
        return int(omp.max_atoms > 0 ? std::min(omp.max_atoms, cap) : cap);
    }
    if (name == "ista") return ista.q_max;
    if (name == "sbe") return sbe.q_max;
    return lrsbe.q_max;
}

EstimateResult run_estimator(const SolverConfig& cfg, const Measurement& y, const PilotSet& p,
                             const ChannelDims& dims, const IterationObserver& obs) {
    if (cfg.name == "lrsbe") return lrsbe_estimate(y, p, dims, cfg.lrsbe, obs);
    if (cfg.name == "bsbe") return bsbe_estimate(y, p, dims, cfg.lrsbe, obs);
    if (cfg.name == "sbe") return sbe_estimate(y, p, dims, cfg.sbe, obs);
    if (cfg.name == "ista") return ista_estimate(y, p, dims, cfg.ista, obs);
    if (cfg.name == "omp") return omp_estimate(y, p, dims, cfg.omp, obs);
    throw ParameterError("unknown solver '" + cfg.name + "'");
}

} // namespace lrsbe
