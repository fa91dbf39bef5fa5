#include "lrsbe/prox.hpp"
#include "lrsbe/solvers.hpp"

#include <cmath>

namespace lrsbe {

CVec lowrank_step(const PilotSet& p, const CVec& r_l, const CVec& h_l, double beta, double t_step) {
    if (!(t_step > 0.0)) throw ParameterError("lowrank_step: step length T must be positive");
    if (!(beta >= 0.0)) throw ParameterError("lowrank_step: beta must be >= 0");
    const CVec grad = adjoint(p, r_l - forward(p, h_l));
    const CVec h_prime = h_l + grad / t_step;
    return soft_threshold(h_prime, beta / (2.0 * t_step));
}

SvtStep svt_step(const CVec& h_l, double beta, const ChannelDims& dims, SvtMode mode) {
    check_dims(dims);
    if (h_l.size() != dims.collective())
        throw DimensionError("svt_step: length " + std::to_string(h_l.size()) + ", expected M K = " +
                             std::to_string(dims.collective()));
    const double tau = std::sqrt(std::max(beta, 0.0)) / 2.0;
    SvtStep out;
    out.h.resize(h_l.size());
    if (mode == SvtMode::Collective) {
        const auto res = singular_value_threshold(h_l.reshaped(dims.m_h, dims.m_v * dims.k_users), tau);
        out.h = res.matrix.reshaped();
        out.rank = res.rank;
        out.nuclear_norm = res.nuclear_norm;
        return out;
    }
    const Index m = dims.antennas();
    for (Index k = 0; k < dims.k_users; ++k) {
        const auto res = singular_value_threshold(h_l.segment(k * m, m).reshaped(dims.m_h, dims.m_v), tau);
        out.h.segment(k * m, m) = res.matrix.reshaped();
        out.rank = std::max(out.rank, res.rank);
        out.nuclear_norm += res.nuclear_norm;
    }
    return out;
}

} // namespace lrsbe
