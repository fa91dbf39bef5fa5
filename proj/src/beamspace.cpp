#include "lrsbe/beamspace.hpp"

#include "lrsbe/random.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace lrsbe {

namespace {

void check_transform(const CMat& x, const BeamTransform& t) {
    if (x.rows() != t.u_h.rows() || x.cols() != t.u_v.rows())
        throw DimensionError("beam transform: matrix is " + std::to_string(x.rows()) + "x" +
                             std::to_string(x.cols()) + ", transform expects " +
                             std::to_string(t.u_h.rows()) + "x" + std::to_string(t.u_v.rows()));
}

// n x r matrix with orthonormal columns, spanning a uniformly random subspace.
CMat random_orthonormal(Rng& rng, Index n, Index r) {
    const CMat g = complex_gaussian_matrix(rng, n, r);
    Eigen::HouseholderQR<CMat> qr(g);
    return qr.householderQ() * CMat::Identity(n, r);
}

} // namespace

CMat to_beam(const CMat& h_space, const BeamTransform& t) {
    check_transform(h_space, t);
    return t.u_h.adjoint() * h_space * t.u_v;
}

CMat from_beam(const CMat& h_beam, const BeamTransform& t) {
    check_transform(h_beam, t);
    return t.u_h * h_beam * t.u_v.adjoint();
}

void validate(const GeneratorParams& p, const ChannelDims& dims) {
    check_dims(dims);
    const Index m = dims.antennas();
    if (p.rank_r < 1) throw ParameterError("rank_r must be >= 1");
    if (p.rank_r > std::min(dims.m_h, dims.m_v))
        throw ParameterError("rank_r (" + std::to_string(p.rank_r) + ") exceeds min(M_h, M_v) = " +
                             std::to_string(std::min(dims.m_h, dims.m_v)));
    if (p.sparse_blocks < 1) throw ParameterError("sparse_blocks must be >= 1");
    if (p.block_len_gen < 1) throw ParameterError("block_len_gen must be >= 1");
    if (p.sparse_blocks * p.block_len_gen > m)
        throw ParameterError("sparse_blocks * block_len_gen exceeds M");
    if (!(p.power_split >= 0.0 && p.power_split <= 1.0))
        throw ParameterError("power_split must lie in [0, 1]");
    if (!(p.energy_concentration > 0.0 && p.energy_concentration <= 1.0))
        throw ParameterError("energy_concentration must lie in (0, 1]");
}

Index lowrank_band_width(const GeneratorParams& params, const ChannelDims& dims) {
    const Index quarter = (dims.m_v + 3) / 4;
    return std::min(dims.m_v, std::max(quarter, params.rank_r));
}

ChannelRealization synthesize_channel(const GeneratorParams& params, const ChannelDims& dims,
                                      std::uint64_t rng_seed) {
    validate(params, dims);
    Rng rng(rng_seed);

    const Index m = dims.antennas();
    const Index r = params.rank_r;
    const Index band = lowrank_band_width(params, dims);
    const Index slots = m / params.block_len_gen;

    ChannelRealization out;
    out.dims = dims;
    out.seed = rng_seed;
    out.lowrank = CMat::Zero(m, dims.k_users);
    out.sparse = CMat::Zero(m, dims.k_users);

    // Singular-value energy profile: geometric with ratio energy_concentration.
    RVec sv(r);
    for (Index i = 0; i < r; ++i) sv(i) = std::pow(params.energy_concentration, 0.5 * double(i));

    // Common scatterers near the array: all users share the column space.
    const CMat u_common = random_orthonormal(rng, dims.m_h, r);

    std::vector<Index> slot_ids(static_cast<std::size_t>(slots));
    for (Index k = 0; k < dims.k_users; ++k) {
        std::uniform_int_distribution<Index> start_dist(0, dims.m_v - band);
        const Index start = start_dist(rng);
        CMat v = CMat::Zero(dims.m_v, r);
        v.middleRows(start, band) = random_orthonormal(rng, band, r);
        CMat hl = u_common * sv.asDiagonal() * v.adjoint();

        CMat hs = CMat::Zero(dims.m_h, dims.m_v);
        auto hs_vec = hs.reshaped();
        std::iota(slot_ids.begin(), slot_ids.end(), Index{0});
        for (Index b = 0; b < params.sparse_blocks; ++b) {
            std::uniform_int_distribution<Index> pick(b, slots - 1);
            std::swap(slot_ids[static_cast<std::size_t>(b)],
                      slot_ids[static_cast<std::size_t>(pick(rng))]);
            const Index off = slot_ids[static_cast<std::size_t>(b)] * params.block_len_gen;
            for (Index l = 0; l < params.block_len_gen; ++l) hs_vec(off + l) = complex_gaussian(rng);
        }

        const double target_l = params.power_split * double(m);
        const double target_s = (1.0 - params.power_split) * double(m);
        const double el = hl.squaredNorm();
        const double es = hs.squaredNorm();
        hl *= (target_l > 0.0 && el > 0.0) ? std::sqrt(target_l / el) : 0.0;
        hs *= (target_s > 0.0 && es > 0.0) ? std::sqrt(target_s / es) : 0.0;

        out.lowrank.col(k) = hl.reshaped();
        out.sparse.col(k) = hs.reshaped();
    }
    return out;
}

} // namespace lrsbe
