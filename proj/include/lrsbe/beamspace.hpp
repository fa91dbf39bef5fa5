#pragma once

#include "lrsbe/types.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>

namespace lrsbe {

/// Unitary DFT matrix, entry (p, q) = exp(-j 2 pi p q / m) / sqrt(m).
template <typename Real = double>
ComplexMatrix<Real> dft_matrix(Index m) {
    if (m <= 0) throw DimensionError("dft_matrix: size must be positive");
    ComplexMatrix<Real> u(m, m);
    const Real scale = Real(1) / std::sqrt(Real(m));
    for (Index q = 0; q < m; ++q)
        for (Index p = 0; p < m; ++p) {
            // Reduce p*q mod m first so the phase stays exact for large m.
            const auto pq = static_cast<Real>((p * q) % m);
            const Real phase = -Real(2) * std::numbers::pi_v<Real> * pq / Real(m);
            u(p, q) = std::polar(scale, phase);
        }
    return u;
}

/// Horizontal and vertical beamforming matrices.
struct BeamTransform {
    CMat u_h;
    CMat u_v;

    static BeamTransform dft(Index m_h, Index m_v) { return {dft_matrix(m_h), dft_matrix(m_v)}; }
};

/// Space domain -> beam domain: U_h^H X U_v.
CMat to_beam(const CMat& h_space, const BeamTransform& t);
/// Beam domain -> space domain: U_h X U_v^H.
CMat from_beam(const CMat& h_beam, const BeamTransform& t);

struct GeneratorParams {
    Index rank_r = 2;
    Index sparse_blocks = 2;
    Index block_len_gen = 8;
    double power_split = 0.5;
    double energy_concentration = 0.9;
};

void validate(const GeneratorParams& params, const ChannelDims& dims);

/// Ground-truth beam-domain channel for all users.
///
/// Column k of `lowrank` / `sparse` is vec(H_k^L) / vec(H_k^S) (column-major
/// vectorization of the M_h x M_v beam matrix). The collective channel is the
/// user-major stack of the columns.
struct ChannelRealization {
    ChannelDims dims;
    std::uint64_t seed = 0;
    CMat lowrank;
    CMat sparse;

    CMat beam() const { return lowrank + sparse; }
    CVec collective() const { return beam().reshaped(); }
    CVec collective_lowrank() const { return lowrank.reshaped(); }
    CVec collective_sparse() const { return sparse.reshaped(); }
};

/// Width of the beam-column band carrying the low-rank component.
Index lowrank_band_width(const GeneratorParams& params, const ChannelDims& dims);

/// Structural surrogate of a spatially non-stationary beam-domain channel:
/// a rank-r component confined to a contiguous band of beam columns whose
/// column space is shared by all users, plus a block-sparse component with
/// i.i.d. CN(0,1) entries on randomly chosen aligned blocks. Each user is
/// normalized to total energy M, split `power_split` : `1 - power_split`.
ChannelRealization synthesize_channel(const GeneratorParams& params, const ChannelDims& dims,
                                      std::uint64_t rng_seed);

} // namespace lrsbe
