#pragma once

#include "lrsbe/types.hpp"

#include <cstdint>
#include <limits>

namespace lrsbe {

/// K pilot sequences of length N (columns of `pilots`).
///
/// Built from the N x N unitary DFT with cyclic reuse: user k transmits
/// sequence k mod N, so users k and k + N are fully contaminated.
struct PilotSet {
    CMat pilots; // N x K
    Index n_pilots = 0;
    Index k_users = 0;

    /// Sequence index assigned to user k.
    Index sequence_of(Index k) const { return k % n_pilots; }
};

PilotSet make_pilots(Index n_pilots, Index k_users, std::uint64_t rng_seed = 0);

/// y = (X (x) I_M) h without forming the Kronecker product.
/// h is the user-major stack [h_1; ...; h_K], y the pilot-major stack.
CVec forward(const PilotSet& p, const CVec& h);
/// A^H v = (X^H (x) I_M) v.
CVec adjoint(const PilotSet& p, const CVec& v);

/// Spectral norm squared of A, i.e. lambda_max(X^H X).
double step_length(const PilotSet& p);

constexpr double kNoiseless = std::numeric_limits<double>::infinity();

struct Measurement {
    CVec y;
    double sigma2 = 0.0;
    double snr_db = kNoiseless;
    std::uint64_t seed = 0;
};

/// Adds CN(0, sigma2) noise with sigma2 = mean|y_clean|^2 / 10^(snr_db/10).
/// snr_db = +inf leaves the data untouched with sigma2 = 0.
Measurement add_noise(const CVec& y_clean, double snr_db, std::uint64_t rng_seed);

} // namespace lrsbe
