#include "lrsbe/measurement.hpp"

#include "lrsbe/beamspace.hpp"
#include "lrsbe/random.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace lrsbe {

PilotSet make_pilots(Index n_pilots, Index k_users, std::uint64_t /*rng_seed*/) {
    if (n_pilots <= 0) throw DimensionError("make_pilots: N must be >= 1");
    if (k_users <= 0) throw DimensionError("make_pilots: K must be >= 1");
    if (n_pilots > k_users)
        throw ParameterError("make_pilots: N = " + std::to_string(n_pilots) + " exceeds K = " +
                             std::to_string(k_users));
    const CMat dft = dft_matrix(n_pilots);
    PilotSet p;
    p.n_pilots = n_pilots;
    p.k_users = k_users;
    p.pilots.resize(n_pilots, k_users);
    for (Index k = 0; k < k_users; ++k) p.pilots.col(k) = dft.col(k % n_pilots);
    return p;
}

CVec forward(const PilotSet& p, const CVec& h) {
    if (h.size() == 0 || h.size() % p.k_users != 0)
        throw DimensionError("forward: length " + std::to_string(h.size()) +
                             " is not a multiple of K = " + std::to_string(p.k_users));
    const Index m = h.size() / p.k_users;
    const auto hc = h.reshaped(m, p.k_users);
    CVec y(m * p.n_pilots);
    y.reshaped(m, p.n_pilots).noalias() = hc * p.pilots.transpose();
    return y;
}

CVec adjoint(const PilotSet& p, const CVec& v) {
    if (v.size() == 0 || v.size() % p.n_pilots != 0)
        throw DimensionError("adjoint: length " + std::to_string(v.size()) +
                             " is not a multiple of N = " + std::to_string(p.n_pilots));
    const Index m = v.size() / p.n_pilots;
    const auto vc = v.reshaped(m, p.n_pilots);
    CVec h(m * p.k_users);
    h.reshaped(m, p.k_users).noalias() = vc * p.pilots.conjugate();
    return h;
}

double step_length(const PilotSet& p) {
    const CMat gram = p.pilots.adjoint() * p.pilots;
    Eigen::SelfAdjointEigenSolver<CMat> es(gram, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

Measurement add_noise(const CVec& y_clean, double snr_db, std::uint64_t rng_seed) {
    Measurement out;
    out.snr_db = snr_db;
    out.seed = rng_seed;
    if (std::isinf(snr_db) && snr_db > 0) {
        out.y = y_clean;
        out.sigma2 = 0.0;
        return out;
    }
    if (std::isnan(snr_db)) throw ParameterError("add_noise: SNR is NaN");
    const double power = y_clean.size() ? y_clean.squaredNorm() / double(y_clean.size()) : 0.0;
    if (!(power > 0.0))
        throw DegenerateInputError("add_noise: SNR undefined for an all-zero signal");
    out.sigma2 = power / std::pow(10.0, snr_db / 10.0);
    Rng rng(rng_seed);
    out.y = y_clean + complex_gaussian_vector(rng, y_clean.size(), out.sigma2);
    return out;
}

} // namespace lrsbe
