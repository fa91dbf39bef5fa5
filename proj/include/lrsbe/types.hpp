#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace lrsbe {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;
using Index = Eigen::Index;

template <typename Real>
using ComplexMatrix = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using ComplexVector = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;

/// Array geometry: M_h x M_v planar array, K single-antenna users.
struct ChannelDims {
    Index m_h = 0;
    Index m_v = 0;
    Index k_users = 0;

    Index antennas() const { return m_h * m_v; }
    Index collective() const { return antennas() * k_users; }
    bool operator==(const ChannelDims&) const = default;
};

// Error taxonomy. Everything derives from std::runtime_error so callers that
// do not care about the category can catch a single type.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParameterError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void check_dims(const ChannelDims& d) {
    if (d.m_h <= 0 || d.m_v <= 0 || d.k_users <= 0)
        throw DimensionError("channel dimensions must be positive");
}

} // namespace lrsbe
