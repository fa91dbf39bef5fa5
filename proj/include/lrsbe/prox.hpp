#pragma once

#include "lrsbe/types.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace lrsbe {

/// Complex soft threshold: (z/|z|) max(0, |z| - tau), with 0 -> 0.
template <typename Real>
std::complex<Real> soft_threshold(const std::complex<Real>& z, Real tau) {
    const Real mag = std::abs(z);
    if (mag <= tau || mag == Real(0)) return {Real(0), Real(0)};
    return z * ((mag - tau) / mag);
}

template <typename Derived>
typename Derived::PlainObject soft_threshold(const Eigen::MatrixBase<Derived>& x,
                                             typename Derived::RealScalar tau) {
    using Real = typename Derived::RealScalar;
    return x.unaryExpr([tau](const auto& z) { return soft_threshold<Real>(z, tau); });
}

template <typename Real>
struct SvtResult {
    ComplexMatrix<Real> matrix;
    Eigen::Matrix<Real, Eigen::Dynamic, 1> singular_values; // after shrinkage
    Index rank = 0;
    Real nuclear_norm = 0; // of the output
};

/// Singular-value soft threshold of a matrix: sigma -> max(sigma - tau, 0).
template <typename Derived>
SvtResult<typename Derived::RealScalar> singular_value_threshold(const Eigen::MatrixBase<Derived>& x,
                                                                 typename Derived::RealScalar tau) {
    using Real = typename Derived::RealScalar;
    using Mat = ComplexMatrix<Real>;
    SvtResult<Real> out;
    const Mat xm = x.template cast<std::complex<Real>>();
    if (xm.size() == 0) {
        out.matrix = xm;
        return out;
    }
    Eigen::JacobiSVD<Mat> svd(xm, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.singular_values = (svd.singularValues().array() - tau).cwiseMax(Real(0)).matrix();
    out.rank = (out.singular_values.array() > Real(0)).count();
    out.nuclear_norm = out.singular_values.sum();
    const Index r = out.rank;
    // Singular values come sorted descending, so the survivors are a prefix.
    out.matrix = svd.matrixU().leftCols(r) * out.singular_values.head(r).asDiagonal() *
                 svd.matrixV().leftCols(r).adjoint();
    if (r == 0) out.matrix.setZero(xm.rows(), xm.cols());
    return out;
}

} // namespace lrsbe
