#include "lrsbe/io.hpp"
#include "lrsbe/measurement.hpp"
#include "lrsbe/random.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace lrsbe;

TEST_CASE("pilot examples") {
    SUBCASE("N = K = 2 orthogonal") {
        const auto p = make_pilots(2, 2);
        CHECK(oracle::max_abs(p.pilots.adjoint() * p.pilots - CMat::Identity(2, 2)) < 1e-12);
    }
    SUBCASE("N = 1 full reuse") {
        const auto p = make_pilots(1, 3);
        const CMat g = p.pilots.adjoint() * p.pilots;
        CHECK(oracle::max_abs(g - CMat::Ones(3, 3)) < 1e-12);
    }
    SUBCASE("N = 5, K = 10 cyclic") {
        const auto p = make_pilots(5, 10);
        std::vector<int> uses(5, 0);
        for (Index k = 0; k < 10; ++k) ++uses[std::size_t(p.sequence_of(k))];
        for (int u : uses) CHECK(u == 2);
        const CMat g = p.pilots.adjoint() * p.pilots;
        for (Index i = 0; i < 10; ++i)
            for (Index j = 0; j < 10; ++j) {
                const double expect = (i % 5 == j % 5) ? 1.0 : 0.0;
                CHECK(std::abs(g(i, j) - expect) < 1e-12);
            }
    }
    CHECK_THROWS_AS(make_pilots(0, 3), DimensionError);
    CHECK_THROWS_AS(make_pilots(4, 3), ParameterError);
}

TEST_CASE("scalar pilot operator is the identity") {
    const auto p = make_pilots(1, 1);
    Rng rng(1);
    const CVec h = complex_gaussian_vector(rng, 6);
    CHECK(oracle::max_abs(forward(p, h) - h) < 1e-15);
    CHECK(oracle::max_abs(adjoint(p, h) - h) < 1e-15);
    CHECK(forward(p, CVec::Zero(6)).isZero());
    CHECK(adjoint(p, CVec::Zero(6)).isZero());
}

TEST_CASE("structured operator matches dense Kronecker product") {
    Rng rng(2024);
    const Index m = 4;
    const auto p = make_pilots(2, 3);
    const CMat a = oracle::dense_operator(p, m);
    const CVec h = complex_gaussian_vector(rng, m * 3);
    const CVec v = complex_gaussian_vector(rng, m * 2);
    CHECK(oracle::max_abs(forward(p, h) - a * h) < 1e-12);
    CHECK(oracle::max_abs(adjoint(p, v) - a.adjoint() * v) < 1e-12);
}

TEST_CASE("adjoint identity on random pairs") {
    Rng rng(77);
    for (int i = 0; i < 100; ++i) {
        const Index m = 1 + Index(rng() % 8), k = 1 + Index(rng() % 6);
        const Index n = 1 + Index(rng() % std::min<Index>(k, 4));
        const auto p = oracle::random_pilots(rng, n, k);
        const CVec h = complex_gaussian_vector(rng, m * k);
        const CVec v = complex_gaussian_vector(rng, m * n);
        const cplx lhs = forward(p, h).dot(v);
        const cplx rhs = h.dot(adjoint(p, v));
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("operator length checks") {
    const auto p = make_pilots(2, 4);
    CHECK_THROWS_AS(forward(p, CVec::Zero(7)), DimensionError);
    CHECK_THROWS_AS(adjoint(p, CVec::Zero(7)), DimensionError);
}

TEST_CASE("step length") {
    CHECK(std::abs(step_length(make_pilots(4, 4)) - 1.0) < 1e-12);
    for (Index c : {1, 3, 7}) CHECK(std::abs(step_length(make_pilots(1, c)) - double(c)) < 1e-10);

    const auto p = make_pilots(5, 10);
    const CMat a = oracle::dense_operator(p, 4);
    Eigen::SelfAdjointEigenSolver<CMat> eig(a.adjoint() * a);
    CHECK(std::abs(step_length(p) - eig.eigenvalues().maxCoeff()) < 1e-10);
    CHECK(step_length(p) >= 2.0 - 1e-12); // reuse count x unit norm
}

TEST_CASE("noise injection") {
    Rng rng(5);
    const CVec y = complex_gaussian_vector(rng, 64);
    const double power = y.squaredNorm() / 64.0;

    const auto clean = add_noise(y, kNoiseless, 1);
    CHECK(clean.sigma2 == 0.0);
    CHECK(clean.y == y);

    const auto zero_db = add_noise(y, 0.0, 1);
    CHECK(std::abs(zero_db.sigma2 - power) < 1e-12 * power);

    CHECK_THROWS_AS(add_noise(CVec::Zero(8), 10.0, 1), DegenerateInputError);

    // Re-seeding reproduces the draw, a new seed changes it.
    CHECK(add_noise(y, 3.0, 9).y == add_noise(y, 3.0, 9).y);
    CHECK(add_noise(y, 3.0, 9).y != add_noise(y, 3.0, 10).y);
}

TEST_CASE("noise sample statistics") {
    const CVec y = CVec::Constant(100000, cplx(1.0, 0.0));
    const auto meas = add_noise(y, 10.0, 123);
    CHECK(std::abs(meas.sigma2 - 0.1) < 1e-12);
    const CVec n = meas.y - y;
    const double var = n.squaredNorm() / double(n.size());
    CHECK(std::abs(var - meas.sigma2) < 0.02 * meas.sigma2);
    // circular symmetry: real and imaginary parts share the power
    const double re = n.real().squaredNorm() / double(n.size());
    CHECK(std::abs(re - 0.5 * meas.sigma2) < 0.02 * meas.sigma2);
}

TEST_CASE("measurement json round trip") {
    Rng rng(8);
    const ChannelDims dims{2, 2, 3};
    const CVec y = complex_gaussian_vector(rng, 8);
    const auto meas = add_noise(y, 5.0, 4);
    ChannelDims d;
    Index n = 0;
    const auto back = measurement_from_json(json::parse(measurement_to_json(meas, dims, 2).dump()), &d, &n);
    CHECK(d == dims);
    CHECK(n == 2);
    CHECK(back.y == meas.y);
    CHECK(back.sigma2 == meas.sigma2);
    CHECK(back.snr_db == 5.0);

    const auto inf = add_noise(y, kNoiseless, 4);
    const json doc = measurement_to_json(inf, dims, 2);
    CHECK(doc["snr_db"] == "inf");
    CHECK(std::isinf(measurement_from_json(doc).snr_db));
}
