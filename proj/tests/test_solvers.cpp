#include "lrsbe/beamspace.hpp"
#include "lrsbe/eval.hpp"
#include "lrsbe/prox.hpp"
#include "lrsbe/random.hpp"
#include "lrsbe/solvers.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace lrsbe;

namespace {

SolverState random_state(Rng& rng, Index mk, Index l, bool with_pruned) {
    SolverState st;
    const Index g = mk / l;
    st.gamma = RVec(g);
    std::uniform_real_distribution<double> u(0.2, 2.0);
    for (Index b = 0; b < g; ++b) st.gamma(b) = u(rng);
    if (with_pruned && g > 1) st.gamma(g / 2) = 0.0;
    const CMat z = complex_gaussian_matrix(rng, l, l);
    st.corr_c = z * z.adjoint() + 0.5 * CMat::Identity(l, l);
    st.corr_c *= double(l) / st.corr_c.trace().real();
    st.h_s = CVec::Zero(mk);
    st.h_l = CVec::Zero(mk);
    return st;
}

void check_e_step(Rng& rng, Index m, Index k, Index n, Index l, bool with_pruned) {
    const auto p = make_pilots(n, k);
    const SolverState st = random_state(rng, m * k, l, with_pruned);
    const CVec r = complex_gaussian_vector(rng, m * n);
    const double sigma2 = 0.3;
    const auto post = sbl_e_step(p, r, st, sigma2);
    const auto ref = oracle::dense_e_step(oracle::dense_operator(p, m), oracle::block_gamma(st.gamma, st.corr_c), r,
                                          sigma2);
    CHECK(oracle::max_abs(post.mu - ref.mu) < 1e-10);
    for (Index b = 0; b < st.gamma.size(); ++b)
        CHECK(oracle::max_abs(post.sigma_blocks.middleCols(b * l, l) - ref.sigma.block(b * l, b * l, l, l)) < 1e-10);
}

Measurement noiseless(const CVec& y) {
    Measurement m;
    m.y = y;
    return m;
}

} // namespace

// ---------------------------------------------------------------------------
// proximal operators

TEST_CASE("complex soft threshold examples") {
    CHECK(soft_threshold(cplx(3.0), 1.0) == cplx(2.0));
    CHECK(soft_threshold(std::polar(0.5, 1.1), 1.0) == cplx(0.0));
    CHECK(soft_threshold(cplx(0.0), 0.0) == cplx(0.0));
    const cplx z = std::polar(2.0, -2.0);
    const cplx out = soft_threshold(z, 0.5);
    CHECK(std::abs(std::abs(out) - 1.5) < 1e-15);
    CHECK(std::abs(std::arg(out) - std::arg(z)) < 1e-15);
}

TEST_CASE("soft threshold matches oracle and contracts") {
    Rng rng(17);
    for (int i = 0; i < 100; ++i) {
        const CVec x = complex_gaussian_vector(rng, 12, 4.0);
        const double tau = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
        const CVec out = soft_threshold(x, tau);
        for (Index j = 0; j < x.size(); ++j) {
            CHECK(std::abs(out(j) - oracle::soft(x(j), tau)) < 1e-10);
            CHECK(std::abs(out(j)) <= std::abs(x(j)));
            if (std::abs(x(j)) > tau) CHECK(std::abs(std::abs(out(j)) - (std::abs(x(j)) - tau)) < 1e-12);
        }
    }
}

TEST_CASE("svt examples") {
    const ChannelDims dims{2, 3, 1};
    CHECK(svt_step(CVec::Zero(6), 1.0, dims).h.isZero());

    Rng rng(4);
    const CVec u = complex_gaussian_vector(rng, 3).normalized();
    const CVec v = complex_gaussian_vector(rng, 4).normalized();
    const CMat x = 5.0 * u * v.adjoint();
    const auto res = singular_value_threshold(x, std::sqrt(4.0) / 2.0);
    CHECK(res.rank == 1);
    CHECK(std::abs(res.singular_values(0) - 4.0) < 1e-12);
    CHECK(oracle::max_abs(res.matrix - 4.0 * u * v.adjoint()) < 1e-12);
}

TEST_CASE("svt matches dense oracle") {
    Rng rng(99);
    for (int i = 0; i < 100; ++i) {
        const CMat x = complex_gaussian_matrix(rng, 4, 6);
        const double beta = i == 0 ? 1.0 : std::uniform_real_distribution<double>(0.0, 9.0)(rng);
        const ChannelDims dims{4, 3, 2};
        const auto res = svt_step(x.reshaped(), beta, dims);
        const CMat ref = oracle::svt(x, std::sqrt(beta) / 2.0);
        CHECK(oracle::max_abs(res.h.reshaped(4, 6) - ref) < 1e-10);

        Eigen::JacobiSVD<CMat> in(x), out(CMat(res.h.reshaped(4, 6)));
        for (Index j = 0; j < in.singularValues().size(); ++j)
            CHECK(out.singularValues()(j) <= in.singularValues()(j) + 1e-12);
        CHECK(res.rank <= 4);
    }
}

TEST_CASE("per-user svt thresholds each user separately") {
    Rng rng(5);
    const ChannelDims dims{3, 2, 2};
    const CVec h = complex_gaussian_vector(rng, 12);
    const auto res = svt_step(h, 1.0, dims, SvtMode::PerUser);
    for (Index k = 0; k < 2; ++k) {
        const CMat ref = oracle::svt(h.segment(k * 6, 6).reshaped(3, 2), 0.5);
        CHECK(oracle::max_abs(res.h.segment(k * 6, 6).reshaped(3, 2) - ref) < 1e-10);
    }
}

TEST_CASE("svt rejects wrong length") {
    CHECK_THROWS_AS(svt_step(CVec::Zero(5), 1.0, ChannelDims{2, 2, 1}), DimensionError);
}

// ---------------------------------------------------------------------------
// E-step

TEST_CASE("e-step scalar examples") {
    const auto p = make_pilots(1, 1);
    SolverState st;
    st.gamma = RVec::Ones(3);
    st.corr_c = CMat::Identity(1, 1);
    const CVec r = CVec::LinSpaced(3, 1.0, 3.0).cast<cplx>();

    const auto half = sbl_e_step(p, r, st, 1.0);
    CHECK(oracle::max_abs(half.mu - r / 2.0) < 1e-14);
    CHECK(oracle::max_abs(half.sigma_blocks - CMat::Constant(1, 3, 0.5)) < 1e-14);

    const auto sharp = sbl_e_step(p, r, st, 1e-12);
    CHECK(oracle::max_abs(sharp.mu - r) < 1e-10);
    CHECK(oracle::max_abs(sharp.sigma_blocks) < 1e-10);
}

TEST_CASE("e-step matches dense oracle") {
    Rng rng(31);
    SUBCASE("M=4, K=2, N=2, L=2") { check_e_step(rng, 4, 2, 2, 2, false); }
    SUBCASE("blocks straddle users (M=6, L=4)") { check_e_step(rng, 6, 2, 2, 4, false); }
    SUBCASE("pruned block") { check_e_step(rng, 4, 4, 2, 2, true); }
    SUBCASE("pruned block on the dense path") { check_e_step(rng, 3, 4, 2, 2, true); }
    SUBCASE("L = 1") { check_e_step(rng, 4, 3, 2, 1, false); }
}

TEST_CASE("e-step reports a singular system") {
    // rank-deficient C and no noise
    const auto p = make_pilots(1, 1);
    SolverState st;
    st.gamma = RVec::Ones(1);
    st.corr_c = CMat::Ones(2, 2);
    CHECK_THROWS_AS(sbl_e_step(p, CVec::Ones(2), st, 0.0), NumericalError);
    // the same layout on the dense path (L does not divide M)
    SolverState dense;
    dense.gamma = RVec::Ones(3);
    dense.corr_c = CMat::Zero(2, 2);
    CHECK_THROWS_AS(sbl_e_step(make_pilots(1, 2), CVec::Ones(3), dense, 0.0), NumericalError);
}

// ---------------------------------------------------------------------------
// block parameters and M-step

TEST_CASE("block parameter examples") {
    const Index l = 3;
    SUBCASE("zero statistics kill the block") {
        const auto bp = update_block_params(CVec::Zero(2 * l), CMat::Zero(l, 2 * l), RVec::Ones(2), 0.0);
        CHECK(bp.gamma.isZero());
        CHECK(update_block_params(CVec::Zero(l), CMat::Zero(l, l), RVec::Ones(1), 0.0, 0.0).gamma.isZero());
    }
    SUBCASE("fixed point") {
        const auto bp = update_block_params(CVec::Zero(l), CMat::Identity(l, l), RVec::Ones(1), 0.0, 0.0);
        CHECK(oracle::max_abs(bp.corr_c - CMat::Identity(l, l)) < 1e-14);
        CHECK(std::abs(bp.gamma(0) - 1.0) < 1e-14);
    }
    SUBCASE("alpha halves the weight") {
        const auto bp = update_block_params(CVec::Zero(l), CMat::Identity(l, l), RVec::Ones(1), 1.0, 0.0);
        CHECK(std::abs(bp.gamma(0) - 0.5) < 1e-14);
    }
    SUBCASE("pruned blocks are skipped and stay dead") {
        Rng rng(2);
        const CVec mu = complex_gaussian_vector(rng, 2 * l);
        RVec gamma(2);
        gamma << 2.0, 0.0;
        const auto bp = update_block_params(mu, CMat::Zero(l, 2 * l), gamma, 0.0, 0.0);
        CHECK(bp.gamma(1) == 0.0);
        CHECK(std::abs(bp.corr_c.trace().real() - double(l)) < 1e-12);
        CHECK(oracle::max_abs(bp.corr_c - bp.corr_c.adjoint()) < 1e-14);
    }
    SUBCASE("everything pruned") {
        CHECK_THROWS_AS(update_block_params(CVec::Zero(l), CMat::Zero(l, l), RVec::Zero(1), 0.0), EmptyModelError);
    }
}

TEST_CASE("m-step examples") {
    const auto p = make_pilots(1, 1);
    const Index mk = 4;
    SolverState st;
    st.h_s = CVec::Zero(mk);
    st.h_l = CVec::Zero(mk);
    st.mu = CVec::Zero(mk);
    st.sigma_blocks = CMat::Zero(1, mk);
    st.alpha = 1.0;
    st.beta = 1.0;
    MStepInputs in;

    SUBCASE("empty low-rank part clamps beta") {
        const auto hp = m_step(CVec::Ones(mk), p, st, in);
        CHECK(hp.beta == kHyperMax);
    }
    SUBCASE("unit-energy low-rank part") {
        st.h_l = CVec::Ones(mk);
        const auto hp = m_step(CVec::Ones(mk), p, st, in);
        CHECK(std::abs(hp.beta - 1.0) < 1e-14);
    }
    SUBCASE("perfect fit with confident weights clamps alpha") {
        st.mu = CVec::Ones(mk);
        st.h_s = st.mu;
        st.sigma_blocks = CMat::Constant(1, mk, 0.5); // theta = 2 -> clamped to 1
        const auto hp = m_step(st.mu, p, st, in);
        CHECK(hp.alpha == kHyperMax);
    }
    SUBCASE("residual and weight gap") {
        st.sigma_blocks = CMat::Constant(1, mk, 1.0); // theta = 0
        st.alpha = 2.0;
        const auto hp = m_step(CVec::Ones(mk), p, st, in); // residual 4
        CHECK(std::abs(hp.alpha - 4.0 / (4.0 + 4.0 / 2.0)) < 1e-14);
    }
    SUBCASE("noise-over-step trace mode") {
        st.h_l = CVec::Ones(mk);
        in.trace_sigma_l_mode = TraceSigmaMode::NoiseOverStep;
        in.sigma2 = 0.5;
        in.t_step = 2.0;
        const auto hp = m_step(CVec::Ones(mk), p, st, in);
        CHECK(std::abs(hp.beta - 4.0 / (4.0 + 4.0 * 0.25)) < 1e-14);
    }
}

// ---------------------------------------------------------------------------
// low-rank branch

TEST_CASE("low-rank gradient step examples") {
    const auto p = make_pilots(1, 1);
    SUBCASE("threshold") {
        // A = I and h = 0: h' = r
        CVec r(3);
        r << 3.0, std::polar(0.5, 0.3), std::polar(2.0, -1.0);
        const CVec out = lowrank_step(p, r, CVec::Zero(3), 2.0, 1.0); // tau = 1
        CHECK(std::abs(out(0) - cplx(2.0)) < 1e-15);
        CHECK(out(1) == cplx(0.0));
        CHECK(std::abs(out(2) - std::polar(1.0, -1.0)) < 1e-15);
    }
    SUBCASE("pure gradient step recovers the data") {
        Rng rng(3);
        const CVec r = complex_gaussian_vector(rng, 5);
        CHECK(oracle::max_abs(lowrank_step(p, r, CVec::Zero(5), 0.0, step_length(p)) - r) < 1e-15);
    }
    CHECK_THROWS_AS(lowrank_step(p, CVec::Zero(2), CVec::Zero(2), 1.0, 0.0), ParameterError);
}

TEST_CASE("low-rank residual is monotone without shrinkage") {
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = oracle::random_pilots(rng, 3, 5);
        const Index m = 4;
        const CVec r = complex_gaussian_vector(rng, m * 3);
        const double t = step_length(p);
        CVec h = complex_gaussian_vector(rng, m * 5);
        double prev = (r - forward(p, h)).norm();
        for (int i = 0; i < 30; ++i) {
            h = lowrank_step(p, r, h, 0.0, t);
            const double now = (r - forward(p, h)).norm();
            CHECK(now <= prev * (1.0 + 1e-12));
            prev = now;
        }
    }
}

// ---------------------------------------------------------------------------
// estimators

TEST_CASE("lrsbe on zero data") {
    const ChannelDims dims{4, 2, 4};
    const auto p = make_pilots(2, 4);
    const auto res = lrsbe_estimate(noiseless(CVec::Zero(16)), p, dims);
    CHECK(res.h_hat.isZero());
    CHECK(res.converged);
    CHECK(res.iterations <= 2);
}

TEST_CASE("lrsbe noiseless block-sparse recovery") {
    const ChannelDims dims{4, 4, 4};
    const auto p = make_pilots(4, 4);
    GeneratorParams g;
    g.rank_r = 1;
    g.power_split = 0.0;
    g.block_len_gen = 4;
    g.sparse_blocks = 2;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto ch = synthesize_channel(g, dims, seed);
        const CVec h = ch.collective();
        const auto meas = add_noise(forward(p, h), kNoiseless, 0);
        const auto res = lrsbe_estimate(meas, p, dims);
        // direct least-squares oracle: A is unitary here
        const CVec ls = adjoint(p, meas.y);
        CHECK(oracle::max_abs(ls - h) < 1e-12);
        CHECK(nmse(h, res.h_hat, dims.k_users).db <= -40.0);
        CHECK(res.h_hat == res.h_s_hat + res.h_l_hat);
    }
}

TEST_CASE("bsbe equals lrsbe with a dead low-rank branch") {
    const ChannelDims dims{4, 4, 4};
    const auto p = make_pilots(2, 4);
    const auto ch = synthesize_channel(GeneratorParams{1, 1, 4, 0.5, 0.9}, dims, 3);
    const auto meas = add_noise(forward(p, ch.collective()), 10.0, 4);
    LrsbeOptions strong;
    strong.beta0 = kHyperMax;
    const auto a = lrsbe_estimate(meas, p, dims, strong);
    const auto b = bsbe_estimate(meas, p, dims);
    CHECK(a.h_l_hat.isZero());
    CHECK(a.h_hat == b.h_hat);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("bsbe close to lrsbe on purely block-sparse truth") {
    const ChannelDims dims{4, 4, 4};
    const auto p = make_pilots(2, 4);
    GeneratorParams g{1, 2, 4, 0.0, 0.9};
    double lr = 0.0, bs = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto ch = synthesize_channel(g, dims, s);
        const CVec h = ch.collective();
        const auto meas = add_noise(forward(p, h), 20.0, s + 100);
        lr += nmse(h, lrsbe_estimate(meas, p, dims).h_hat, 4).linear;
        bs += nmse(h, bsbe_estimate(meas, p, dims).h_hat, 4).linear;
    }
    CHECK(std::abs(to_db(lr / 20) - to_db(bs / 20)) <= 1.0);
}

TEST_CASE("lrsbe stops when the relative change is small") {
    const ChannelDims dims{4, 4, 6};
    const auto p = make_pilots(3, 6);
    const auto ch = synthesize_channel(GeneratorParams{2, 1, 4, 0.5, 0.9}, dims, 21);
    const auto meas = add_noise(forward(p, ch.collective()), 5.0, 22);
    LrsbeOptions o;
    o.q_max = 40;
    o.tol = 1e-3;
    std::vector<CVec> seen;
    const auto res = lrsbe_estimate(meas, p, dims, o, [&](int, const CVec& h) { seen.push_back(h); });
    REQUIRE(res.iterations == int(seen.size()));
    REQUIRE(res.trace.size() == seen.size());
    CHECK(res.iterations <= o.q_max);
    for (std::size_t i = 0; i + 1 < res.trace.size(); ++i) CHECK(res.trace[i].rel_change > o.tol);
    if (res.converged) CHECK(res.trace.back().rel_change <= o.tol);
    else CHECK(res.iterations == o.q_max);
    for (const auto& t : res.trace) {
        CHECK(t.alpha >= kHyperMin);
        CHECK(t.alpha <= kHyperMax);
        CHECK(t.beta >= kHyperMin);
        CHECK(t.beta <= kHyperMax);
    }
}

TEST_CASE("estimators are deterministic") {
    const ChannelDims dims{4, 4, 4};
    const auto p = make_pilots(2, 4);
    const auto ch = synthesize_channel(GeneratorParams{1, 1, 4, 0.5, 0.9}, dims, 8);
    const auto meas = add_noise(forward(p, ch.collective()), 0.0, 9);
    for (const auto& name : solver_names()) {
        SolverConfig cfg;
        cfg.name = name;
        const auto a = run_estimator(cfg, meas, p, dims);
        const auto b = run_estimator(cfg, meas, p, dims);
        CHECK(a.h_hat == b.h_hat);
        CHECK(a.iterations == b.iterations);
    }
}

TEST_CASE("estimators validate shapes") {
    const ChannelDims dims{4, 4, 4};
    const auto p = make_pilots(2, 4);
    const auto bad = noiseless(CVec::Ones(7));
    for (const auto& name : solver_names()) {
        SolverConfig cfg;
        cfg.name = name;
        CHECK_THROWS_AS(run_estimator(cfg, bad, p, dims), DimensionError);
    }
    LrsbeOptions o;
    o.block_len = 5;
    CHECK_THROWS_AS(lrsbe_estimate(noiseless(CVec::Ones(32)), p, dims, o), ParameterError);
}

TEST_CASE("sbe examples") {
    SUBCASE("A = I, vanishing noise returns the data") {
        const auto p = make_pilots(1, 1);
        Rng rng(1);
        const CVec y = complex_gaussian_vector(rng, 6);
        Measurement m;
        m.y = y;
        m.sigma2 = 1e-12;
        SbeOptions o;
        o.q_max = 5;
        const auto res = sbe_estimate(m, p, ChannelDims{3, 2, 1}, o);
        CHECK(oracle::max_abs(res.h_hat - y) < 1e-8);
    }
    SUBCASE("zero measurement") {
        const auto res = sbe_estimate(noiseless(CVec::Zero(16)), make_pilots(2, 4), ChannelDims{4, 2, 4});
        CHECK(res.h_hat.isZero());
    }
    SUBCASE("first iteration equals the L = 1 block posterior") {
        Rng rng(12);
        const auto p = make_pilots(2, 3);
        const Index m = 4;
        Measurement meas;
        meas.y = complex_gaussian_vector(rng, m * 2);
        meas.sigma2 = 0.2;
        SbeOptions o;
        o.q_max = 1;
        const auto res = sbe_estimate(meas, p, ChannelDims{2, 2, 3}, o);
        const auto ref = oracle::dense_e_step(oracle::dense_operator(p, m), CMat::Identity(m * 3, m * 3), meas.y, 0.2);
        CHECK(oracle::max_abs(res.h_hat - ref.mu) < 1e-10);
    }
}

TEST_CASE("ista examples") {
    SUBCASE("least squares without shrinkage") {
        const ChannelDims dims{3, 3, 3};
        const auto p = make_pilots(3, 3);
        Rng rng(6);
        const CVec h = complex_gaussian_vector(rng, 27);
        IstaOptions o;
        o.lambda = 0.0;
        const auto res = ista_estimate(noiseless(forward(p, h)), p, dims, o);
        CHECK(oracle::max_abs(res.h_hat - h) < 1e-12);
    }
    SUBCASE("full shrinkage") {
        const ChannelDims dims{3, 3, 4};
        const auto p = make_pilots(2, 4);
        Rng rng(7);
        const CVec y = complex_gaussian_vector(rng, 18);
        IstaOptions o;
        o.lambda = 2.0 * adjoint(p, y).cwiseAbs().maxCoeff();
        CHECK(ista_estimate(noiseless(y), p, dims, o).h_hat.isZero());
    }
    SUBCASE("long-run proximal gradient oracle") {
        const ChannelDims dims{2, 2, 3};
        Rng rng(44);
        const auto p = oracle::random_pilots(rng, 2, 3);
        const CVec y = complex_gaussian_vector(rng, 8);
        const CMat a = oracle::dense_operator(p, 4);
        IstaOptions o;
        o.lambda = 0.4;
        o.q_max = 100000;
        o.tol = 1e-15;
        const auto res = ista_estimate(noiseless(y), p, dims, o);
        const CVec ref = oracle::lasso_reference(a, y, 0.4, 100000);
        const double gap = oracle::lasso_objective(a, y, res.h_hat, 0.4) - oracle::lasso_objective(a, y, ref, 0.4);
        CHECK(std::abs(gap) <= 1e-8);
    }
}

TEST_CASE("omp examples") {
    SUBCASE("one-sparse noiseless") {
        const ChannelDims dims{2, 2, 2};
        const auto p = make_pilots(2, 2);
        CVec h = CVec::Zero(8);
        h(5) = cplx(1.5, -0.5);
        const auto res = omp_estimate(noiseless(forward(p, h)), p, dims);
        CHECK(res.iterations == 1);
        CHECK(oracle::max_abs(res.h_hat - h) < 1e-12);
    }
    SUBCASE("zero measurement") {
        const auto res = omp_estimate(noiseless(CVec::Zero(8)), make_pilots(2, 2), ChannelDims{2, 2, 2});
        CHECK(res.iterations == 0);
        CHECK(res.h_hat.isZero());
    }
    SUBCASE("three-sparse against exhaustive search") {
        const ChannelDims dims{4, 2, 2};
        const auto p = make_pilots(2, 2);
        const CMat a = oracle::dense_operator(p, 8);
        Rng rng(19);
        for (int trial = 0; trial < 5; ++trial) {
            CVec h = CVec::Zero(16);
            std::vector<Index> idx(16);
            std::iota(idx.begin(), idx.end(), Index{0});
            std::shuffle(idx.begin(), idx.end(), rng);
            for (int i = 0; i < 3; ++i) h(idx[std::size_t(i)]) = complex_gaussian(rng);
            const CVec y = a * h;
            const auto res = omp_estimate(noiseless(y), p, dims);
            const CVec ref = oracle::best_subset(a, y, 3);
            CHECK(oracle::max_abs(res.h_hat - ref) < 1e-10);
        }
    }
    SUBCASE("noise-level stopping") {
        const ChannelDims dims{4, 4, 4};
        const auto p = make_pilots(2, 4);
        const auto ch = synthesize_channel(GeneratorParams{1, 1, 4, 0.5, 0.9}, dims, 2);
        const auto meas = add_noise(forward(p, ch.collective()), 5.0, 3);
        const auto res = omp_estimate(meas, p, dims);
        CHECK(res.iterations <= 32);
        if (res.iterations < 32)
            CHECK((meas.y - forward(p, res.h_hat)).norm() <= std::sqrt(32.0 * meas.sigma2) + 1e-12);
    }
}
