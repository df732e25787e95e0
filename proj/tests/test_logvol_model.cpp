#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "mcre/coupling_engine.hpp"
#include "mcre/logvol_model.hpp"
#include "mcre/numeric.hpp"
#include "mcre/random.hpp"

using namespace mcre;

static_assert(EnvironmentModel<LogvolModel>);

namespace {

LogvolParams reference_params() {
    LogvolParams p;
    p.gamma = 0.5;
    p.rho = 0.3;
    p.ma = MaCoefficients::geometric(0.5);
    return p;
}

}  // namespace

TEST(MaCoefficients, Geometric) {
    const auto ma = MaCoefficients::geometric(0.5, 10);
    ASSERT_EQ(ma.a.size(), 11u);
    EXPECT_DOUBLE_EQ(ma.a[3], 0.125);
    EXPECT_NEAR(ma.variance() + ma.variance_deficit, 4.0 / 3.0, 1e-15);
    EXPECT_THROW(MaCoefficients::geometric(1.0), ParameterError);
}

TEST(MaCoefficients, FractionalDecay) {
    const auto ma = MaCoefficients::fractional(0.3, 0.5, 64);
    EXPECT_DOUBLE_EQ(ma.a[0], 0.5);
    EXPECT_NEAR(ma.a[7], 0.5 * std::pow(8.0, -1.2), 1e-15);
    double tail = 0.0;
    for (int j = 66; j < 2000000; ++j) tail += 0.25 * std::pow(double(j), -2.4);
    EXPECT_NEAR(ma.variance_deficit, tail, 0.02 * tail);
    EXPECT_THROW(MaCoefficients::fractional(1.0, 0.5), ParameterError);
}

TEST(LogvolParams, Validation) {
    auto p = reference_params();
    EXPECT_NO_THROW(p.validate());
    p.rho = 1.0;
    EXPECT_THROW(p.validate(), ParameterError);
    p = reference_params();
    p.gamma = -0.1;
    EXPECT_THROW(p.validate(), ParameterError);
    p = reference_params();
    p.x0_sd = -1;
    EXPECT_THROW(p.validate(), ParameterError);
}

TEST(LogvolLadder, HalfWidthFormula) {
    LogvolParams p = reference_params();
    p.rho = 0.0;
    EXPECT_NEAR(logvol_dn(p, 1), 4.07742274268856785, 1e-14);
    EXPECT_NEAR(logvol_dn(p, 0), 1.0, 1e-15);
}

TEST(LogvolLadder, LogAlphaAgreesWhereAlphaIsRepresentable) {
    const auto p = reference_params();
    for (std::size_t n = 0; n <= 2; ++n) {
        EXPECT_NEAR(logvol_log_alpha(p, n), std::log(logvol_alpha(p, n)), 1e-9);
    }
    EXPECT_TRUE(std::isfinite(logvol_log_alpha(p, 3)));
    EXPECT_LT(logvol_log_alpha(p, 3), -1000.0);
    EXPECT_EQ(logvol_alpha(p, 3), 0.0);
    EXPECT_TRUE(std::isfinite(logvol_log_alpha(p, 8)));
}

TEST(LogvolLadder, AlphaIsNonincreasing) {
    for (auto eps : {Innovation::standard_normal(), Innovation::unit_logistic()}) {
        auto p = reference_params();
        p.eps = eps;
        const LogvolModel model(p);
        EXPECT_NO_THROW(model.ladder().check_invariants(2));
    }
}

TEST(LogvolLadder, GridCertification) {
    for (auto eps : {Innovation::standard_normal(), Innovation::unit_logistic()}) {
        auto p = reference_params();
        p.eps = eps;
        for (std::size_t n = 0; n <= 2; ++n) {
            EXPECT_GE(logvol_certify(p, n), 0.0) << "n=" << n;
            EXPECT_NO_THROW(certified_logvol_alpha(p, n));
        }
    }
}

TEST(LogvolLadder, DoubledAlphaFailsCertificationAtZero) {
    const auto p = reference_params();
    const auto targets = linspace(-1, 1, 21);
    const std::vector<double> origin{0.0};
    const auto kernel = logvol_kernel(p, EnvState{0.0, 0.0});
    EXPECT_NEAR(validate_minorization(kernel, logvol_alpha(p, 0), origin, targets), 0.0, 1e-15);
    EXPECT_LT(validate_minorization(kernel, 2.0 * logvol_alpha(p, 0), origin, targets), 0.0);
}

TEST(LogvolLadder, MarginGrowsLikeExpTwoN) {
    const auto p = reference_params();
    for (std::size_t n = 1; n <= 2; ++n) {
        const double half = 0.5 * logvol_alpha(p, n);
        const double ratio = (logvol_certify(p, n, 41) + half) / half;
        EXPECT_NEAR(ratio, std::exp(2.0 * double(n)), 1e-6 * ratio) << "n=" << n;
    }
}

TEST(MomentBound, FrozenValues) {
    EXPECT_NEAR(logvol_moment_bound(reference_params()), 19.1892214601998594, 1e-12);
    LogvolParams p;
    p.gamma = 0.5;
    p.rho = 0.3;
    p.ma = MaCoefficients::explicit_list({0.5});
    EXPECT_NEAR(logvol_moment_bound(p), 2.19829502760017086, 1e-13);
    p.x0_mean = 1.0;
    p.x0_sd = 2.0;
    EXPECT_NEAR(logvol_moment_bound(p), 2.19829502760017086 + 5.0, 1e-13);
}

TEST(Tail, CappedAndNonincreasing) {
    const auto p = reference_params();
    EXPECT_EQ(logvol_tail(p, 0), 1.0);
    EXPECT_EQ(logvol_tail(p, 3), 1.0);
    double prev = 1.0;
    for (std::size_t n = 1; n < 200; ++n) {
        const double t = logvol_tail(p, n);
        EXPECT_LE(t, prev);
        EXPECT_GE(t, 0.0);
        prev = t;
    }
    EXPECT_NEAR(logvol_tail(p, 100), 19.1892214601998594 / 1e4, 1e-12);
}

TEST(EnvPath, ShapeAndDeterminism) {
    const auto p = reference_params();
    const auto a = ma_env_path(p, 20, 5);
    const auto b = ma_env_path(p, 20, 5);
    ASSERT_EQ(a.size(), 21u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].z, b[i].z);
        EXPECT_EQ(a[i].eta_next, b[i].eta_next);
    }
    EXPECT_THROW(ma_env_path(p, 0, 5), ArgumentError);
}

TEST(EnvPath, MovingAverageRecursion) {
    // Geometric coefficients obey Z_{t+1} = r Z_t + eta_{t+1} up to the truncated term.
    const auto p = reference_params();
    const auto path = ma_env_path(p, 50, 9);
    for (std::size_t t = 0; t + 1 < path.size(); ++t) {
        EXPECT_NEAR(path[t + 1].z, 0.5 * path[t].z + path[t].eta_next, 1e-12);
    }
}

TEST(EnvPath, StationaryVariance) {
    const auto p = reference_params();
    std::vector<double> z0, z7;
    RandomStream s(3, stream_tag::environment, 0);
    for (int r = 0; r < 20000; ++r) {
        const auto path = ma_env_path(p, 7, s);
        z0.push_back(path[0].z * path[0].z);
        z7.push_back(path[7].z * path[7].z);
    }
    for (const auto* v : {&z0, &z7}) {
        const auto est = estimate_mean(*v);
        EXPECT_NEAR(est.mean, p.ma.variance(), 4 * est.standard_error);
    }
}

TEST(LogvolKernel, SplitMapPreservesLaw) {
    const LogvolModel model(reference_params());
    struct Point {
        double x;
        EnvState env;
        std::size_t n;
    };
    for (const auto& pt : {Point{0.0, {0.0, 0.0}, 0}, Point{0.5, {0.3, -0.7}, 1}, Point{-1.8, {-0.5, 1.2}, 2}}) {
        const auto k = model.kernel_at(pt.env);
        RandomStream us(8, stream_tag::uniforms, pt.n);
        RandomStream ds(8, stream_tag::direct, pt.n);
        std::vector<double> a(20000), b(20000);
        for (auto& v : a) {
            v = split_apply(k, model.ladder(), pt.n, pt.x, UniformPair{us.uniform(), us.uniform()},
                            model.env_in_set(pt.n, pt.env));
        }
        for (auto& v : b) v = k.mean(pt.x) + k.scale * ds.normal();
        EXPECT_TRUE(ks_two_sample(a, b).passes(0.001)) << "n=" << pt.n;
    }
}

TEST(LogvolStep, MatchesKernelMean) {
    const auto p = reference_params();
    const EnvState env{0.4, -1.1};
    const auto k = logvol_kernel(p, env);
    EXPECT_NEAR(logvol_step(p, 0.8, env, 0.0), k.mean(0.8), 1e-15);
    EXPECT_NEAR(logvol_step(p, 0.8, env, 1.0) - logvol_step(p, 0.8, env, 0.0), k.scale, 1e-15);
}

TEST(LogvolStep, SecondMomentStaysBelowBound) {
    const auto p = reference_params();
    const double K = logvol_moment_bound(p);
    std::vector<double> sq;
    for (std::uint64_t r = 0; r < 3000; ++r) {
        RandomStream es(21, stream_tag::environment, r);
        RandomStream is(21, stream_tag::innovations, r);
        const auto env = ma_env_path(p, 30, es);
        double x = 0.0;
        for (int t = 0; t < 30; ++t) x = logvol_step(p, x, env[t], is.normal());
        sq.push_back(x * x);
    }
    const auto est = estimate_mean(sq);
    EXPECT_LE(est.mean, K + 3 * est.standard_error);
}

TEST(DrawInnovation, LogisticMoments) {
    RandomStream s(4);
    std::vector<double> v(50000), v2(50000);
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = draw_innovation(Innovation::unit_logistic(), s);
        v2[i] = v[i] * v[i];
    }
    const auto m = estimate_mean(v);
    const auto m2 = estimate_mean(v2);
    EXPECT_NEAR(m.mean, 0.0, 4 * m.standard_error);
    EXPECT_NEAR(m2.mean, 1.0, 4 * m2.standard_error);
}
