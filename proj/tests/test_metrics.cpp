#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mcre/assignment.hpp"
#include "mcre/metrics.hpp"
#include "mcre/numeric.hpp"
#include "mcre/random.hpp"

using namespace mcre;

namespace {

auto gaussian(double m, double v) {
    return [m, v](double x) { return normal_pdf((x - m) / std::sqrt(v)) / std::sqrt(v); };
}

std::vector<PathSample> flat_samples(const std::vector<double>& states) {
    std::vector<PathSample> out;
    for (double x : states) out.push_back({x, PathWindow::constant(1, 0.0), PathWindow::constant(1, 0.0)});
    return out;
}

double brute_force_assignment(const std::vector<double>& cost, std::size_t n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = INFINITY;
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += cost[i * n + perm[i]];
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace

TEST(TvGaussian, EqualVarianceClosedForm) {
    EXPECT_NEAR(tv_gaussian(0, 1, 2, 1), 1.36537898427417179, 1e-14);
    EXPECT_NEAR(tv_gaussian(0, 1, 2, 1), 2 * (2 * normal_cdf(1.0) - 1), 1e-14);
    EXPECT_EQ(tv_gaussian(0.3, 2, 0.3, 2), 0.0);
    EXPECT_NEAR(tv_gaussian(0, 1, 60, 1), 2.0, 1e-15);
}

TEST(TvGaussian, UnequalVariances) {
    EXPECT_NEAR(tv_gaussian(0, 1, 0, 4), 0.645349137669537330, 1e-12);
    EXPECT_NEAR(tv_gaussian(0, 4, 0, 1), 0.645349137669537330, 1e-12);
}

TEST(TvGaussian, AgreesWithDualQuadrature) {
    for (auto [m1, v1, m2, v2] : {std::tuple{0.0, 1.0, 0.0, 4.0}, std::tuple{0.3, 0.5, -1.0, 2.0},
                                  std::tuple{1.0, 1.0, 1.2, 1.1}}) {
        const double lo = std::min(m1, m2) - 20 * std::sqrt(std::max(v1, v2));
        const double hi = std::max(m1, m2) + 20 * std::sqrt(std::max(v1, v2));
        const double q1 = tv_paper(gaussian(m1, v1), gaussian(m2, v2), lo, hi, 512);
        const double q2 = tv_paper(gaussian(m1, v1), gaussian(m2, v2), lo, hi, 1024);
        EXPECT_NEAR(q1, q2, 1e-8);
        EXPECT_NEAR(tv_gaussian(m1, v1, m2, v2), q2, 1e-8);
    }
}

TEST(TvGaussian, Degenerate) {
    EXPECT_EQ(tv_gaussian(1, 0, 1, 0), 0.0);
    EXPECT_EQ(tv_gaussian(1, 0, 2, 0), 2.0);
    EXPECT_EQ(tv_gaussian(1, 0, 1, 1), 2.0);
    EXPECT_THROW(tv_gaussian(0, -1, 0, 1), ArgumentError);
}

TEST(TvPaper, BasicValues) {
    EXPECT_NEAR(tv_paper(gaussian(0, 1), gaussian(0, 1), -15, 15), 0.0, 1e-15);
    EXPECT_NEAR(tv_paper(gaussian(0, 1), gaussian(2, 1), -20, 22), 2 * (2 * normal_cdf(1.0) - 1), 1e-9);
    auto u1 = [](double x) { return x >= 0 && x < 1 ? 1.0 : 0.0; };
    auto u2 = [](double x) { return x >= 2 && x < 3 ? 1.0 : 0.0; };
    EXPECT_NEAR(tv_paper(u1, u2, -0.0, 4.0, 4000), 2.0, 1e-6);
}

TEST(TvPaper, RejectsUnnormalizedInput) {
    auto half = [](double x) { return 0.5 * normal_pdf(x); };
    EXPECT_THROW(tv_paper(gaussian(0, 1), half, -10, 10), InputError);
    EXPECT_THROW(tv_paper(gaussian(0, 1), gaussian(0, 1), 1, 1), InputError);
    auto neg = [](double x) { return normal_pdf(x) - (std::abs(x) < 0.01 ? 0.5 : 0.0) + (std::abs(x - 5) < 0.01 ? 0.5 : 0.0); };
    EXPECT_THROW(tv_paper(gaussian(0, 1), neg, -10, 10), InputError);
}

TEST(TvPaper, MetricProperties) {
    RandomStream s(5);
    for (int trial = 0; trial < 10; ++trial) {
        const double a = 2 * s.uniform() - 1, b = 2 * s.uniform() - 1, c = 2 * s.uniform() - 1;
        const double va = 0.5 + s.uniform(), vb = 0.5 + s.uniform(), vc = 0.5 + s.uniform();
        const double ab = tv_paper(gaussian(a, va), gaussian(b, vb), -15, 15);
        const double ba = tv_paper(gaussian(b, vb), gaussian(a, va), -15, 15);
        const double bc = tv_paper(gaussian(b, vb), gaussian(c, vc), -15, 15);
        const double ac = tv_paper(gaussian(a, va), gaussian(c, vc), -15, 15);
        EXPECT_NEAR(ab, ba, 1e-12);
        EXPECT_LE(ac, ab + bc + 1e-9);
        EXPECT_LE(ab, 2.0);
    }
}

TEST(TvPaper, BoundedByTwiceTheMismatchProbability) {
    // Z1 ~ N(0,1); Z2 = Z1 except with probability p, when it is drawn from N(3,1).
    for (double p : {0.05, 0.3, 0.8}) {
        auto mix = [p](double x) { return (1 - p) * normal_pdf(x) + p * normal_pdf(x - 3); };
        EXPECT_LE(tv_paper(gaussian(0, 1), mix, -15, 18), 2 * p + 1e-12);
    }
}

TEST(TvEmpirical, BasicValues) {
    const std::vector<double> a{0.1, 0.5, 0.7, 0.2};
    EXPECT_EQ(tv_empirical(a, a).value, 0.0);
    const std::vector<double> b{3.0, 4.0};
    EXPECT_EQ(tv_empirical(a, b).value, 2.0);
    EXPECT_THROW(tv_empirical(a, std::vector<double>{}), ArgumentError);
    EXPECT_EQ(default_bins(100000), 47u);
    EXPECT_EQ(default_bins(1000), 10u);
}

TEST(TvEmpirical, GaussianOracle) {
    RandomStream s(11);
    std::vector<double> x(100000), y(100000);
    for (auto& v : x) v = s.normal();
    for (auto& v : y) v = 2 + s.normal();
    const auto est = tv_empirical(x, y);
    EXPECT_NEAR(est.value, 2 * (2 * normal_cdf(1.0) - 1), 0.05);
    EXPECT_GT(est.standard_error, 0.0);
    EXPECT_LT(est.standard_error, 0.01);
}

TEST(PathMetric, Values) {
    const auto f = PathWindow::constant(30, 0.0);
    const auto g = PathWindow::constant(30, 1.0);
    const auto h = PathWindow::constant(30, 0.5);
    EXPECT_EQ(path_metric_d(f, f), 0.0);
    EXPECT_NEAR(path_metric_d(f, g), 3.0 - std::ldexp(1.0, -28), 1e-8);
    EXPECT_NEAR(path_metric_d(f, h), 1.5, 1e-8);
    EXPECT_THROW(path_metric_d(f, PathWindow::constant(29, 0.0)), ArgumentError);
    EXPECT_THROW(path_metric_d(f, PathWindow::constant(30, 0.0, 128)), ArgumentError);
}

TEST(PathMetric, SupIsTakenPerUnitInterval) {
    const auto f = PathWindow::constant(3, 0.0);
    const auto g = PathWindow::sample(3, [](double u) { return u >= 1.4 && u <= 1.6 ? 0.25 : 0.0; });
    EXPECT_NEAR(path_metric_d(f, g), 0.25 * 0.5, 1e-15);
}

TEST(PathWindow, Validation) {
    EXPECT_THROW(PathWindow(2, 32, std::vector<double>(129, 0.0)), ArgumentError);
    EXPECT_THROW(PathWindow(2, 64, std::vector<double>(10, 0.0)), ArgumentError);
    std::vector<double> v(257, 0.0);
    v[3] = NAN;
    EXPECT_THROW(PathWindow(2, 64, v), ArgumentError);
}

TEST(PathMetric, IsAMetricOnRandomWindows) {
    RandomStream s(2);
    auto random_window = [&] {
        const double a = s.normal(), b = s.normal(), c = 0.3 * s.normal();
        return PathWindow::sample(4, [=](double u) { return a * std::sin(b * u) + c * u; });
    };
    for (int i = 0; i < 30; ++i) {
        const auto f = random_window(), g = random_window(), h = random_window();
        EXPECT_EQ(path_metric_d(f, g), path_metric_d(g, f));
        EXPECT_LE(path_metric_d(f, h), path_metric_d(f, g) + path_metric_d(g, h) + 1e-12);
    }
}

TEST(Assignment, MatchesBruteForce) {
    RandomStream s(8);
    for (std::size_t n : {1u, 2u, 3u, 5u, 7u}) {
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<double> cost(n * n);
            for (auto& c : cost) c = s.uniform();
            const auto a = solve_assignment(cost, n);
            EXPECT_NEAR(a.total_cost, brute_force_assignment(cost, n), 1e-12);
            std::vector<std::size_t> cols = a.column_of_row;
            std::sort(cols.begin(), cols.end());
            for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(cols[i], i);
        }
    }
    EXPECT_THROW(solve_assignment(std::vector<double>(3), 2), ArgumentError);
}

TEST(BoundedWasserstein, TrivialCases) {
    const auto a = flat_samples({0.1, 0.4, -2.0});
    EXPECT_EQ(bounded_wasserstein(a, a), 0.0);
    const auto x = flat_samples({0.0});
    const auto y = flat_samples({0.3});
    EXPECT_NEAR(bounded_wasserstein(x, y), 0.3, 1e-15);
    EXPECT_THROW(bounded_wasserstein(a, x), ArgumentError);
    EXPECT_THROW(bounded_wasserstein(a, a, 2), ArgumentError);
}

TEST(BoundedWasserstein, SortingOracleWhenClampIsInactive) {
    RandomStream s(21);
    std::vector<double> x(128), y(128);
    for (auto& v : x) v = 0.9 * s.uniform();
    for (auto& v : y) v = 0.9 * s.uniform();
    auto xs = x, ys = y;
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    double oracle = 0.0;
    for (std::size_t i = 0; i < 128; ++i) oracle += std::min(1.0, std::abs(xs[i] - ys[i]));
    oracle /= 128;
    EXPECT_NEAR(bounded_wasserstein(flat_samples(x), flat_samples(y)), oracle, 1e-10);
}

TEST(BoundedWasserstein, ClampedCostCanBeatSortedMatching) {
    // Sorted pairing costs (0.8 + 0.8)/2; crossing pairs costs (1 + 0.1)/2.
    const auto a = flat_samples({0.0, 0.9});
    const auto b = flat_samples({0.8, 1.7});
    EXPECT_NEAR(bounded_wasserstein(a, b), 0.55, 1e-15);
}

TEST(BoundedWasserstein, MatchesBruteForceWithPaths) {
    RandomStream s(3);
    for (int trial = 0; trial < 4; ++trial) {
        std::vector<PathSample> a, b;
        for (int i = 0; i < 5; ++i) {
            const double u = s.normal(), v = s.normal();
            a.push_back({2 * s.normal(), PathWindow::constant(2, u), PathWindow::sample(2, [=](double t) { return v * t; })});
            const double u2 = s.normal(), v2 = s.normal();
            b.push_back({2 * s.normal(), PathWindow::constant(2, u2), PathWindow::sample(2, [=](double t) { return v2 * t; })});
        }
        std::vector<double> cost(25);
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 5; ++j) cost[i * 5 + j] = sample_cost(a[i], b[j]);
        }
        EXPECT_NEAR(bounded_wasserstein(a, b), brute_force_assignment(cost, 5) / 5, 1e-12);
    }
}

TEST(BoundedWasserstein, DominatedByTotalVariation) {
    // Empirical laws on a common support {0, 1, 2, 3}; each unmatched unit of mass costs at most C = 4.
    RandomStream s(17);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(40), y(40);
        for (auto& v : x) v = std::floor(4 * s.uniform());
        for (auto& v : y) v = std::floor(4 * s.uniform() * s.uniform());
        double tv = 0.0;
        for (int k = 0; k < 4; ++k) {
            tv += std::abs(double(std::count(x.begin(), x.end(), k)) - double(std::count(y.begin(), y.end(), k))) / 40;
        }
        EXPECT_LE(bounded_wasserstein(flat_samples(x), flat_samples(y)), 4.0 * tv + 1e-12);
    }
}
