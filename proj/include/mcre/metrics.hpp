#pragma once

// Distances between laws and paths. Total variation follows the convention
// ||mu - nu|| = sup_{|phi| <= 1} |int phi d(mu - nu)| = int |p - q|, so its
// maximum is 2.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "mcre/assignment.hpp"
#include "mcre/errors.hpp"
#include "mcre/numeric.hpp"

namespace mcre {

inline constexpr double kNormalizationTolerance = 1e-6;

/// int |p - q| over [lo, hi] by adaptive quadrature. Both densities must
/// integrate to 1 within 1e-6 on the window.
template <class P, class Q>
double tv_paper(const P& p, const Q& q, double lo, double hi, std::size_t panels = 512) {
    if (!(hi > lo)) throw InputError("tv_paper: empty integration window");
    bool negative = false;
    auto pn = [&](double x) {
        const double v = p(x);
        if (v < 0.0) negative = true;
        return v;
    };
    auto qn = [&](double x) {
        const double v = q(x);
        if (v < 0.0) negative = true;
        return v;
    };
    const double mp = integrate_adaptive(pn, lo, hi, panels);
    const double mq = integrate_adaptive(qn, lo, hi, panels);
    if (negative) throw InputError("tv_paper: negative density value");
    if (std::abs(mp - 1.0) > kNormalizationTolerance || std::abs(mq - 1.0) > kNormalizationTolerance) {
        throw InputError("tv_paper: densities do not integrate to 1 on the window");
    }
    const double d = integrate_adaptive([&](double x) { return std::abs(p(x) - q(x)); }, lo, hi, panels);
    return std::clamp(d, 0.0, 2.0);
}

namespace detail {

/// N(m, v) mass of [a, b], evaluated on whichever tail keeps precision.
inline double gaussian_mass(double m, double sd, double a, double b) {
    const double za = (a - m) / sd;
    const double zb = (b - m) / sd;
    if (za > 0.0) return 0.5 * (std::erfc(za / std::numbers::sqrt2) - std::erfc(zb / std::numbers::sqrt2));
    return 0.5 * (std::erfc(-zb / std::numbers::sqrt2) - std::erfc(-za / std::numbers::sqrt2));
}

}  // namespace detail

/// Exact TV between N(m1, v1) and N(m2, v2). Unequal variances are handled by
/// splitting the line at the density crossing points and differencing CDFs.
inline double tv_gaussian(double m1, double v1, double m2, double v2) {
    if (!(v1 >= 0.0) || !(v2 >= 0.0)) throw ArgumentError("tv_gaussian: negative variance");
    if (v1 == 0.0 || v2 == 0.0) {
        if (v1 == 0.0 && v2 == 0.0 && m1 == m2) return 0.0;
        return 2.0;
    }
    if (v1 == v2) {
        const double z = std::abs(m1 - m2) / (2.0 * std::sqrt(v1));
        // 2 (2 Phi(z) - 1) = 2 erf(z / sqrt 2)
        return 2.0 * std::erf(z / std::numbers::sqrt2);
    }
    const double a = 0.5 / v2 - 0.5 / v1;
    const double b = m1 / v1 - m2 / v2;
    const double c = 0.5 * m2 * m2 / v2 - 0.5 * m1 * m1 / v1 - 0.5 * std::log(v1 / v2);
    const double disc = std::max(0.0, b * b - 4.0 * a * c);
    const double qroot = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    double r1 = qroot / a;
    double r2 = qroot != 0.0 ? c / qroot : r1;
    if (r1 > r2) std::swap(r1, r2);
    const double s1 = std::sqrt(v1);
    const double s2 = std::sqrt(v2);
    const double inf = std::numeric_limits<double>::infinity();
    const double cuts[4] = {-inf, r1, r2, inf};
    double total = 0.0;
    for (int i = 0; i < 3; ++i) {
        total += std::abs(detail::gaussian_mass(m1, s1, cuts[i], cuts[i + 1]) -
                          detail::gaussian_mass(m2, s2, cuts[i], cuts[i + 1]));
    }
    return std::clamp(total, 0.0, 2.0);
}

struct TvEstimate {
    double value = 0.0;
    double standard_error = 0.0;
    std::size_t bins = 0;
};

inline std::size_t default_bins(std::size_t n) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::cbrt(static_cast<double>(n)) - 1e-9)));
}

/// Histogram L1 distance on common equal-width bins over the pooled range,
/// with a multinomial delta-method standard error. Biased upward by roughly
/// sqrt(bins / N). Samples with disjoint ranges are at distance 2 exactly.
inline TvEstimate tv_empirical(std::span<const double> s1, std::span<const double> s2,
                               std::size_t bins = 0) {
    if (s1.empty() || s2.empty()) throw ArgumentError("tv_empirical: empty sample");
    const auto [lo1, hi1] = std::minmax_element(s1.begin(), s1.end());
    const auto [lo2, hi2] = std::minmax_element(s2.begin(), s2.end());
    if (bins == 0) bins = default_bins(std::min(s1.size(), s2.size()));
    TvEstimate out;
    out.bins = bins;
    if (*hi1 < *lo2 || *hi2 < *lo1) {
        out.value = 2.0;
        return out;
    }
    const double lo = std::min(*lo1, *lo2);
    const double hi = std::max(*hi1, *hi2);
    if (!(hi > lo)) return out;
    const double width = (hi - lo) / static_cast<double>(bins);
    auto histogram = [&](std::span<const double> s) {
        std::vector<double> h(bins, 0.0);
        for (double x : s) {
            auto k = static_cast<std::size_t>((x - lo) / width);
            h[std::min(k, bins - 1)] += 1.0;
        }
        for (auto& v : h) v /= static_cast<double>(s.size());
        return h;
    };
    const auto p = histogram(s1);
    const auto q = histogram(s2);
    double tv = 0.0;
    double sp = 0.0, sp2 = 0.0, sq = 0.0, sq2 = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
        const double d = p[k] - q[k];
        const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        tv += std::abs(d);
        sp += sign * p[k];
        sp2 += sign * sign * p[k];
        sq += sign * q[k];
        sq2 += sign * sign * q[k];
    }
    const double var = (sp2 - sp * sp) / static_cast<double>(s1.size()) +
                       (sq2 - sq * sq) / static_cast<double>(s2.size());
    out.value = tv;
    out.standard_error = std::sqrt(std::max(0.0, var));
    return out;
}

// ---------------------------------------------------------------------------
// Two-sided paths sampled on [-I, I].

inline constexpr std::size_t kMinPointsPerUnit = 64;

class PathWindow {
public:
    PathWindow(std::size_t half_width, std::size_t points_per_unit, std::vector<double> values)
        : half_width_(half_width), per_unit_(points_per_unit), values_(std::move(values)) {
        if (per_unit_ < kMinPointsPerUnit) {
            throw ArgumentError("PathWindow: grid step must be at most 1/64");
        }
        if (values_.size() != 2 * half_width_ * per_unit_ + 1) {
            throw ArgumentError("PathWindow: value count does not match the grid");
        }
        for (double v : values_) {
            if (!std::isfinite(v)) throw ArgumentError("PathWindow: non-finite value");
        }
    }

    static PathWindow constant(std::size_t half_width, double value,
                               std::size_t points_per_unit = kMinPointsPerUnit) {
        return {half_width, points_per_unit,
                std::vector<double>(2 * half_width * points_per_unit + 1, value)};
    }

    static PathWindow sample(std::size_t half_width, const std::function<double(double)>& f,
                             std::size_t points_per_unit = kMinPointsPerUnit) {
        std::vector<double> v(2 * half_width * points_per_unit + 1);
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = f(time_at(half_width, points_per_unit, k));
        return {half_width, points_per_unit, std::move(v)};
    }

    std::size_t half_width() const noexcept { return half_width_; }
    std::size_t points_per_unit() const noexcept { return per_unit_; }
    double step() const noexcept { return 1.0 / static_cast<double>(per_unit_); }
    std::span<const double> values() const noexcept { return values_; }
    double time(std::size_t k) const noexcept { return time_at(half_width_, per_unit_, k); }

private:
    static double time_at(std::size_t half, std::size_t per_unit, std::size_t k) {
        return (static_cast<double>(k) - static_cast<double>(half * per_unit)) /
               static_cast<double>(per_unit);
    }

    std::size_t half_width_;
    std::size_t per_unit_;
    std::vector<double> values_;
};

/// sum_{i=-I}^{I-1} 2^{-|i|} min(1, max over grid points of [i, i+1] of |f - g|).
inline double path_metric_d(const PathWindow& f, const PathWindow& g) {
    if (f.half_width() != g.half_width() || f.points_per_unit() != g.points_per_unit()) {
        throw ArgumentError("path_metric_d: windows do not share a grid");
    }
    const auto fv = f.values();
    const auto gv = g.values();
    const std::size_t per = f.points_per_unit();
    const auto I = static_cast<long>(f.half_width());
    double total = 0.0;
    for (long i = -I; i < I; ++i) {
        const std::size_t first = static_cast<std::size_t>(i + I) * per;
        double sup = 0.0;
        for (std::size_t k = first; k <= first + per; ++k) sup = std::max(sup, std::abs(fv[k] - gv[k]));
        total += std::ldexp(std::min(1.0, sup), -static_cast<int>(std::abs(i)));
    }
    return total;
}

struct PathSample {
    double state = 0.0;
    PathWindow volatility;
    PathWindow correlation;
};

inline constexpr std::size_t kDefaultMaxPairs = 512;

inline double sample_cost(const PathSample& a, const PathSample& b) {
    return std::min(1.0, std::abs(a.state - b.state)) + path_metric_d(a.volatility, b.volatility) +
           path_metric_d(a.correlation, b.correlation);
}

/// Average cost of the optimal matching between two equal-size samples under
/// [1 ^ |x1 - x2|] + d(v1, w1) + d(v2, w2).
inline double bounded_wasserstein(std::span<const PathSample> s1, std::span<const PathSample> s2,
                                  std::size_t max_pairs = kDefaultMaxPairs) {
    if (s1.size() != s2.size()) throw ArgumentError("bounded_wasserstein: sample sizes differ");
    if (s1.empty()) throw ArgumentError("bounded_wasserstein: empty samples");
    if (s1.size() > max_pairs) throw ArgumentError("bounded_wasserstein: more samples than max_pairs");
    const std::size_t n = s1.size();
    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = sample_cost(s1[i], s2[j]);
    }
    return solve_assignment(cost, n).total_cost / static_cast<double>(n);
}

}  // namespace mcre
