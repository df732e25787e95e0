#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "mcre/errors.hpp"

namespace mcre {

inline double normal_pdf(double x) noexcept {
    return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

inline double normal_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// P(|N(0,1)| > x) for x >= 0.
inline double normal_two_sided_tail(double x) noexcept {
    return std::erfc(x / std::numbers::sqrt2);
}

/// `count` evenly spaced points on [lo, hi]; both endpoints are hit exactly.
inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
    if (count == 0) return {};
    if (count == 1) return {lo};
    std::vector<double> out(count);
    const double step = (hi - lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) out[i] = lo + step * static_cast<double>(i);
    out.front() = lo;
    out.back() = hi;
    return out;
}

/// Solves f(z) = target for nondecreasing f by bracket expansion plus bisection.
///
/// The bracket [lo, hi] is widened geometrically around its midpoint until it
/// straddles the target; bisection then runs until the bracket is narrower
/// than `tol`. `check` is called on every evaluated value and may throw to
/// abort (used to detect residual laws that are not valid CDFs).
template <class F, class Check>
double solve_nondecreasing(F&& f, double target, double lo, double hi, double tol,
                           Check&& check, int max_expansions = 64) {
    double flo = f(lo);
    double fhi = f(hi);
    check(flo);
    check(fhi);
    const double centre = 0.5 * (lo + hi);
    double half = 0.5 * (hi - lo);
    int expansions = 0;
    while (flo > target || fhi < target) {
        if (++expansions > max_expansions) {
            throw CertificationError("root of a monotone function could not be bracketed");
        }
        half *= 2.0;
        if (flo > target) {
            lo = centre - half;
            flo = f(lo);
            check(flo);
        }
        if (fhi < target) {
            hi = centre + half;
            fhi = f(hi);
            check(fhi);
        }
    }
    for (int iter = 0; iter < 400 && hi - lo > tol; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fmid = f(mid);
        check(fmid);
        if (fmid < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

namespace detail {

template <class F>
double adaptive_simpson_step(F& f, double a, double b, double fa, double fm, double fb,
                             double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a,b], started from `panels` equal panels.
template <class F>
double integrate_adaptive(F&& f, double a, double b, std::size_t panels = 64,
                          double tol = 1e-12, int max_depth = 40) {
    double total = 0.0;
    const double width = (b - a) / static_cast<double>(panels);
    for (std::size_t i = 0; i < panels; ++i) {
        const double lo = a + width * static_cast<double>(i);
        const double hi = (i + 1 == panels) ? b : lo + width;
        const double flo = f(lo);
        const double fhi = f(hi);
        const double fm = f(0.5 * (lo + hi));
        const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
        total += detail::adaptive_simpson_step(f, lo, hi, flo, fm, fhi, whole,
                                               tol / static_cast<double>(panels), max_depth);
    }
    return total;
}

/// Sample mean with its standard error.
struct MeanEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
    double variance = 0.0;
    std::size_t count = 0;
};

inline MeanEstimate estimate_mean(std::span<const double> xs) {
    MeanEstimate out;
    out.count = xs.size();
    if (xs.empty()) return out;
    // Two-pass for stability; summation order fixed by index.
    double sum = 0.0;
    for (double x : xs) sum += x;
    out.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - out.mean) * (x - out.mean);
        out.variance = ss / static_cast<double>(xs.size() - 1);
        out.standard_error = std::sqrt(out.variance / static_cast<double>(xs.size()));
    }
    return out;
}

/// Survival function of the Kolmogorov distribution, P(K > lambda).
inline double kolmogorov_survival(double lambda) {
    if (lambda <= 0.0) return 1.0;
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    bool passes(double level) const { return p_value > level; }
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// (Stephens' small-sample correction).
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw ArgumentError("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = na * nb / (na + nb);
    const double root = std::sqrt(ne);
    KsResult out;
    out.statistic = d;
    out.p_value = kolmogorov_survival((root + 0.12 + 0.11 / root) * d);
    return out;
}

}  // namespace mcre
