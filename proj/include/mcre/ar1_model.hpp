#pragma once

// Stable scalar AR(1): X_{t+1} = gamma X_t + eps_{t+1}, eps ~ N(0,1).
//
// Small sets X_n = [-n, n], nu = uniform on [-1, 1], and the composite
// total-variation bound
//
//   ||L(X_t) - mu*||_TV <= 4 c / exp(beta n^2) + 2 (1 - alpha_n)^t,
//
// with c = sup_t E[exp(beta X_t^2)] and alpha_n = sqrt(2/pi) exp(-(gamma n + 1)^2 / 2).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mcre/errors.hpp"
#include "mcre/kernel_core.hpp"
#include "mcre/numeric.hpp"

namespace mcre {

struct Ar1Params {
    double gamma = 0.5;
    double beta = 0.3;  ///< Lyapunov exponent rate in V(x) = exp(beta x^2)
    double x0 = 0.0;
    double eta = 0.1;   ///< slack in the n(t) schedule

    void validate() const {
        if (!(gamma > 0.0 && gamma < 1.0)) throw ParameterError("ar1.gamma must lie in (0,1)");
        if (!(beta > 0.0 && beta < 0.5 * (1.0 - gamma * gamma))) {
            throw ParameterError("ar1.beta must lie in (0, (1-gamma^2)/2)");
        }
        if (!std::isfinite(x0)) throw ParameterError("ar1.x0 must be finite");
        if (!(eta > 0.0 && eta < std::numbers::sqrt2 / gamma)) {
            throw ParameterError("ar1.eta must lie in (0, sqrt(2)/gamma)");
        }
    }
};

inline double ar1_step(const Ar1Params& p, double x, double eps) { return p.gamma * x + eps; }

struct GaussianMoments {
    double mean = 0.0;
    double variance = 0.0;
};

inline GaussianMoments ar1_marginal(const Ar1Params& p, std::uint64_t t) {
    const double td = static_cast<double>(t);
    const double g2 = p.gamma * p.gamma;
    return {std::pow(p.gamma, td) * p.x0, (1.0 - std::pow(g2, td)) / (1.0 - g2)};
}

inline GaussianMoments ar1_stationary(const Ar1Params& p) {
    return {0.0, 1.0 / (1.0 - p.gamma * p.gamma)};
}

/// Closed-form minorization constant, written as 2 phi(gamma n + 1) so that
/// it agrees bit-for-bit with the kernel density at the worst grid corner.
inline double ar1_alpha(double gamma, std::size_t n) {
    return 2.0 * normal_pdf(gamma * static_cast<double>(n) + 1.0);
}

inline LocationScaleKernel ar1_kernel(double gamma) {
    return LocationScaleKernel{gamma, 0.0, 1.0, Innovation::standard_normal()};
}

inline SmallSetLadder ar1_ladder(double gamma) {
    return SmallSetLadder([](std::size_t n) { return static_cast<double>(n); },
                          [gamma](std::size_t n) { return ar1_alpha(gamma, n); });
}

inline SplitKernel<LocationScaleKernel> ar1_split_kernel(double gamma) {
    return {ar1_kernel(gamma), ar1_ladder(gamma)};
}

/// E[exp(beta X^2)] for X ~ N(m, s2), requires 2 beta s2 < 1.
inline double gaussian_exp_square_moment(double beta, double m, double s2) {
    const double d = 1.0 - 2.0 * beta * s2;
    if (!(d > 0.0)) throw ParameterError("E[exp(beta X^2)] diverges (2 beta variance >= 1)");
    return std::exp(beta * m * m / d) / std::sqrt(d);
}

/// sup over t in {0..t_grid} and t = infinity of E[exp(beta X_t^2)].
inline double ar1_lyapunov_constant(const Ar1Params& p, std::uint64_t t_grid = 10'000) {
    double best = 0.0;
    for (std::uint64_t t = 0; t <= t_grid; ++t) {
        const auto mom = ar1_marginal(p, t);
        best = std::max(best, gaussian_exp_square_moment(p.beta, mom.mean, mom.variance));
    }
    const auto inf = ar1_stationary(p);
    return std::max(best, gaussian_exp_square_moment(p.beta, inf.mean, inf.variance));
}

/// One point of a bound curve t -> (n, term1, term2, total).
struct BoundPoint {
    std::uint64_t t = 0;
    std::size_t n = 0;
    double term1 = 0.0;  ///< 4 c exp(-beta n^2): off-small-set mass
    double term2 = 0.0;  ///< 2 (1 - alpha_n)^t: no regeneration yet
    double total() const noexcept { return term1 + term2; }
};

inline BoundPoint ar1_bound_point(const Ar1Params& p, double lyapunov_c, std::uint64_t t,
                                  std::size_t n) {
    if (t < 1) throw ArgumentError("ar1_bound_curve: t must be >= 1");
    const double nd = static_cast<double>(n);
    const double alpha = ar1_alpha(p.gamma, n);
    BoundPoint pt;
    pt.t = t;
    pt.n = n;
    pt.term1 = 4.0 * lyapunov_c * std::exp(-p.beta * nd * nd);
    pt.term2 = 2.0 * std::exp(static_cast<double>(t) * std::log1p(-alpha));
    return pt;
}

inline double ar1_bound_curve(const Ar1Params& p, std::uint64_t t, std::size_t n) {
    return ar1_bound_point(p, ar1_lyapunov_constant(p), t, n).total();
}

/// n(t) = ceil((sqrt(2)/gamma - eta) sqrt(log t)).
inline std::size_t ar1_n_schedule(const Ar1Params& p, std::uint64_t t) {
    if (t < 2) throw ArgumentError("ar1_n_schedule: t must be >= 2");
    const double v = (std::numbers::sqrt2 / p.gamma - p.eta) * std::sqrt(std::log(static_cast<double>(t)));
    return static_cast<std::size_t>(std::ceil(v));
}

/// Least-squares slope of y on x.
inline double least_squares_slope(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

/// Negative log-log slope of the scheduled bound over t_grid (>= 5 points,
/// >= 2 decades).
inline double ar1_rate_fit(const Ar1Params& p, std::span<const std::uint64_t> t_grid) {
    if (t_grid.size() < 5) throw ArgumentError("ar1_rate_fit: need at least 5 grid points");
    std::uint64_t lo = t_grid.front();
    std::uint64_t hi = t_grid.front();
    for (auto t : t_grid) {
        lo = std::min(lo, t);
        hi = std::max(hi, t);
    }
    if (lo < 2 || static_cast<double>(hi) < 100.0 * static_cast<double>(lo)) {
        throw ArgumentError("ar1_rate_fit: grid must span at least two decades with t >= 2");
    }
    const double c = ar1_lyapunov_constant(p);
    std::vector<double> lx;
    std::vector<double> ly;
    for (auto t : t_grid) {
        const auto pt = ar1_bound_point(p, c, t, ar1_n_schedule(p, t));
        lx.push_back(std::log(static_cast<double>(t)));
        ly.push_back(std::log(pt.total()));
    }
    return -least_squares_slope(lx, ly);
}

}  // namespace mcre
