#pragma once

// Minorized one-dimensional transition kernels and their split random-mapping
// representation.
//
// A kernel Q(x, .) that dominates alpha_n * nu on the small set
// X_n = [-b_n, b_n] is realized as a deterministic map T^n(U, x) of a uniform
// pair U = (u1, u2):
//
//   x in X_n, u1 <= alpha_n   ->  nu^{-1}(u2)                    (constant in x)
//   x in X_n, u1 >  alpha_n   ->  R_x^{-1}(u2), R_x = (Q - alpha_n nu)/(1 - alpha_n)
//   x not in X_n              ->  Q(x, .)^{-1}(u2)
//
// In every branch the law of T^n(U, x) over uniform U is Q(x, .). Here nu is
// the uniform law on [-1, 1], shared by all rungs of the ladder.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>

#include "mcre/errors.hpp"
#include "mcre/numeric.hpp"

namespace mcre {

inline constexpr double kBisectionTolerance = 1e-12;
inline constexpr double kBracketSigmas = 12.0;

struct UniformPair {
    double u1 = 0.5;
    double u2 = 0.5;
};

inline void validate(const UniformPair& u) {
    if (!(u.u1 >= 0.0 && u.u1 <= 1.0) || !(u.u2 >= 0.0 && u.u2 <= 1.0)) {
        throw DomainError("uniform pair component outside [0,1]");
    }
}

template <class K>
concept TransitionKernel = requires(const K& k, double x, double z) {
    { k.density(x, z) } -> std::convertible_to<double>;
    { k.cdf(x, z) } -> std::convertible_to<double>;
    { k.mean(x) } -> std::convertible_to<double>;
    { k.stdev(x) } -> std::convertible_to<double>;
};

// ---------------------------------------------------------------------------
// Minorizing measure nu = (1/2) Lebesgue on [-1, 1].

inline double nu_density(double z) noexcept { return (z >= -1.0 && z <= 1.0) ? 0.5 : 0.0; }

inline double nu_cdf(double z) noexcept {
    if (z <= -1.0) return 0.0;
    if (z >= 1.0) return 1.0;
    return 0.5 * (z + 1.0);
}

inline double nu_inverse_cdf(double u) {
    if (!(u >= 0.0 && u <= 1.0)) throw DomainError("nu_inverse_cdf: u outside [0,1]");
    return 2.0 * u - 1.0;
}

// ---------------------------------------------------------------------------
// Innovation laws (standardized: zero mean, unit variance).

class Innovation {
public:
    enum class Kind { normal, logistic };

    constexpr Innovation() = default;
    constexpr explicit Innovation(Kind kind) : kind_(kind) {}

    static constexpr Innovation standard_normal() { return Innovation(Kind::normal); }
    static constexpr Innovation unit_logistic() { return Innovation(Kind::logistic); }

    Kind kind() const noexcept { return kind_; }
    std::string name() const { return kind_ == Kind::normal ? "normal" : "logistic"; }

    double pdf(double e) const noexcept {
        if (kind_ == Kind::normal) return normal_pdf(e);
        const double s = logistic_scale();
        const double t = std::exp(-std::abs(e) / s);
        return t / (s * (1.0 + t) * (1.0 + t));
    }

    /// log pdf; finite far into the tails where pdf() underflows.
    double log_pdf(double e) const noexcept {
        if (kind_ == Kind::normal) {
            return -0.5 * e * e - 0.5 * std::log(2.0 * std::numbers::pi);
        }
        const double s = logistic_scale();
        const double a = std::abs(e) / s;
        return -a - std::log(s) - 2.0 * std::log1p(std::exp(-a));
    }

    double cdf(double e) const noexcept {
        if (kind_ == Kind::normal) return normal_cdf(e);
        const double s = logistic_scale();
        if (e >= 0.0) return 1.0 / (1.0 + std::exp(-e / s));
        const double t = std::exp(e / s);
        return t / (1.0 + t);
    }

    /// P(|e| > x) for x >= 0.
    double two_sided_tail(double x) const noexcept {
        if (kind_ == Kind::normal) return normal_two_sided_tail(x);
        return 2.0 * (1.0 - cdf(x));
    }

    double second_moment() const noexcept { return 1.0; }

private:
    static double logistic_scale() noexcept { return std::numbers::sqrt3 / std::numbers::pi; }

    Kind kind_ = Kind::normal;
};

/// Q(x, .) = law of slope * x + shift + scale * e, with e an Innovation.
/// AR(1) uses slope = gamma, shift = 0, scale = 1; the log-volatility chain
/// uses an environment-dependent shift and scale.
struct LocationScaleKernel {
    double slope = 0.0;
    double shift = 0.0;
    double scale = 1.0;
    Innovation innovation{};

    double mean(double x) const noexcept { return slope * x + shift; }
    double stdev(double) const noexcept { return scale; }
    double density(double x, double z) const noexcept {
        return innovation.pdf((z - mean(x)) / scale) / scale;
    }
    double cdf(double x, double z) const noexcept {
        return innovation.cdf((z - mean(x)) / scale);
    }
};

// ---------------------------------------------------------------------------

/// Ladder of small sets X_n = [-b_n, b_n] with minorization constants alpha_n.
/// Both sequences are given as functions of n so schedules may probe large n.
class SmallSetLadder {
public:
    using Sequence = std::function<double(std::size_t)>;

    SmallSetLadder(Sequence half_width, Sequence alpha)
        : half_width_(std::move(half_width)), alpha_(std::move(alpha)) {
        if (!half_width_ || !alpha_) throw ArgumentError("SmallSetLadder: empty sequence");
    }

    double half_width(std::size_t n) const { return half_width_(n); }
    double alpha(std::size_t n) const { return alpha_(n); }
    bool contains(std::size_t n, double x) const { return std::abs(x) <= half_width_(n); }

    /// Throws ParameterError unless b_n is nondecreasing, alpha_n nonincreasing
    /// and every alpha_n in (0,1], for n = 0..n_max.
    void check_invariants(std::size_t n_max) const {
        for (std::size_t n = 0; n <= n_max; ++n) {
            const double a = alpha(n);
            if (!(a > 0.0 && a <= 1.0)) {
                throw ParameterError("SmallSetLadder: alpha_" + std::to_string(n) +
                                     " outside (0,1]");
            }
            if (n > 0) {
                if (half_width(n) < half_width(n - 1)) {
                    throw ParameterError("SmallSetLadder: half widths must be nondecreasing");
                }
                if (a > alpha(n - 1)) {
                    throw ParameterError("SmallSetLadder: alphas must be nonincreasing");
                }
            }
        }
    }

private:
    Sequence half_width_;
    Sequence alpha_;
};

template <TransitionKernel K>
struct SplitKernel {
    K kernel;
    SmallSetLadder ladder;
};

// ---------------------------------------------------------------------------

/// Full-kernel inverse CDF of Q(x, .) at u in (0,1).
template <TransitionKernel K>
double inverse_cdf(const K& kernel, double x, double u) {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("inverse_cdf: u outside (0,1)");
    const double m = kernel.mean(x);
    const double s = kernel.stdev(x);
    return solve_nondecreasing([&](double z) { return kernel.cdf(x, z); }, u,
                               m - kBracketSigmas * s, m + kBracketSigmas * s,
                               kBisectionTolerance, [](double) {});
}

/// Residual CDF (Q(x,(-inf,z]) - alpha nu((-inf,z])) / (1 - alpha).
template <TransitionKernel K>
double residual_cdf(const K& kernel, double alpha, double x, double z) {
    return (kernel.cdf(x, z) - alpha * nu_cdf(z)) / (1.0 - alpha);
}

template <TransitionKernel K>
double residual_inverse_cdf(const K& kernel, double alpha, double x, double u) {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("residual_inverse_cdf: u outside (0,1)");
    if (!(alpha >= 0.0 && alpha < 1.0)) {
        throw DomainError("residual_inverse_cdf: alpha must lie in [0,1)");
    }
    constexpr double slack = 1e-12;
    auto check = [](double r) {
        if (!(r >= -slack && r <= 1.0 + slack)) {
            throw CertificationError(
                "residual law is not a valid CDF (minorization violated)");
        }
    };
    const double m = kernel.mean(x);
    const double s = kernel.stdev(x);
    return solve_nondecreasing([&](double z) { return residual_cdf(kernel, alpha, x, z); }, u,
                               m - kBracketSigmas * s, m + kBracketSigmas * s,
                               kBisectionTolerance, check);
}

template <TransitionKernel K>
double residual_inverse_cdf(const SplitKernel<K>& sk, std::size_t n, double x, double u) {
    return residual_inverse_cdf(sk.kernel, sk.ladder.alpha(n), x, u);
}

/// The split mapping T^n(U, x). `env_in_set` is false when a random
/// environment lies outside its small set; the map then falls back to the
/// plain inverse CDF, since the minorization is only promised inside.
template <TransitionKernel K>
double split_apply(const K& kernel, const SmallSetLadder& ladder, std::size_t n, double x,
                   const UniformPair& u, bool env_in_set = true) {
    validate(u);
    if (env_in_set && ladder.contains(n, x)) {
        const double alpha = ladder.alpha(n);
        if (u.u1 <= alpha) return nu_inverse_cdf(u.u2);
        return residual_inverse_cdf(kernel, alpha, x, u.u2);
    }
    return inverse_cdf(kernel, x, u.u2);
}

template <TransitionKernel K>
double split_apply(const SplitKernel<K>& sk, std::size_t n, double x, const UniformPair& u) {
    return split_apply(sk.kernel, sk.ladder, n, x, u);
}

/// min over the grids of q(x,z) - alpha/2. Nonnegative certifies
/// Q(x,.) >= alpha nu on the grid.
template <TransitionKernel K>
double validate_minorization(const K& kernel, double alpha, std::span<const double> x_grid,
                             std::span<const double> z_grid) {
    if (x_grid.empty() || z_grid.empty()) {
        throw ArgumentError("validate_minorization: empty grid");
    }
    double margin = std::numeric_limits<double>::infinity();
    for (double x : x_grid) {
        for (double z : z_grid) {
            margin = std::min(margin, kernel.density(x, z) - 0.5 * alpha);
        }
    }
    return margin;
}

template <TransitionKernel K>
double validate_minorization(const SplitKernel<K>& sk, std::size_t n,
                             std::span<const double> x_grid, std::span<const double> z_grid) {
    const double b = sk.ladder.half_width(n);
    for (double x : x_grid) {
        if (std::abs(x) > b) throw ArgumentError("validate_minorization: x grid leaves X_n");
    }
    for (double z : z_grid) {
        if (z < -1.0 || z > 1.0) throw ArgumentError("validate_minorization: z grid leaves [-1,1]");
    }
    return validate_minorization(sk.kernel, sk.ladder.alpha(n), x_grid, z_grid);
}

}  // namespace mcre
