#pragma once

// Euler-Maruyama simulation of the log-price
//
//   dL_t = [zeta(L_t) - V_t^2/2] dt + rho_t V_t dB_t + sqrt(1 - rho_t^2) V_t dW_t,
//
// with V_t = exp(J_t), J_t = int_{-inf}^t K(t - s) dB_s approximated by a
// finite-history convolution run through a burn-in window.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mcre/errors.hpp"
#include "mcre/numeric.hpp"
#include "mcre/parallel.hpp"
#include "mcre/random.hpp"

namespace mcre {

class VolatilityKernel {
public:
    enum class Kind { zero, exponential, fractional };

    static VolatilityKernel zero() { return VolatilityKernel(Kind::zero, 0.0, 0.0, 0.0); }

    /// K(u) = scale e^{-rate u}.
    static VolatilityKernel exponential(double rate, double scale = 1.0) {
        if (!(rate > 0.0) || !std::isfinite(rate)) throw ParameterError("kernel.rate must be > 0");
        return VolatilityKernel(Kind::exponential, rate, scale, 0.0);
    }

    /// K(u) = scale sqrt(2H) u^{H - 1/2} on (0, cutoff], zero beyond.
    static VolatilityKernel fractional(double hurst, double scale = 1.0, double cutoff = 1.0) {
        if (!(hurst > 0.0 && hurst < 1.0)) throw ParameterError("kernel.hurst must lie in (0,1)");
        if (!(cutoff > 0.0) || !std::isfinite(cutoff)) throw ParameterError("kernel.cutoff must be > 0");
        return VolatilityKernel(Kind::fractional, hurst, scale, cutoff);
    }

    Kind kind() const noexcept { return kind_; }
    std::string name() const {
        switch (kind_) {
            case Kind::zero: return "zero";
            case Kind::exponential: return "exponential";
            case Kind::fractional: return "fractional";
        }
        return "?";
    }
    double rate() const noexcept { return param_; }
    double hurst() const noexcept { return param_; }
    double scale() const noexcept { return scale_; }
    double cutoff() const noexcept { return cutoff_; }

    double value(double u) const noexcept {
        switch (kind_) {
            case Kind::zero: return 0.0;
            case Kind::exponential: return u >= 0.0 ? scale_ * std::exp(-param_ * u) : 0.0;
            case Kind::fractional:
                if (!(u > 0.0) || u > cutoff_) return 0.0;
                return scale_ * std::sqrt(2.0 * param_) * std::pow(u, param_ - 0.5);
        }
        return 0.0;
    }

    /// int_a^b K(u)^2 du for 0 <= a <= b (b may be infinite).
    double integral_sq(double a, double b) const noexcept {
        const double s2 = scale_ * scale_;
        switch (kind_) {
            case Kind::zero: return 0.0;
            case Kind::exponential:
                return s2 * (std::exp(-2.0 * param_ * a) - std::exp(-2.0 * param_ * b)) / (2.0 * param_);
            case Kind::fractional: {
                const double hi = std::min(b, cutoff_);
                const double lo = std::min(a, cutoff_);
                return s2 * (std::pow(hi, 2.0 * param_) - std::pow(lo, 2.0 * param_));
            }
        }
        return 0.0;
    }

    double total_integral_sq() const noexcept {
        return integral_sq(0.0, std::numeric_limits<double>::infinity());
    }

    /// 1/rate for the exponential kernel; for the fractional kernel the time at
    /// which int_0^t K^2 reaches 99% of its total.
    double memory_scale() const noexcept {
        switch (kind_) {
            case Kind::zero: return 0.0;
            case Kind::exponential: return 1.0 / param_;
            case Kind::fractional: return cutoff_ * std::pow(0.99, 1.0 / (2.0 * param_));
        }
        return 0.0;
    }

    /// Cell-averaged weights w_k = sqrt(int_{(k-1)dt}^{k dt} K^2 / dt), k = 1..count.
    /// sum_k w_k^2 dt reproduces int K^2 exactly, which the left-point value
    /// K((k-1)dt) cannot do for the singular fractional kernel.
    std::vector<double> cell_weights(double dt, std::size_t count) const {
        std::vector<double> w(count);
        for (std::size_t k = 1; k <= count; ++k) {
            const double a = static_cast<double>(k - 1) * dt;
            const double b = static_cast<double>(k) * dt;
            w[k - 1] = std::sqrt(std::max(0.0, integral_sq(a, b)) / dt);
        }
        return w;
    }

private:
    VolatilityKernel(Kind kind, double param, double scale, double cutoff)
        : kind_(kind), param_(param), scale_(scale), cutoff_(cutoff) {}

    Kind kind_;
    double param_;
    double scale_;
    double cutoff_;
};

/// Streaming evaluator of J_i = sum_{k>=1} w_k dB_{i-k}, started from an empty
/// history. push(dB_i) returns J_{i+1}.
class VolatilityFilter {
public:
    VolatilityFilter(const VolatilityKernel& kernel, double dt) : kind_(kernel.kind()) {
        if (!(dt > 0.0)) throw ArgumentError("VolatilityFilter: dt must be > 0");
        if (kind_ == VolatilityKernel::Kind::exponential) {
            w1_ = kernel.cell_weights(dt, 1)[0];
            decay_ = std::exp(-kernel.rate() * dt);
        } else if (kind_ == VolatilityKernel::Kind::fractional) {
            const auto cells = static_cast<std::size_t>(std::ceil(kernel.cutoff() / dt - 1e-9));
            weights_ = kernel.cell_weights(dt, std::max<std::size_t>(cells, 1));
            history_.assign(weights_.size(), 0.0);
        }
    }

    double current() const noexcept { return j_; }

    double push(double db) {
        switch (kind_) {
            case VolatilityKernel::Kind::zero: break;
            case VolatilityKernel::Kind::exponential: j_ = decay_ * j_ + w1_ * db; break;
            case VolatilityKernel::Kind::fractional: {
                head_ = head_ == 0 ? history_.size() - 1 : head_ - 1;
                history_[head_] = db;
                double acc = 0.0;
                const std::size_t m = history_.size();
                for (std::size_t k = 0; k < m; ++k) {
                    std::size_t idx = head_ + k;
                    if (idx >= m) idx -= m;
                    acc += weights_[k] * history_[idx];
                }
                j_ = acc;
                break;
            }
        }
        return j_;
    }

private:
    VolatilityKernel::Kind kind_;
    double w1_ = 0.0;
    double decay_ = 0.0;
    std::vector<double> weights_;
    std::vector<double> history_;  // ring buffer, history_[head_] is the newest increment
    std::size_t head_ = 0;
    double j_ = 0.0;
};

inline std::size_t steps_for(double time, double dt) {
    return static_cast<std::size_t>(std::llround(time / dt));
}

/// V at grid points from the end of the burn-in window to the end of dB.
inline std::vector<double> volatility_path(const VolatilityKernel& k, std::span<const double> db,
                                           double dt, double burn_in) {
    if (!(dt > 0.0)) throw ArgumentError("volatility_path: dt must be > 0");
    const std::size_t nb = steps_for(burn_in, dt);
    if (db.size() <= nb) throw ArgumentError("volatility_path: increments do not cover burn-in");
    VolatilityFilter filter(k, dt);
    std::vector<double> v;
    v.reserve(db.size() - nb + 1);
    for (std::size_t i = 0; i < db.size(); ++i) {
        if (i >= nb) v.push_back(std::exp(filter.current()));
        filter.push(db[i]);
    }
    v.push_back(std::exp(filter.current()));
    return v;
}

/// zeta(x) = -kappa x + amplitude sin x.
struct Drift {
    double kappa = 1.0;
    double amplitude = 0.0;

    static Drift linear(double kappa) { return {kappa, 0.0}; }
    static Drift saturating(double kappa, double amplitude) { return {kappa, amplitude}; }

    double operator()(double x) const noexcept { return -kappa * x + amplitude * std::sin(x); }

    /// K with zeta(x)^2 <= K x^2 + K.
    double linear_growth() const noexcept {
        if (amplitude == 0.0) return kappa * kappa;
        return std::max(2.0 * kappa * kappa, 2.0 * amplitude * amplitude);
    }

    /// sup |zeta'|, sup |zeta''|, sup |zeta'''|.
    double derivative_bound(int order) const noexcept {
        return order == 1 ? std::abs(kappa) + std::abs(amplitude) : std::abs(amplitude);
    }
};

/// Constant correlation, or rho_t = tanh(gain J'_t) with J' driven by its own
/// kernel and an independent Brownian motion.
struct RhoSpec {
    double constant = 0.0;
    bool dynamic = false;
    double gain = 0.0;
    VolatilityKernel kernel = VolatilityKernel::zero();

    static RhoSpec fixed(double rho) { return {rho, false, 0.0, VolatilityKernel::zero()}; }
    static RhoSpec tanh_of(double gain, VolatilityKernel k) { return {0.0, true, gain, k}; }
};

struct SdeParams {
    Drift zeta = Drift::linear(1.0);
    VolatilityKernel kernel = VolatilityKernel::exponential(1.0);
    RhoSpec rho = RhoSpec::fixed(0.3);
    double dt = 1.0 / 256.0;
    double horizon = 20.0;
    double burn_in = -1.0;  ///< negative selects 10 x memory scale
    double dissipativity_alpha = 1.0;
    double dissipativity_beta = 0.0;
    double dissipativity_radius = 50.0;

    double effective_burn_in() const {
        const double memory = std::max(kernel.memory_scale(),
                                       rho.dynamic ? rho.kernel.memory_scale() : 0.0);
        return burn_in < 0.0 ? 10.0 * memory : burn_in;
    }

    void validate() const;
};

inline double euler_step(const Drift& zeta, double dt, double L, double V, double rho, double dB,
                         double dW) {
    return L + (zeta(L) - 0.5 * V * V) * dt + rho * V * dB + std::sqrt(1.0 - rho * rho) * V * dW;
}

inline double euler_step(const SdeParams& p, double L, double V, double rho, double dB, double dW) {
    return euler_step(p.zeta, p.dt, L, V, rho, dB, dW);
}

/// min over the grid of -alpha x^2 + beta - x zeta(x).
template <class Zeta>
double dissipativity_check(const Zeta& zeta, double alpha, double beta, std::span<const double> grid) {
    if (grid.empty()) throw ArgumentError("dissipativity_check: empty grid");
    double margin = std::numeric_limits<double>::infinity();
    for (double x : grid) margin = std::min(margin, -alpha * x * x + beta - x * zeta(x));
    return margin;
}

inline void SdeParams::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("sde.dt must be > 0");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ParameterError("sde.horizon must be > 0");
    if (!rho.dynamic && !(std::abs(rho.constant) < 1.0)) {
        throw ParameterError("sde.rho must satisfy |rho| < 1");
    }
    const double memory = std::max(kernel.memory_scale(), rho.dynamic ? rho.kernel.memory_scale() : 0.0);
    if (effective_burn_in() < 10.0 * memory * (1.0 - 1e-12)) {
        throw ParameterError("sde.burn_in must be at least 10 x the kernel memory scale");
    }
    if (!(dissipativity_alpha > 0.0) || !(dissipativity_beta >= 0.0)) {
        throw ParameterError("sde.dissipativity: need alpha > 0 and beta >= 0");
    }
    if (!(dissipativity_radius > 0.0)) throw ParameterError("sde.dissipativity.radius must be > 0");
    const auto grid = linspace(-dissipativity_radius, dissipativity_radius, 20001);
    if (dissipativity_check(zeta, dissipativity_alpha, dissipativity_beta, grid) < -1e-9) {
        throw ParameterError("sde.zeta fails the dissipativity check for the declared (alpha, beta)");
    }
}

/// E[V^p] = exp(p^2 s2 / 2) for a stationary J with variance s2.
inline double volatility_moment(const VolatilityKernel& k, double p) {
    return std::exp(0.5 * p * p * k.total_integral_sq());
}

struct EnsembleSamples {
    std::vector<double> initial_states;
    std::vector<double> checkpoints;  ///< realized times on the dt grid
    std::vector<std::size_t> checkpoint_steps;
    std::size_t replicas = 0;
    /// values[(i * checkpoints.size() + c) * replicas + r]
    std::vector<double> values;

    std::span<const double> at(std::size_t initial, std::size_t checkpoint) const {
        const std::size_t off = (initial * checkpoints.size() + checkpoint) * replicas;
        return std::span<const double>(values).subspan(off, replicas);
    }
};

struct EnsembleOptions {
    bool shared_noise = false;  ///< reuse replica r's noise for every initial state
    double max_steps = 5e10;    ///< cap on replicas x initial states x time steps
};

inline EnsembleSamples simulate_ensemble(const SdeParams& p, std::span<const double> L0_list,
                                         std::size_t replicas, std::span<const double> checkpoints,
                                         std::uint64_t seed, EnsembleOptions opt = {}) {
    p.validate();
    if (L0_list.empty()) throw ArgumentError("simulate_ensemble: no initial states");
    if (replicas == 0) throw ArgumentError("simulate_ensemble: replicas must be >= 1");
    EnsembleSamples out;
    out.initial_states.assign(L0_list.begin(), L0_list.end());
    out.replicas = replicas;
    for (double t : checkpoints) {
        if (!(t >= 0.0 && t <= p.horizon * (1.0 + 1e-12))) {
            throw ArgumentError("simulate_ensemble: checkpoint outside [0, horizon]");
        }
        const std::size_t s = steps_for(t, p.dt);
        out.checkpoint_steps.push_back(s);
        out.checkpoints.push_back(static_cast<double>(s) * p.dt);
    }
    const std::size_t nb = steps_for(p.effective_burn_in(), p.dt);
    const std::size_t nh = steps_for(p.horizon, p.dt);
    const double work = static_cast<double>(replicas) * static_cast<double>(L0_list.size()) *
                        static_cast<double>(nb + nh);
    if (work > opt.max_steps) throw RunError("simulate_ensemble: resource cap exceeded");

    const std::size_t n_init = L0_list.size();
    const std::size_t n_cp = checkpoints.size();
    out.values.assign(n_init * n_cp * replicas, 0.0);
    const double sqdt = std::sqrt(p.dt);

    // One path set per (noise stream, initial states driven by it).
    const std::size_t groups = opt.shared_noise ? 1 : n_init;
    const std::size_t per_group = opt.shared_noise ? n_init : 1;

    parallel_for(replicas * groups, [&](std::size_t job) {
        const std::size_t r = job % replicas;
        const std::size_t g = job / replicas;
        const std::uint64_t index = static_cast<std::uint64_t>(g) * replicas + r;
        RandomStream bstream(seed, stream_tag::brownian, index);
        RandomStream wstream(seed, stream_tag::innovations, index);
        RandomStream cstream(seed, stream_tag::correlation, index);
        VolatilityFilter jf(p.kernel, p.dt);
        VolatilityFilter rf(p.rho.dynamic ? p.rho.kernel : VolatilityKernel::zero(), p.dt);
        for (std::size_t i = 0; i < nb; ++i) {
            jf.push(sqdt * bstream.normal());
            if (p.rho.dynamic) rf.push(sqdt * cstream.normal());
        }
        std::vector<double> L(per_group);
        for (std::size_t k = 0; k < per_group; ++k) L[k] = L0_list[g * per_group + k];
        auto record = [&](std::size_t step) {
            for (std::size_t c = 0; c < n_cp; ++c) {
                if (out.checkpoint_steps[c] != step) continue;
                for (std::size_t k = 0; k < per_group; ++k) {
                    const std::size_t init = g * per_group + k;
                    out.values[(init * n_cp + c) * replicas + r] = L[k];
                }
            }
        };
        record(0);
        for (std::size_t i = 0; i < nh; ++i) {
            const double V = std::exp(jf.current());
            const double rho = p.rho.dynamic ? std::tanh(p.rho.gain * rf.current()) : p.rho.constant;
            const double dB = sqdt * bstream.normal();
            const double dW = sqdt * wstream.normal();
            for (auto& l : L) l = euler_step(p, l, V, rho, dB, dW);
            jf.push(dB);
            if (p.rho.dynamic) rf.push(sqdt * cstream.normal());
            record(i + 1);
        }
    });
    return out;
}

/// Constants on the right side of 6h^2 [K Ltilde + K + E[V^4]/4] + 6h E[V^2].
struct IncrementConstants {
    double K = 1.0;
    double L_tilde = 0.0;
    double ev2 = 1.0;
    double ev4 = 1.0;

    double bound(double h) const noexcept {
        return 6.0 * h * h * (K * L_tilde + K + ev4 / 4.0) + 6.0 * h * ev2;
    }
};

struct IncrementCheck {
    double h = 0.0;
    double lhs = 0.0;  ///< sample E|L_{t+h} - L_t|^2
    double standard_error = 0.0;
    double rhs = 0.0;
    bool pass = false;
};

inline IncrementCheck increment_moment_check(std::span<const double> at_t,
                                             std::span<const double> at_t_plus_h, double h,
                                             const IncrementConstants& c) {
    if (at_t.size() != at_t_plus_h.size() || at_t.empty()) {
        throw ArgumentError("increment_moment_check: paired samples required");
    }
    if (!(h >= 0.0)) throw ArgumentError("increment_moment_check: h must be >= 0");
    std::vector<double> sq(at_t.size());
    for (std::size_t i = 0; i < sq.size(); ++i) {
        const double d = at_t_plus_h[i] - at_t[i];
        sq[i] = d * d;
    }
    const auto est = estimate_mean(sq);
    IncrementCheck out;
    out.h = h;
    out.lhs = est.mean;
    out.standard_error = est.standard_error;
    out.rhs = c.bound(h);
    out.pass = out.lhs <= out.rhs + 4.0 * out.standard_error;
    return out;
}

/// Increment constants for p with Ltilde taken from sampled second moments.
inline IncrementConstants increment_constants(const SdeParams& p, double L_tilde) {
    return {p.zeta.linear_growth(), L_tilde, volatility_moment(p.kernel, 2.0),
            volatility_moment(p.kernel, 4.0)};
}

}  // namespace mcre
