#pragma once

// Discrete-time stochastic volatility chain in a random environment:
//
//   X_{t+1} = gamma X_t + rho e^{Z_t} eta_{t+1} + sqrt(1 - rho^2) e^{Z_t} eps_{t+1},
//   Z_t     = sum_k a_k eta_{t-k}   (causal Gaussian moving average),
//
// with environment Y_t = (Z_t, eta_{t+1}), small sets X_n = [-n, n] and
// Y_n = {|z| <= n, |eta| <= n}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "mcre/errors.hpp"
#include "mcre/kernel_core.hpp"
#include "mcre/numeric.hpp"
#include "mcre/random.hpp"

namespace mcre {

inline constexpr std::size_t kDefaultMaLag = 512;

/// Truncated moving-average coefficients a_0..a_lag and the variance they
/// leave out, sum_{k > lag} a_k^2.
struct MaCoefficients {
    std::vector<double> a;
    double variance_deficit = 0.0;
    std::string family = "explicit";

    std::size_t lag() const noexcept { return a.empty() ? 0 : a.size() - 1; }

    double variance() const noexcept {
        double v = 0.0;
        for (double c : a) v += c * c;
        return v;
    }

    static MaCoefficients explicit_list(std::vector<double> coeffs) {
        if (coeffs.empty()) coeffs.push_back(0.0);
        return {std::move(coeffs), 0.0, "explicit"};
    }

    /// a_k = ratio^k, |ratio| < 1.
    static MaCoefficients geometric(double ratio, std::size_t lag = kDefaultMaLag) {
        if (!(std::abs(ratio) < 1.0)) throw ParameterError("ma.ratio must satisfy |ratio| < 1");
        std::vector<double> a(lag + 1);
        double v = 1.0;
        for (auto& c : a) {
            c = v;
            v *= ratio;
        }
        const double r2 = ratio * ratio;
        return {std::move(a), std::pow(r2, static_cast<double>(lag + 1)) / (1.0 - r2), "geometric"};
    }

    /// a_k = scale (k+1)^{H - 3/2}, H in (0,1); square-summable since 2H - 3 < -1.
    static MaCoefficients fractional(double hurst, double scale, std::size_t lag = kDefaultMaLag) {
        if (!(hurst > 0.0 && hurst < 1.0)) throw ParameterError("ma.hurst must lie in (0,1)");
        std::vector<double> a(lag + 1);
        for (std::size_t k = 0; k <= lag; ++k) {
            a[k] = scale * std::pow(static_cast<double>(k + 1), hurst - 1.5);
        }
        // Integral estimate of the omitted tail sum_{j > lag+1} j^{2H-3}.
        const double start = static_cast<double>(lag) + 1.5;
        const double deficit = scale * scale * std::pow(start, 2.0 * hurst - 2.0) / (2.0 - 2.0 * hurst);
        return {std::move(a), deficit, "fractional"};
    }
};

struct LogvolParams {
    double gamma = 0.5;
    double rho = 0.3;
    MaCoefficients ma = MaCoefficients::geometric(0.5);
    Innovation eps = Innovation::standard_normal();
    double x0_mean = 0.0;  ///< initial law N(x0_mean, x0_sd^2); x0_sd = 0 is a point mass
    double x0_sd = 0.0;

    void validate() const {
        if (!(gamma > 0.0 && gamma < 1.0)) throw ParameterError("logvol.gamma must lie in (0,1)");
        if (!(std::abs(rho) < 1.0)) throw ParameterError("logvol.rho must satisfy |rho| < 1");
        if (ma.a.empty()) throw ParameterError("logvol.ma: no coefficients");
        for (double c : ma.a) {
            if (!std::isfinite(c)) throw ParameterError("logvol.ma: non-finite coefficient");
        }
        if (!std::isfinite(x0_mean) || !(x0_sd >= 0.0) || !std::isfinite(x0_sd)) {
            throw ParameterError("logvol.x0: initial law must have finite variance");
        }
    }

    double x0_second_moment() const noexcept { return x0_mean * x0_mean + x0_sd * x0_sd; }
};

struct EnvState {
    double z = 0.0;         ///< log-volatility Z_t
    double eta_next = 0.0;  ///< eta_{t+1}
};

/// (Z_t, eta_{t+1}) for t = 0..horizon from eta_{-lag}..eta_{horizon+1}.
inline std::vector<EnvState> ma_env_path(const LogvolParams& p, std::size_t horizon,
                                         RandomStream& stream) {
    if (horizon < 1) throw ArgumentError("ma_env_path: horizon must be >= 1");
    const std::size_t lag = p.ma.lag();
    // eta[i] holds eta_{i - lag}.
    std::vector<double> eta(lag + horizon + 2);
    for (auto& e : eta) e = stream.normal();
    std::vector<EnvState> out(horizon + 1);
    for (std::size_t t = 0; t <= horizon; ++t) {
        double z = 0.0;
        const std::size_t base = t + lag;  // index of eta_t
        for (std::size_t k = 0; k <= lag; ++k) z += p.ma.a[k] * eta[base - k];
        out[t] = {z, eta[base + 1]};
    }
    return out;
}

inline std::vector<EnvState> ma_env_path(const LogvolParams& p, std::size_t horizon,
                                         std::uint64_t seed) {
    RandomStream stream(seed, stream_tag::environment, 0);
    return ma_env_path(p, horizon, stream);
}

/// One draw from a standardized innovation law.
inline double draw_innovation(const Innovation& law, RandomStream& stream) {
    if (law.kind() == Innovation::Kind::normal) return stream.normal();
    const double u = stream.uniform();
    return std::numbers::sqrt3 / std::numbers::pi * std::log(u / (1.0 - u));
}

inline double logvol_step(const LogvolParams& p, double x, const EnvState& env, double eps) {
    const double vol = std::exp(env.z);
    return p.gamma * x + p.rho * vol * env.eta_next + std::sqrt(1.0 - p.rho * p.rho) * vol * eps;
}

/// Half-width of the innovation window that can carry any x, eta in [-n,n],
/// e^{Z} in [e^{-n}, e^{n}] into [-1, 1].
inline double logvol_dn(const LogvolParams& p, std::size_t n) {
    const double nd = static_cast<double>(n);
    return ((1.0 + p.gamma * nd) * std::exp(nd) + std::abs(p.rho) * nd) /
           std::sqrt(1.0 - p.rho * p.rho);
}

/// log alpha_n; stays finite where alpha_n itself underflows.
inline double logvol_log_alpha(const LogvolParams& p, std::size_t n) {
    return std::log(2.0) + p.eps.log_pdf(logvol_dn(p, n)) -
           0.5 * std::log(1.0 - p.rho * p.rho) - static_cast<double>(n);
}

/// alpha_n = 2 f(d(n)) / (sqrt(1 - rho^2) e^n), f symmetric unimodal. The
/// divisor is the smallest density scale reachable on the small set.
inline double logvol_alpha(const LogvolParams& p, std::size_t n) {
    return 2.0 * p.eps.pdf(logvol_dn(p, n)) /
           (std::sqrt(1.0 - p.rho * p.rho) * std::exp(static_cast<double>(n)));
}

inline LocationScaleKernel logvol_kernel(const LogvolParams& p, const EnvState& env) {
    const double vol = std::exp(env.z);
    return LocationScaleKernel{p.gamma, p.rho * vol * env.eta_next,
                               std::sqrt(1.0 - p.rho * p.rho) * vol, p.eps};
}

inline bool logvol_env_in_set(std::size_t n, const EnvState& env) {
    const double nd = static_cast<double>(n);
    return std::abs(env.z) <= nd && std::abs(env.eta_next) <= nd;
}

/// Grid certification of alpha_n over (x, z, eta) in [-n,n]^3 and targets in
/// [-1,1]. Returns min q - alpha_n / 2.
inline double logvol_certify(const LogvolParams& p, std::size_t n, std::size_t points = 21) {
    const double nd = static_cast<double>(n);
    const std::size_t k = n == 0 ? 1 : points;
    const auto box = linspace(-nd, nd, k);
    const auto targets = linspace(-1.0, 1.0, points);
    const double alpha = logvol_alpha(p, n);
    double margin = std::numeric_limits<double>::infinity();
    for (double z : box) {
        for (double eta : box) {
            const auto kernel = logvol_kernel(p, EnvState{z, eta});
            margin = std::min(margin, validate_minorization(kernel, alpha, box, targets));
        }
    }
    return margin;
}

inline double certified_logvol_alpha(const LogvolParams& p, std::size_t n,
                                     std::size_t points = 21) {
    const double margin = logvol_certify(p, n, points);
    if (margin < 0.0) {
        throw CertificationError("logvol alpha_" + std::to_string(n) +
                                 " fails grid certification (margin " + std::to_string(margin) + ")");
    }
    return logvol_alpha(p, n);
}

/// K = E[e^{2 Z_0}] (rho^2 E[eta^2] + (1 - rho^2) E[eps^2]) / (1 - gamma^2) + E[X_0^2].
inline double logvol_moment_bound(const LogvolParams& p) {
    const double ez2 = std::exp(2.0 * p.ma.variance());
    const double r2 = p.rho * p.rho;
    return ez2 * (r2 + (1.0 - r2) * p.eps.second_moment()) / (1.0 - p.gamma * p.gamma) +
           p.x0_second_moment();
}

/// min(1, K/n^2 + P(|Z_0| > n) + P(|eta| > n)); the trivial bound 1 at n = 0.
inline double logvol_tail(const LogvolParams& p, std::size_t n) {
    if (n == 0) return 1.0;
    const double nd = static_cast<double>(n);
    const double sz = std::sqrt(p.ma.variance());
    const double z_tail = sz > 0.0 ? normal_two_sided_tail(nd / sz) : 0.0;
    const double value = logvol_moment_bound(p) / (nd * nd) + z_tail + normal_two_sided_tail(nd);
    return std::min(1.0, value);
}

/// Adapter exposing the model to the coupling engine.
class LogvolModel {
public:
    using Environment = EnvState;

    explicit LogvolModel(LogvolParams params)
        : params_(std::move(params)),
          ladder_([](std::size_t n) { return static_cast<double>(n); },
                  [p = params_](std::size_t n) { return logvol_alpha(p, n); }) {
        params_.validate();
    }

    const LogvolParams& params() const noexcept { return params_; }
    LocationScaleKernel kernel_at(const EnvState& y) const { return logvol_kernel(params_, y); }
    const SmallSetLadder& ladder() const noexcept { return ladder_; }
    bool env_in_set(std::size_t n, const EnvState& y) const { return logvol_env_in_set(n, y); }

private:
    LogvolParams params_;
    SmallSetLadder ladder_;
};

}  // namespace mcre
