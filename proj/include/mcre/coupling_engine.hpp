#pragma once

// Backward-composition coupling.
//
// Uniforms are indexed by lag: U[k] plays the role of U_{-k}. An orbit of
// depth d started at x applies U[d-1] first and U[0] last, so orbits of
// different depth share exactly the uniforms with matching lags. In a random
// environment the step that consumes U[k] also consumes env[k] = Y_{-k-1}:
// the environment value at the start time of that step.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcre/errors.hpp"
#include "mcre/kernel_core.hpp"
#include "mcre/random.hpp"

namespace mcre {

enum class CouplingEvent : char {
    A = 'A',  ///< orbits equal
    B = 'B',  ///< unequal, both in the small set, environment in its small set
    C = 'C',  ///< otherwise
};

struct CouplingTrace {
    /// One tag per shared step (before it is applied) plus one for the final pair.
    std::vector<CouplingEvent> events;
    std::optional<std::size_t> couple_step;
    std::pair<double, double> final_states{0.0, 0.0};

    bool coupled() const noexcept { return couple_step.has_value(); }
};

/// Uniform pairs stored by lag: at(k) is U_{-k}.
class UniformSequence {
public:
    UniformSequence() = default;
    explicit UniformSequence(std::vector<UniformPair> by_lag) : pairs_(std::move(by_lag)) {}

    static UniformSequence generate(RandomStream& stream, std::size_t length) {
        std::vector<UniformPair> pairs(length);
        for (auto& p : pairs) {
            p.u1 = stream.uniform();
            p.u2 = stream.uniform();
        }
        return UniformSequence(std::move(pairs));
    }

    std::size_t size() const noexcept { return pairs_.size(); }
    const UniformPair& at(std::size_t lag) const { return pairs_.at(lag); }

private:
    std::vector<UniformPair> pairs_;
};

struct OrbitStart {
    double x = 0.0;
    std::size_t depth = 0;
};

namespace detail {

/// Runs two backward orbits with shared uniforms. `step(k, x)` applies the
/// map that consumes lag k; `in_sets(k, xa, xb)` decides event B for the
/// step at lag k.
template <class Step, class InSets>
CouplingTrace couple_orbits(OrbitStart a, OrbitStart b, Step&& step, InSets&& in_sets) {
    const bool a_deeper = a.depth >= b.depth;
    OrbitStart deep = a_deeper ? a : b;
    OrbitStart shallow = a_deeper ? b : a;

    double xd = deep.x;
    for (std::size_t k = deep.depth; k > shallow.depth; --k) xd = step(k - 1, xd);
    double xs = shallow.x;

    auto classify = [&](std::size_t lag) {
        if (xd == xs) return CouplingEvent::A;
        return in_sets(lag, xd, xs) ? CouplingEvent::B : CouplingEvent::C;
    };

    CouplingTrace trace;
    trace.events.reserve(shallow.depth + 1);
    for (std::size_t k = shallow.depth; k > 0; --k) {
        const CouplingEvent e = classify(k - 1);
        if (e == CouplingEvent::A && !trace.couple_step) trace.couple_step = trace.events.size();
        trace.events.push_back(e);
        xd = step(k - 1, xd);
        xs = step(k - 1, xs);
    }
    const CouplingEvent last = classify(0);
    if (last == CouplingEvent::A && !trace.couple_step) trace.couple_step = trace.events.size();
    trace.events.push_back(last);
    trace.final_states = a_deeper ? std::pair{xd, xs} : std::pair{xs, xd};
    return trace;
}

inline void require_uniforms(const UniformSequence& u, std::size_t t) {
    if (u.size() < t) {
        throw ArgumentError("uniform sequence shorter than the requested depth (" +
                            std::to_string(u.size()) + " < " + std::to_string(t) + ")");
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Plain Markov chains.

/// [T^n(U_0) o ... o T^n(U_{-t+1})](x0).
template <TransitionKernel K>
double backward_orbit(const SplitKernel<K>& sk, std::size_t n, double x0,
                      const UniformSequence& u, std::size_t t) {
    detail::require_uniforms(u, t);
    double x = x0;
    for (std::size_t k = t; k > 0; --k) x = split_apply(sk, n, x, u.at(k - 1));
    return x;
}

/// Two starts, possibly of different depth, sharing uniforms.
template <TransitionKernel K>
CouplingTrace coupled_starts(const SplitKernel<K>& sk, std::size_t n, OrbitStart a,
                             OrbitStart b, const UniformSequence& u) {
    detail::require_uniforms(u, std::max(a.depth, b.depth));
    return detail::couple_orbits(
        a, b, [&](std::size_t k, double x) { return split_apply(sk, n, x, u.at(k)); },
        [&](std::size_t, double xa, double xb) {
            return sk.ladder.contains(n, xa) && sk.ladder.contains(n, xb);
        });
}

/// Depth-t versus depth-s orbits from the same x0 (s == t is allowed).
template <TransitionKernel K>
CouplingTrace coupled_pair(const SplitKernel<K>& sk, std::size_t n, double x0, std::size_t s,
                           std::size_t t, const UniformSequence& u) {
    if (s < 1 || s > t) throw ArgumentError("coupled_pair: need 1 <= s <= t");
    return coupled_starts(sk, n, OrbitStart{x0, t}, OrbitStart{x0, s}, u);
}

/// (1 - 2 eps)(1 - (1 - alpha)^s), clamped below at 0.
inline double coupling_lower_bound(double alpha, std::size_t s, double eps) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ArgumentError("coupling_lower_bound: alpha outside (0,1]");
    if (!(eps >= 0.0 && eps <= 0.5)) throw ArgumentError("coupling_lower_bound: eps outside [0,1/2]");
    if (s < 1) throw ArgumentError("coupling_lower_bound: s must be >= 1");
    const double miss = std::exp(static_cast<double>(s) * std::log1p(-alpha));
    return std::max(0.0, (1.0 - 2.0 * eps) * (1.0 - miss));
}

struct TvUpperBound {
    double bound = 0.0;
    double half_width = 0.0;
    double uncoupled_fraction = 0.0;
    std::size_t replicas = 0;
};

/// 2 P(orbits differ), estimated from traces, with a 3-sigma binomial half width.
inline TvUpperBound tv_upper_from_coupling(std::span<const CouplingTrace> traces) {
    if (traces.empty()) throw ArgumentError("tv_upper_from_coupling: no traces");
    std::size_t uncoupled = 0;
    for (const auto& tr : traces) uncoupled += tr.coupled() ? 0 : 1;
    const double n = static_cast<double>(traces.size());
    const double f = static_cast<double>(uncoupled) / n;
    TvUpperBound out;
    out.uncoupled_fraction = f;
    out.replicas = traces.size();
    out.bound = 2.0 * f;
    out.half_width = 2.0 * 3.0 * std::sqrt(f * (1.0 - f) / n);
    return out;
}

// ---------------------------------------------------------------------------
// Block schedules.

struct BlockSchedule {
    std::vector<std::size_t> n_of_m;    ///< ladder index of block m (m = 1..m_max)
    std::vector<std::uint64_t> N_of_m;  ///< length of block m
    std::vector<std::uint64_t> M_of_m;  ///< M_0 = 0, M_m = N(1) + ... + N(m)

    std::size_t blocks() const noexcept { return n_of_m.size(); }
    std::uint64_t total_steps() const noexcept { return M_of_m.empty() ? 0 : M_of_m.back(); }

    /// Block (1-based) containing the step that consumes lag k.
    std::size_t block_of_lag(std::uint64_t k) const {
        auto it = std::upper_bound(M_of_m.begin(), M_of_m.end(), k);
        if (it == M_of_m.end()) throw ArgumentError("lag beyond the block schedule");
        return static_cast<std::size_t>(it - M_of_m.begin());
    }

    std::size_t ladder_index_at_lag(std::uint64_t k) const { return n_of_m[block_of_lag(k) - 1]; }

    /// Largest boundary M_m strictly below t (0 when t <= M_1).
    std::uint64_t boundary_below(std::uint64_t t) const {
        std::uint64_t best = 0;
        for (auto m : M_of_m) {
            if (m < t) best = m;
        }
        return best;
    }

    /// One block with a fixed ladder index; for plain-chain comparisons.
    static BlockSchedule single_block(std::size_t n, std::uint64_t length) {
        return BlockSchedule{{n}, {length}, {0, length}};
    }
};

struct ScheduleOptions {
    std::size_t n_min = 1;
    std::size_t n_cap = std::size_t{1} << 20;
    std::uint64_t block_length_cap = 1'000'000'000'000ULL;
};

/// n(m) = least n with tail(n) <= 2^-m; N(m) = least N with
/// (1 - alpha(n(m)))^N <= 2^-m; M_m cumulative.
inline BlockSchedule block_schedule(const std::function<double(std::size_t)>& tail,
                                    const std::function<double(std::size_t)>& alpha,
                                    std::size_t m_max, const ScheduleOptions& opt = {}) {
    BlockSchedule out;
    out.M_of_m.push_back(0);
    std::size_t n_floor = opt.n_min;
    for (std::size_t m = 1; m <= m_max; ++m) {
        const double target = std::ldexp(1.0, -static_cast<int>(m));

        // Doubling, then bisection on (lo, hi]; tail is nonincreasing.
        std::size_t hi = n_floor;
        std::size_t lo = n_floor;
        bool found = tail(hi) <= target;
        while (!found) {
            lo = hi;
            hi = std::max<std::size_t>(1, hi * 2);
            if (hi > opt.n_cap) {
                throw ScheduleError("block " + std::to_string(m) + ": tail never reaches 2^-" +
                                    std::to_string(m) + " below n = " + std::to_string(opt.n_cap));
            }
            found = tail(hi) <= target;
        }
        if (hi != n_floor) {
            while (hi - lo > 1) {
                const std::size_t mid = lo + (hi - lo) / 2;
                if (tail(mid) <= target) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
        }
        const std::size_t n = hi;
        n_floor = n;

        const double a = alpha(n);
        std::uint64_t N = 1;
        if (!(a >= 1.0)) {
            const double log_miss = std::log1p(-a);
            if (!(a > 0.0) || !(log_miss < 0.0)) {
                throw ScheduleError("block " + std::to_string(m) + ": alpha(" + std::to_string(n) +
                                    ") = " + std::to_string(a) +
                                    " is too small for (1-alpha)^N <= 2^-m to be reachable");
            }
            const double need = static_cast<double>(m) * std::numbers::ln2;
            const double guess = std::ceil(need / -log_miss);
            if (!(guess <= static_cast<double>(opt.block_length_cap))) {
                throw ScheduleError("block " + std::to_string(m) + ": block length exceeds cap");
            }
            N = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(guess));
            auto ok = [&](std::uint64_t len) {
                return static_cast<double>(len) * log_miss <= -need;
            };
            while (!ok(N)) ++N;
            while (N > 1 && ok(N - 1)) --N;
        }
        out.n_of_m.push_back(n);
        out.N_of_m.push_back(N);
        out.M_of_m.push_back(out.M_of_m.back() + N);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Chains in a random environment.

/// env.at(k) is Y_{-k-1}, the environment seen by the step consuming lag k.
template <class Env>
class EnvironmentWindow {
public:
    EnvironmentWindow() = default;
    explicit EnvironmentWindow(std::vector<Env> by_lag) : by_lag_(std::move(by_lag)) {}

    /// From a chronological path y[0..t-1] (oldest first) ending just before time 0.
    static EnvironmentWindow from_chronological(std::span<const Env> path) {
        return EnvironmentWindow(std::vector<Env>(path.rbegin(), path.rend()));
    }

    std::size_t size() const noexcept { return by_lag_.size(); }
    const Env& at(std::size_t lag) const { return by_lag_.at(lag); }

private:
    std::vector<Env> by_lag_;
};

template <class M>
concept EnvironmentModel =
    requires(const M& m, const typename M::Environment& y, std::size_t n) {
        { m.kernel_at(y) } -> TransitionKernel;
        { m.ladder() } -> std::convertible_to<const SmallSetLadder&>;
        { m.env_in_set(n, y) } -> std::convertible_to<bool>;
    };

namespace detail {

template <EnvironmentModel M>
struct EnvStepper {
    const M& model;
    const EnvironmentWindow<typename M::Environment>& env;
    const BlockSchedule& schedule;
    const UniformSequence& u;

    double operator()(std::size_t k, double x) const {
        const std::size_t n = schedule.ladder_index_at_lag(k);
        const auto& y = env.at(k);
        return split_apply(model.kernel_at(y), model.ladder(), n, x, u.at(k),
                           model.env_in_set(n, y));
    }

    bool in_sets(std::size_t k, double xa, double xb) const {
        const std::size_t n = schedule.ladder_index_at_lag(k);
        return model.ladder().contains(n, xa) && model.ladder().contains(n, xb) &&
               model.env_in_set(n, env.at(k));
    }
};

template <class Env>
void require_window(const EnvironmentWindow<Env>& env, const BlockSchedule& schedule,
                    const UniformSequence& u, std::size_t depth) {
    require_uniforms(u, depth);
    if (env.size() < depth) throw ArgumentError("environment window shorter than the depth");
    if (depth > schedule.total_steps()) {
        throw ArgumentError("depth " + std::to_string(depth) + " exceeds the schedule's M_max = " +
                            std::to_string(schedule.total_steps()));
    }
}

}  // namespace detail

template <EnvironmentModel M>
double backward_orbit(const M& model, const EnvironmentWindow<typename M::Environment>& env,
                      const BlockSchedule& schedule, double x0, const UniformSequence& u,
                      std::size_t t) {
    detail::require_window(env, schedule, u, t);
    detail::EnvStepper<M> step{model, env, schedule, u};
    double x = x0;
    for (std::size_t k = t; k > 0; --k) x = step(k - 1, x);
    return x;
}

template <EnvironmentModel M>
CouplingTrace mcre_coupled_starts(const M& model,
                                  const EnvironmentWindow<typename M::Environment>& env,
                                  const BlockSchedule& schedule, OrbitStart a, OrbitStart b,
                                  const UniformSequence& u) {
    detail::require_window(env, schedule, u, std::max(a.depth, b.depth));
    detail::EnvStepper<M> step{model, env, schedule, u};
    return detail::couple_orbits(
        a, b, step, [&](std::size_t k, double xa, double xb) { return step.in_sets(k, xa, xb); });
}

/// Depth-t orbit against the orbit of depth M_m, the last block boundary below t.
template <EnvironmentModel M>
CouplingTrace mcre_coupled_pair(const M& model,
                                const EnvironmentWindow<typename M::Environment>& env, double x0,
                                const BlockSchedule& schedule, std::size_t t,
                                const UniformSequence& u) {
    if (t < 1) throw ArgumentError("mcre_coupled_pair: t must be >= 1");
    const auto s = static_cast<std::size_t>(schedule.boundary_below(t));
    return mcre_coupled_starts(model, env, schedule, OrbitStart{x0, t}, OrbitStart{x0, s}, u);
}

}  // namespace mcre
