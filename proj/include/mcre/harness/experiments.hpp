#pragma once

// The five batch experiments behind `mcre run`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcre/ar1_model.hpp"
#include "mcre/coupling_engine.hpp"
#include "mcre/fracvol_sde.hpp"
#include "mcre/harness/config.hpp"
#include "mcre/harness/output.hpp"
#include "mcre/logvol_model.hpp"
#include "mcre/metrics.hpp"
#include "mcre/numeric.hpp"
#include "mcre/parallel.hpp"
#include "mcre/random.hpp"

namespace mcre::harness {

struct RunReport {
    std::string experiment;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    nlohmann::ordered_json results = nlohmann::ordered_json::object();
    std::vector<std::pair<std::string, bool>> flags;
    std::map<std::string, Table> tables;  ///< file name -> table
    std::uint64_t replicas = 0;
    double wall_seconds = 0.0;

    void flag(const std::string& name, bool value) { flags.emplace_back(name, value); }

    bool all_pass() const {
        return std::all_of(flags.begin(), flags.end(), [](const auto& f) { return f.second; });
    }

    /// Deterministic part of the report (no timing).
    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json doc;
        doc["experiment"] = experiment;
        doc["replicas"] = replicas;
        doc["config"] = config;
        doc["results"] = results;
        nlohmann::ordered_json f = nlohmann::ordered_json::object();
        for (const auto& [k, v] : flags) f[k] = v;
        doc["flags"] = f;
        doc["all_pass"] = all_pass();
        nlohmann::ordered_json files = nlohmann::ordered_json::array();
        for (const auto& [name, t] : tables) files.push_back(name);
        doc["data_files"] = files;
        return doc;
    }
};

namespace detail {

inline RunReport run_ar1_bound(const ExperimentConfig& c) {
    RunReport rep;
    const double lyap = ar1_lyapunov_constant(c.ar1);
    const auto inf = ar1_stationary(c.ar1);
    Table table{{"t", "n", "bound_term1", "bound_term2", "bound_total", "tv_exact", "dominates"}, {}};
    bool all = true;
    for (auto t : c.t_grid) {
        const std::size_t n = c.fixed_n ? *c.fixed_n : ar1_n_schedule(c.ar1, t);
        const auto pt = ar1_bound_point(c.ar1, lyap, t, n);
        const auto m = ar1_marginal(c.ar1, t);
        const double tv = tv_gaussian(m.mean, m.variance, inf.mean, inf.variance);
        const bool dominates = pt.total() > tv;
        all = all && dominates;
        table.add({t, static_cast<std::uint64_t>(n), pt.term1, pt.term2, pt.total(), tv, dominates});
    }
    rep.results["lyapunov_constant"] = lyap;
    if (!c.fixed_n && c.t_grid.size() >= 5) {
        try {
            rep.results["rate_exponent"] = ar1_rate_fit(c.ar1, c.t_grid);
        } catch (const ArgumentError&) {
            // grid too narrow for a rate fit
        }
    }
    rep.tables["ar1_bound.csv"] = std::move(table);
    rep.flag("bound_dominates", all);
    return rep;
}

inline RunReport run_ar1_couple(const ExperimentConfig& c) {
    RunReport rep;
    rep.replicas = c.replicas;
    const auto sk = ar1_split_kernel(c.ar1.gamma);
    const std::size_t n = c.couple_n;
    const auto s = static_cast<std::size_t>(c.couple_s);
    const auto t = static_cast<std::size_t>(c.couple_t);
    std::vector<CouplingTrace> traces(c.replicas);
    parallel_for(c.replicas, [&](std::size_t r) {
        RandomStream stream(c.seed, stream_tag::uniforms, r);
        const auto u = UniformSequence::generate(stream, t);
        traces[r] = coupled_pair(sk, n, c.ar1.x0, s, t, u);
    });
    Table table{{"replica_id", "coupled", "couple_step", "final_depth_t", "final_depth_s"}, {}};
    std::size_t coupled = 0;
    for (std::size_t r = 0; r < traces.size(); ++r) {
        const auto& tr = traces[r];
        coupled += tr.coupled() ? 1 : 0;
        table.add({static_cast<std::uint64_t>(r), tr.coupled(),
                   static_cast<std::int64_t>(tr.coupled() ? static_cast<std::int64_t>(*tr.couple_step) : -1),
                   tr.final_states.first, tr.final_states.second});
    }
    const double N = static_cast<double>(c.replicas);
    const double f = static_cast<double>(coupled) / N;
    const double se = std::sqrt(f * (1.0 - f) / N);
    const double alpha = ar1_alpha(c.ar1.gamma, n);
    // Markov tail with the exact sup of E[X_u^2] over the run.
    const double g2 = c.ar1.gamma * c.ar1.gamma;
    const double second = std::max(c.ar1.x0 * c.ar1.x0, 1.0 / (1.0 - g2));
    const double nd = static_cast<double>(n);
    const double eps = n == 0 ? 0.5 : std::min(0.5, second / (nd * nd));
    const double lower = coupling_lower_bound(alpha, s, eps);
    const auto upper = tv_upper_from_coupling(traces);
    const auto ms = ar1_marginal(c.ar1, s);
    const auto mt = ar1_marginal(c.ar1, t);
    const double tv = tv_gaussian(ms.mean, ms.variance, mt.mean, mt.variance);

    rep.results["alpha_n"] = alpha;
    rep.results["eps_hat"] = eps;
    rep.results["coupled_fraction"] = f;
    rep.results["coupled_fraction_se"] = se;
    rep.results["coupling_lower_bound"] = lower;
    rep.results["tv_upper"] = upper.bound;
    rep.results["tv_upper_half_width"] = upper.half_width;
    rep.results["tv_exact"] = tv;
    rep.tables["ar1_couple.csv"] = std::move(table);
    rep.flag("coupling_above_lower_bound", f >= lower - 3.0 * se);
    rep.flag("tv_sandwich", upper.bound + upper.half_width >= tv);
    return rep;
}

inline RunReport run_logvol_sim(const ExperimentConfig& c) {
    RunReport rep;
    rep.replicas = c.replicas;
    const auto& p = c.logvol;
    const std::uint64_t horizon = *std::max_element(c.logvol_times.begin(), c.logvol_times.end());
    const std::size_t k = c.logvol_times.size();
    std::vector<double> sq(k * c.replicas);
    parallel_for(c.replicas, [&](std::size_t r) {
        RandomStream env_stream(c.seed, stream_tag::environment, r);
        RandomStream eps_stream(c.seed, stream_tag::innovations, r);
        const auto env = ma_env_path(p, horizon, env_stream);
        double x = p.x0_mean + p.x0_sd * eps_stream.normal();
        for (std::uint64_t step = 0; step < horizon; ++step) {
            x = logvol_step(p, x, env[step], draw_innovation(p.eps, eps_stream));
            for (std::size_t i = 0; i < k; ++i) {
                if (c.logvol_times[i] == step + 1) sq[i * c.replicas + r] = x * x;
            }
        }
    });
    const double K = logvol_moment_bound(p);
    Table table{{"t", "mean_sq", "standard_error", "moment_bound", "within"}, {}};
    bool all = true;
    for (std::size_t i = 0; i < k; ++i) {
        const auto est = estimate_mean(std::span<const double>(sq).subspan(i * c.replicas, c.replicas));
        const bool ok = est.mean <= K + 3.0 * est.standard_error;
        all = all && ok;
        table.add({c.logvol_times[i], est.mean, est.standard_error, K, ok});
    }
    rep.results["moment_bound"] = K;
    rep.results["ma_variance"] = p.ma.variance();
    rep.results["ma_variance_deficit"] = p.ma.variance_deficit;
    rep.tables["logvol_moments.csv"] = std::move(table);
    rep.flag("moment_bound", all);
    return rep;
}

inline nlohmann::ordered_json logvol_diagnostics(const LogvolParams& p, std::size_t n_max) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t n = 0; n <= n_max; ++n) {
        rows.push_back({{"n", n},
                        {"d_n", logvol_dn(p, n)},
                        {"log_alpha", logvol_log_alpha(p, n)},
                        {"tail", logvol_tail(p, n)}});
    }
    return rows;
}

inline RunReport run_logvol_couple(const ExperimentConfig& c) {
    RunReport rep;
    rep.replicas = c.replicas;
    const LogvolModel model(c.logvol);
    const auto& p = model.params();
    rep.results["moment_bound"] = logvol_moment_bound(p);
    rep.results["ladder"] = logvol_diagnostics(p, 8);

    BlockSchedule schedule;
    std::uint64_t depth = 0;
    if (c.schedule_auto) {
        try {
            schedule = block_schedule([&](std::size_t n) { return logvol_tail(p, n); },
                                      [&](std::size_t n) { return logvol_alpha(p, n); },
                                      c.schedule_m_max);
        } catch (const ScheduleError& e) {
            rep.results["schedule_error"] = e.what();
            rep.flag("schedule_terminates", false);
            rep.flag("coupling_budget", false);
            return rep;
        }
        rep.flag("schedule_terminates", true);
        depth = schedule.M_of_m.at(c.schedule_m);
    } else {
        schedule = BlockSchedule::single_block(c.schedule_n, c.schedule_length);
        depth = c.schedule_length;
    }
    rep.results["schedule"] = {{"n", schedule.n_of_m}, {"N", schedule.N_of_m}, {"M", schedule.M_of_m}};
    rep.results["depth"] = depth;
    if (static_cast<double>(depth) * static_cast<double>(c.replicas) > c.max_steps) {
        throw RunError("logvol-couple: depth x replicas exceeds max_steps");
    }
    const auto d = static_cast<std::size_t>(depth);
    std::vector<CouplingTrace> traces(c.replicas);
    parallel_for(c.replicas, [&](std::size_t r) {
        RandomStream env_stream(c.seed, stream_tag::environment, r);
        RandomStream u_stream(c.seed, stream_tag::uniforms, r);
        const auto path = ma_env_path(p, d, env_stream);
        const auto window =
            EnvironmentWindow<EnvState>::from_chronological(std::span<const EnvState>(path).first(d));
        const auto u = UniformSequence::generate(u_stream, d);
        traces[r] = mcre_coupled_starts(model, window, schedule, OrbitStart{c.couple_starts[0], d},
                                        OrbitStart{c.couple_starts[1], d}, u);
    });
    std::size_t coupled = 0;
    Table table{{"replica_id", "coupled", "couple_step", "final_a", "final_b"}, {}};
    for (std::size_t r = 0; r < traces.size(); ++r) {
        const auto& tr = traces[r];
        coupled += tr.coupled() ? 1 : 0;
        table.add({static_cast<std::uint64_t>(r), tr.coupled(),
                   static_cast<std::int64_t>(tr.coupled() ? static_cast<std::int64_t>(*tr.couple_step) : -1),
                   tr.final_states.first, tr.final_states.second});
    }
    const double f = static_cast<double>(coupled) / static_cast<double>(c.replicas);
    rep.results["coupled_fraction"] = f;
    rep.tables["logvol_couple.csv"] = std::move(table);
    if (c.schedule_auto) {
        const double budget = c.schedule_m <= 2 ? 1.0 : std::ldexp(1.0, -static_cast<int>(c.schedule_m - 2));
        rep.results["failure_budget"] = budget;
        rep.flag("coupling_budget", f >= 1.0 - budget);
    }
    return rep;
}

inline RunReport run_sde_sim(const ExperimentConfig& c) {
    RunReport rep;
    rep.replicas = c.replicas;
    const auto& p = c.sde;
    std::vector<double> times = c.checkpoints;
    for (const auto& ip : c.increment_pairs) {
        times.push_back(ip.t);
        times.push_back(ip.t + ip.h);
    }
    // Snap to the step grid, then dedupe.
    std::vector<std::size_t> steps;
    for (double t : times) steps.push_back(steps_for(t, p.dt));
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
    std::vector<double> grid;
    for (auto s : steps) grid.push_back(static_cast<double>(s) * p.dt);
    auto index_of = [&](double t) {
        const auto s = steps_for(t, p.dt);
        return static_cast<std::size_t>(std::lower_bound(steps.begin(), steps.end(), s) - steps.begin());
    };

    const auto ens = simulate_ensemble(p, c.initial_states, c.replicas, grid, c.seed,
                                       EnsembleOptions{c.shared_noise, c.max_steps});

    Table table{{"initial_state_id", "checkpoint_time", "replica_id", "L_value"}, {}};
    nlohmann::ordered_json moments = nlohmann::ordered_json::array();
    double l_tilde = 0.0;
    for (double l0 : c.initial_states) l_tilde = std::max(l_tilde, l0 * l0);
    for (std::size_t i = 0; i < c.initial_states.size(); ++i) {
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const auto xs = ens.at(i, k);
            for (std::size_t r = 0; r < xs.size(); ++r) {
                table.add({static_cast<std::uint64_t>(i), ens.checkpoints[k], static_cast<std::uint64_t>(r), xs[r]});
            }
            std::vector<double> sq(xs.size());
            for (std::size_t r = 0; r < xs.size(); ++r) sq[r] = xs[r] * xs[r];
            const auto m = estimate_mean(xs);
            const auto m2 = estimate_mean(sq);
            l_tilde = std::max(l_tilde, m2.mean);
            moments.push_back({{"initial_state_id", i},
                               {"time", ens.checkpoints[k]},
                               {"mean", m.mean},
                               {"mean_se", m.standard_error},
                               {"variance", m.variance},
                               {"second_moment", m2.mean},
                               {"second_moment_se", m2.standard_error}});
        }
    }
    rep.results["moments"] = moments;
    rep.results["L_tilde"] = l_tilde;
    rep.tables["sde_samples.csv"] = std::move(table);

    if (c.initial_states.size() >= 2 && !c.checkpoints.empty()) {
        std::vector<double> order = c.checkpoints;
        std::sort(order.begin(), order.end());
        order.erase(std::unique(order.begin(), order.end()), order.end());
        nlohmann::ordered_json tvs = nlohmann::ordered_json::array();
        std::vector<TvEstimate> est;
        for (double t : order) {
            const auto k = index_of(t);
            est.push_back(tv_empirical(ens.at(0, k), ens.at(1, k)));
            tvs.push_back({{"time", grid[k]}, {"tv", est.back().value}, {"se", est.back().standard_error}});
        }
        bool decreasing = true;
        for (std::size_t k = 0; k + 1 < est.size(); ++k) {
            const double slack = 3.0 * std::hypot(est[k].standard_error, est[k + 1].standard_error);
            decreasing = decreasing && est[k + 1].value <= est[k].value + slack;
        }
        rep.results["tv"] = tvs;
        rep.flag("tv_nonincreasing", decreasing);
        rep.flag("tv_final_below_threshold", est.back().value < c.tv_threshold);
    }

    if (!c.increment_pairs.empty()) {
        const auto constants = increment_constants(p, l_tilde);
        nlohmann::ordered_json checks = nlohmann::ordered_json::array();
        bool all = true;
        for (const auto& ip : c.increment_pairs) {
            const auto a = index_of(ip.t);
            const auto b = index_of(ip.t + ip.h);
            const double h = grid[b] - grid[a];
            for (std::size_t i = 0; i < c.initial_states.size(); ++i) {
                const auto res = increment_moment_check(ens.at(i, a), ens.at(i, b), h, constants);
                all = all && res.pass;
                checks.push_back({{"initial_state_id", i},
                                  {"t", grid[a]},
                                  {"h", h},
                                  {"lhs", res.lhs},
                                  {"se", res.standard_error},
                                  {"rhs", res.rhs},
                                  {"pass", res.pass}});
            }
        }
        rep.results["increment_checks"] = checks;
        rep.flag("increment_bound", all);
    }
    return rep;
}

}  // namespace detail

/// Executes the configured experiment. Results depend only on the config and seed.
inline RunReport run(const ExperimentConfig& c) {
    const auto start = std::chrono::steady_clock::now();
    RunReport rep;
    switch (c.kind) {
        case ExperimentKind::ar1_bound: rep = detail::run_ar1_bound(c); break;
        case ExperimentKind::ar1_couple: rep = detail::run_ar1_couple(c); break;
        case ExperimentKind::logvol_sim: rep = detail::run_logvol_sim(c); break;
        case ExperimentKind::logvol_couple: rep = detail::run_logvol_couple(c); break;
        case ExperimentKind::sde_sim: rep = detail::run_sde_sim(c); break;
    }
    rep.experiment = to_string(c.kind);
    rep.config = c.echo;
    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

/// Writes every table, report.json and timing.json into `dir`.
inline void write_run(const RunReport& rep, const std::filesystem::path& dir) {
    for (const auto& [name, table] : rep.tables) emit_csv(table, dir / name);
    emit_json(rep.to_json(), dir / "report.json");
    nlohmann::ordered_json timing;
    timing["wall_seconds"] = rep.wall_seconds;
    timing["workers"] = worker_count();
    emit_json(timing, dir / "timing.json");
}

}  // namespace mcre::harness
