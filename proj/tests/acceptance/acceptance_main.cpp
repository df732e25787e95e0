// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "mcre/mcre.hpp"
#include "mcre/harness/config.hpp"
#include "mcre/harness/experiments.hpp"

using namespace mcre;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

harness::RunReport run_text(const std::string& text) {
    return harness::run(harness::load_experiment(harness::RawConfig::parse(text)));
}

bool report_flag(const harness::RunReport& rep, const std::string& name) {
    for (const auto& [k, v] : rep.flags) {
        if (k == name) return v;
    }
    return false;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome bound_dominates() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    double worst = std::numeric_limits<double>::infinity();
    for (double g : {0.5, 0.9}) {
        for (double x0 : {0.0, 1.0}) {
            const Ar1Params p{g, 0.4 * (1 - g * g), x0, 0.1};
            const auto inf = ar1_stationary(p);
            for (std::uint64_t t : {10, 100, 1000, 10000}) {
                const auto m = ar1_marginal(p, t);
                const double gap = ar1_bound_curve(p, t, ar1_n_schedule(p, t)) -
                                   tv_gaussian(m.mean, m.variance, inf.mean, inf.variance);
                worst = std::min(worst, gap);
                ok = ok && gap > 0.0;
            }
        }
    }
    const double secs = seconds_since(t0);
    return {ok && secs < 1.0, fmt("min gap %.3g, %.3gs", worst, secs)};
}

Outcome rate_exponent() {
    const Ar1Params p{0.5, 0.4 * 0.75, 0.0, 0.1};
    const std::vector<std::uint64_t> grid{100, 1000, 10000, 100000, 1000000};
    const double slope = ar1_rate_fit(p, grid);
    return {slope >= 2.0 && slope <= 3.0, fmt("fitted exponent %.6g, required [2, 3]", slope)};
}

Outcome minorization() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    double worst_gap = 0.0;
    for (double g : {0.5, 0.9}) {
        const auto sk = ar1_split_kernel(g);
        for (std::size_t n = 0; n <= 5; ++n) {
            const double b = sk.ladder.half_width(n);
            const auto xs = linspace(-b, b, 201);
            const auto zs = linspace(-1.0, 1.0, 201);
            const double margin = validate_minorization(sk, n, xs, zs);
            // Closed-form infimum is phi(gamma n + 1) = alpha_n / 2.
            const double inf_q = margin + 0.5 * sk.ladder.alpha(n);
            const double gap = std::abs(inf_q - normal_pdf(g * double(n) + 1.0));
            worst_gap = std::max(worst_gap, gap);
            ok = ok && margin >= -1e-15 && gap <= 1e-6;
        }
    }
    double logvol_margin = std::numeric_limits<double>::infinity();
    for (auto eps : {Innovation::standard_normal(), Innovation::unit_logistic()}) {
        LogvolParams p;
        p.eps = eps;
        for (std::size_t n = 0; n <= 2; ++n) logvol_margin = std::min(logvol_margin, logvol_certify(p, n));
    }
    ok = ok && logvol_margin >= 0.0;
    const double secs = seconds_since(t0);
    return {ok && secs < 5.0,
            fmt("ar1 closed-form gap %.3g, logvol margin %.3g, %.3gs", worst_gap, logvol_margin, secs)};
}

std::pair<Outcome, Outcome> ar1_coupling() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto rep = run_text(
        "experiment = ar1-couple\nseed = 20240101\nreplicas = 10000\nar1.gamma = 0.5\n"
        "ar1.beta = 0.3\nar1.x0 = 0\ncouple.n = 3\ncouple.s = 50\ncouple.t = 100\n");
    const double secs = seconds_since(t0);
    const auto& r = rep.results;
    Outcome lower{report_flag(rep, "coupling_above_lower_bound") && secs < 30.0,
                  fmt("coupled %.4f vs lower bound %.4f, %.3gs", r["coupled_fraction"].get<double>(),
                      r["coupling_lower_bound"].get<double>(), secs)};
    Outcome sandwich{report_flag(rep, "tv_sandwich") && secs < 30.0,
                     fmt("upper %.4g +- %.3g vs exact %.3g", r["tv_upper"].get<double>(),
                         r["tv_upper_half_width"].get<double>(), r["tv_exact"].get<double>())};
    return {lower, sandwich};
}

template <class Kernel>
bool law_preserved(const Kernel& k, const SmallSetLadder& ladder, std::size_t n, double x,
                   bool env_in_set, std::uint64_t index, double& p_min) {
    constexpr std::size_t kSamples = 100000;
    RandomStream us(77, stream_tag::uniforms, index);
    RandomStream ds(77, stream_tag::direct, index);
    std::vector<double> a(kSamples), b(kSamples);
    for (auto& v : a) v = split_apply(k, ladder, n, x, UniformPair{us.uniform(), us.uniform()}, env_in_set);
    for (auto& v : b) v = k.mean(x) + k.scale * ds.normal();
    const auto ks = ks_two_sample(std::move(a), std::move(b));
    p_min = std::min(p_min, ks.p_value);
    return ks.passes(0.01);
}

Outcome law_preservation() {
    bool ok = true;
    double p_min = 1.0;
    std::uint64_t index = 0;
    const auto sk = ar1_split_kernel(0.5);
    for (double x : {0.0, 2.5, 10.0}) {
        ok = law_preserved(sk.kernel, sk.ladder, 3, x, true, index++, p_min) && ok;
    }
    const LogvolModel model{LogvolParams{}};
    struct Point {
        double x;
        EnvState env;
        std::size_t n;
    };
    for (const auto& pt : {Point{0.0, {0.0, 0.0}, 0}, Point{0.5, {0.3, -0.7}, 1}, Point{-1.8, {-0.5, 1.2}, 2}}) {
        ok = law_preserved(model.kernel_at(pt.env), model.ladder(), pt.n, pt.x,
                           model.env_in_set(pt.n, pt.env), index++, p_min) && ok;
    }
    return {ok, fmt("smallest KS p-value %.3g at level 0.01", p_min)};
}

Outcome logvol_moments() {
    const auto rep = run_text(
        "experiment = logvol-sim\nseed = 7\nreplicas = 10000\ncheckpoints = 10, 100\n");
    return {report_flag(rep, "moment_bound"),
            fmt("bound K = %.6g", rep.results["moment_bound"].get<double>())};
}

Outcome schedule_terminates() {
    const LogvolParams p;
    try {
        const auto s = block_schedule([&](std::size_t n) { return logvol_tail(p, n); },
                                      [&](std::size_t n) { return logvol_alpha(p, n); }, 4);
        return {true, fmt("M_4 = %.0f", double(s.total_steps()))};
    } catch (const ScheduleError& e) {
        std::size_t n = 1;
        while (logvol_tail(p, n) > 0.0625) ++n;
        return {false, std::string(e.what()) + fmt("; n(4) = %.0f with log alpha = %.4g", double(n),
                                                   logvol_log_alpha(p, n))};
    }
}

const char* kSdeConfig =
    "experiment = sde-sim\nseed = 3\nreplicas = 10000\nsde.zeta.kind = linear\nsde.zeta.kappa = 1\n"
    "sde.kernel.kind = exponential\nsde.kernel.rate = 1\nsde.rho.kind = constant\nsde.rho.value = 0.3\n"
    "sde.dt = 0.00390625\nsde.horizon = 20\ninitial_states = -2, 2\ncheckpoints = 5, 10, 20\n"
    "increment.pairs = 10, 0.1, 10, 0.01\ntv.threshold = 0.1\n";

std::pair<Outcome, Outcome> sde_checks() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto rep = run_text(kSdeConfig);
    const double secs = seconds_since(t0);
    std::string tvs;
    for (const auto& row : rep.results["tv"]) tvs += fmt("%.4f ", row["tv"].get<double>());
    Outcome forget{report_flag(rep, "tv_nonincreasing") && report_flag(rep, "tv_final_below_threshold") &&
                       secs < 300.0,
                   "tv at 5,10,20: " + tvs + fmt("(%.3gs)", secs)};
    std::string inc;
    for (const auto& row : rep.results["increment_checks"]) {
        inc += fmt("h=%.3g lhs %.4g rhs %.4g; ", row["h"].get<double>(), row["lhs"].get<double>(),
                   row["rhs"].get<double>());
    }
    return {forget, {report_flag(rep, "increment_bound"), inc}};
}

Outcome metric_oracles() {
    bool ok = true;
    const double closed = 2.0 * (2.0 * normal_cdf(1.0) - 1.0);
    const double tv_shift = tv_gaussian(0, 1, 2, 1);
    ok = ok && std::abs(tv_shift - closed) < 1e-12;
    const double tv_quad = tv_paper([](double x) { return normal_pdf(x); },
                                    [](double x) { return normal_pdf(x - 2.0); }, -40.0, 42.0);
    ok = ok && std::abs(tv_quad - closed) < 1e-6;
    ok = ok && tv_gaussian(0.3, 2.0, 0.3, 2.0) == 0.0;
    const auto zero = PathWindow::constant(30, 0.0);
    const auto one = PathWindow::constant(30, 1.0);
    const double d = path_metric_d(zero, one);
    ok = ok && std::abs(d - (3.0 - std::ldexp(1.0, -28))) < 1e-8;
    ok = ok && path_metric_d(one, one) == 0.0;
    return {ok, fmt("tv %.17g (closed form %.17g), d = %.12g", tv_shift, closed, d)};
}

}  // namespace

int main() {
    struct Row {
        const char* name;
        Outcome outcome;
    };
    std::vector<Row> rows;
    auto record = [&](const char* name, const std::function<Outcome()>& f) {
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
        rows.push_back({name, o});
    };

    record("C1 ar1 bound dominates exact distance", bound_dominates);
    record("C2 ar1 bound rate exponent", rate_exponent);
    record("C3 minorization certification", minorization);
    std::pair<Outcome, Outcome> couple;
    try {
        couple = ar1_coupling();
    } catch (const std::exception& e) {
        couple = {{false, e.what()}, {false, e.what()}};
    }
    record("C4 coupling probability lower bound", [&] { return couple.first; });
    record("C5 coupling tv sandwich", [&] { return couple.second; });
    record("C6 split map preserves transition law", law_preservation);
    record("C7 logvol second moment bound", logvol_moments);
    record("C8 logvol block schedule terminates", schedule_terminates);
    std::pair<Outcome, Outcome> sde;
    try {
        sde = sde_checks();
    } catch (const std::exception& e) {
        sde = {{false, e.what()}, {false, e.what()}};
    }
    record("C9 sde forgetting in tv", [&] { return sde.first; });
    record("C10 sde increment moment bound", [&] { return sde.second; });
    record("C11 metric oracles", metric_oracles);

    std::size_t failed = 0;
    for (const auto& r : rows) failed += r.outcome.pass ? 0 : 1;
    std::printf("%zu/%zu criteria passed\n", rows.size() - failed, rows.size());
    return failed == 0 ? 0 : 1;
}
