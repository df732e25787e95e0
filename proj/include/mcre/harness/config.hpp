#pragma once

// Flat `key = value` experiment configs with dotted section names.
//
//   # comment
//   experiment = ar1-bound
//   ar1.gamma  = 0.5
//   t_grid     = 10, 100, 1000
//
// Every key must be consumed by the experiment it configures; leftovers are
// reported as unknown fields. Resolved values, defaults included, are echoed
// into the run report.

#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcre/ar1_model.hpp"
#include "mcre/errors.hpp"
#include "mcre/fracvol_sde.hpp"
#include "mcre/logvol_model.hpp"

namespace mcre::harness {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace detail

/// Raw key/value pairs with access tracking.
class RawConfig {
public:
    static RawConfig parse(const std::string& text) {
        RawConfig cfg;
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            const std::string where = "line " + std::to_string(lineno);
            if (eq == std::string::npos) throw ConfigError(where, "expected `key = value`");
            const std::string key = detail::trim(line.substr(0, eq));
            const std::string value = detail::trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError(where, "empty key");
            if (cfg.values_.count(key)) throw ConfigError(key, "duplicate key");
            cfg.values_[key] = value;
        }
        return cfg;
    }

    static RawConfig load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError(path, "cannot open config file");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::optional<std::string> take(const std::string& key) {
        auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        used_.insert(key);
        return it->second;
    }

    std::vector<std::string> unused() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_) {
            if (!used_.count(k)) out.push_back(k);
        }
        return out;
    }

private:
    std::map<std::string, std::string> values_;
    std::set<std::string> used_;
};

/// Typed reads with defaults; every resolved value is recorded in `echo`.
class ConfigReader {
public:
    explicit ConfigReader(RawConfig raw) : raw_(std::move(raw)) {}

    nlohmann::ordered_json& echo() { return echo_; }
    const nlohmann::ordered_json& echo() const { return echo_; }

    std::string string(const std::string& key, const std::string& fallback) {
        const auto v = raw_.take(key).value_or(fallback);
        echo_[key] = v;
        return v;
    }

    std::string choice(const std::string& key, const std::string& fallback,
                       const std::vector<std::string>& allowed) {
        const auto v = string(key, fallback);
        for (const auto& a : allowed) {
            if (a == v) return v;
        }
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        throw ConfigError(key, "must be one of {" + list + "}, got '" + v + "'");
    }

    double real(const std::string& key, double fallback) {
        const auto s = raw_.take(key);
        const double v = s ? parse_real(key, *s) : fallback;
        echo_[key] = v;
        return v;
    }

    std::uint64_t count(const std::string& key, std::uint64_t fallback) {
        const auto s = raw_.take(key);
        const std::uint64_t v = s ? parse_count(key, *s) : fallback;
        echo_[key] = v;
        return v;
    }

    bool flag(const std::string& key, bool fallback) {
        const auto s = raw_.take(key);
        bool v = fallback;
        if (s) {
            if (*s == "true" || *s == "1") {
                v = true;
            } else if (*s == "false" || *s == "0") {
                v = false;
            } else {
                throw ConfigError(key, "expected true or false, got '" + *s + "'");
            }
        }
        echo_[key] = v;
        return v;
    }

    std::vector<double> reals(const std::string& key, const std::vector<double>& fallback) {
        const auto s = raw_.take(key);
        std::vector<double> v = fallback;
        if (s) {
            v.clear();
            for (const auto& item : detail::split_list(*s)) v.push_back(parse_real(key, item));
        }
        echo_[key] = v;
        return v;
    }

    std::vector<std::uint64_t> counts(const std::string& key,
                                      const std::vector<std::uint64_t>& fallback) {
        const auto s = raw_.take(key);
        std::vector<std::uint64_t> v = fallback;
        if (s) {
            v.clear();
            for (const auto& item : detail::split_list(*s)) v.push_back(parse_count(key, item));
        }
        echo_[key] = v;
        return v;
    }

    void reject_unused() const {
        const auto left = raw_.unused();
        if (!left.empty()) throw ConfigError(left.front(), "unknown key for this experiment");
    }

private:
    static double parse_real(const std::string& key, const std::string& s) {
        errno = 0;
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (end == s.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
            throw ConfigError(key, "expected a finite number, got '" + s + "'");
        }
        return v;
    }

    static std::uint64_t parse_count(const std::string& key, const std::string& s) {
        // Accept integral values written in scientific notation (1e4).
        const double v = parse_real(key, s);
        if (v < 0.0 || v != std::floor(v) || v > 1.8e19) {
            throw ConfigError(key, "expected a nonnegative integer, got '" + s + "'");
        }
        return static_cast<std::uint64_t>(v);
    }

    RawConfig raw_;
    nlohmann::ordered_json echo_ = nlohmann::ordered_json::object();
};

enum class ExperimentKind { ar1_bound, ar1_couple, logvol_sim, logvol_couple, sde_sim };

inline std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::ar1_bound: return "ar1-bound";
        case ExperimentKind::ar1_couple: return "ar1-couple";
        case ExperimentKind::logvol_sim: return "logvol-sim";
        case ExperimentKind::logvol_couple: return "logvol-couple";
        case ExperimentKind::sde_sim: return "sde-sim";
    }
    return "?";
}

struct IncrementPair {
    double t = 0.0;
    double h = 0.0;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::ar1_bound;
    std::uint64_t seed = 1;
    std::uint64_t replicas = 0;
    std::string output_dir;

    Ar1Params ar1;
    std::vector<std::uint64_t> t_grid;
    std::optional<std::size_t> fixed_n;  ///< ar1-bound: overrides n(t)

    std::size_t couple_n = 3;
    std::uint64_t couple_s = 50;
    std::uint64_t couple_t = 100;

    LogvolParams logvol;
    std::vector<std::uint64_t> logvol_times;
    bool schedule_auto = true;
    std::size_t schedule_m_max = 4;
    std::size_t schedule_m = 3;
    std::size_t schedule_n = 1;
    std::uint64_t schedule_length = 100;
    std::vector<double> couple_starts;
    double max_steps = 5e10;

    SdeParams sde;
    std::vector<double> initial_states;
    std::vector<double> checkpoints;
    bool shared_noise = false;
    double tv_threshold = 0.1;
    std::vector<IncrementPair> increment_pairs;

    nlohmann::ordered_json echo;
};

namespace detail {

/// Runs a parameter validator, re-raising its failure against `field`.
template <class F>
void validate_field(const std::string& field, F&& f) {
    try {
        f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(field, e.what());
    }
}

inline LogvolParams read_logvol(ConfigReader& r) {
    LogvolParams p;
    p.gamma = r.real("logvol.gamma", 0.5);
    p.rho = r.real("logvol.rho", 0.3);
    const auto family = r.choice("logvol.ma.family", "geometric", {"geometric", "fractional", "explicit"});
    const auto lag = static_cast<std::size_t>(r.count("logvol.ma.lag", kDefaultMaLag));
    validate_field("logvol.ma", [&] {
        if (family == "geometric") {
            p.ma = MaCoefficients::geometric(r.real("logvol.ma.ratio", 0.5), lag);
        } else if (family == "fractional") {
            const double h = r.real("logvol.ma.hurst", 0.3);
            p.ma = MaCoefficients::fractional(h, r.real("logvol.ma.scale", 0.5), lag);
        } else {
            p.ma = MaCoefficients::explicit_list(r.reals("logvol.ma.coefficients", {1.0}));
        }
    });
    const auto eps = r.choice("logvol.eps", "normal", {"normal", "logistic"});
    p.eps = eps == "normal" ? Innovation::standard_normal() : Innovation::unit_logistic();
    p.x0_mean = r.real("logvol.x0.mean", 0.0);
    p.x0_sd = r.real("logvol.x0.sd", 0.0);
    validate_field("logvol", [&] { p.validate(); });
    return p;
}

inline SdeParams read_sde(ConfigReader& r) {
    SdeParams p;
    const auto zk = r.choice("sde.zeta.kind", "linear", {"linear", "saturating"});
    const double kappa = r.real("sde.zeta.kappa", 1.0);
    p.zeta = zk == "linear" ? Drift::linear(kappa)
                            : Drift::saturating(kappa, r.real("sde.zeta.amplitude", 1.0));
    const auto kk = r.choice("sde.kernel.kind", "exponential", {"exponential", "fractional", "zero"});
    validate_field("sde.kernel", [&] {
        if (kk == "exponential") {
            p.kernel = VolatilityKernel::exponential(r.real("sde.kernel.rate", 1.0),
                                                     r.real("sde.kernel.scale", 1.0));
        } else if (kk == "fractional") {
            const double h = r.real("sde.kernel.hurst", 0.1);
            const double scale = r.real("sde.kernel.scale", 1.0);
            p.kernel = VolatilityKernel::fractional(h, scale, r.real("sde.kernel.cutoff", 1.0));
        } else {
            p.kernel = VolatilityKernel::zero();
        }
    });
    const auto rk = r.choice("sde.rho.kind", "constant", {"constant", "tanh"});
    validate_field("sde.rho", [&] {
        if (rk == "constant") {
            p.rho = RhoSpec::fixed(r.real("sde.rho.value", 0.3));
        } else {
            const double gain = r.real("sde.rho.gain", 1.0);
            p.rho = RhoSpec::tanh_of(gain, VolatilityKernel::exponential(r.real("sde.rho.kernel.rate", 1.0)));
        }
    });
    p.dt = r.real("sde.dt", 1.0 / 256.0);
    p.horizon = r.real("sde.horizon", 20.0);
    const auto burn = r.string("sde.burn_in", "auto");
    if (burn != "auto") {
        try {
            std::size_t used = 0;
            p.burn_in = std::stod(burn, &used);
            if (used != burn.size()) throw std::invalid_argument(burn);
        } catch (const std::exception&) {
            throw ConfigError("sde.burn_in", "expected a number or 'auto', got '" + burn + "'");
        }
        r.echo()["sde.burn_in"] = p.burn_in;
    }
    p.dissipativity_alpha = r.real("sde.dissipativity.alpha", 0.5 * std::abs(kappa));
    p.dissipativity_beta = r.real("sde.dissipativity.beta", zk == "linear" ? 0.0 : 0.5);
    p.dissipativity_radius = r.real("sde.dissipativity.radius", 50.0);
    validate_field("sde", [&] { p.validate(); });
    r.echo()["sde.burn_in.effective"] = p.effective_burn_in();
    return p;
}

}  // namespace detail

inline ExperimentConfig load_experiment(RawConfig raw) {
    ConfigReader r(std::move(raw));
    ExperimentConfig c;
    const auto kind = r.choice("experiment", "",
                               {"ar1-bound", "ar1-couple", "logvol-sim", "logvol-couple", "sde-sim"});
    c.seed = r.count("seed", 1);
    c.output_dir = r.string("output.dir", "runs/" + kind);

    if (kind == "ar1-bound" || kind == "ar1-couple") {
        c.ar1.gamma = r.real("ar1.gamma", 0.5);
        c.ar1.beta = r.real("ar1.beta", 0.3);
        c.ar1.x0 = r.real("ar1.x0", 0.0);
        c.ar1.eta = r.real("ar1.eta", 0.1);
        detail::validate_field("ar1", [&] { c.ar1.validate(); });
    }
    if (kind == "ar1-bound") {
        c.kind = ExperimentKind::ar1_bound;
        c.t_grid = r.counts("t_grid", {10, 100, 1000, 10000});
        if (c.t_grid.empty()) throw ConfigError("t_grid", "must not be empty");
        for (auto t : c.t_grid) {
            if (t < 2) throw ConfigError("t_grid", "every t must be >= 2");
        }
        const auto n = r.string("ar1.n", "auto");
        if (n != "auto") {
            const auto v = static_cast<std::size_t>(std::strtoull(n.c_str(), nullptr, 10));
            if (std::to_string(v) != n) throw ConfigError("ar1.n", "expected an integer or 'auto'");
            c.fixed_n = v;
        }
    } else if (kind == "ar1-couple") {
        c.kind = ExperimentKind::ar1_couple;
        c.replicas = r.count("replicas", 10000);
        if (c.replicas < 100) throw ConfigError("replicas", "must be >= 100");
        c.couple_n = static_cast<std::size_t>(r.count("couple.n", 3));
        c.couple_s = r.count("couple.s", 50);
        c.couple_t = r.count("couple.t", 100);
        if (c.couple_s < 1 || c.couple_s > c.couple_t) {
            throw ConfigError("couple.s", "need 1 <= couple.s <= couple.t");
        }
    } else if (kind == "logvol-sim") {
        c.kind = ExperimentKind::logvol_sim;
        c.logvol = detail::read_logvol(r);
        c.replicas = r.count("replicas", 10000);
        if (c.replicas < 2) throw ConfigError("replicas", "must be >= 2");
        c.logvol_times = r.counts("checkpoints", {10, 100});
        if (c.logvol_times.empty()) throw ConfigError("checkpoints", "must not be empty");
        for (auto t : c.logvol_times) {
            if (t < 1) throw ConfigError("checkpoints", "every time must be >= 1");
        }
    } else if (kind == "logvol-couple") {
        c.kind = ExperimentKind::logvol_couple;
        c.logvol = detail::read_logvol(r);
        c.replicas = r.count("replicas", 10000);
        if (c.replicas < 1) throw ConfigError("replicas", "must be >= 1");
        c.schedule_auto = r.choice("schedule.mode", "auto", {"auto", "fixed"}) == "auto";
        if (c.schedule_auto) {
            c.schedule_m_max = static_cast<std::size_t>(r.count("schedule.m_max", 4));
            c.schedule_m = static_cast<std::size_t>(r.count("schedule.m", 3));
            if (c.schedule_m < 1 || c.schedule_m > c.schedule_m_max) {
                throw ConfigError("schedule.m", "need 1 <= schedule.m <= schedule.m_max");
            }
        } else {
            c.schedule_n = static_cast<std::size_t>(r.count("schedule.n", 1));
            c.schedule_length = r.count("schedule.length", 100);
            if (c.schedule_length < 1) throw ConfigError("schedule.length", "must be >= 1");
        }
        c.couple_starts = r.reals("couple.x0", {-1.0, 1.0});
        if (c.couple_starts.size() != 2) throw ConfigError("couple.x0", "need exactly two starting points");
        c.max_steps = r.real("max_steps", 5e10);
    } else {
        c.kind = ExperimentKind::sde_sim;
        c.sde = detail::read_sde(r);
        c.replicas = r.count("replicas", 10000);
        if (c.replicas < 2) throw ConfigError("replicas", "must be >= 2");
        c.initial_states = r.reals("initial_states", {-2.0, 2.0});
        if (c.initial_states.empty()) throw ConfigError("initial_states", "must not be empty");
        c.checkpoints = r.reals("checkpoints", {5.0, 10.0, 20.0});
        for (double t : c.checkpoints) {
            if (!(t >= 0.0 && t <= c.sde.horizon)) {
                throw ConfigError("checkpoints", "every checkpoint must lie in [0, sde.horizon]");
            }
        }
        c.shared_noise = r.flag("sde.shared_noise", false);
        c.tv_threshold = r.real("tv.threshold", 0.1);
        const auto pairs = r.reals("increment.pairs", {});
        if (pairs.size() % 2 != 0) {
            throw ConfigError("increment.pairs", "expected a flat list t1, h1, t2, h2, ...");
        }
        for (std::size_t i = 0; i < pairs.size(); i += 2) {
            if (!(pairs[i] >= 0.0 && pairs[i + 1] >= 0.0 && pairs[i] + pairs[i + 1] <= c.sde.horizon)) {
                throw ConfigError("increment.pairs", "need 0 <= t, 0 <= h and t + h <= sde.horizon");
            }
            c.increment_pairs.push_back({pairs[i], pairs[i + 1]});
        }
        c.max_steps = r.real("max_steps", 5e10);
    }
    r.reject_unused();
    c.echo = r.echo();
    return c;
}

inline ExperimentConfig load_experiment_file(const std::string& path) {
    return load_experiment(RawConfig::load(path));
}

}  // namespace mcre::harness
