// mcre: run, validate and summarize experiment configs.
//
// Exit codes: 0 all acceptance flags true, 1 some flag false, 2 error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mcre/harness/config.hpp"
#include "mcre/harness/experiments.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitError = 2;

int print_flags(const nlohmann::ordered_json& doc) {
    bool all = true;
    for (const auto& [name, value] : doc.at("flags").items()) {
        const bool ok = value.get<bool>();
        all = all && ok;
        std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    }
    std::cout << (all ? "all flags true" : "some flags false") << "\n";
    return all ? kExitPass : kExitFail;
}

int cmd_run(const std::string& config_path, const std::string& out_override) {
    const auto cfg = mcre::harness::load_experiment_file(config_path);
    const auto report = mcre::harness::run(cfg);
    const std::filesystem::path dir = out_override.empty() ? cfg.output_dir : out_override;
    mcre::harness::write_run(report, dir);
    std::cout << report.experiment << " -> " << dir.string() << "\n";
    return print_flags(report.to_json());
}

int cmd_validate(const std::string& config_path) {
    const auto cfg = mcre::harness::load_experiment_file(config_path);
    std::cout << cfg.echo.dump(2) << "\nconfig ok\n";
    return kExitPass;
}

int cmd_report(const std::string& run_dir) {
    const auto path = std::filesystem::path(run_dir) / "report.json";
    std::ifstream in(path);
    if (!in) throw mcre::RunError("cannot read " + path.string());
    const auto doc = nlohmann::ordered_json::parse(in);
    std::cout << doc.at("experiment").get<std::string>() << "\n";
    std::cout << doc.at("results").dump(2) << "\n";
    return print_flags(doc);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coupling and invariant-measure experiments for stochastic volatility chains"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string run_dir;
    auto* run = app.add_subcommand("run", "Run an experiment config and write CSV/JSON outputs");
    run->add_option("config", config_path, "Config file")->required();
    run->add_option("--out", out_dir, "Output directory (overrides output.dir)");
    auto* validate = app.add_subcommand("validate", "Check a config without running it");
    validate->add_option("config", config_path, "Config file")->required();
    auto* report = app.add_subcommand("report", "Summarize a finished run directory");
    report->add_option("run_dir", run_dir, "Run directory holding report.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitPass : kExitError;
    }

    try {
        if (*run) return cmd_run(config_path, out_dir);
        if (*validate) return cmd_validate(config_path);
        if (*report) return cmd_report(run_dir);
    } catch (const mcre::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
