#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include "gridest/csv.hpp"
#include "gridest/harness.hpp"

namespace {

using namespace gridest;
using harness::ExperimentConfig;
using harness::ExperimentKind;

struct CommonArgs {
    std::string config_path;
    std::string out_path;
    std::int64_t seed = -1;
};

ExperimentConfig load(const CommonArgs& args, ExperimentKind kind) {
    ExperimentConfig cfg = args.config_path.empty()
                               ? harness::parse_config("", kind)
                               : harness::load_config(args.config_path, kind);
    if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
    if (!args.out_path.empty()) cfg.out = args.out_path;
    return cfg;
}

void report(const harness::RunArtifact& artifact, const ExperimentConfig& cfg) {
    harness::write_artifact(artifact, cfg.out);
    for (const std::string& line : artifact.summary) std::cout << line << "\n";
    std::cout << "wall_seconds = " << csv::format_real(artifact.wall_seconds) << "\n";
    if (!cfg.out.empty()) {
        for (const auto& [suffix, payload] : artifact.csvs) {
            (void)payload;
            std::cout << "wrote " << (suffix.empty() ? cfg.out : cfg.out + "." + suffix)
                      << "\n";
        }
    }
}

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "experiment configuration file");
    sub->add_option("--seed", args.seed, "override the config seed");
    sub->add_option("--out", args.out_path, "output CSV path");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"distributed state estimation and false-data detection workbench"};
    app.require_subcommand(1);

    CommonArgs args;
    bool alarm_exit = false;

    CLI::App* solve = app.add_subcommand("solve", "one-shot state estimate from files");
    CLI::App* sweep_eps =
        app.add_subcommand("sweep-epsilon", "embedding-parameter accuracy sweep");
    CLI::App* sweep_meas =
        app.add_subcommand("sweep-measurements", "estimation error vs measurement budget");
    CLI::App* detect = app.add_subcommand("detect", "false-data detection experiment");
    CLI::App* lattice =
        app.add_subcommand("lattice-decay", "truncated estimation error on a lattice");
    CLI::App* complexity =
        app.add_subcommand("complexity", "communication counts of the block sweep");
    for (CLI::App* sub : {solve, sweep_eps, sweep_meas, detect, lattice, complexity})
        add_common(sub, args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) {
            const ExperimentConfig cfg = load(args, ExperimentKind::Solve);
            const harness::SolveResult res = harness::run_solve(cfg);
            std::cout << "epsilon = " << csv::format_real(res.epsilon_used) << "\n";
            std::cout << "bias_bound = " << csv::format_real(res.bias_bound) << "\n";
            for (std::size_t i = 0; i < res.per_monitor_residuals.size(); ++i)
                std::cout << "residual[" << i
                          << "] = " << csv::format_real(res.per_monitor_residuals[i]) << "\n";
            for (std::size_t i = 0; i < res.x_hat.size(); ++i)
                std::cout << "x[" << i << "] = " << csv::format_real(res.x_hat[i]) << "\n";
            harness::write_artifact(res.artifact, cfg.out);
        } else if (sweep_eps->parsed()) {
            const ExperimentConfig cfg = load(args, ExperimentKind::EpsilonSweep);
            const auto res = harness::run_epsilon_sweep(cfg);
            report(res.artifact, cfg);
        } else if (sweep_meas->parsed()) {
            const ExperimentConfig cfg = load(args, ExperimentKind::MeasurementSweep);
            const auto res = harness::run_measurement_sweep(cfg);
            report(res.artifact, cfg);
        } else if (detect->parsed()) {
            const ExperimentConfig cfg = load(args, ExperimentKind::Detection);
            const auto res = harness::run_detection_experiment(cfg);
            report(res.artifact, cfg);
            alarm_exit = res.alarm_in_corrupted;
        } else if (lattice->parsed()) {
            const ExperimentConfig cfg = load(args, ExperimentKind::LatticeDecay);
            const auto res = harness::run_lattice_decay(cfg);
            report(res.artifact, cfg);
        } else if (complexity->parsed()) {
            const ExperimentConfig cfg = load(args, ExperimentKind::ComplexityCounts);
            const auto res = harness::run_complexity_counts(cfg);
            report(res.artifact, cfg);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ContractViolation& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const ModelError& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    return alarm_exit ? 1 : 0;
}
