#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "gridest/detection.hpp"
#include "gridest/finite_memory.hpp"
#include "gridest/network_model.hpp"

namespace gridest::harness {

enum class ExperimentKind {
    EpsilonSweep,
    MeasurementSweep,
    Detection,
    LatticeDecay,
    ComplexityCounts,
    Solve,
};

std::string kind_name(ExperimentKind kind);
ExperimentKind kind_from_name(const std::string& name);

/// Strictly parsed `key = value` configuration. Unknown keys and malformed
/// values fail before any computation, naming the offending key.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Solve;
    std::uint64_t seed = 1;
    std::string out;  // output path; empty keeps artifacts in memory

    // grid / system shape
    std::size_t buses = 118;
    std::size_t branches = 186;
    std::size_t monitors = 5;

    // noise and embedding
    double sigma = 0.02;
    double epsilon = 0.0;  // 0 selects the per-experiment default

    // epsilon sweep
    std::vector<double> epsilons = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5};

    // measurement sweep
    std::size_t trials = 100;
    std::vector<std::size_t> budget_multipliers = {1, 2, 3, 4, 5};

    // detection
    std::size_t snapshots = 10;
    std::size_t corrupt_from = 5;
    std::size_t attacked_monitor = 0;
    std::size_t attacked_row = 0;
    double w_max = 0.0;                  // absolute override; 0 = use nominal fraction
    double w_max_nominal_fraction = 0.1; // fraction of the attacked nominal injection
    double gamma_override = -1.0;        // < 0 computes 2*sigma*||I-HW||_inf
    bool truncated_noise = true;
    std::size_t duplicates = 2;

    // lattice decay
    std::size_t lattice_a = 5;
    std::size_t lattice_b = 4;
    std::vector<std::size_t> tracked_monitors = {0, 5, 10, 14};

    // complexity counts
    std::size_t total_rows = 12;
    std::size_t state_dim = 8;
    std::vector<std::size_t> block_sizes = {1, 2, 6, 12};

    // solve
    std::string grid_file;
    std::string measurements_file;

    /// Canonical echo of every effective key, one `key = value` line each,
    /// in a fixed order; identical configs echo identically byte for byte.
    std::string echo() const;
};

/// Parses configuration text for an experiment of the given kind.
ExperimentConfig parse_config(const std::string& text, ExperimentKind kind);
ExperimentConfig load_config(const std::string& path, ExperimentKind kind);

struct RunArtifact {
    std::string config_echo;
    /// (suffix, payload): suffix "" is the primary CSV written to `out`,
    /// others append ".<suffix>" to the path. Payloads embed the config
    /// echo as leading comment lines and are bit-reproducible for a fixed
    /// (config, seed, build).
    std::vector<std::pair<std::string, std::string>> csvs;
    std::vector<std::string> summary;  // human-readable result lines
    double wall_seconds = 0.0;
};

/// Writes every CSV payload of the artifact relative to `out_path`.
void write_artifact(const RunArtifact& artifact, const std::string& out_path);

struct EpsilonSweepResult {
    RunArtifact artifact;
    std::vector<std::pair<double, double>> points;  // (epsilon, relative error)
    double slope = 0.0;                             // log-log regression slope
};

struct MeasurementSweepResult {
    RunArtifact artifact;
    // (total measurements, mean error, stddev)
    std::vector<std::tuple<std::size_t, double, double>> points;
};

struct DetectionExperimentResult {
    RunArtifact artifact;
    std::vector<detection::DetectionReport> clean;
    std::vector<detection::DetectionReport> corrupted;
    double gamma = 0.0;
    double w_max = 0.0;
    bool alarm_in_corrupted = false;
};

struct LatticeDecayResult {
    RunArtifact artifact;
    std::size_t diameter = 0;
    std::vector<std::size_t> tracked;
    // errors[k][h] for tracked monitor k, depth h = 0..diameter
    std::vector<std::vector<double>> errors;
    std::vector<finitemem::DecayFit> per_monitor_fits;
    finitemem::DecayFit envelope_fit;   // fit of the per-depth max over tracked monitors
    double envelope_C = 0.0;            // lifted constant dominating every tracked error
    finitemem::PinvDecayTable pinv_table;
};

struct ComplexityCountsResult {
    RunArtifact artifact;
    // (block size k, blocks, communications, expected = ceil(m/k) - 1)
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> rows;
};

struct SolveResult {
    RunArtifact artifact;
    std::vector<double> x_hat;
    std::vector<double> per_monitor_residuals;
    double epsilon_used = 0.0;
    double bias_bound = 0.0;  // ||eps H^+ B D z||_2
};

EpsilonSweepResult run_epsilon_sweep(const ExperimentConfig& config);
MeasurementSweepResult run_measurement_sweep(const ExperimentConfig& config);
DetectionExperimentResult run_detection_experiment(const ExperimentConfig& config);
LatticeDecayResult run_lattice_decay(const ExperimentConfig& config);
ComplexityCountsResult run_complexity_counts(const ExperimentConfig& config);
SolveResult run_solve(const ExperimentConfig& config);

}  // namespace gridest::harness
