#include "gridest/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gridest/csv.hpp"
#include "gridest/diffusive.hpp"
#include "gridest/kernels.hpp"
#include "gridest/rng.hpp"

namespace gridest::harness {

namespace {

class Stopwatch {
  public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse real value '" + value + "'");
    }
}

std::uint64_t parse_count(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (used != value.size() || v < 0) throw std::invalid_argument("bad");
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse count '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::vector<double> parse_real_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_real(key, item));
    }
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
}

std::vector<std::size_t> parse_count_list(const std::string& key, const std::string& value) {
    std::vector<std::size_t> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(static_cast<std::size_t>(parse_count(key, item)));
    }
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
}

std::string join_reals(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += csv::format_real(v[i]);
    }
    return s;
}

std::string join_counts(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

/// Payload = comment header with the config echo, then the CSV body.
std::string with_echo(const std::string& echo, const std::string& body) {
    std::string out;
    std::stringstream ss(echo);
    std::string line;
    while (std::getline(ss, line)) out += "# " + line + "\n";
    out += body;
    return out;
}

struct SweepSystem {
    model::MonitoredSystem ms;
    MonitorGraph graph;
    std::vector<double> x_true;
};

/// Synthetic grid stand-in with one injection row per non-reference bus,
/// split across `monitors` regions.
SweepSystem make_grid_system(const ExperimentConfig& cfg, std::size_t duplicates) {
    const model::PowerGrid grid = model::synthetic_grid(cfg.buses, cfg.branches, cfg.seed);
    model::MonitoredSystem ms =
        model::build_injection_system(grid, cfg.monitors, cfg.sigma, duplicates);
    MonitorGraph graph = model::monitor_graph_from_blocks(ms.H, ms.partition);
    Rng rng(derive_seed(cfg.seed, 0x57a7e));
    std::vector<double> x(ms.H.cols());
    for (double& xi : x) xi = rng.gaussian();
    return SweepSystem{std::move(ms), std::move(graph), std::move(x)};
}

std::vector<incremental::WlsBlock> to_wls_blocks(const model::MonitoredSystem& ms,
                                                 const std::vector<double>& z) {
    std::vector<incremental::WlsBlock> blocks;
    for (const model::IndexRange& r : ms.blocks) {
        incremental::WlsBlock b;
        b.H = ms.H.row_block(r.begin, r.count);
        b.B = ms.B.row_block(r.begin, r.count);
        b.z.assign(z.begin() + static_cast<std::ptrdiff_t>(r.begin),
                   z.begin() + static_cast<std::ptrdiff_t>(r.begin + r.count));
        blocks.push_back(std::move(b));
    }
    return blocks;
}

}  // namespace

std::string kind_name(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::EpsilonSweep: return "epsilon_sweep";
        case ExperimentKind::MeasurementSweep: return "measurement_sweep";
        case ExperimentKind::Detection: return "detection";
        case ExperimentKind::LatticeDecay: return "lattice_decay";
        case ExperimentKind::ComplexityCounts: return "complexity_counts";
        case ExperimentKind::Solve: return "solve";
    }
    return "unknown";
}

ExperimentKind kind_from_name(const std::string& name) {
    for (ExperimentKind k :
         {ExperimentKind::EpsilonSweep, ExperimentKind::MeasurementSweep,
          ExperimentKind::Detection, ExperimentKind::LatticeDecay,
          ExperimentKind::ComplexityCounts, ExperimentKind::Solve})
        if (kind_name(k) == name) return k;
    throw ConfigError("unknown experiment kind '" + name + "'");
}

std::string ExperimentConfig::echo() const {
    std::vector<std::string> lines;
    lines.push_back("experiment = " + kind_name(kind));
    lines.push_back("seed = " + std::to_string(seed));
    switch (kind) {
        case ExperimentKind::EpsilonSweep:
            lines.push_back("buses = " + std::to_string(buses));
            lines.push_back("branches = " + std::to_string(branches));
            lines.push_back("monitors = " + std::to_string(monitors));
            lines.push_back("sigma = " + csv::format_real(sigma));
            lines.push_back("epsilons = " + join_reals(epsilons));
            break;
        case ExperimentKind::MeasurementSweep:
            lines.push_back("buses = " + std::to_string(buses));
            lines.push_back("branches = " + std::to_string(branches));
            lines.push_back("monitors = " + std::to_string(monitors));
            lines.push_back("sigma = " + csv::format_real(sigma));
            lines.push_back("epsilon = " + csv::format_real(epsilon));
            lines.push_back("trials = " + std::to_string(trials));
            lines.push_back("budget_multipliers = " + join_counts(budget_multipliers));
            break;
        case ExperimentKind::Detection:
            lines.push_back("buses = " + std::to_string(buses));
            lines.push_back("branches = " + std::to_string(branches));
            lines.push_back("monitors = " + std::to_string(monitors));
            lines.push_back("sigma = " + csv::format_real(sigma));
            lines.push_back("epsilon = " + csv::format_real(epsilon));
            lines.push_back("duplicates = " + std::to_string(duplicates));
            lines.push_back("snapshots = " + std::to_string(snapshots));
            lines.push_back("corrupt_from = " + std::to_string(corrupt_from));
            lines.push_back("attacked_monitor = " + std::to_string(attacked_monitor));
            lines.push_back("attacked_row = " + std::to_string(attacked_row));
            lines.push_back("w_max = " + csv::format_real(w_max));
            lines.push_back("w_max_nominal_fraction = " + csv::format_real(w_max_nominal_fraction));
            lines.push_back("gamma = " + csv::format_real(gamma_override));
            lines.push_back("truncated_noise = " + std::string(truncated_noise ? "true" : "false"));
            break;
        case ExperimentKind::LatticeDecay:
            lines.push_back("a = " + std::to_string(lattice_a));
            lines.push_back("b = " + std::to_string(lattice_b));
            lines.push_back("tracked_monitors = " + join_counts(tracked_monitors));
            break;
        case ExperimentKind::ComplexityCounts:
            lines.push_back("total_rows = " + std::to_string(total_rows));
            lines.push_back("state_dim = " + std::to_string(state_dim));
            lines.push_back("block_sizes = " + join_counts(block_sizes));
            break;
        case ExperimentKind::Solve:
            lines.push_back("grid_file = " + grid_file);
            lines.push_back("measurements_file = " + measurements_file);
            lines.push_back("epsilon = " + csv::format_real(epsilon));
            break;
    }
    std::string out;
    for (const std::string& l : lines) out += l + "\n";
    return out;
}

ExperimentConfig parse_config(const std::string& text, ExperimentKind kind) {
    ExperimentConfig cfg;
    cfg.kind = kind;

    std::map<std::string, std::string> kv;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, value).second)
            throw ConfigError("config key '" + key + "' given twice");
    }

    auto take = [&kv](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) return std::pair<bool, std::string>{false, ""};
        auto v = it->second;
        kv.erase(it);
        return std::pair<bool, std::string>{true, v};
    };

    if (auto [ok, v] = take("experiment"); ok) {
        if (kind_from_name(v) != kind)
            throw ConfigError("config key 'experiment': file says '" + v +
                              "' but the requested experiment is '" + kind_name(kind) + "'");
    }
    if (auto [ok, v] = take("seed"); ok) cfg.seed = parse_count("seed", v);
    if (auto [ok, v] = take("out"); ok) cfg.out = v;

    auto positive_real = [](const std::string& key, double v) {
        if (!(v > 0.0)) throw ConfigError("config key '" + key + "': must be positive");
        return v;
    };
    auto positive_count = [](const std::string& key, std::uint64_t v) {
        if (v == 0) throw ConfigError("config key '" + key + "': must be positive");
        return static_cast<std::size_t>(v);
    };

    switch (kind) {
        case ExperimentKind::EpsilonSweep:
            if (auto [ok, v] = take("buses"); ok) cfg.buses = positive_count("buses", parse_count("buses", v));
            if (auto [ok, v] = take("branches"); ok) cfg.branches = positive_count("branches", parse_count("branches", v));
            if (auto [ok, v] = take("monitors"); ok) cfg.monitors = positive_count("monitors", parse_count("monitors", v));
            if (auto [ok, v] = take("sigma"); ok) cfg.sigma = positive_real("sigma", parse_real("sigma", v));
            if (auto [ok, v] = take("epsilons"); ok) {
                cfg.epsilons = parse_real_list("epsilons", v);
                for (double e : cfg.epsilons) positive_real("epsilons", e);
            }
            {
                const auto [mn, mx] = std::minmax_element(cfg.epsilons.begin(), cfg.epsilons.end());
                if (cfg.epsilons.size() < 4 || *mx / *mn < 0.999e3)
                    throw ConfigError(
                        "config key 'epsilons': need at least 4 values spanning 3 decades");
            }
            break;
        case ExperimentKind::MeasurementSweep:
            if (auto [ok, v] = take("buses"); ok) cfg.buses = positive_count("buses", parse_count("buses", v));
            if (auto [ok, v] = take("branches"); ok) cfg.branches = positive_count("branches", parse_count("branches", v));
            if (auto [ok, v] = take("monitors"); ok) cfg.monitors = positive_count("monitors", parse_count("monitors", v));
            if (auto [ok, v] = take("sigma"); ok) cfg.sigma = positive_real("sigma", parse_real("sigma", v));
            if (auto [ok, v] = take("epsilon"); ok) cfg.epsilon = positive_real("epsilon", parse_real("epsilon", v));
            if (auto [ok, v] = take("trials"); ok) cfg.trials = positive_count("trials", parse_count("trials", v));
            if (auto [ok, v] = take("budget_multipliers"); ok) {
                cfg.budget_multipliers = parse_count_list("budget_multipliers", v);
                for (std::size_t mlt : cfg.budget_multipliers) positive_count("budget_multipliers", mlt);
            }
            break;
        case ExperimentKind::Detection:
            if (auto [ok, v] = take("buses"); ok) cfg.buses = positive_count("buses", parse_count("buses", v));
            if (auto [ok, v] = take("branches"); ok) cfg.branches = positive_count("branches", parse_count("branches", v));
            if (auto [ok, v] = take("monitors"); ok) cfg.monitors = positive_count("monitors", parse_count("monitors", v));
            if (auto [ok, v] = take("sigma"); ok) cfg.sigma = positive_real("sigma", parse_real("sigma", v));
            if (auto [ok, v] = take("epsilon"); ok) cfg.epsilon = positive_real("epsilon", parse_real("epsilon", v));
            if (auto [ok, v] = take("duplicates"); ok) cfg.duplicates = positive_count("duplicates", parse_count("duplicates", v));
            if (auto [ok, v] = take("snapshots"); ok) cfg.snapshots = positive_count("snapshots", parse_count("snapshots", v));
            if (auto [ok, v] = take("corrupt_from"); ok) cfg.corrupt_from = static_cast<std::size_t>(parse_count("corrupt_from", v));
            if (auto [ok, v] = take("attacked_monitor"); ok) cfg.attacked_monitor = static_cast<std::size_t>(parse_count("attacked_monitor", v));
            if (auto [ok, v] = take("attacked_row"); ok) cfg.attacked_row = static_cast<std::size_t>(parse_count("attacked_row", v));
            if (auto [ok, v] = take("w_max"); ok) cfg.w_max = positive_real("w_max", parse_real("w_max", v));
            if (auto [ok, v] = take("w_max_nominal_fraction"); ok)
                cfg.w_max_nominal_fraction = positive_real("w_max_nominal_fraction", parse_real("w_max_nominal_fraction", v));
            if (auto [ok, v] = take("gamma"); ok) cfg.gamma_override = parse_real("gamma", v);
            if (auto [ok, v] = take("truncated_noise"); ok) cfg.truncated_noise = parse_bool("truncated_noise", v);
            break;
        case ExperimentKind::LatticeDecay:
            if (auto [ok, v] = take("a"); ok) cfg.lattice_a = positive_count("a", parse_count("a", v));
            if (auto [ok, v] = take("b"); ok) cfg.lattice_b = positive_count("b", parse_count("b", v));
            if (auto [ok, v] = take("tracked_monitors"); ok) cfg.tracked_monitors = parse_count_list("tracked_monitors", v);
            for (std::size_t t : cfg.tracked_monitors)
                if (t >= cfg.lattice_b * cfg.lattice_b)
                    throw ConfigError("config key 'tracked_monitors': index " + std::to_string(t) +
                                      " out of range for " +
                                      std::to_string(cfg.lattice_b * cfg.lattice_b) + " monitors");
            break;
        case ExperimentKind::ComplexityCounts:
            if (auto [ok, v] = take("total_rows"); ok) cfg.total_rows = positive_count("total_rows", parse_count("total_rows", v));
            if (auto [ok, v] = take("state_dim"); ok) cfg.state_dim = positive_count("state_dim", parse_count("state_dim", v));
            if (auto [ok, v] = take("block_sizes"); ok) {
                cfg.block_sizes = parse_count_list("block_sizes", v);
                for (std::size_t k : cfg.block_sizes) positive_count("block_sizes", k);
            }
            for (std::size_t k : cfg.block_sizes)
                if (k > cfg.total_rows)
                    throw ConfigError("config key 'block_sizes': block size " + std::to_string(k) +
                                      " exceeds total_rows");
            break;
        case ExperimentKind::Solve:
            if (auto [ok, v] = take("grid_file"); ok) cfg.grid_file = v;
            if (auto [ok, v] = take("measurements_file"); ok) cfg.measurements_file = v;
            if (auto [ok, v] = take("epsilon"); ok) cfg.epsilon = positive_real("epsilon", parse_real("epsilon", v));
            if (cfg.grid_file.empty() || cfg.measurements_file.empty())
                throw ConfigError("solve requires 'grid_file' and 'measurements_file'");
            break;
    }

    if (!kv.empty())
        throw ConfigError("unknown config key '" + kv.begin()->first + "' for experiment " +
                          kind_name(kind));
    return cfg;
}

ExperimentConfig load_config(const std::string& path, ExperimentKind kind) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), kind);
}

void write_artifact(const RunArtifact& artifact, const std::string& out_path) {
    if (out_path.empty()) return;
    for (const auto& [suffix, payload] : artifact.csvs) {
        const std::string path = suffix.empty() ? out_path : out_path + "." + suffix;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ConfigError("cannot open output file '" + path + "'");
        out << payload;
    }
}

EpsilonSweepResult run_epsilon_sweep(const ExperimentConfig& cfg) {
    Stopwatch watch;
    SweepSystem sw = make_grid_system(cfg, 1);

    const std::vector<double> z =
        model::generate_measurements(sw.ms.H, sw.x_true, sw.ms.B, derive_seed(cfg.seed, 0xe5));
    const incremental::WlsSolution wls = incremental::wls_oracle(sw.ms.H, sw.ms.Sigma, z);
    const double wls_norm = kernels::norm2(wls.x);
    const std::vector<incremental::WlsBlock> blocks = to_wls_blocks(sw.ms, z);

    EpsilonSweepResult res;
    std::vector<double> eps_sorted = cfg.epsilons;
    std::sort(eps_sorted.begin(), eps_sorted.end(), std::greater<>());
    for (double eps : eps_sorted) {
        const std::vector<double> xe = incremental::wls_incremental(blocks, eps);
        const double err = kernels::norm2(kernels::vec_sub(xe, wls.x)) / wls_norm;
        res.points.emplace_back(eps, err);
    }

    // log-log regression slope
    double mx = 0.0, my = 0.0;
    for (const auto& [e, err] : res.points) {
        mx += std::log(e);
        my += std::log(std::max(err, 1e-300));
    }
    mx /= static_cast<double>(res.points.size());
    my /= static_cast<double>(res.points.size());
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [e, err] : res.points) {
        const double dx = std::log(e) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(std::max(err, 1e-300)) - my);
    }
    res.slope = sxy / sxx;

    std::string body = "epsilon,rel_error\n";
    for (const auto& [e, err] : res.points)
        body += csv::row({csv::format_real(e), csv::format_real(err)});
    res.artifact.config_echo = cfg.echo();
    res.artifact.csvs.emplace_back("", with_echo(res.artifact.config_echo, body));
    res.artifact.summary.push_back("states = " + std::to_string(sw.ms.H.cols()));
    res.artifact.summary.push_back("loglog_slope = " + csv::format_real(res.slope));
    res.artifact.wall_seconds = watch.seconds();
    return res;
}

MeasurementSweepResult run_measurement_sweep(const ExperimentConfig& cfg) {
    Stopwatch watch;
    const model::PowerGrid grid = model::synthetic_grid(cfg.buses, cfg.branches, cfg.seed);

    MeasurementSweepResult res;
    res.artifact.config_echo = cfg.echo();
    std::string body = "total_measurements,mean_error,stddev\n";

    Rng xrng(derive_seed(cfg.seed, 0x57a7e));
    std::vector<double> x_true(cfg.buses - 1);
    for (double& xi : x_true) xi = xrng.gaussian();

    for (std::size_t mult : cfg.budget_multipliers) {
        const model::MonitoredSystem ms =
            model::build_injection_system(grid, cfg.monitors, cfg.sigma, mult);
        const double eps =
            cfg.epsilon > 0.0 ? cfg.epsilon : incremental::default_epsilon(ms.H, ms.B);

        std::vector<double> errors(cfg.trials, 0.0);
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t t = 0; t < static_cast<std::int64_t>(cfg.trials); ++t) {
            const std::vector<double> z = model::generate_measurements(
                ms.H, x_true, ms.B, derive_seed(cfg.seed, 0xb0d6e7 + mult, static_cast<std::uint64_t>(t)));
            const std::vector<incremental::WlsBlock> blocks = to_wls_blocks(ms, z);
            const std::vector<double> xe = incremental::wls_incremental(blocks, eps);
            errors[static_cast<std::size_t>(t)] = kernels::norm2(kernels::vec_sub(xe, x_true));
        }

        double mean = std::accumulate(errors.begin(), errors.end(), 0.0) /
                      static_cast<double>(cfg.trials);
        double var = 0.0;
        for (double e : errors) var += (e - mean) * (e - mean);
        var /= static_cast<double>(cfg.trials);
        const double stddev = std::sqrt(var);

        res.points.emplace_back(ms.H.rows(), mean, stddev);
        body += csv::row({csv::format_count(ms.H.rows()), csv::format_real(mean),
                          csv::format_real(stddev)});
    }

    res.artifact.csvs.emplace_back("", with_echo(res.artifact.config_echo, body));
    res.artifact.summary.push_back("trials = " + std::to_string(cfg.trials));
    res.artifact.wall_seconds = watch.seconds();
    return res;
}

DetectionExperimentResult run_detection_experiment(const ExperimentConfig& cfg) {
    Stopwatch watch;
    SweepSystem sw = make_grid_system(cfg, cfg.duplicates);

    DetectionExperimentResult res;
    res.gamma = cfg.gamma_override >= 0.0
                    ? cfg.gamma_override
                    : detection::threshold_gamma(sw.ms.H, sw.ms.Sigma, cfg.sigma);

    const std::vector<double> z_nominal = kernels::apply(sw.ms.H, sw.x_true);
    const model::IndexRange atk_block = sw.ms.blocks.at(cfg.attacked_monitor);
    if (cfg.attacked_row >= atk_block.count)
        throw ConfigError("config key 'attacked_row': outside the attacked monitor's block");
    res.w_max = cfg.w_max > 0.0
                    ? cfg.w_max
                    : cfg.w_max_nominal_fraction *
                          std::abs(z_nominal[atk_block.begin + cfg.attacked_row]);

    std::vector<incremental::WlsBlock> blocks = to_wls_blocks(sw.ms, z_nominal);
    const double eps =
        cfg.epsilon > 0.0 ? cfg.epsilon : detection::Detector::default_epsilon(blocks);
    detection::Detector detector(blocks, sw.graph, eps, res.gamma);

    const double trunc = cfg.truncated_noise ? 2.0 : 0.0;
    std::vector<std::vector<double>> clean_snaps, corrupted_snaps;
    for (std::size_t t = 0; t < cfg.snapshots; ++t) {
        std::vector<double> z = model::generate_measurements(
            sw.ms.H, sw.x_true, sw.ms.B, derive_seed(cfg.seed, 0xde7ec7, t), trunc);
        clean_snaps.push_back(z);
        if (t >= cfg.corrupt_from) {
            const model::Injection inj = model::inject_false_data(
                z, sw.ms.blocks, cfg.attacked_monitor, cfg.attacked_row, res.w_max,
                derive_seed(cfg.seed, 0xa77ac4, t));
            corrupted_snaps.push_back(inj.corrupted);
        } else {
            corrupted_snaps.push_back(z);
        }
    }

    res.clean = detector.stream(clean_snaps);
    res.corrupted = detector.stream(corrupted_snaps);
    for (const auto& rep : res.corrupted) res.alarm_in_corrupted |= rep.alarm_raised;

    res.artifact.config_echo = cfg.echo();
    {
        std::ostringstream clean_csv, corrupted_csv;
        detection::write_detection_csv(clean_csv, res.clean, res.gamma);
        detection::write_detection_csv(corrupted_csv, res.corrupted, res.gamma);
        res.artifact.csvs.emplace_back("", with_echo(res.artifact.config_echo, corrupted_csv.str()));
        res.artifact.csvs.emplace_back("clean", with_echo(res.artifact.config_echo, clean_csv.str()));
    }
    res.artifact.summary.push_back("gamma = " + csv::format_real(res.gamma));
    res.artifact.summary.push_back("w_max = " + csv::format_real(res.w_max));
    res.artifact.summary.push_back("epsilon = " + csv::format_real(eps));
    res.artifact.summary.push_back(std::string("alarm = ") +
                                   (res.alarm_in_corrupted ? "true" : "false"));
    res.artifact.wall_seconds = watch.seconds();
    return res;
}

LatticeDecayResult run_lattice_decay(const ExperimentConfig& cfg) {
    Stopwatch watch;
    const model::LatticeSystem lat = model::lattice_grid(cfg.lattice_a, cfg.lattice_b);

    LatticeDecayResult res;
    res.diameter = lat.monitors.diameter();
    res.tracked = cfg.tracked_monitors;

    // noise-free snapshot: z = H x exactly, solved on the plain state space
    Rng rng(derive_seed(cfg.seed, 0x1a771ce));
    std::vector<double> x_true(lat.H.cols());
    for (double& xi : x_true) xi = rng.gaussian();
    const std::vector<double> z = kernels::apply(lat.H, x_true);

    std::vector<incremental::LinearBlock> blocks;
    for (const model::IndexRange& r : lat.partition.row_ranges)
        blocks.push_back({lat.H.row_block(r.begin, r.count),
                          {z.begin() + static_cast<std::ptrdiff_t>(r.begin),
                           z.begin() + static_cast<std::ptrdiff_t>(r.begin + r.count)}});

    const finitemem::BlockLayout layout = finitemem::BlockLayout::from_partition(lat.partition);
    const auto sweep = finitemem::run_truncated_sweep(diffusive::make_nodes(blocks),
                                                      lat.monitors, layout, res.diameter);

    const std::vector<double> x_full = linalg::pinv_apply(linalg::svd(lat.H), z);

    std::vector<std::tuple<std::size_t, std::size_t, double>> decay_rows;
    std::vector<std::pair<std::size_t, double>> envelope_pts(res.diameter + 1);
    std::vector<std::pair<std::size_t, double>> all_pts;
    for (std::size_t h = 0; h <= res.diameter; ++h) envelope_pts[h] = {h, 0.0};
    for (std::size_t k = 0; k < res.tracked.size(); ++k) {
        const std::size_t mon = res.tracked[k];
        std::vector<double> errs;
        std::vector<std::pair<std::size_t, double>> fit_pts;
        for (std::size_t h = 0; h <= res.diameter; ++h) {
            const double e = finitemem::local_error(layout, mon, x_full, sweep[h][mon]);
            errs.push_back(e);
            fit_pts.emplace_back(h, e);
            all_pts.emplace_back(h, e);
            envelope_pts[h].second = std::max(envelope_pts[h].second, e);
            decay_rows.emplace_back(mon, h, e);
        }
        res.errors.push_back(std::move(errs));
        try {
            res.per_monitor_fits.push_back(finitemem::decay_fit(fit_pts));
        } catch (const InsufficientData&) {
            // tiny lattices converge before three positive depths exist
            res.per_monitor_fits.push_back(finitemem::DecayFit{});
        }
    }
    try {
        res.envelope_fit = finitemem::decay_fit(envelope_pts);
        res.envelope_C = finitemem::envelope_constant(all_pts, res.envelope_fit.q);
    } catch (const InsufficientData&) {
        res.envelope_fit = finitemem::DecayFit{};
        res.envelope_C = 0.0;
    }

    res.pinv_table = finitemem::verify_pinv_decay(lat.H, layout);

    res.artifact.config_echo = cfg.echo();
    {
        std::ostringstream decay_csv, blocks_csv;
        finitemem::write_decay_csv(decay_csv, decay_rows);
        finitemem::write_blockpair_csv(blocks_csv, res.pinv_table);
        res.artifact.csvs.emplace_back("", with_echo(res.artifact.config_echo, decay_csv.str()));
        res.artifact.csvs.emplace_back("blocks",
                                       with_echo(res.artifact.config_echo, blocks_csv.str()));
    }
    res.artifact.summary.push_back("diameter = " + std::to_string(res.diameter));
    for (std::size_t k = 0; k < res.tracked.size(); ++k)
        res.artifact.summary.push_back(
            "monitor " + std::to_string(res.tracked[k]) +
            ": q = " + csv::format_real(res.per_monitor_fits[k].q) +
            ", C = " + csv::format_real(res.per_monitor_fits[k].C));
    res.artifact.summary.push_back("envelope: q = " + csv::format_real(res.envelope_fit.q) +
                                   ", C = " + csv::format_real(res.envelope_C) +
                                   ", rms_logfit = " +
                                   csv::format_real(res.envelope_fit.residual_of_fit));
    res.artifact.summary.push_back("pinv_decay: q = " + csv::format_real(res.pinv_table.fit.q));
    res.artifact.wall_seconds = watch.seconds();
    return res;
}

ComplexityCountsResult run_complexity_counts(const ExperimentConfig& cfg) {
    Stopwatch watch;
    ComplexityCountsResult res;

    Rng rng(derive_seed(cfg.seed, 0xc0717));
    DenseMatrix h(cfg.total_rows, cfg.state_dim);
    for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] = rng.gaussian();
    std::vector<double> x(cfg.state_dim);
    for (double& xi : x) xi = rng.gaussian();
    const std::vector<double> z = kernels::apply(h, x);

    std::string body = "k,blocks,communications,expected_communications,svd_flop_surrogate\n";
    for (std::size_t k : cfg.block_sizes) {
        std::vector<incremental::LinearBlock> blocks;
        for (std::size_t at = 0; at < cfg.total_rows; at += k) {
            const std::size_t rows = std::min(k, cfg.total_rows - at);
            blocks.push_back({h.row_block(at, rows),
                              {z.begin() + static_cast<std::ptrdiff_t>(at),
                               z.begin() + static_cast<std::ptrdiff_t>(at + rows)}});
        }
        incremental::RunStats stats;
        incremental::incremental_min_norm(blocks, cfg.state_dim, &stats);

        const std::size_t expected = (cfg.total_rows + k - 1) / k - 1;
        std::size_t flops = 0;
        for (const auto& dims : stats.svds) flops += dims.flop_surrogate();
        res.rows.emplace_back(k, blocks.size(), stats.communications, expected);
        body += csv::row({csv::format_count(k), csv::format_count(blocks.size()),
                          csv::format_count(stats.communications), csv::format_count(expected),
                          csv::format_count(flops)});
    }

    res.artifact.config_echo = cfg.echo();
    res.artifact.csvs.emplace_back("", with_echo(res.artifact.config_echo, body));
    res.artifact.wall_seconds = watch.seconds();
    return res;
}

namespace {

struct MeasurementFile {
    double sigma = 0.0;
    std::vector<std::size_t> block_sizes;  // empty = single block
    std::vector<double> z;
};

MeasurementFile read_measurements(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open measurements file '" + path + "'");
    MeasurementFile mf;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word)) continue;
        if (word == "sigma") {
            if (!(ls >> mf.sigma) || !(mf.sigma > 0.0))
                throw ConfigError("measurements file line " + std::to_string(lineno) +
                                  ": invalid sigma");
        } else if (word == "blocks") {
            std::size_t s;
            while (ls >> s) {
                if (s == 0)
                    throw ConfigError("measurements file line " + std::to_string(lineno) +
                                      ": zero block size");
                mf.block_sizes.push_back(s);
            }
            if (mf.block_sizes.empty())
                throw ConfigError("measurements file line " + std::to_string(lineno) +
                                  ": blocks needs at least one size");
        } else if (word == "z") {
            double v;
            if (!(ls >> v))
                throw ConfigError("measurements file line " + std::to_string(lineno) +
                                  ": malformed z value");
            mf.z.push_back(v);
            std::string extra;
            if (ls >> extra)
                throw ConfigError("measurements file line " + std::to_string(lineno) +
                                  ": one z value per line");
        } else {
            throw ConfigError("measurements file line " + std::to_string(lineno) +
                              ": unknown directive '" + word + "'");
        }
    }
    if (!(mf.sigma > 0.0)) throw ConfigError("measurements file: missing sigma");
    if (mf.z.empty()) throw ConfigError("measurements file: no z values");
    return mf;
}

}  // namespace

SolveResult run_solve(const ExperimentConfig& cfg) {
    Stopwatch watch;

    std::ifstream gf(cfg.grid_file);
    if (!gf) throw ConfigError("cannot open grid file '" + cfg.grid_file + "'");
    const model::PowerGrid grid = model::read_grid(gf);
    const MeasurementFile mf = read_measurements(cfg.measurements_file);

    const DenseMatrix h = model::dc_measurement_matrix(grid);
    if (mf.z.size() != h.rows())
        throw ConfigError("measurements file: " + std::to_string(mf.z.size()) +
                          " z values but the grid model has " + std::to_string(h.rows()) +
                          " measurement rows");

    std::vector<model::IndexRange> blocks;
    if (mf.block_sizes.empty()) {
        blocks.push_back({0, h.rows()});
    } else {
        std::size_t at = 0;
        for (std::size_t s : mf.block_sizes) {
            blocks.push_back({at, s});
            at += s;
        }
        if (at != h.rows())
            throw ConfigError("measurements file: block sizes sum to " + std::to_string(at) +
                              ", expected " + std::to_string(h.rows()));
    }

    DenseMatrix b(h.rows(), h.rows());
    for (std::size_t i = 0; i < h.rows(); ++i) b(i, i) = mf.sigma;

    SolveResult res;
    res.epsilon_used = cfg.epsilon > 0.0 ? cfg.epsilon : incremental::default_epsilon(h, b);

    std::vector<incremental::WlsBlock> wblocks;
    for (const model::IndexRange& r : blocks) {
        incremental::WlsBlock wb;
        wb.H = h.row_block(r.begin, r.count);
        wb.B = b.row_block(r.begin, r.count);
        wb.z.assign(mf.z.begin() + static_cast<std::ptrdiff_t>(r.begin),
                    mf.z.begin() + static_cast<std::ptrdiff_t>(r.begin + r.count));
        wblocks.push_back(std::move(wb));
    }
    res.x_hat = incremental::wls_incremental(wblocks, res.epsilon_used);
    res.bias_bound = kernels::norm2(
        incremental::approximation_error_exact(h, b, mf.z, res.epsilon_used));

    for (const auto& wb : wblocks) {
        const std::vector<double> pred = kernels::apply(wb.H, res.x_hat);
        double worst = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i)
            worst = std::max(worst, std::abs(wb.z[i] - pred[i]));
        res.per_monitor_residuals.push_back(worst);
    }

    res.artifact.config_echo = cfg.echo();
    std::string body = "index,value\n";
    for (std::size_t i = 0; i < res.x_hat.size(); ++i)
        body += csv::row({csv::format_count(i), csv::format_real(res.x_hat[i])});
    res.artifact.csvs.emplace_back("", with_echo(res.artifact.config_echo, body));
    res.artifact.summary.push_back("epsilon = " + csv::format_real(res.epsilon_used));
    res.artifact.summary.push_back("bias_bound = " + csv::format_real(res.bias_bound));
    for (std::size_t i = 0; i < res.per_monitor_residuals.size(); ++i)
        res.artifact.summary.push_back("residual[" + std::to_string(i) +
                                       "] = " + csv::format_real(res.per_monitor_residuals[i]));
    res.artifact.wall_seconds = watch.seconds();
    return res;
}

}  // namespace gridest::harness
