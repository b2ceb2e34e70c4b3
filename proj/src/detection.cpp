#include "gridest/detection.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "gridest/csv.hpp"
#include "gridest/diffusive.hpp"
#include "gridest/kernels.hpp"

namespace gridest::detection {

double threshold_gamma_generic(const DenseMatrix& h, const DenseMatrix& sigma,
                               double noise_bound) {
    if (!(noise_bound >= 0.0))
        throw ContractViolation("threshold_gamma: noise bound must be nonnegative");
    const incremental::WlsSolution sol =
        incremental::wls_oracle(h, sigma, std::vector<double>(h.rows(), 0.0));
    DenseMatrix i_hw = DenseMatrix::identity(h.rows());
    i_hw = kernels::subtract(i_hw, kernels::multiply(h, sol.W));
    return noise_bound * kernels::inf_norm(i_hw);
}

double threshold_gamma(const DenseMatrix& h, const DenseMatrix& sigma, double sigma_scalar) {
    if (!(sigma_scalar > 0.0))
        throw ContractViolation("threshold_gamma: sigma must be positive");
    return threshold_gamma_generic(h, sigma, 2.0 * sigma_scalar);
}

double Detector::default_epsilon(const std::vector<incremental::WlsBlock>& blocks) {
    DenseMatrix h = blocks.front().H;
    DenseMatrix b = blocks.front().B;
    for (std::size_t i = 1; i < blocks.size(); ++i) {
        h = vstack(h, blocks[i].H);
        b = vstack(b, blocks[i].B);
    }
    return 1e3 * incremental::default_epsilon(h, b);
}

Detector::Detector(std::vector<incremental::WlsBlock> blocks, MonitorGraph graph, double epsilon,
                   double gamma, EstimatorKind kind)
    : blocks_(std::move(blocks)),
      graph_(std::move(graph)),
      epsilon_(epsilon),
      gamma_(gamma),
      kind_(kind) {
    if (blocks_.empty()) throw ContractViolation("Detector: no monitor blocks");
    if (blocks_.size() != graph_.monitor_count())
        throw ContractViolation("Detector: block count != monitor count");
    if (!(epsilon_ > 0.0)) throw ContractViolation("Detector: epsilon must be positive");
    if (!(gamma_ >= 0.0)) throw ContractViolation("Detector: gamma must be nonnegative");
    state_dim_ = blocks_.front().H.cols();
    total_rows_ = 0;
    for (const auto& b : blocks_) total_rows_ += b.H.rows();
}

DetectionReport Detector::step(const std::vector<double>& z, std::size_t time) const {
    if (z.size() != total_rows_)
        throw ContractViolation("Detector::step: snapshot length != total measurement rows");

    // split the snapshot along the block boundaries
    std::vector<incremental::WlsBlock> blocks = blocks_;
    std::size_t at = 0;
    for (auto& b : blocks) {
        b.z.assign(z.begin() + static_cast<std::ptrdiff_t>(at),
                   z.begin() + static_cast<std::ptrdiff_t>(at + b.H.rows()));
        at += b.H.rows();
    }

    std::vector<double> x_state;
    if (kind_ == EstimatorKind::Incremental) {
        x_state = incremental::wls_incremental(blocks, epsilon_);
    } else {
        std::vector<diffusive::MonitorNode> nodes = diffusive::make_nodes(blocks, epsilon_);
        diffusive::local_init_all(nodes);
        diffusive::run_synchronous(nodes, graph_);
        x_state.assign(nodes.front().x_hat.begin(),
                       nodes.front().x_hat.begin() + static_cast<std::ptrdiff_t>(state_dim_));
    }

    DetectionReport report;
    report.time = time;
    report.per_monitor_residuals.reserve(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const std::vector<double> pred = kernels::apply(blocks[i].H, x_state);
        double worst = 0.0;
        for (std::size_t r = 0; r < pred.size(); ++r)
            worst = std::max(worst, std::abs(blocks[i].z[r] - pred[r]));
        report.per_monitor_residuals.push_back(worst);
        if (worst > gamma_) report.alarms.insert(i);
    }
    report.alarm_raised = !report.alarms.empty();
    return report;
}

std::vector<DetectionReport> Detector::stream(
    const std::vector<std::vector<double>>& snapshots) const {
    std::vector<DetectionReport> reports;
    reports.reserve(snapshots.size());
    for (std::size_t t = 0; t < snapshots.size(); ++t) reports.push_back(step(snapshots[t], t));
    return reports;
}

std::set<std::size_t> regional_hint(const DetectionReport& report) { return report.alarms; }

void write_detection_csv(std::ostream& out, const std::vector<DetectionReport>& reports,
                         double gamma) {
    out << "t,monitor,residual,gamma,alarm\n";
    for (const DetectionReport& rep : reports) {
        for (std::size_t i = 0; i < rep.per_monitor_residuals.size(); ++i) {
            out << csv::row({csv::format_count(rep.time), csv::format_count(i),
                             csv::format_real(rep.per_monitor_residuals[i]),
                             csv::format_real(gamma), rep.alarms.count(i) ? "1" : "0"});
        }
    }
}

}  // namespace gridest::detection
