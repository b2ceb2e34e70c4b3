#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <vector>

#include "gridest/incremental.hpp"
#include "gridest/monitor_graph.hpp"

namespace gridest::detection {

struct DetectionConfig {
    double gamma = 0.0;        // alarm threshold, >= 0
    double noise_bound = 0.0;  // the bound the threshold was derived from (2*sigma or gamma)
};

struct DetectionReport {
    std::size_t time = 0;
    std::vector<double> per_monitor_residuals;  // inf-norm residual per monitor
    std::set<std::size_t> alarms;               // monitors whose residual exceeds gamma
    bool alarm_raised = false;                  // == !alarms.empty(); broadcast flag
};

/// Threshold 2*sigma*||I - H W||_inf with W the WLS operator for (H, Sigma).
double threshold_gamma(const DenseMatrix& h, const DenseMatrix& sigma, double sigma_scalar);

/// The generic form gamma_bound * ||I - H W||_inf for a known noise bound.
double threshold_gamma_generic(const DenseMatrix& h, const DenseMatrix& sigma,
                               double noise_bound);

enum class EstimatorKind { Diffusive, Incremental };

/// Residual monitor over a stream of measurement snapshots. Every step
/// estimates the full state from scratch (snapshots carry fresh noise) and
/// each monitor thresholds the inf-norm of its own residual slice.
class Detector {
  public:
    /// Default embedding parameter: 1e-3 * smax(H)/smax(B). The diffusive
    /// fusion chain loses roughly machine-eps/eps^2 digits, so the detector
    /// keeps eps well above the incremental module's default; the induced
    /// estimate bias is second order in eps and far below any threshold.
    static double default_epsilon(const std::vector<incremental::WlsBlock>& blocks);

    Detector(std::vector<incremental::WlsBlock> blocks, MonitorGraph graph, double epsilon,
             double gamma, EstimatorKind kind = EstimatorKind::Diffusive);

    /// One snapshot z(t): estimate, residuals, alarm set.
    DetectionReport step(const std::vector<double>& z, std::size_t time) const;

    /// One report per snapshot, in order.
    std::vector<DetectionReport> stream(const std::vector<std::vector<double>>& snapshots) const;

    double gamma() const { return gamma_; }
    double epsilon() const { return epsilon_; }
    std::size_t monitor_count() const { return blocks_.size(); }

  private:
    std::vector<incremental::WlsBlock> blocks_;
    MonitorGraph graph_;
    double epsilon_;
    double gamma_;
    EstimatorKind kind_;
    std::size_t state_dim_;
    std::size_t total_rows_;
};

/// Suspected-region hint: exactly the monitors whose residual exceeded the
/// threshold. A heuristic pointer, not an identification guarantee.
std::set<std::size_t> regional_hint(const DetectionReport& report);

/// Schema: t,monitor,residual,gamma,alarm (one row per monitor and step).
void write_detection_csv(std::ostream& out, const std::vector<DetectionReport>& reports,
                         double gamma);

}  // namespace gridest::detection
