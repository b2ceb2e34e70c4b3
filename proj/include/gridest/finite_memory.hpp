#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include "gridest/diffusive.hpp"
#include "gridest/network_model.hpp"

namespace gridest::finitemem {

/// Contiguous per-monitor state and row blocks inducing the m x m block
/// grid over a measurement matrix.
struct BlockLayout {
    std::vector<model::IndexRange> state_ranges;
    std::vector<model::IndexRange> row_ranges;

    std::size_t monitor_count() const { return state_ranges.size(); }
    static BlockLayout from_partition(const model::RegionPartition& part);
};

/// x_hat restricted to monitor i's own state block.
std::vector<double> own_block(const BlockLayout& layout, std::size_t i,
                              const std::vector<double>& x);

/// Runs exactly h synchronous rounds (h = 0 is the local initialization)
/// and returns each monitor's estimate restricted to its own state block.
std::vector<std::vector<double>> run_truncated(std::vector<diffusive::MonitorNode> nodes,
                                               const MonitorGraph& graph,
                                               const BlockLayout& layout, std::size_t h);

/// All truncation depths at once: result[h][i] is monitor i's own-block
/// estimate after h rounds, for h = 0..h_max. One simulation pass.
std::vector<std::vector<std::vector<double>>> run_truncated_sweep(
    std::vector<diffusive::MonitorNode> nodes, const MonitorGraph& graph,
    const BlockLayout& layout, std::size_t h_max);

/// Euclidean distance between the converged and truncated estimates on
/// monitor i's own block.
double local_error(const BlockLayout& layout, std::size_t i, const std::vector<double>& full,
                   const std::vector<double>& partial_own_block);

struct DecayFit {
    double C = 0.0;
    double q = 0.0;                // in (0,1) when the fit succeeds
    double residual_of_fit = 0.0;  // rms misfit on the log scale
};

/// Least-squares fit of log e_h = log C + (h/2 + 1) log q over the points
/// with meaningfully positive error (converged values, below
/// max(1e-12, 1e-9 * max_h e_h), are treated as exact zeros and excluded).
/// Throws InsufficientData with fewer than 3 usable points.
DecayFit decay_fit(const std::vector<std::pair<std::size_t, double>>& errors);

/// Smallest constant making C * q^(h/2+1) dominate every given error.
double envelope_constant(const std::vector<std::pair<std::size_t, double>>& errors, double q);

/// Structural support of I, M, M^2, ..., M^h (boolean powers, entries
/// counted when |value| > 1e-12) and its complement.
struct SupportSets {
    std::size_t n = 0;
    std::vector<std::uint8_t> support;  // n x n mask

    bool in_support(std::size_t i, std::size_t j) const { return support[i * n + j] != 0; }
    bool in_decay(std::size_t i, std::size_t j) const { return !in_support(i, j); }
    std::size_t support_count() const;
};

SupportSets support_decay_sets(const DenseMatrix& m, std::size_t h);

constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max();

struct PinvDecayRow {
    std::size_t i = 0;
    std::size_t j = 0;
    std::size_t distance = 0;  // kUnreachable when blocks are never coupled
    double max_abs_entry = 0.0;
};

struct PinvDecayTable {
    std::vector<PinvDecayRow> rows;   // one per ordered block pair
    std::vector<std::pair<std::size_t, double>> envelope;  // per finite distance: max entry
    DecayFit fit;                     // exponential fit of the envelope vs distance
};

/// Tabulates max |(H^+)_ij| against the block-graph distance of (i,j); the
/// block graph links regions whose H blocks are structurally coupled.
/// Requires full row rank (apply to H^T for full-column-rank instances).
PinvDecayTable verify_pinv_decay(const DenseMatrix& h, const BlockLayout& layout);

/// Schema: monitor,h,error.
void write_decay_csv(std::ostream& out,
                     const std::vector<std::tuple<std::size_t, std::size_t, double>>& rows);

/// Schema: blockpair_i,blockpair_j,distance,max_abs_entry.
void write_blockpair_csv(std::ostream& out, const PinvDecayTable& table);

}  // namespace gridest::finitemem
