#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "gridest/dense_matrix.hpp"
#include "gridest/monitor_graph.hpp"

namespace gridest::model {

struct Branch {
    std::size_t bus_a = 0;
    std::size_t bus_b = 0;
    double susceptance = 1.0;  // per-unit, > 0
};

struct PowerGrid {
    std::size_t bus_count = 0;
    std::vector<Branch> branches;
};

bool grid_connected(const PowerGrid& grid);

/// Weighted nodal Laplacian over all buses (row sums are zero).
DenseMatrix full_laplacian(const PowerGrid& grid);

/// Laplacian with the reference bus (bus 0) grounded: row/column 0 removed.
/// The result maps the voltage angles of buses 1..n-1 to their real power
/// injections and is symmetric positive definite for a connected grid.
DenseMatrix dc_measurement_matrix(const PowerGrid& grid);

/// Line-oriented grid file: `buses <n>` header, then `branch <a> <b> <susceptance>`.
void write_grid(std::ostream& out, const PowerGrid& grid);
PowerGrid read_grid(std::istream& in);  // throws ConfigError with line number

/// Connected random grid: spanning tree plus extra branches, seeded.
PowerGrid synthetic_grid(std::size_t bus_count, std::size_t branch_count, std::uint64_t seed);

struct IndexRange {
    std::size_t begin = 0;
    std::size_t count = 0;
};

/// Contiguous per-monitor blocks of states and measurement rows, inducing
/// an m x m block grid over a measurement matrix.
struct RegionPartition {
    std::size_t state_dim = 0;
    std::size_t row_dim = 0;
    std::vector<IndexRange> state_ranges;  // per monitor, in order, covers all states
    std::vector<IndexRange> row_ranges;    // per monitor, in order, covers all rows
    std::vector<std::size_t> bus_of_state;  // original bus id per state column
    std::vector<std::size_t> bus_of_row;    // original bus id per measurement row

    std::size_t monitor_count() const { return state_ranges.size(); }

    /// Copy of block H_ij: monitor i's rows against monitor j's state columns.
    DenseMatrix block(const DenseMatrix& h, std::size_t i, std::size_t j) const;
};

struct MeasurementSystem {
    DenseMatrix H;               // p x n
    DenseMatrix Sigma;           // p x p SPD (0x0 for noise-free instances)
    DenseMatrix B;               // p x q with B B^T = Sigma (zero-width if noise-free)
    std::vector<double> x_true;  // n
    std::vector<double> z;       // p
    std::vector<IndexRange> blocks;  // ordered row partition into monitor blocks
};

/// 2-D lattice of (a*b)^2 buses with unit susceptances, divided into b^2
/// square regions of a^2 buses each; one monitor per region. States and
/// measurement rows are grouped by monitor so that region blocks are
/// contiguous. Monitors are adjacent exactly where a branch crosses the
/// region boundary.
struct LatticeSystem {
    PowerGrid grid;
    RegionPartition partition;
    MonitorGraph monitors;
    DenseMatrix H;  // grounded Laplacian in monitor-grouped order, (n-1)x(n-1)
};

LatticeSystem lattice_grid(std::size_t a, std::size_t b);

/// z = H x + B g with g standard normal from the seeded stream.
/// truncate_sigmas > 0 conditions every component of g on |g| <= truncate_sigmas.
std::vector<double> generate_measurements(const DenseMatrix& h, const std::vector<double>& x,
                                          const DenseMatrix& b, std::uint64_t seed,
                                          double truncate_sigmas = 0.0);

struct Injection {
    std::vector<double> corrupted;
    double w = 0.0;  // the drawn attack value
};

/// Adds one uniform [0, w_max] draw to row `row_in_block` of monitor `monitor`.
Injection inject_false_data(const std::vector<double>& z, const std::vector<IndexRange>& blocks,
                            std::size_t monitor, std::size_t row_in_block, double w_max,
                            std::uint64_t seed);

/// Monitor adjacency from the block structure of H: edge (i,j) iff block
/// H_ij or H_ji has an entry with |value| > 1e-12. Throws ModelError if the
/// resulting graph is disconnected.
MonitorGraph monitor_graph_from_blocks(const DenseMatrix& h, const RegionPartition& partition);

/// Random consistent instance: z = H x exactly, Ker(H) possibly nontrivial,
/// rows split into m blocks. Carries no noise model (Sigma and B are empty).
MeasurementSystem random_consistent_system(std::size_t n, std::size_t m, std::uint64_t seed);

/// One injection measurement per non-reference bus, grouped into `monitors`
/// contiguous regions, each row duplicated `duplicates` times (redundancy
/// for detection); Sigma = sigma^2 I.
struct MonitoredSystem {
    DenseMatrix H;
    DenseMatrix Sigma;
    DenseMatrix B;
    RegionPartition partition;
    std::vector<IndexRange> blocks;  // same as partition.row_ranges
};

MonitoredSystem build_injection_system(const PowerGrid& grid, std::size_t monitors, double sigma,
                                       std::size_t duplicates = 1);

}  // namespace gridest::model
