#include "gridest/network_model.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "gridest/kernels.hpp"
#include "gridest/rng.hpp"

namespace gridest::model {

namespace {

void check_grid(const PowerGrid& grid, const char* who) {
    for (const Branch& br : grid.branches) {
        if (br.bus_a == br.bus_b)
            throw ModelError(std::string(who) + ": branch endpoints equal");
        if (br.bus_a >= grid.bus_count || br.bus_b >= grid.bus_count)
            throw ModelError(std::string(who) + ": branch endpoint out of range");
        if (!(br.susceptance > 0.0))
            throw ModelError(std::string(who) + ": susceptance must be positive");
    }
}

}  // namespace

bool grid_connected(const PowerGrid& grid) {
    if (grid.bus_count == 0) return false;
    std::vector<std::vector<std::size_t>> adj(grid.bus_count);
    for (const Branch& br : grid.branches) {
        adj[br.bus_a].push_back(br.bus_b);
        adj[br.bus_b].push_back(br.bus_a);
    }
    std::vector<bool> seen(grid.bus_count, false);
    std::deque<std::size_t> queue{0};
    seen[0] = true;
    std::size_t reached = 1;
    while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop_front();
        for (std::size_t v : adj[u])
            if (!seen[v]) {
                seen[v] = true;
                ++reached;
                queue.push_back(v);
            }
    }
    return reached == grid.bus_count;
}

DenseMatrix full_laplacian(const PowerGrid& grid) {
    check_grid(grid, "full_laplacian");
    DenseMatrix l(grid.bus_count, grid.bus_count);
    for (const Branch& br : grid.branches) {
        l(br.bus_a, br.bus_a) += br.susceptance;
        l(br.bus_b, br.bus_b) += br.susceptance;
        l(br.bus_a, br.bus_b) -= br.susceptance;
        l(br.bus_b, br.bus_a) -= br.susceptance;
    }
    return l;
}

DenseMatrix dc_measurement_matrix(const PowerGrid& grid) {
    if (!grid_connected(grid))
        throw ModelError("dc_measurement_matrix: grid is not connected");
    const DenseMatrix l = full_laplacian(grid);
    const std::size_t n = grid.bus_count - 1;
    DenseMatrix h(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) h(i, j) = l(i + 1, j + 1);
    return h;
}

void write_grid(std::ostream& out, const PowerGrid& grid) {
    out << "buses " << grid.bus_count << "\n";
    char buf[64];
    for (const Branch& br : grid.branches) {
        std::snprintf(buf, sizeof buf, "%.17g", br.susceptance);
        out << "branch " << br.bus_a << " " << br.bus_b << " " << buf << "\n";
    }
}

PowerGrid read_grid(std::istream& in) {
    PowerGrid grid;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word)) continue;
        if (word == "buses") {
            if (have_header)
                throw ConfigError("grid file line " + std::to_string(lineno) +
                                  ": duplicate buses header");
            if (!(ls >> grid.bus_count) || grid.bus_count == 0)
                throw ConfigError("grid file line " + std::to_string(lineno) +
                                  ": invalid bus count");
            have_header = true;
        } else if (word == "branch") {
            if (!have_header)
                throw ConfigError("grid file line " + std::to_string(lineno) +
                                  ": branch before buses header");
            Branch br;
            if (!(ls >> br.bus_a >> br.bus_b >> br.susceptance))
                throw ConfigError("grid file line " + std::to_string(lineno) +
                                  ": malformed branch");
            grid.branches.push_back(br);
        } else {
            throw ConfigError("grid file line " + std::to_string(lineno) +
                              ": unknown directive '" + word + "'");
        }
        std::string extra;
        if (ls >> extra)
            throw ConfigError("grid file line " + std::to_string(lineno) +
                              ": trailing content '" + extra + "'");
    }
    if (!have_header) throw ConfigError("grid file: missing buses header");
    check_grid(grid, "read_grid");
    return grid;
}

PowerGrid synthetic_grid(std::size_t bus_count, std::size_t branch_count, std::uint64_t seed) {
    if (bus_count < 2)
        throw ModelError("synthetic_grid: need at least 2 buses");
    if (branch_count + 1 < bus_count)
        throw ModelError("synthetic_grid: too few branches for a connected grid");
    Rng rng(derive_seed(seed, 0x9 /*grid*/));
    PowerGrid grid;
    grid.bus_count = bus_count;

    std::vector<std::size_t> order(bus_count);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = bus_count - 1; i > 0; --i)
        std::swap(order[i], order[rng.index(i + 1)]);

    std::set<std::pair<std::size_t, std::size_t>> used;
    auto add_branch = [&](std::size_t a, std::size_t b) {
        if (a > b) std::swap(a, b);
        if (a == b || !used.insert({a, b}).second) return false;
        grid.branches.push_back({a, b, 0.5 + rng.uniform()});
        return true;
    };

    for (std::size_t k = 1; k < bus_count; ++k)
        add_branch(order[k], order[rng.index(k)]);
    while (grid.branches.size() < branch_count)
        add_branch(rng.index(bus_count), rng.index(bus_count));
    return grid;
}

DenseMatrix RegionPartition::block(const DenseMatrix& h, std::size_t i, std::size_t j) const {
    const IndexRange r = row_ranges[i];
    const IndexRange c = state_ranges[j];
    DenseMatrix b(r.count, c.count);
    for (std::size_t ri = 0; ri < r.count; ++ri)
        for (std::size_t cj = 0; cj < c.count; ++cj)
            b(ri, cj) = h(r.begin + ri, c.begin + cj);
    return b;
}

LatticeSystem lattice_grid(std::size_t a, std::size_t b) {
    if (a < 1 || b < 1) throw ModelError("lattice_grid: a and b must be >= 1");
    const std::size_t side = a * b;
    const std::size_t buses = side * side;
    const std::size_t m = b * b;

    PowerGrid grid;
    grid.bus_count = buses;
    auto bus_id = [side](std::size_t r, std::size_t c) { return r * side + c; };
    for (std::size_t r = 0; r < side; ++r)
        for (std::size_t c = 0; c < side; ++c) {
            if (c + 1 < side) grid.branches.push_back({bus_id(r, c), bus_id(r, c + 1), 1.0});
            if (r + 1 < side) grid.branches.push_back({bus_id(r, c), bus_id(r + 1, c), 1.0});
        }

    // group non-reference buses by owning region, preserving bus order inside
    std::vector<std::vector<std::size_t>> region_buses(m);
    for (std::size_t r = 0; r < side; ++r)
        for (std::size_t c = 0; c < side; ++c) {
            const std::size_t bus = bus_id(r, c);
            if (bus == 0) continue;  // reference
            region_buses[(r / a) * b + (c / a)].push_back(bus);
        }

    RegionPartition part;
    part.state_dim = buses - 1;
    part.row_dim = buses - 1;
    std::size_t at = 0;
    for (std::size_t i = 0; i < m; ++i) {
        part.state_ranges.push_back({at, region_buses[i].size()});
        part.row_ranges.push_back({at, region_buses[i].size()});
        for (std::size_t bus : region_buses[i]) {
            part.bus_of_state.push_back(bus);
            part.bus_of_row.push_back(bus);
        }
        at += region_buses[i].size();
    }

    const DenseMatrix l = full_laplacian(grid);
    DenseMatrix h(part.row_dim, part.state_dim);
    for (std::size_t i = 0; i < part.row_dim; ++i)
        for (std::size_t j = 0; j < part.state_dim; ++j)
            h(i, j) = l(part.bus_of_row[i], part.bus_of_state[j]);

    std::set<MonitorGraph::Edge> edges;
    auto region_of = [&](std::size_t bus) {
        return (bus / side / a) * b + (bus % side) / a;
    };
    for (const Branch& br : grid.branches) {
        const std::size_t ra = region_of(br.bus_a), rb = region_of(br.bus_b);
        if (ra != rb) edges.insert({std::min(ra, rb), std::max(ra, rb)});
    }
    MonitorGraph graph(m, edges);

    return LatticeSystem{std::move(grid), std::move(part), std::move(graph), std::move(h)};
}

std::vector<double> generate_measurements(const DenseMatrix& h, const std::vector<double>& x,
                                          const DenseMatrix& b, std::uint64_t seed,
                                          double truncate_sigmas) {
    if (h.cols() != x.size())
        throw ContractViolation("generate_measurements: state length mismatch");
    if (b.rows() != 0 && b.rows() != h.rows())
        throw ContractViolation("generate_measurements: noise factor rows mismatch");
    std::vector<double> z = kernels::apply(h, x);
    if (b.cols() == 0) return z;

    Rng rng(derive_seed(seed, 0x5 /*noise*/));
    std::vector<double> g(b.cols());
    for (double& gi : g)
        gi = truncate_sigmas > 0.0 ? rng.gaussian_truncated(truncate_sigmas) : rng.gaussian();
    const std::vector<double> v = kernels::apply(b, g);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += v[i];
    return z;
}

Injection inject_false_data(const std::vector<double>& z, const std::vector<IndexRange>& blocks,
                            std::size_t monitor, std::size_t row_in_block, double w_max,
                            std::uint64_t seed) {
    if (monitor >= blocks.size())
        throw ContractViolation("inject_false_data: monitor index out of range");
    const IndexRange blk = blocks[monitor];
    if (row_in_block >= blk.count)
        throw ContractViolation("inject_false_data: row outside monitor block");
    if (w_max < 0.0) throw ContractViolation("inject_false_data: negative w_max");
    Rng rng(derive_seed(seed, 0x7 /*attack*/));
    Injection out;
    out.corrupted = z;
    out.w = rng.uniform_in(w_max);
    out.corrupted[blk.begin + row_in_block] += out.w;
    return out;
}

MonitorGraph monitor_graph_from_blocks(const DenseMatrix& h, const RegionPartition& partition) {
    const std::size_t m = partition.monitor_count();
    std::set<MonitorGraph::Edge> edges;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            const bool linked = kernels::max_abs(partition.block(h, i, j)) > 1e-12 ||
                                kernels::max_abs(partition.block(h, j, i)) > 1e-12;
            if (linked) edges.insert({i, j});
        }
    }
    return MonitorGraph(m, edges);  // throws ModelError when disconnected
}

MeasurementSystem random_consistent_system(std::size_t n, std::size_t m, std::uint64_t seed) {
    if (n < 1) throw ContractViolation("random_consistent_system: n must be >= 1");
    if (m < 1) throw ContractViolation("random_consistent_system: m must be >= 1");
    Rng rng(derive_seed(seed, 0x3 /*system*/));

    MeasurementSystem sys;
    std::size_t p = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t rows = 1 + rng.index(std::max<std::size_t>(1, (2 * n) / m) + 1);
        sys.blocks.push_back({p, rows});
        p += rows;
    }
    sys.H = DenseMatrix(p, n);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < n; ++j) sys.H(i, j) = rng.gaussian();
    sys.x_true.resize(n);
    for (double& xi : sys.x_true) xi = rng.gaussian();
    sys.z = kernels::apply(sys.H, sys.x_true);
    sys.Sigma = DenseMatrix(0, 0);
    sys.B = DenseMatrix(p, 0);
    return sys;
}

MonitoredSystem build_injection_system(const PowerGrid& grid, std::size_t monitors, double sigma,
                                       std::size_t duplicates) {
    if (monitors < 1)
        throw ContractViolation("build_injection_system: need at least one monitor");
    if (duplicates < 1)
        throw ContractViolation("build_injection_system: duplicates must be >= 1");
    if (!(sigma > 0.0))
        throw ContractViolation("build_injection_system: sigma must be positive");
    const DenseMatrix h0 = dc_measurement_matrix(grid);
    const std::size_t n = h0.rows();
    if (monitors > n)
        throw ContractViolation("build_injection_system: more monitors than states");

    MonitoredSystem out;
    out.partition.state_dim = n;
    out.partition.row_dim = n * duplicates;

    // contiguous state chunks; remainder spread over the first monitors
    const std::size_t base = n / monitors, extra = n % monitors;
    std::size_t sat = 0, rat = 0;
    for (std::size_t i = 0; i < monitors; ++i) {
        const std::size_t len = base + (i < extra ? 1 : 0);
        out.partition.state_ranges.push_back({sat, len});
        out.partition.row_ranges.push_back({rat, len * duplicates});
        sat += len;
        rat += len * duplicates;
    }
    for (std::size_t s = 0; s < n; ++s) out.partition.bus_of_state.push_back(s + 1);

    out.H = DenseMatrix(n * duplicates, n);
    std::size_t row = 0;
    for (std::size_t i = 0; i < monitors; ++i) {
        const IndexRange sr = out.partition.state_ranges[i];
        for (std::size_t k = 0; k < sr.count; ++k) {
            for (std::size_t d = 0; d < duplicates; ++d, ++row) {
                out.partition.bus_of_row.push_back(sr.begin + k + 1);
                for (std::size_t j = 0; j < n; ++j) out.H(row, j) = h0(sr.begin + k, j);
            }
        }
    }

    const std::size_t p = out.H.rows();
    out.Sigma = DenseMatrix(p, p);
    out.B = DenseMatrix(p, p);
    for (std::size_t i = 0; i < p; ++i) {
        out.Sigma(i, i) = sigma * sigma;
        out.B(i, i) = sigma;
    }
    out.blocks = out.partition.row_ranges;
    return out;
}

}  // namespace gridest::model
