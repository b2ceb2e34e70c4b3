#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "gridest/kernels.hpp"
#include "gridest/network_model.hpp"
#include "test_support.hpp"

using namespace gridest;
using namespace gridest::model;

TEST_CASE("two-bus grid reduces to a 1x1 measurement matrix") {
    PowerGrid grid{2, {{0, 1, 1.0}}};
    const DenseMatrix h = dc_measurement_matrix(grid);
    REQUIRE(h.rows() == 1);
    REQUIRE(h.cols() == 1);
    CHECK(h(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("full laplacian rows sum to zero") {
    const PowerGrid grid = synthetic_grid(12, 20, 7);
    const DenseMatrix l = full_laplacian(grid);
    for (std::size_t i = 0; i < l.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < l.cols(); ++j) s += l(i, j);
        CHECK(std::abs(s) < 1e-12);
    }
}

TEST_CASE("triangle grid laplacian assembled by hand") {
    PowerGrid grid{3, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}}};
    const DenseMatrix l = full_laplacian(grid);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(l(i, j) == doctest::Approx(i == j ? 2.0 : -1.0));
}

TEST_CASE("grounded laplacian of a connected grid has a trivial kernel") {
    for (std::uint64_t seed : {1, 2, 3}) {
        const PowerGrid grid = synthetic_grid(20, 30, seed);
        const DenseMatrix h = dc_measurement_matrix(grid);
        CHECK(linalg::svd(h).rank == h.cols());
    }
}

TEST_CASE("disconnected grid is rejected") {
    PowerGrid grid{4, {{0, 1, 1.0}, {2, 3, 1.0}}};
    CHECK(!grid_connected(grid));
    CHECK_THROWS_AS((void)dc_measurement_matrix(grid), ModelError);
}

TEST_CASE("lattice 5x4 matches the published dimensions") {
    const LatticeSystem lat = lattice_grid(5, 4);
    CHECK(lat.grid.bus_count == 400);
    CHECK(lat.monitors.monitor_count() == 16);
    CHECK(lat.monitors.diameter() == 6);  // 4x4 monitor lattice
    CHECK(lat.monitors.edges().size() == 24);
    CHECK(lat.H.rows() == 399);
    CHECK(lat.H.cols() == 399);
    // every region owns a^2 buses; the reference region one state less
    CHECK(lat.partition.state_ranges[0].count == 24);
    for (std::size_t i = 1; i < 16; ++i) CHECK(lat.partition.state_ranges[i].count == 25);
}

TEST_CASE("degenerate lattice 1x2") {
    const LatticeSystem lat = lattice_grid(1, 2);
    CHECK(lat.grid.bus_count == 4);
    CHECK(lat.monitors.monitor_count() == 4);
    CHECK(lat.partition.state_ranges[0].count == 0);  // region of the reference bus
    CHECK(lat.partition.state_ranges[1].count == 1);
    CHECK(lat.H.rows() == 3);
}

TEST_CASE("lattice 3x3 monitor graph has diameter four") {
    const LatticeSystem lat = lattice_grid(3, 3);
    CHECK(lat.monitors.monitor_count() == 9);
    CHECK(lat.monitors.diameter() == 4);
}

TEST_CASE("lattice monitor diameter is 2(b-1)") {
    for (std::size_t b : {2, 3, 4})
        for (std::size_t a : {1, 2, 3}) {
            const LatticeSystem lat = lattice_grid(a, b);
            CHECK(lat.monitors.diameter() == 2 * (b - 1));
        }
}

TEST_CASE("block-derived monitor graph matches the lattice adjacency") {
    const LatticeSystem lat = lattice_grid(3, 3);
    const MonitorGraph derived = monitor_graph_from_blocks(lat.H, lat.partition);
    CHECK(derived.edges() == lat.monitors.edges());
}

TEST_CASE("block-diagonal systems have no monitor edges and are rejected") {
    RegionPartition part;
    part.state_dim = 4;
    part.row_dim = 4;
    part.state_ranges = {{0, 2}, {2, 2}};
    part.row_ranges = {{0, 2}, {2, 2}};
    DenseMatrix h = DenseMatrix::identity(4);
    CHECK_THROWS_AS((void)monitor_graph_from_blocks(h, part), ModelError);

    // couple the blocks and the graph becomes the 2-path
    h(0, 3) = 0.5;
    const MonitorGraph g = monitor_graph_from_blocks(h, part);
    CHECK(g.edges().size() == 1);
    CHECK(g.diameter() == 1);
}

TEST_CASE("block-tridiagonal coupling gives a path graph") {
    const std::size_t m = 5;
    RegionPartition part;
    part.state_dim = m;
    part.row_dim = m;
    for (std::size_t i = 0; i < m; ++i) {
        part.state_ranges.push_back({i, 1});
        part.row_ranges.push_back({i, 1});
    }
    DenseMatrix h(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        h(i, i) = 2.0;
        if (i + 1 < m) {
            h(i, i + 1) = -1.0;
            h(i + 1, i) = -1.0;
        }
    }
    const MonitorGraph g = monitor_graph_from_blocks(h, part);
    CHECK(g.diameter() == m - 1);
    CHECK(g.edges().size() == m - 1);
}

TEST_CASE("noise-free measurement generation is exact and deterministic") {
    Rng rng(5);
    const DenseMatrix h = testsup::random_matrix(6, 4, rng);
    const std::vector<double> x = testsup::random_vector(4, rng);
    const DenseMatrix b0(6, 0);
    const std::vector<double> z = generate_measurements(h, x, b0, 99);
    CHECK(testsup::max_abs_diff(z, kernels::apply(h, x)) == 0.0);

    const DenseMatrix b = DenseMatrix::identity(6);
    const std::vector<double> z1 = generate_measurements(h, x, b, 42);
    const std::vector<double> z2 = generate_measurements(h, x, b, 42);
    CHECK(z1 == z2);
    const std::vector<double> z3 = generate_measurements(h, x, b, 43);
    CHECK(testsup::max_abs_diff(z1, z3) > 0.0);
}

TEST_CASE("sample covariance of the generated noise matches Sigma within 5 percent") {
    DenseMatrix sigma(3, 3);
    sigma(0, 0) = 1.0;
    sigma(1, 1) = 4.0;
    sigma(2, 2) = 9.0;
    const DenseMatrix b = linalg::noise_factor(sigma);
    const DenseMatrix h(3, 1);  // zero map, so z is pure noise
    const std::vector<double> x{0.0};

    const std::size_t draws = 100000;
    DenseMatrix acc(3, 3);
    for (std::size_t d = 0; d < draws; ++d) {
        const std::vector<double> v = generate_measurements(h, x, b, 1000 + d);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) acc(i, j) += v[i] * v[j];
    }
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            const double est = acc(i, j) / static_cast<double>(draws);
            if (i == j)
                CHECK(std::abs(est - sigma(i, i)) < 0.05 * sigma(i, i));
            else
                CHECK(std::abs(est) < 0.05 * std::sqrt(sigma(i, i) * sigma(j, j)));
        }
}

TEST_CASE("false data injection perturbs exactly one entry") {
    const std::vector<double> z{1.0, 2.0, 3.0, 4.0};
    const std::vector<IndexRange> blocks{{0, 2}, {2, 2}};

    const Injection zero = inject_false_data(z, blocks, 1, 0, 0.0, 5);
    CHECK(zero.w == 0.0);
    CHECK(zero.corrupted == z);

    const Injection inj = inject_false_data(z, blocks, 1, 1, 2.0, 5);
    CHECK(inj.w >= 0.0);
    CHECK(inj.w <= 2.0);
    CHECK(inj.corrupted[3] == doctest::Approx(4.0 + inj.w));
    for (std::size_t i = 0; i < 3; ++i) CHECK(inj.corrupted[i] == z[i]);

    const Injection again = inject_false_data(z, blocks, 1, 1, 2.0, 5);
    CHECK(again.w == inj.w);

    CHECK_THROWS_AS((void)inject_false_data(z, blocks, 1, 2, 1.0, 5), ContractViolation);
    CHECK_THROWS_AS((void)inject_false_data(z, blocks, 2, 0, 1.0, 5), ContractViolation);
}

TEST_CASE("random consistent systems are consistent by construction") {
    for (std::uint64_t seed : {1, 7, 19}) {
        const MeasurementSystem sys = random_consistent_system(8, 3, seed);
        CHECK(sys.blocks.size() == 3);
        CHECK(testsup::max_abs_diff(sys.z, kernels::apply(sys.H, sys.x_true)) == 0.0);
        std::size_t total = 0;
        for (const auto& blk : sys.blocks) {
            CHECK(blk.begin == total);
            total += blk.count;
        }
        CHECK(total == sys.H.rows());
    }
    const MeasurementSystem one = random_consistent_system(5, 1, 2);
    CHECK(one.blocks.size() == 1);
    CHECK(one.blocks[0].count == one.H.rows());

    const MeasurementSystem a = random_consistent_system(6, 2, 11);
    const MeasurementSystem b = random_consistent_system(6, 2, 11);
    CHECK(a.H.entries() == b.H.entries());
    CHECK(a.z == b.z);
}

TEST_CASE("grid files round trip bit-exactly") {
    const PowerGrid grid = synthetic_grid(15, 25, 3);
    std::ostringstream out;
    write_grid(out, grid);
    std::istringstream in(out.str());
    const PowerGrid back = read_grid(in);
    REQUIRE(back.bus_count == grid.bus_count);
    REQUIRE(back.branches.size() == grid.branches.size());
    for (std::size_t i = 0; i < grid.branches.size(); ++i) {
        CHECK(back.branches[i].bus_a == grid.branches[i].bus_a);
        CHECK(back.branches[i].bus_b == grid.branches[i].bus_b);
        CHECK(back.branches[i].susceptance == grid.branches[i].susceptance);
    }
    std::ostringstream out2;
    write_grid(out2, back);
    CHECK(out.str() == out2.str());
}

TEST_CASE("grid file parse errors carry line numbers") {
    {
        std::istringstream in("buses 3\nbranch 0 1 1.0\nwhat 1 2\n");
        try {
            (void)read_grid(in);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }
    {
        std::istringstream in("branch 0 1 1.0\n");
        CHECK_THROWS_AS((void)read_grid(in), ConfigError);
    }
    {
        std::istringstream in("buses 3\nbranch 0 1\n");
        CHECK_THROWS_AS((void)read_grid(in), ConfigError);
    }
}

TEST_CASE("synthetic grids are connected with the requested branch count") {
    const PowerGrid grid = synthetic_grid(118, 186, 2024);
    CHECK(grid.bus_count == 118);
    CHECK(grid.branches.size() == 186);
    CHECK(grid_connected(grid));

    const PowerGrid again = synthetic_grid(118, 186, 2024);
    CHECK(again.branches.size() == grid.branches.size());
    for (std::size_t i = 0; i < grid.branches.size(); ++i)
        CHECK(again.branches[i].susceptance == grid.branches[i].susceptance);
}

TEST_CASE("injection system shapes and covariance") {
    const PowerGrid grid = synthetic_grid(20, 30, 5);
    const MonitoredSystem ms = build_injection_system(grid, 4, 0.1, 2);
    CHECK(ms.H.rows() == 2 * 19);
    CHECK(ms.H.cols() == 19);
    CHECK(ms.partition.monitor_count() == 4);
    CHECK(ms.Sigma(0, 0) == doctest::Approx(0.01));
    CHECK(ms.B(0, 0) == doctest::Approx(0.1));
    // duplicated rows are identical
    CHECK(ms.H.row(0) == ms.H.row(1));
    std::size_t rows_total = 0;
    for (const auto& r : ms.blocks) rows_total += r.count;
    CHECK(rows_total == ms.H.rows());
}
