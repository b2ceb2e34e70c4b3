#include "gridest/diffusive.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>

#include "gridest/kernels.hpp"
#include "gridest/rng.hpp"

namespace gridest::diffusive {


using kernels::multiply;
using linalg::SubspaceBasis;
using linalg::SvdResult;

namespace {

// Movement below this (relative to the estimate scale) does not count as a
// state change when deciding termination.
constexpr double kStutterTol = 1e-12;

double scale_of(const std::vector<double>& v) {
    return std::max(1.0, kernels::max_abs(v));
}

std::vector<std::size_t> fusion_order(const std::vector<std::size_t>& neighbors,
                                      std::uint64_t shuffle_seed, std::size_t round,
                                      std::size_t monitor) {
    std::vector<std::size_t> order = neighbors;  // ascending by construction
    if (shuffle_seed != 0) {
        Rng rng(derive_seed(shuffle_seed, round, monitor));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.index(i)]);
    }
    return order;
}

void write_trace(std::ostream& out, std::size_t round, const std::vector<MonitorNode>& nodes) {
    char buf[64];
    for (const MonitorNode& node : nodes) {
        std::snprintf(buf, sizeof buf, "%.17g", node.local_residual_inf());
        out << "round=" << round << " monitor=" << node.id << " dimK=" << node.K.dim()
            << " residual=" << buf << "\n";
    }
}

}  // namespace

double MonitorNode::local_residual_inf() const {
    const std::vector<double> pred = kernels::apply(A, x_hat);
    double worst = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i)
        worst = std::max(worst, std::abs(z[i] - pred[i]));
    return worst;
}

std::vector<MonitorNode> make_nodes(const std::vector<incremental::WlsBlock>& blocks,
                                    double epsilon) {
    if (!(epsilon > 0.0))
        throw ContractViolation("make_nodes: epsilon must be positive");
    std::vector<MonitorNode> nodes;
    nodes.reserve(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        MonitorNode node;
        node.id = i;
        node.H = blocks[i].H;
        node.B = blocks[i].B;
        node.z = blocks[i].z;
        node.epsilon = epsilon;
        node.A = hstack(node.H, kernels::scaled(node.B, epsilon));
        nodes.push_back(std::move(node));
    }
    return nodes;
}

std::vector<MonitorNode> make_nodes(const std::vector<incremental::LinearBlock>& blocks) {
    std::vector<MonitorNode> nodes;
    nodes.reserve(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        MonitorNode node;
        node.id = i;
        node.H = blocks[i].A;
        node.B = DenseMatrix(blocks[i].A.rows(), 0);
        node.z = blocks[i].z;
        node.A = blocks[i].A;
        nodes.push_back(std::move(node));
    }
    return nodes;
}

void local_init(MonitorNode& node) {
    require_finite(node.A, "local_init");
    require_finite(node.z, "local_init");
    const SvdResult s = linalg::svd(node.A);
    linalg::verify_pinv_sample(node.A, s);
    node.x_hat = linalg::pinv_apply(s, node.z);
    node.K = linalg::kernel_from_svd(s, s.rank);
}

void local_init_all(std::vector<MonitorNode>& nodes) {
    for (MonitorNode& node : nodes) local_init(node);
}

void fuse(MonitorNode& receiver, const EstimateMessage& msg) {
    if (msg.x_hat.size() != receiver.ambient() || msg.K.ambient_dim != receiver.ambient())
        throw ContractViolation("fuse: ambient dimensions differ");
    if (!receiver.initialized())
        throw ContractViolation("fuse: receiver not initialized");
    if (receiver.K.is_zero()) return;  // fully determined already

    const std::size_t ki = receiver.K.dim();
    const DenseMatrix stacked = hstack(kernels::scaled(receiver.K.basis, -1.0), msg.K.basis);
    SvdResult s = linalg::svd(stacked);
    const double smax = s.singular_values.empty() ? 0.0 : s.singular_values.front();
    s.rank = linalg::rank_at(s, linalg::kSubspaceRankTol * smax);
    linalg::verify_pinv_sample(stacked, s);

    const std::vector<double> gap = kernels::vec_sub(receiver.x_hat, msg.x_hat);
    const std::vector<double> v = linalg::pinv_apply(s, gap);
    const std::vector<double> vi(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(ki));
    const std::vector<double> step = kernels::apply(receiver.K.basis, vi);
    for (std::size_t r = 0; r < receiver.x_hat.size(); ++r) receiver.x_hat[r] += step[r];

    const SubspaceBasis ker = linalg::kernel_from_svd(s, s.rank);
    if (ker.is_zero()) {
        receiver.K = SubspaceBasis::zero(receiver.ambient());
        return;
    }
    const DenseMatrix mapped = multiply(receiver.K.basis, ker.basis.row_block(0, ki));
    receiver.K = linalg::orthonormal_image(mapped);
}

Schedule Schedule::round_robin(std::size_t monitors, std::size_t slots) {
    Schedule s;
    s.mode = Mode::Asynchronous;
    s.fairness_period = monitors;
    s.activations.resize(slots);
    for (std::size_t i = 0; i < slots; ++i) s.activations[i] = i % monitors;
    return s;
}

Schedule Schedule::random_fair(std::size_t monitors, std::size_t slots, std::uint64_t seed) {
    Schedule s;
    s.mode = Mode::Asynchronous;
    s.fairness_period = 2 * monitors - 1;
    Rng rng(derive_seed(seed, 0x5c4ed));
    std::vector<std::size_t> block(monitors);
    while (s.activations.size() < slots) {
        for (std::size_t i = 0; i < monitors; ++i) block[i] = i;
        for (std::size_t i = monitors; i > 1; --i)
            std::swap(block[i - 1], block[rng.index(i)]);
        for (std::size_t i = 0; i < monitors && s.activations.size() < slots; ++i)
            s.activations.push_back(block[i]);
    }
    return s;
}

void Schedule::check_fair(std::size_t monitor_count) const {
    if (mode != Mode::Asynchronous)
        throw ContractViolation("Schedule::check_fair: not an asynchronous schedule");
    if (fairness_period == 0 || activations.size() < fairness_period)
        throw ContractViolation("Schedule: shorter than one fairness window");
    for (std::size_t mon : activations)
        if (mon >= monitor_count)
            throw ContractViolation("Schedule: activation index out of range");
    std::vector<std::size_t> last_seen(monitor_count, 0);
    std::vector<bool> seen(monitor_count, false);
    for (std::size_t t = 0; t < activations.size(); ++t) {
        seen[activations[t]] = true;
        last_seen[activations[t]] = t;
        if (t + 1 >= fairness_period) {
            for (std::size_t mon = 0; mon < monitor_count; ++mon) {
                const bool in_window = seen[mon] && last_seen[mon] + fairness_period > t;
                if (!in_window)
                    throw ContractViolation("Schedule: monitor " + std::to_string(mon) +
                                            " absent from the window ending at slot " +
                                            std::to_string(t));
            }
        }
    }
}

RunResult run_synchronous(std::vector<MonitorNode>& nodes, const MonitorGraph& graph,
                          const RunOptions& options) {
    if (nodes.size() != graph.monitor_count())
        throw ContractViolation("run_synchronous: node count != graph size");
    for (const MonitorNode& node : nodes)
        if (!node.initialized())
            throw ContractViolation("run_synchronous: node " + std::to_string(node.id) +
                                    " not initialized");

    const std::size_t m = nodes.size();
    const std::size_t diameter = graph.diameter();
    RunResult result;

    for (std::size_t round = 1;; ++round) {
        if (round > options.max_rounds) break;

        // round-start snapshots; finished monitors still answer with their
        // final state so slower peers can complete
        std::vector<EstimateMessage> snap(m);
        for (std::size_t i = 0; i < m; ++i)
            snap[i] = EstimateMessage{i, nodes[i].x_hat, nodes[i].K, round};

        std::vector<std::uint8_t> changed(m, 0);
#pragma omp parallel for schedule(dynamic) if (!options.gauss_seidel)
        for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(m); ++ii) {
            const std::size_t i = static_cast<std::size_t>(ii);
            MonitorNode& node = nodes[i];
            if (node.K.is_zero()) continue;
            const std::vector<double> before = node.x_hat;
            const std::size_t dim_before = node.K.dim();
            for (std::size_t j : fusion_order(graph.neighbors(i), options.shuffle_seed, round, i)) {
                if (options.gauss_seidel) {
                    const EstimateMessage live{j, nodes[j].x_hat, nodes[j].K, round};
                    fuse(node, live);
                } else {
                    fuse(node, snap[j]);
                }
            }
            const double moved = kernels::max_abs(kernels::vec_sub(node.x_hat, before));
            if (node.K.dim() != dim_before || moved > kStutterTol * scale_of(before))
                changed[i] = 1;
        }

        const bool any_change = std::any_of(changed.begin(), changed.end(),
                                            [](std::uint8_t c) { return c != 0; });
        if (options.trace) write_trace(*options.trace, round, nodes);
        if (any_change) result.rounds_used = round;
        if (options.on_round) options.on_round(round, nodes);

        if (!any_change) {
            result.reached_fixed_point = true;
            break;
        }
        if (round > diameter && options.enforce_round_bound)
            throw AlgorithmFailure(
                "run_synchronous: state still changing after diameter rounds; "
                "numerical tolerances are breaking the finite convergence bound");
    }
    return result;
}

RunResult run_asynchronous(std::vector<MonitorNode>& nodes, const MonitorGraph& graph,
                           const Schedule& schedule, const RunOptions& options) {
    if (nodes.size() != graph.monitor_count())
        throw ContractViolation("run_asynchronous: node count != graph size");
    schedule.check_fair(nodes.size());
    for (const MonitorNode& node : nodes)
        if (!node.initialized())
            throw ContractViolation("run_asynchronous: node " + std::to_string(node.id) +
                                    " not initialized");

    const std::size_t bound = graph.diameter() * schedule.fairness_period;
    RunResult result;
    for (std::size_t slot = 0; slot < schedule.activations.size(); ++slot) {
        const std::size_t j = schedule.activations[slot];
        const EstimateMessage msg{j, nodes[j].x_hat, nodes[j].K, slot};
        bool any_change = false;
        for (std::size_t i : graph.neighbors(j)) {
            MonitorNode& node = nodes[i];
            if (node.K.is_zero()) continue;
            const std::vector<double> before = node.x_hat;
            const std::size_t dim_before = node.K.dim();
            fuse(node, msg);
            const double moved = kernels::max_abs(kernels::vec_sub(node.x_hat, before));
            if (node.K.dim() != dim_before || moved > kStutterTol * scale_of(before))
                any_change = true;
        }
        if (any_change) {
            result.rounds_used = slot + 1;
            if (slot + 1 > bound && options.enforce_round_bound)
                throw AlgorithmFailure(
                    "run_asynchronous: state still changing after diameter*T slots");
        }
        if (options.trace) write_trace(*options.trace, slot + 1, nodes);
    }
    result.reached_fixed_point = true;
    return result;
}

}  // namespace gridest::diffusive
