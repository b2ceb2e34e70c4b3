#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <vector>

#include "gridest/incremental.hpp"
#include "gridest/linalg.hpp"
#include "gridest/monitor_graph.hpp"

namespace gridest::diffusive {

/// One monitor of the simulated network: its measurement slice and its
/// running (estimate, unresolved-subspace) pair. The ambient space is the
/// augmented unknown when B has columns, the plain state space otherwise.
struct MonitorNode {
    std::size_t id = 0;
    DenseMatrix H;          // m_i x n
    DenseMatrix B;          // m_i x q (zero-width for noise-free systems)
    std::vector<double> z;  // m_i
    double epsilon = 0.0;

    DenseMatrix A;  // cached [H eps*B], m_i x (n+q)
    std::vector<double> x_hat;
    linalg::SubspaceBasis K;

    std::size_t ambient() const { return A.cols(); }
    bool initialized() const { return x_hat.size() == ambient() && ambient() > 0; }

    /// ||z_i - A_i x_hat||_inf; the local equations must stay satisfied
    /// through every fusion.
    double local_residual_inf() const;
};

/// Immutable snapshot a monitor sends to its neighbors.
struct EstimateMessage {
    std::size_t sender = 0;
    std::vector<double> x_hat;
    linalg::SubspaceBasis K;
    std::size_t round_or_time = 0;
};

std::vector<MonitorNode> make_nodes(const std::vector<incremental::WlsBlock>& blocks,
                                    double epsilon);
std::vector<MonitorNode> make_nodes(const std::vector<incremental::LinearBlock>& blocks);

/// x_hat := A^+ z (local minimum-norm solution), K := Basis(Ker(A)).
void local_init(MonitorNode& node);
void local_init_all(std::vector<MonitorNode>& nodes);

/// Projects the receiver's estimate onto the sender's constraint set and
/// intersects the unresolved subspaces. After the call the receiver
/// satisfies both monitors' equations and x_hat is orthogonal to the new K.
void fuse(MonitorNode& receiver, const EstimateMessage& msg);

struct Schedule {
    enum class Mode { Synchronous, Asynchronous };
    Mode mode = Mode::Synchronous;
    std::size_t fairness_period = 0;          // T (asynchronous only)
    std::vector<std::size_t> activations;     // sender per slot (asynchronous only)

    static Schedule synchronous() { return {}; }
    /// 0,1,...,m-1 repeated; T = m.
    static Schedule round_robin(std::size_t monitors, std::size_t slots);
    /// Random permutation blocks; T = 2m-1 windows always contain a full block.
    static Schedule random_fair(std::size_t monitors, std::size_t slots, std::uint64_t seed);

    /// Every window of fairness_period consecutive slots must activate every
    /// monitor at least once. Throws ContractViolation otherwise.
    void check_fair(std::size_t monitor_count) const;
};

struct RunOptions {
    std::ostream* trace = nullptr;   // `round=.. monitor=.. dimK=.. residual=..` lines
    std::uint64_t shuffle_seed = 0;  // 0 keeps ascending neighbor fusion order
    bool gauss_seidel = false;       // fuse live mid-round states (experimental; no
                                     // round bound is claimed for this mode)
    std::size_t max_rounds = std::numeric_limits<std::size_t>::max();  // hard cap
    bool enforce_round_bound = true;  // raise AlgorithmFailure when state still
                                      // changes past diameter rounds; truncated
                                      // runs turn this off
    std::function<void(std::size_t, const std::vector<MonitorNode>&)> on_round;
};

struct RunResult {
    std::size_t rounds_used = 0;  // rounds (sync) or slots (async) that changed state
    bool reached_fixed_point = false;
};

/// Synchronous rounds: every monitor broadcasts its round-start snapshot,
/// then fuses all neighbor snapshots in order. Terminates at the first
/// round that changes nothing; a state change past `diameter` rounds raises
/// AlgorithmFailure (numerical-tolerance breach), unless max_rounds caps
/// the run earlier.
RunResult run_synchronous(std::vector<MonitorNode>& nodes, const MonitorGraph& graph,
                          const RunOptions& options = {});

/// One sender per slot; its neighbors fuse the posted snapshot. The
/// schedule must be T-fair; a state change past diameter*T slots raises
/// AlgorithmFailure.
RunResult run_asynchronous(std::vector<MonitorNode>& nodes, const MonitorGraph& graph,
                           const Schedule& schedule, const RunOptions& options = {});

}  // namespace gridest::diffusive
