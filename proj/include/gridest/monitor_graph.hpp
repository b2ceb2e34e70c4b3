#pragma once

#include <cstddef>
#include <set>
#include <utility>
#include <vector>

#include "gridest/errors.hpp"

namespace gridest {

/// Undirected connected graph over monitors. Connectivity is an invariant:
/// construction fails on a disconnected edge set.
class MonitorGraph {
  public:
    using Edge = std::pair<std::size_t, std::size_t>;  // stored with first < second

    MonitorGraph(std::size_t monitor_count, const std::set<Edge>& edges);

    std::size_t monitor_count() const { return m_; }
    std::size_t diameter() const { return diameter_; }
    const std::vector<std::size_t>& neighbors(std::size_t i) const { return adj_[i]; }
    const std::set<Edge>& edges() const { return edges_; }
    bool has_edge(std::size_t a, std::size_t b) const;

    /// BFS distances from `source`.
    std::vector<std::size_t> distances_from(std::size_t source) const;

  private:
    std::size_t m_ = 0;
    std::set<Edge> edges_;
    std::vector<std::vector<std::size_t>> adj_;
    std::size_t diameter_ = 0;
};

}  // namespace gridest
