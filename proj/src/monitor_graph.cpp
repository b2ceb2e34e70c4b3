#include "gridest/monitor_graph.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <string>

namespace gridest {

namespace {
constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();
}

MonitorGraph::MonitorGraph(std::size_t monitor_count, const std::set<Edge>& edges)
    : m_(monitor_count), adj_(monitor_count) {
    if (m_ == 0) throw ModelError("MonitorGraph: no monitors");
    for (auto [a, b] : edges) {
        if (a == b) throw ModelError("MonitorGraph: self loop at monitor " + std::to_string(a));
        if (a >= m_ || b >= m_)
            throw ModelError("MonitorGraph: edge endpoint out of range");
        if (a > b) std::swap(a, b);
        if (edges_.insert({a, b}).second) {
            adj_[a].push_back(b);
            adj_[b].push_back(a);
        }
    }
    for (auto& nb : adj_) std::sort(nb.begin(), nb.end());

    diameter_ = 0;
    for (std::size_t s = 0; s < m_; ++s) {
        const auto dist = distances_from(s);
        for (std::size_t v = 0; v < m_; ++v) {
            if (dist[v] == kUnreached)
                throw ModelError("MonitorGraph: graph is not connected");
            diameter_ = std::max(diameter_, dist[v]);
        }
    }
}

bool MonitorGraph::has_edge(std::size_t a, std::size_t b) const {
    if (a > b) std::swap(a, b);
    return edges_.count({a, b}) > 0;
}

std::vector<std::size_t> MonitorGraph::distances_from(std::size_t source) const {
    std::vector<std::size_t> dist(m_, kUnreached);
    std::deque<std::size_t> queue{source};
    dist[source] = 0;
    while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop_front();
        for (std::size_t v : adj_[u]) {
            if (dist[v] == kUnreached) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    return dist;
}

}  // namespace gridest
