#include "gridest/finite_memory.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <tuple>

#include "gridest/csv.hpp"
#include "gridest/kernels.hpp"
#include "gridest/linalg.hpp"

namespace gridest::finitemem {

BlockLayout BlockLayout::from_partition(const model::RegionPartition& part) {
    return BlockLayout{part.state_ranges, part.row_ranges};
}

std::vector<double> own_block(const BlockLayout& layout, std::size_t i,
                              const std::vector<double>& x) {
    const model::IndexRange r = layout.state_ranges[i];
    if (r.begin + r.count > x.size())
        throw ContractViolation("own_block: estimate shorter than the block range");
    return {x.begin() + static_cast<std::ptrdiff_t>(r.begin),
            x.begin() + static_cast<std::ptrdiff_t>(r.begin + r.count)};
}

std::vector<std::vector<std::vector<double>>> run_truncated_sweep(
    std::vector<diffusive::MonitorNode> nodes, const MonitorGraph& graph,
    const BlockLayout& layout, std::size_t h_max) {
    if (layout.monitor_count() != nodes.size())
        throw ContractViolation("run_truncated_sweep: layout size != node count");
    diffusive::local_init_all(nodes);

    std::vector<std::vector<std::vector<double>>> out(h_max + 1);
    auto capture = [&](std::size_t h, const std::vector<diffusive::MonitorNode>& ns) {
        out[h].resize(ns.size());
        for (std::size_t i = 0; i < ns.size(); ++i) out[h][i] = own_block(layout, i, ns[i].x_hat);
    };
    capture(0, nodes);

    if (h_max > 0) {
        diffusive::RunOptions opts;
        opts.max_rounds = h_max;
        opts.enforce_round_bound = false;
        opts.on_round = capture;
        diffusive::run_synchronous(nodes, graph, opts);
        // a fixed point before h_max freezes the remaining depths
        for (std::size_t h = 1; h <= h_max; ++h)
            if (out[h].empty()) out[h] = out[h - 1];
    }
    return out;
}

std::vector<std::vector<double>> run_truncated(std::vector<diffusive::MonitorNode> nodes,
                                               const MonitorGraph& graph,
                                               const BlockLayout& layout, std::size_t h) {
    return run_truncated_sweep(std::move(nodes), graph, layout, h).back();
}

double local_error(const BlockLayout& layout, std::size_t i, const std::vector<double>& full,
                   const std::vector<double>& partial_own_block) {
    const std::vector<double> own = own_block(layout, i, full);
    if (own.size() != partial_own_block.size())
        throw ContractViolation("local_error: block sizes differ");
    double s = 0.0;
    for (std::size_t k = 0; k < own.size(); ++k) {
        const double d = own[k] - partial_own_block[k];
        s += d * d;
    }
    return std::sqrt(s);
}

namespace {

std::vector<std::pair<double, double>> usable_log_points(
    const std::vector<std::pair<std::size_t, double>>& errors) {
    double emax = 0.0;
    for (const auto& [h, e] : errors) emax = std::max(emax, e);
    const double floor = std::max(1e-12, 1e-9 * emax);
    std::vector<std::pair<double, double>> pts;  // (h/2 + 1, log e)
    for (const auto& [h, e] : errors)
        if (e > floor) pts.emplace_back(static_cast<double>(h) / 2.0 + 1.0, std::log(e));
    return pts;
}

}  // namespace

DecayFit decay_fit(const std::vector<std::pair<std::size_t, double>>& errors) {
    const auto pts = usable_log_points(errors);
    if (pts.size() < 3)
        throw InsufficientData("decay_fit: need at least 3 points with positive error, have " +
                               std::to_string(pts.size()));

    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : pts) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if (sxx == 0.0) throw InsufficientData("decay_fit: all points share one depth");

    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double rss = 0.0;
    for (const auto& [x, y] : pts) {
        const double r = y - (intercept + slope * x);
        rss += r * r;
    }

    DecayFit fit;
    fit.q = std::exp(slope);
    fit.C = std::exp(intercept);
    fit.residual_of_fit = std::sqrt(rss / static_cast<double>(pts.size()));
    return fit;
}

double envelope_constant(const std::vector<std::pair<std::size_t, double>>& errors, double q) {
    if (!(q > 0.0)) throw ContractViolation("envelope_constant: q must be positive");
    double c = 0.0;
    for (const auto& [h, e] : errors)
        c = std::max(c, e / std::pow(q, static_cast<double>(h) / 2.0 + 1.0));
    return c;
}

std::size_t SupportSets::support_count() const {
    std::size_t c = 0;
    for (std::uint8_t v : support) c += v;
    return c;
}

SupportSets support_decay_sets(const DenseMatrix& m, std::size_t h) {
    if (m.rows() != m.cols())
        throw ContractViolation("support_decay_sets: matrix not square");
    const std::size_t n = m.rows();

    std::vector<std::uint8_t> pattern(n * n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            pattern[i * n + j] = std::abs(m(i, j)) > 1e-12 ? 1 : 0;

    SupportSets out;
    out.n = n;
    out.support.assign(n * n, 0);
    // M^0 = I
    std::vector<std::uint8_t> power(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) power[i * n + i] = 1;
    for (std::size_t i = 0; i < n; ++i) out.support[i * n + i] = 1;

    for (std::size_t k = 1; k <= h; ++k) {
        std::vector<std::uint8_t> next(n * n, 0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t t = 0; t < n; ++t)
                if (power[i * n + t])
                    for (std::size_t j = 0; j < n; ++j)
                        if (pattern[t * n + j]) next[i * n + j] = 1;
        power.swap(next);
        for (std::size_t idx = 0; idx < n * n; ++idx)
            if (power[idx]) out.support[idx] = 1;
    }
    return out;
}

PinvDecayTable verify_pinv_decay(const DenseMatrix& h, const BlockLayout& layout) {
    require_finite(h, "verify_pinv_decay");
    const linalg::SvdResult s = linalg::svd(h);
    if (s.rank < h.rows())
        throw ContractViolation("verify_pinv_decay: H must have full row rank");
    const DenseMatrix hp = linalg::pinv_from_svd(s);

    const std::size_t m = layout.monitor_count();

    // block graph: regions coupled through a structurally nonzero H block
    std::vector<std::vector<std::size_t>> adj(m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            auto block_nonzero = [&](std::size_t bi, std::size_t bj) {
                const model::IndexRange r = layout.row_ranges[bi];
                const model::IndexRange c = layout.state_ranges[bj];
                for (std::size_t a = 0; a < r.count; ++a)
                    for (std::size_t b = 0; b < c.count; ++b)
                        if (std::abs(h(r.begin + a, c.begin + b)) > 1e-12) return true;
                return false;
            };
            if (block_nonzero(i, j) || block_nonzero(j, i)) {
                adj[i].push_back(j);
                adj[j].push_back(i);
            }
        }
    }

    auto bfs = [&](std::size_t src) {
        std::vector<std::size_t> dist(m, kUnreachable);
        std::deque<std::size_t> queue{src};
        dist[src] = 0;
        while (!queue.empty()) {
            const std::size_t u = queue.front();
            queue.pop_front();
            for (std::size_t v : adj[u])
                if (dist[v] == kUnreachable) {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
        }
        return dist;
    };

    PinvDecayTable table;
    std::vector<std::pair<std::size_t, double>> env_raw;
    for (std::size_t i = 0; i < m; ++i) {
        const auto dist = bfs(i);
        for (std::size_t j = 0; j < m; ++j) {
            // pinv block (i,j): monitor i's states against monitor j's rows
            const model::IndexRange sr = layout.state_ranges[i];
            const model::IndexRange rr = layout.row_ranges[j];
            double worst = 0.0;
            for (std::size_t a = 0; a < sr.count; ++a)
                for (std::size_t b = 0; b < rr.count; ++b)
                    worst = std::max(worst, std::abs(hp(sr.begin + a, rr.begin + b)));
            table.rows.push_back({i, j, dist[j], worst});
        }
    }

    std::size_t max_finite = 0;
    for (const PinvDecayRow& r : table.rows)
        if (r.distance != kUnreachable) max_finite = std::max(max_finite, r.distance);
    table.envelope.assign(max_finite + 1, {0, 0.0});
    for (std::size_t d = 0; d <= max_finite; ++d) table.envelope[d].first = d;
    for (const PinvDecayRow& r : table.rows)
        if (r.distance != kUnreachable)
            table.envelope[r.distance].second =
                std::max(table.envelope[r.distance].second, r.max_abs_entry);
    for (const auto& [d, e] : table.envelope) env_raw.emplace_back(d, e);
    try {
        table.fit = decay_fit(env_raw);
    } catch (const InsufficientData&) {
        // degenerate layouts (single block, disconnected pieces) have no
        // decay profile to fit; the table itself is still meaningful
        table.fit = DecayFit{};
    }
    return table;
}

void write_decay_csv(std::ostream& out,
                     const std::vector<std::tuple<std::size_t, std::size_t, double>>& rows) {
    out << "monitor,h,error\n";
    for (const auto& [monitor, h, error] : rows)
        out << csv::row({csv::format_count(monitor), csv::format_count(h),
                         csv::format_real(error)});
}

void write_blockpair_csv(std::ostream& out, const PinvDecayTable& table) {
    out << "blockpair_i,blockpair_j,distance,max_abs_entry\n";
    for (const PinvDecayRow& r : table.rows) {
        out << csv::row({csv::format_count(r.i), csv::format_count(r.j),
                         r.distance == kUnreachable ? "-1" : csv::format_count(r.distance),
                         csv::format_real(r.max_abs_entry)});
    }
}

}  // namespace gridest::finitemem
