#include "rfim/maxflow.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace rfim {

MaxFlow::MaxFlow(int node_count)
    : n_(node_count + 2), source_(node_count), sink_(node_count + 1) {
    adjacency_.resize(static_cast<std::size_t>(n_));
    level_.resize(static_cast<std::size_t>(n_));
    iter_.resize(static_cast<std::size_t>(n_));
    reachable_.resize(static_cast<std::size_t>(n_));
    terminal_edge_.assign(static_cast<std::size_t>(node_count), -1);
    for (int v = 0; v < node_count; ++v) {
        terminal_edge_[static_cast<std::size_t>(v)] = static_cast<int>(edges_.size());
        // source -> v (with reverse), then v -> sink (with reverse)
        edges_.push_back({v, 0.0});
        adjacency_[static_cast<std::size_t>(source_)].push_back(static_cast<int>(edges_.size()) - 1);
        edges_.push_back({source_, 0.0});
        adjacency_[static_cast<std::size_t>(v)].push_back(static_cast<int>(edges_.size()) - 1);
        edges_.push_back({sink_, 0.0});
        adjacency_[static_cast<std::size_t>(v)].push_back(static_cast<int>(edges_.size()) - 1);
        edges_.push_back({v, 0.0});
        adjacency_[static_cast<std::size_t>(sink_)].push_back(static_cast<int>(edges_.size()) - 1);
    }
}

void MaxFlow::add_edge(int u, int v, double cap, double rev_cap) {
    if (cap < 0.0 || rev_cap < 0.0) throw std::invalid_argument("negative capacity");
    edges_.push_back({v, cap});
    adjacency_[static_cast<std::size_t>(u)].push_back(static_cast<int>(edges_.size()) - 1);
    edges_.push_back({u, rev_cap});
    adjacency_[static_cast<std::size_t>(v)].push_back(static_cast<int>(edges_.size()) - 1);
}

void MaxFlow::set_terminals(const std::vector<double>& source_cap,
                            const std::vector<double>& sink_cap) {
    if (base_cap_.empty()) {
        // first solve: freeze structural capacities
        base_cap_.reserve(edges_.size());
        for (const Edge& e : edges_) base_cap_.push_back(e.cap);
    } else {
        for (std::size_t i = 0; i < edges_.size(); ++i) edges_[i].cap = base_cap_[i];
    }
    double total = 0.0;
    for (std::size_t v = 0; v < terminal_edge_.size(); ++v) {
        int base = terminal_edge_[v];
        edges_[static_cast<std::size_t>(base)].cap = source_cap[v];
        edges_[static_cast<std::size_t>(base) + 1].cap = 0.0;
        edges_[static_cast<std::size_t>(base) + 2].cap = sink_cap[v];
        edges_[static_cast<std::size_t>(base) + 3].cap = 0.0;
        total += source_cap[v] + sink_cap[v];
    }
    for (std::size_t i = 4 * terminal_edge_.size(); i < edges_.size(); i += 2)
        total += edges_[i].cap + edges_[i + 1].cap;
    cutoff_ = 1e-12 * std::max(1.0, total);
    reachable_valid_ = false;
}

bool MaxFlow::bfs() {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<int> queue;
    level_[static_cast<std::size_t>(source_)] = 0;
    queue.push(source_);
    while (!queue.empty()) {
        int v = queue.front();
        queue.pop();
        for (int idx : adjacency_[static_cast<std::size_t>(v)]) {
            const Edge& e = edges_[static_cast<std::size_t>(idx)];
            if (e.cap > cutoff_ && level_[static_cast<std::size_t>(e.to)] < 0) {
                level_[static_cast<std::size_t>(e.to)] = level_[static_cast<std::size_t>(v)] + 1;
                queue.push(e.to);
            }
        }
    }
    return level_[static_cast<std::size_t>(sink_)] >= 0;
}

double MaxFlow::dfs(int v, double limit) {
    if (v == sink_) return limit;
    for (std::size_t& i = iter_[static_cast<std::size_t>(v)];
         i < adjacency_[static_cast<std::size_t>(v)].size(); ++i) {
        int idx = adjacency_[static_cast<std::size_t>(v)][i];
        Edge& e = edges_[static_cast<std::size_t>(idx)];
        if (e.cap > cutoff_ &&
            level_[static_cast<std::size_t>(v)] < level_[static_cast<std::size_t>(e.to)]) {
            double pushed = dfs(e.to, std::min(limit, e.cap));
            if (pushed > 0.0) {
                e.cap -= pushed;
                edges_[static_cast<std::size_t>(idx ^ 1)].cap += pushed;
                return pushed;
            }
        }
    }
    return 0.0;
}

double MaxFlow::solve() {
    double flow = 0.0;
    const double inf = 1e300;
    while (bfs()) {
        std::fill(iter_.begin(), iter_.end(), 0);
        while (true) {
            double pushed = dfs(source_, inf);
            if (pushed <= 0.0) break;
            flow += pushed;
        }
    }
    reachable_valid_ = false;
    return flow;
}

void MaxFlow::compute_reachable() const {
    std::fill(reachable_.begin(), reachable_.end(), 0);
    std::vector<int> stack = {source_};
    reachable_[static_cast<std::size_t>(source_)] = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int idx : adjacency_[static_cast<std::size_t>(v)]) {
            const Edge& e = edges_[static_cast<std::size_t>(idx)];
            if (e.cap > cutoff_ && !reachable_[static_cast<std::size_t>(e.to)]) {
                reachable_[static_cast<std::size_t>(e.to)] = 1;
                stack.push_back(e.to);
            }
        }
    }
    reachable_valid_ = true;
}

bool MaxFlow::cut_degenerate() const {
    if (!reachable_valid_) compute_reachable();
    // reverse reachability to the sink over residual edges
    std::vector<char> coreach(static_cast<std::size_t>(n_), 0);
    std::vector<int> stack = {sink_};
    coreach[static_cast<std::size_t>(sink_)] = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int idx : adjacency_[static_cast<std::size_t>(v)]) {
            // edge idx: v -> e.to; residual of the paired edge e.to -> v
            const Edge& rev = edges_[static_cast<std::size_t>(idx ^ 1)];
            int from = edges_[static_cast<std::size_t>(idx)].to;
            if (rev.cap > cutoff_ && !coreach[static_cast<std::size_t>(from)]) {
                coreach[static_cast<std::size_t>(from)] = 1;
                stack.push_back(from);
            }
        }
    }
    for (int v = 0; v < n_ - 2; ++v) {
        if (!reachable_[static_cast<std::size_t>(v)] && !coreach[static_cast<std::size_t>(v)])
            return true;
    }
    return false;
}

}  // namespace rfim
