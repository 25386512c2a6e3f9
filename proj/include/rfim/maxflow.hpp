#pragma once

#include <cstddef>
#include <vector>

namespace rfim {

// Dinic max-flow on real-valued capacities. Designed for repeated solves on
// a fixed topology: structural edges are added once, terminal capacities are
// rewritten per solve via set_terminals(), and flow state resets on solve().
//
// Residual capacities below a cutoff (1e-12 times the total capacity) are
// treated as saturated; min_cut_side() classifies vertices by residual
// reachability with the same cutoff.
class MaxFlow {
public:
    explicit MaxFlow(int node_count);

    // Adds the residual pair (u->v cap, v->u rev_cap).
    void add_edge(int u, int v, double cap, double rev_cap);

    // Per-node terminal capacities: source->v and v->sink. Overwrites the
    // values from the previous solve.
    void set_terminals(const std::vector<double>& source_cap,
                       const std::vector<double>& sink_cap);

    double solve();

    // After solve(): true if v is reachable from the source in the residual
    // graph. The canonical minimum cut puts exactly these on the source side.
    bool source_side(int v) const {
        if (!reachable_valid_) compute_reachable();
        return reachable_[v];
    }

    // After solve(): true for vertices on neither residual side; nonempty
    // exactly when another minimum cut exists within the cutoff.
    bool cut_degenerate() const;

private:
    struct Edge {
        int to;
        double cap;
    };

    bool bfs();
    double dfs(int v, double limit);
    void compute_reachable() const;

    int n_;
    int source_;
    int sink_;
    std::vector<Edge> edges_;                // paired: edge i and i^1
    std::vector<std::vector<int>> adjacency_;
    std::vector<double> base_cap_;           // structural caps for reset
    std::vector<int> level_;
    std::vector<std::size_t> iter_;
    std::vector<int> terminal_edge_;         // node -> index of source->v edge
    double cutoff_ = 0.0;
    mutable std::vector<char> reachable_;
    mutable bool reachable_valid_ = false;
};

}  // namespace rfim
