#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "gdiff/error.hpp"

namespace gdiff {

/// Number of node and edge categories. Edge category 0 means "no edge".
struct CategorySpace {
    int d_x = 1;
    int d_e = 2;

    CategorySpace() = default;
    CategorySpace(int dx, int de) : d_x(dx), d_e(de) { validate(); }

    void validate() const {
        if (d_x < 1) throw GraphError("category space: d_X must be >= 1, got " + std::to_string(d_x));
        if (d_e < 2) throw GraphError("category space: d_E must be >= 2, got " + std::to_string(d_e));
    }

    friend bool operator==(const CategorySpace&, const CategorySpace&) = default;
};

struct EdgeSpec {
    int i;
    int j;
    int category = 1;
};

/// Undirected categorical graph.
///
/// Categories are stored as indices; the one-hot views X(i, c) and E(i, j, c)
/// are derived, so the one-hot and symmetry invariants hold by construction.
class Graph {
public:
    Graph() = default;

    /// Empty graph: every node category 0, every edge slot category 0.
    Graph(int n, CategorySpace space) : n_(checked_count(n)), space_(space) {
        space.validate();
        node_cat_.assign(static_cast<std::size_t>(n), 0);
        edge_cat_.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
    }

    int n() const noexcept { return n_; }
    const CategorySpace& space() const noexcept { return space_; }

    int node_category(int i) const { return node_cat_[static_cast<std::size_t>(i)]; }
    int edge_category(int i, int j) const { return edge_cat_[slot(i, j)]; }
    bool adjacent(int i, int j) const { return edge_category(i, j) != 0; }

    /// One-hot views.
    int X(int i, int c) const { return node_category(i) == c ? 1 : 0; }
    int E(int i, int j, int c) const { return edge_category(i, j) == c ? 1 : 0; }

    void set_node_category(int i, int c) {
        check_node(i);
        if (c < 0 || c >= space_.d_x)
            throw GraphError("node " + std::to_string(i) + ": category " + std::to_string(c) +
                             " outside [0," + std::to_string(space_.d_x) + ")");
        node_cat_[static_cast<std::size_t>(i)] = c;
    }

    /// Sets both (i,j) and (j,i). Category 0 removes the edge.
    void set_edge(int i, int j, int c) {
        check_node(i);
        check_node(j);
        if (i == j) throw GraphError("self-loop at node " + std::to_string(i));
        if (c < 0 || c >= space_.d_e)
            throw GraphError("edge (" + std::to_string(i) + "," + std::to_string(j) + "): category " +
                             std::to_string(c) + " outside [0," + std::to_string(space_.d_e) + ")");
        edge_cat_[slot(i, j)] = c;
        edge_cat_[slot(j, i)] = c;
    }

    int degree(int i) const {
        int d = 0;
        for (int j = 0; j < n_; ++j) d += adjacent(i, j) ? 1 : 0;
        return d;
    }

    std::vector<int> degrees() const {
        std::vector<int> d(static_cast<std::size_t>(n_), 0);
        for (int i = 0; i < n_; ++i)
            for (int j = i + 1; j < n_; ++j)
                if (adjacent(i, j)) {
                    ++d[static_cast<std::size_t>(i)];
                    ++d[static_cast<std::size_t>(j)];
                }
        return d;
    }

    std::size_t edge_count() const {
        std::size_t m = 0;
        for (int i = 0; i < n_; ++i)
            for (int j = i + 1; j < n_; ++j) m += adjacent(i, j) ? 1 : 0;
        return m;
    }

    /// Edges with i < j, in row-major order.
    std::vector<EdgeSpec> edges() const {
        std::vector<EdgeSpec> out;
        for (int i = 0; i < n_; ++i)
            for (int j = i + 1; j < n_; ++j)
                if (int c = edge_category(i, j); c != 0) out.push_back({i, j, c});
        return out;
    }

    /// Sorted neighbor lists of the binarized adjacency.
    std::vector<std::vector<int>> adjacency_lists() const {
        std::vector<std::vector<int>> adj(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                if (i != j && adjacent(i, j)) adj[static_cast<std::size_t>(i)].push_back(j);
        return adj;
    }

    /// Induced subgraph on `nodes`; node k of the result is nodes[k].
    Graph induced(std::span<const int> nodes) const {
        Graph sub(static_cast<int>(nodes.size()), space_);
        for (std::size_t a = 0; a < nodes.size(); ++a) {
            sub.node_cat_[a] = node_category(nodes[a]);
            for (std::size_t b = a + 1; b < nodes.size(); ++b) {
                int c = edge_category(nodes[a], nodes[b]);
                if (c != 0) sub.set_edge(static_cast<int>(a), static_cast<int>(b), c);
            }
        }
        return sub;
    }

    /// Relabels nodes: node i of *this becomes node perm[i] of the result.
    Graph permuted(std::span<const int> perm) const {
        Graph out(n_, space_);
        for (int i = 0; i < n_; ++i) {
            out.node_cat_[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = node_category(i);
            for (int j = i + 1; j < n_; ++j)
                if (int c = edge_category(i, j); c != 0)
                    out.set_edge(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)], c);
        }
        return out;
    }

    const std::vector<int>& node_categories() const noexcept { return node_cat_; }

    friend bool operator==(const Graph&, const Graph&) = default;

private:
    std::size_t slot(int i, int j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j);
    }
    static int checked_count(int n) {
        if (n < 0) throw GraphError("graph: negative node count");
        return n;
    }

    void check_node(int i) const {
        if (i < 0 || i >= n_)
            throw GraphError("node index " + std::to_string(i) + " outside [0," + std::to_string(n_) + ")");
    }

    int n_ = 0;
    CategorySpace space_{};
    std::vector<int> node_cat_;
    std::vector<int> edge_cat_;
};

/// Builds a graph from an edge list. Unlisted pairs get category 0; node
/// categories default to 0 unless `node_categories` is given.
inline Graph new_graph(int n, std::span<const EdgeSpec> edges, CategorySpace space = {},
                       std::span<const int> node_categories = {}) {
    Graph g(n, space);
    if (!node_categories.empty()) {
        if (static_cast<int>(node_categories.size()) != n)
            throw GraphError("node category list has " + std::to_string(node_categories.size()) +
                             " entries for " + std::to_string(n) + " nodes");
        for (int i = 0; i < n; ++i) g.set_node_category(i, node_categories[static_cast<std::size_t>(i)]);
    }
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const auto& e = edges[k];
        const std::string where = "edge #" + std::to_string(k) + " (" + std::to_string(e.i) + "," +
                                  std::to_string(e.j) + "," + std::to_string(e.category) + ")";
        if (e.i < 0 || e.i >= n || e.j < 0 || e.j >= n) throw GraphError(where + ": node index out of range");
        if (e.i == e.j) throw GraphError(where + ": self-loop");
        if (e.category < 1 || e.category >= space.d_e) throw GraphError(where + ": category out of range");
        if (g.edge_category(e.i, e.j) != 0) throw GraphError(where + ": duplicate pair");
        g.set_edge(e.i, e.j, e.category);
    }
    return g;
}

inline Graph new_graph(int n, std::initializer_list<EdgeSpec> edges, CategorySpace space = {}) {
    return new_graph(n, std::span<const EdgeSpec>(edges.begin(), edges.size()), space);
}

/// Probability-valued graph: per-node and per-pair categorical distributions.
class SoftGraph {
public:
    SoftGraph() = default;
    SoftGraph(int n, CategorySpace space)
        : n_(n), space_(space),
          x_(static_cast<std::size_t>(n) * static_cast<std::size_t>(space.d_x), 0.0),
          e_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n) * static_cast<std::size_t>(space.d_e), 0.0) {}

    /// Point-mass distribution of a hard graph.
    static SoftGraph from_graph(const Graph& g) {
        SoftGraph s(g.n(), g.space());
        for (int i = 0; i < g.n(); ++i) {
            s.x(i, g.node_category(i)) = 1.0;
            for (int j = 0; j < g.n(); ++j) s.e(i, j, g.edge_category(i, j)) = 1.0;
        }
        return s;
    }

    int n() const noexcept { return n_; }
    const CategorySpace& space() const noexcept { return space_; }

    double& x(int i, int c) { return x_[xi(i, c)]; }
    double x(int i, int c) const { return x_[xi(i, c)]; }
    double& e(int i, int j, int c) { return e_[ei(i, j, c)]; }
    double e(int i, int j, int c) const { return e_[ei(i, j, c)]; }

    std::span<double> node_row(int i) {
        return {x_.data() + xi(i, 0), static_cast<std::size_t>(space_.d_x)};
    }
    std::span<const double> node_row(int i) const {
        return {x_.data() + xi(i, 0), static_cast<std::size_t>(space_.d_x)};
    }
    std::span<double> edge_row(int i, int j) {
        return {e_.data() + ei(i, j, 0), static_cast<std::size_t>(space_.d_e)};
    }
    std::span<const double> edge_row(int i, int j) const {
        return {e_.data() + ei(i, j, 0), static_cast<std::size_t>(space_.d_e)};
    }

    /// Largest deviation from the stochasticity/symmetry invariants.
    double max_invariant_violation() const {
        double worst = 0.0;
        auto row_err = [&](std::span<const double> r) {
            double s = 0.0;
            for (double v : r) {
                if (v < 0.0 || !std::isfinite(v)) return 1.0;
                s += v;
            }
            return std::abs(s - 1.0);
        };
        for (int i = 0; i < n_; ++i) {
            worst = std::max(worst, row_err(node_row(i)));
            for (int j = 0; j < n_; ++j) {
                worst = std::max(worst, row_err(edge_row(i, j)));
                for (int c = 0; c < space_.d_e; ++c) worst = std::max(worst, std::abs(e(i, j, c) - e(j, i, c)));
            }
        }
        return worst;
    }

private:
    std::size_t xi(int i, int c) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(space_.d_x) + static_cast<std::size_t>(c);
    }
    std::size_t ei(int i, int j, int c) const {
        return (static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j)) *
                   static_cast<std::size_t>(space_.d_e) +
               static_cast<std::size_t>(c);
    }

    int n_ = 0;
    CategorySpace space_{};
    std::vector<double> x_;
    std::vector<double> e_;
};

}  // namespace gdiff
