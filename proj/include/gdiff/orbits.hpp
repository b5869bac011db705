#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "gdiff/graph.hpp"

namespace gdiff {

/// The six connected 4-node graphlets.
enum class Graphlet4 : int { Path = 0, Star = 1, Cycle = 2, Paw = 3, Diamond = 4, Clique = 5 };

inline constexpr std::array<std::string_view, 6> kGraphlet4Names{"path", "star", "cycle", "paw", "diamond", "clique"};

/// Orbit slots 0..10 correspond to the standard orbit numbers 4..14:
///   path: 4 end, 5 middle;  star: 6 leaf, 7 hub;  cycle: 8;
///   paw: 9 tail, 10 triangle degree-2, 11 triangle degree-3;
///   diamond: 12 degree-2, 13 degree-3;  clique: 14.
inline constexpr int kOrbitCount = 11;
inline constexpr int kFirstOrbitNumber = 4;

using OrbitVector = std::array<std::int64_t, kOrbitCount>;

struct OrbitCounts {
    std::vector<OrbitVector> per_node;
    std::array<std::int64_t, 6> census{};
};

namespace detail {

/// Graphlet type from edge count and max in-subgraph degree.
inline Graphlet4 classify4(int edges, int max_degree) {
    switch (edges) {
        case 3: return max_degree == 3 ? Graphlet4::Star : Graphlet4::Path;
        case 4: return max_degree == 3 ? Graphlet4::Paw : Graphlet4::Cycle;
        case 5: return Graphlet4::Diamond;
        default: return Graphlet4::Clique;
    }
}

/// Orbit slot of a node with in-subgraph degree `deg` inside graphlet `type`.
inline int orbit_slot(Graphlet4 type, int deg) {
    switch (type) {
        case Graphlet4::Path: return deg == 1 ? 0 : 1;
        case Graphlet4::Star: return deg == 1 ? 2 : 3;
        case Graphlet4::Cycle: return 4;
        case Graphlet4::Paw: return deg == 1 ? 5 : (deg == 2 ? 6 : 7);
        case Graphlet4::Diamond: return deg == 2 ? 8 : 9;
        case Graphlet4::Clique: return 10;
    }
    return 10;
}

class Esu4 {
public:
    Esu4(const Graph& g, OrbitCounts& out) : g_(g), adj_(g.adjacency_lists()), out_(out) {}

    void run() {
        for (int v = 0; v < g_.n(); ++v) {
            std::vector<int> ext;
            for (int u : adj_[static_cast<std::size_t>(v)])
                if (u > v) ext.push_back(u);
            sub_[0] = v;
            extend(1, ext, v);
        }
    }

private:
    void extend(int size, std::vector<int> ext, int root) {
        if (size == 4) {
            record();
            return;
        }
        while (!ext.empty()) {
            const int w = ext.back();
            ext.pop_back();
            std::vector<int> next = ext;
            for (int u : adj_[static_cast<std::size_t>(w)]) {
                if (u <= root) continue;
                bool excluded = false;
                for (int k = 0; k < size && !excluded; ++k)
                    excluded = (u == sub_[static_cast<std::size_t>(k)]) || g_.adjacent(u, sub_[static_cast<std::size_t>(k)]);
                if (excluded) continue;
                bool present = false;
                for (int x : next) present = present || x == u;
                if (!present) next.push_back(u);
            }
            sub_[static_cast<std::size_t>(size)] = w;
            extend(size + 1, std::move(next), root);
        }
    }

    void record() {
        std::array<int, 4> deg{};
        int edges = 0;
        for (int a = 0; a < 4; ++a)
            for (int b = a + 1; b < 4; ++b)
                if (g_.adjacent(sub_[static_cast<std::size_t>(a)], sub_[static_cast<std::size_t>(b)])) {
                    ++edges;
                    ++deg[static_cast<std::size_t>(a)];
                    ++deg[static_cast<std::size_t>(b)];
                }
        int max_deg = 0;
        for (int d : deg) max_deg = std::max(max_deg, d);
        const Graphlet4 type = classify4(edges, max_deg);
        ++out_.census[static_cast<std::size_t>(type)];
        for (int a = 0; a < 4; ++a)
            ++out_.per_node[static_cast<std::size_t>(sub_[static_cast<std::size_t>(a)])]
                           [static_cast<std::size_t>(orbit_slot(type, deg[static_cast<std::size_t>(a)]))];
    }

    const Graph& g_;
    std::vector<std::vector<int>> adj_;
    OrbitCounts& out_;
    std::array<int, 4> sub_{};
};

}  // namespace detail

/// Per-node counts of the 11 orbits of connected induced 4-node graphlets,
/// plus the graphlet census. Each connected 4-node set is visited exactly
/// once via ESU extension from its smallest node.
inline OrbitCounts orbit_counts(const Graph& g) {
    OrbitCounts out;
    out.per_node.assign(static_cast<std::size_t>(g.n()), OrbitVector{});
    if (g.n() >= 4) detail::Esu4(g, out).run();
    return out;
}

}  // namespace gdiff
