#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "gdiff/graph.hpp"

// Independent O(n^4) orbit counter: every 4-node subset is canonicalised by
// brute force over all 24 relabelings and each node position is mapped to an
// orbit through a table built from hand-labelled prototype graphlets.
namespace oracle {

using Adj4 = std::array<std::array<bool, 4>, 4>;

inline int mask_of(const Adj4& a, const std::array<int, 4>& perm) {
    int m = 0;
    for (int u = 0; u < 4; ++u)
        for (int v = u + 1; v < 4; ++v)
            if (a[u][v]) {
                int x = perm[u], y = perm[v];
                if (x > y) std::swap(x, y);
                m |= 1 << (x * 4 + y);
            }
    return m;
}

// (canonical mask, smallest canonical position of node p) identifies p's orbit.
inline std::array<std::pair<int, int>, 4> orbit_keys(const Adj4& a) {
    std::array<int, 4> perm{0, 1, 2, 3};
    int best = 1 << 30;
    std::array<int, 4> pos{4, 4, 4, 4};
    do {
        const int m = mask_of(a, perm);
        if (m < best) {
            best = m;
            pos = perm;
        } else if (m == best) {
            for (int p = 0; p < 4; ++p) pos[p] = std::min(pos[p], perm[p]);
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    std::array<std::pair<int, int>, 4> out;
    for (int p = 0; p < 4; ++p) out[p] = {best, pos[p]};
    return out;
}

inline bool connected(const Adj4& a) {
    int seen = 1, frontier = 1;
    while (frontier) {
        int next = 0;
        for (int u = 0; u < 4; ++u)
            if (frontier >> u & 1)
                for (int v = 0; v < 4; ++v)
                    if (a[u][v] && !(seen >> v & 1)) next |= 1 << v;
        seen |= next;
        frontier = next;
    }
    return seen == 15;
}

inline const std::map<std::pair<int, int>, int>& orbit_table() {
    static const std::map<std::pair<int, int>, int> table = [] {
        struct Proto {
            std::vector<std::pair<int, int>> edges;
            std::array<int, 4> orbit;
        };
        const std::vector<Proto> protos{
            {{{0, 1}, {1, 2}, {2, 3}}, {4, 5, 5, 4}},                          // path
            {{{0, 1}, {0, 2}, {0, 3}}, {7, 6, 6, 6}},                          // star
            {{{0, 1}, {1, 2}, {2, 3}, {3, 0}}, {8, 8, 8, 8}},                  // cycle
            {{{0, 1}, {1, 2}, {0, 2}, {2, 3}}, {10, 10, 11, 9}},               // paw
            {{{0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}, {12, 12, 13, 13}},      // diamond
            {{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}, {14, 14, 14, 14}},  // clique
        };
        std::map<std::pair<int, int>, int> t;
        for (const auto& p : protos) {
            Adj4 a{};
            for (auto [u, v] : p.edges) a[u][v] = a[v][u] = true;
            const auto keys = orbit_keys(a);
            for (int q = 0; q < 4; ++q) t[keys[q]] = p.orbit[q];
        }
        return t;
    }();
    return table;
}

/// Per-node counts of orbits 4..14 (index 0 = orbit 4).
inline std::vector<std::array<std::int64_t, 11>> orbit_counts(const gdiff::Graph& g) {
    const int n = g.n();
    std::vector<std::array<std::int64_t, 11>> out(static_cast<std::size_t>(n));
    for (auto& r : out) r.fill(0);
    const auto& table = orbit_table();
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            for (int c = b + 1; c < n; ++c)
                for (int d = c + 1; d < n; ++d) {
                    const std::array<int, 4> s{a, b, c, d};
                    Adj4 adj{};
                    for (int u = 0; u < 4; ++u)
                        for (int v = 0; v < 4; ++v) adj[u][v] = u != v && g.adjacent(s[u], s[v]);
                    if (!connected(adj)) continue;
                    const auto keys = orbit_keys(adj);
                    for (int p = 0; p < 4; ++p) ++out[static_cast<std::size_t>(s[p])][static_cast<std::size_t>(table.at(keys[p]) - 4)];
                }
    return out;
}

}  // namespace oracle
