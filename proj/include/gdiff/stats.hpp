#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "gdiff/graph.hpp"
#include "gdiff/orbits.hpp"

namespace gdiff {

struct Clustering {
    std::vector<double> per_node;
    double mean = 0.0;
};

/// Local clustering coefficient of every node; degree < 2 contributes 0.
inline Clustering clustering_coefficient(const Graph& g) {
    const int n = g.n();
    const auto adj = g.adjacency_lists();
    Clustering out;
    out.per_node.assign(static_cast<std::size_t>(n), 0.0);
    for (int v = 0; v < n; ++v) {
        const auto& nb = adj[static_cast<std::size_t>(v)];
        const std::size_t d = nb.size();
        if (d < 2) continue;
        std::size_t links = 0;
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = a + 1; b < d; ++b) links += g.adjacent(nb[a], nb[b]) ? 1 : 0;
        out.per_node[static_cast<std::size_t>(v)] = 2.0 * static_cast<double>(links) / static_cast<double>(d * (d - 1));
    }
    if (n > 0) out.mean = std::accumulate(out.per_node.begin(), out.per_node.end(), 0.0) / n;
    return out;
}

/// Symmetric normalized Laplacian I - D^{-1/2} A D^{-1/2} of the binarized
/// adjacency. Zero-degree nodes keep an identity row.
inline Eigen::MatrixXd normalized_laplacian(const Graph& g) {
    const int n = g.n();
    const auto deg = g.degrees();
    Eigen::VectorXd inv_sqrt(n);
    for (int i = 0; i < n; ++i) inv_sqrt(i) = deg[static_cast<std::size_t>(i)] > 0 ? 1.0 / std::sqrt(static_cast<double>(deg[static_cast<std::size_t>(i)])) : 0.0;
    Eigen::MatrixXd L = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j && g.adjacent(i, j)) L(i, j) = -inv_sqrt(i) * inv_sqrt(j);
    return L;
}

/// Ascending eigenvalues of the normalized Laplacian, clipped into [0, 2].
inline std::vector<double> laplacian_spectrum(const Graph& g) {
    const int n = g.n();
    if (n == 0) return {};
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(normalized_laplacian(g), Eigen::EigenvaluesOnly);
    std::vector<double> ev(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = std::clamp(solver.eigenvalues()(i), 0.0, 2.0);
    std::sort(ev.begin(), ev.end());
    return ev;
}

/// counts[d] = number of nodes of degree d.
inline std::vector<long long> degree_histogram(const Graph& g) {
    const auto deg = g.degrees();
    const int dmax = deg.empty() ? 0 : *std::max_element(deg.begin(), deg.end());
    std::vector<long long> h(static_cast<std::size_t>(dmax) + 1, 0);
    for (int d : deg) ++h[static_cast<std::size_t>(d)];
    return h;
}

inline double average_degree(const Graph& g) {
    return g.n() > 0 ? 2.0 * static_cast<double>(g.edge_count()) / g.n() : 0.0;
}

struct GraphStats {
    double avg_degree = 0.0;
    double avg_clustering = 0.0;
    std::vector<long long> degree_histogram;
    std::vector<double> spectrum;
    std::vector<OrbitVector> orbit_counts;
};

inline GraphStats compute_stats(const Graph& g) {
    GraphStats s;
    s.avg_degree = average_degree(g);
    s.avg_clustering = clustering_coefficient(g).mean;
    s.degree_histogram = degree_histogram(g);
    s.spectrum = laplacian_spectrum(g);
    s.orbit_counts = orbit_counts(g).per_node;
    return s;
}

}  // namespace gdiff
