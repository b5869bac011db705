#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gdiff/stats.hpp"

using namespace gdiff;

namespace {

Graph complete(int n) {
    Graph g(n, CategorySpace{});
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) g.set_edge(i, j, 1);
    return g;
}

Graph cycle(int n) {
    Graph g(n, CategorySpace{});
    for (int i = 0; i < n; ++i) g.set_edge(i, (i + 1) % n, 1);
    return g;
}

}  // namespace

TEST(Clustering, TriangleStarAndClique) {
    EXPECT_DOUBLE_EQ(clustering_coefficient(complete(3)).mean, 1.0);
    EXPECT_DOUBLE_EQ(clustering_coefficient(complete(6)).mean, 1.0);
    const Graph star = new_graph(5, {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}, {0, 4, 1}});
    EXPECT_DOUBLE_EQ(clustering_coefficient(star).mean, 0.0);
    // Triangle with a pendant: node 2 has 3 neighbours and one link among them.
    const Graph paw = new_graph(4, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}, {2, 3, 1}});
    const auto cc = clustering_coefficient(paw);
    EXPECT_DOUBLE_EQ(cc.per_node[2], 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(cc.mean, (1.0 + 1.0 + 1.0 / 3.0) / 4.0);
}

TEST(Spectrum, CompleteGraphClosedForm) {
    const int n = 7;
    const auto ev = laplacian_spectrum(complete(n));
    ASSERT_EQ(ev.size(), static_cast<std::size_t>(n));
    EXPECT_NEAR(ev[0], 0.0, 1e-12);
    for (int k = 1; k < n; ++k) EXPECT_NEAR(ev[static_cast<std::size_t>(k)], n / (n - 1.0), 1e-12);
}

TEST(Spectrum, CycleClosedForm) {
    const int n = 9;
    auto ev = laplacian_spectrum(cycle(n));
    std::vector<double> expected;
    for (int k = 0; k < n; ++k) expected.push_back(1.0 - std::cos(2.0 * std::numbers::pi * k / n));
    std::sort(expected.begin(), expected.end());
    std::sort(ev.begin(), ev.end());
    for (int k = 0; k < n; ++k) EXPECT_NEAR(ev[static_cast<std::size_t>(k)], expected[static_cast<std::size_t>(k)], 1e-12);
}

TEST(Spectrum, EigenvaluesInUnitRange) {
    const Graph g = new_graph(6, {{0, 1, 1}, {1, 2, 1}, {2, 0, 1}, {3, 4, 1}});
    for (double v : laplacian_spectrum(g)) {
        EXPECT_GE(v, -1e-12);
        EXPECT_LE(v, 2.0 + 1e-12);
    }
}

TEST(Degree, HistogramAndAverage) {
    const Graph g = new_graph(4, {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}});
    EXPECT_EQ(degree_histogram(g), (std::vector<long long>{0, 3, 0, 1}));
    EXPECT_DOUBLE_EQ(average_degree(g), 1.5);
    EXPECT_DOUBLE_EQ(average_degree(Graph(0, CategorySpace{})), 0.0);
}
