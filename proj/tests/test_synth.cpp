#include <gtest/gtest.h>

#include "gdiff/stats.hpp"
#include "gdiff/synth.hpp"

using namespace gdiff;

TEST(WattsStrogatz, LatticeClosedForm) {
    for (int k : {4, 6, 8}) {
        const Graph g = watts_strogatz({30, k, 0.0, 1});
        EXPECT_EQ(g.edge_count(), static_cast<std::size_t>(30 * k / 2));
        for (int v = 0; v < 30; ++v) EXPECT_EQ(g.degree(v), k);
        EXPECT_NEAR(clustering_coefficient(g).mean, 3.0 * (k - 2) / (4.0 * (k - 1)), 1e-12);
    }
}

TEST(WattsStrogatz, RewiringPreservesEdgeCount) {
    for (double p : {0.1, 0.5, 1.0}) {
        const Graph g = watts_strogatz({40, 6, p, 7});
        EXPECT_EQ(g.edge_count(), 120u);
        EXPECT_EQ(g, watts_strogatz({40, 6, p, 7}));
    }
    const Graph a = watts_strogatz({40, 6, 1.0, 1});
    EXPECT_LT(clustering_coefficient(a).mean, 0.3);
}

TEST(WattsStrogatz, Validation) {
    EXPECT_THROW(watts_strogatz({10, 3, 0.1, 0}), ConfigError);
    EXPECT_THROW(watts_strogatz({4, 4, 0.1, 0}), ConfigError);
    EXPECT_THROW(watts_strogatz({10, 4, 1.5, 0}), ConfigError);
    EXPECT_NO_THROW(watts_strogatz({7, 6, 1.0, 0}));
}

TEST(ErdosRenyi, DensityAndMatching) {
    const Graph g = erdos_renyi(200, 0.1, 3);
    EXPECT_NEAR(static_cast<double>(g.edge_count()) / (200.0 * 199.0 / 2.0), 0.1, 0.01);
    const std::vector<Graph> gs{watts_strogatz({20, 4, 0.0, 0}), watts_strogatz({20, 4, 0.0, 0})};
    EXPECT_DOUBLE_EQ(matched_density(gs), 40.0 / 190.0);
}

TEST(PropertyCorpus, GroupsRespectThresholds) {
    for (auto kind : {PropertyKind::Clustering, PropertyKind::Degree}) {
        PropertyCorpusConfig cfg;
        cfg.budget = 6;
        cfg.property = kind;
        cfg.seed = 5;
        const Corpus c = build_property_corpus(cfg);
        EXPECT_EQ(c.entries.size(), 18u);
        const auto th = default_thresholds(kind);
        for (const auto& e : c.entries) {
            const double v = kind == PropertyKind::Clustering ? clustering_coefficient(e.graph).mean : average_degree(e.graph);
            const std::string lvl = e.domain.substr(e.domain.find('_') + 1);
            if (lvl == "low") EXPECT_LT(v, th.low);
            if (lvl == "medium") {
                EXPECT_GE(v, th.low);
                EXPECT_LT(v, th.high);
            }
            if (lvl == "high") EXPECT_GE(v, th.high);
            ASSERT_TRUE(e.prompt.has_value());
            EXPECT_NE(e.prompt->find(lvl), std::string::npos) << *e.prompt;
            EXPECT_GE(e.graph.n(), cfg.n_min);
            EXPECT_LE(e.graph.n(), cfg.n_max);
        }
        const Corpus again = build_property_corpus(cfg);
        for (std::size_t k = 0; k < c.entries.size(); ++k) EXPECT_EQ(c.entries[k].graph, again.entries[k].graph);
    }
}

TEST(PropertyCorpus, ImpossibleThresholdsReportCounts) {
    PropertyCorpusConfig cfg;
    cfg.budget = 2;
    cfg.thresholds = PropertyThresholds{0.0, 0.0};
    cfg.max_attempts = 50;
    try {
        build_property_corpus(cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("low=0"), std::string::npos) << e.what();
    }
}

TEST(PropertyCorpus, LatticeCapAllowsSmallGraphs) {
    EXPECT_EQ(max_lattice_k(10), 6);
    EXPECT_EQ(max_lattice_k(7), 6);
    EXPECT_EQ(max_lattice_k(40), 20);
    EXPECT_EQ(max_lattice_k(31), 14);
}

TEST(WsCorpus, FixedParameters) {
    WsCorpusConfig wc;
    wc.count = 12;
    wc.n = 16;
    wc.k = 4;
    const Corpus c = build_ws_corpus(wc);
    ASSERT_EQ(c.entries.size(), 12u);
    for (const auto& e : c.entries) {
        EXPECT_EQ(e.graph.n(), 16);
        EXPECT_EQ(e.graph.edge_count(), 32u);
        EXPECT_EQ(e.domain, "WS_SYNTH");
        EXPECT_TRUE(e.prompt.has_value());
    }
}
