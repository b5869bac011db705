#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "gdiff/corpus.hpp"
#include "gdiff/synth.hpp"

using namespace gdiff;
namespace fs = std::filesystem;

namespace {

std::vector<LabeledGraph> toy_graphs(const std::string& domain, int count, int n) {
    std::vector<LabeledGraph> out;
    for (int i = 0; i < count; ++i) {
        Graph g(n, CategorySpace{});
        for (int v = 0; v + 1 < n; ++v) g.set_edge(v, v + 1, 1);
        if (i % 2) g.set_edge(0, n - 1, 1);
        out.push_back({g, domain, "a graph from " + domain, domain + "_" + std::to_string(i)});
    }
    return out;
}

fs::path temp_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("gdiff_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST(Ingest, ReadsFixture) {
    const auto gs = ingest(std::string(GDIFF_FIXTURES) + "/star5.mtx", "TOY");
    ASSERT_EQ(gs.size(), 1u);
    EXPECT_EQ(gs[0].edge_count(), 4u);
    EXPECT_THROW(ingest(std::string(GDIFF_FIXTURES) + "/star5.mtx", ""), Error);
    EXPECT_THROW(ingest(std::string(GDIFF_FIXTURES) + "/star5.mtx", "TOY", CategorySpace{2, 2}), GraphError);
}

TEST(Ego, BallOnPathRespectsHopsAndBudget) {
    Graph path(10, CategorySpace{});
    for (int v = 0; v < 9; ++v) path.set_edge(v, v + 1, 1);
    EXPECT_EQ(ego_ball(path, 5, 2, 100), (std::vector<int>{5, 4, 6, 3, 7}));
    EXPECT_EQ(ego_ball(path, 5, 2, 3), (std::vector<int>{5, 4, 6}));
    EXPECT_EQ(ego_subgraph(path, 0, 1, 10).n(), 2);
}

TEST(Ego, SampleIsDeduplicatedAndDeterministic) {
    const Graph g = watts_strogatz({40, 4, 0.2, 3});
    const auto a = ego_sample(g, 2, 12, 10, 99);
    const auto b = ego_sample(g, 2, 12, 10, 99);
    ASSERT_EQ(a.graphs.size(), 10u);
    EXPECT_EQ(a.graphs, b.graphs);
    for (const auto& s : a.graphs) EXPECT_LE(s.n(), 12);
}

TEST(Ego, ExhaustionIsReported) {
    const Graph g = new_graph(3, {{0, 1, 1}, {1, 2, 1}});
    const auto r = ego_sample(g, 1, 3, 50, 1);
    EXPECT_TRUE(r.exhausted);
    EXPECT_LE(r.graphs.size(), 3u);
}

TEST(Split, StratifiedCountsAndDeterminism) {
    auto gs = toy_graphs("A", 10, 5);
    for (auto& g : toy_graphs("B", 20, 6)) gs.push_back(g);
    const Corpus c1 = split(gs, {}, 7), c2 = split(gs, {}, 7);
    EXPECT_EQ(c1.entries.size(), 30u);
    for (const std::string d : {"A", "B"}) {
        const auto train = c1.select(Split::Train, &d).size(), val = c1.select(Split::Val, &d).size(),
                   test = c1.select(Split::Test, &d).size();
        const std::size_t total = d == "A" ? 10 : 20;
        EXPECT_EQ(train, total * 8 / 10);
        EXPECT_EQ(val, total / 10);
        EXPECT_EQ(test, total / 10);
    }
    for (std::size_t k = 0; k < c1.entries.size(); ++k) {
        EXPECT_EQ(c1.entries[k].name, c2.entries[k].name);
        EXPECT_EQ(c1.entries[k].split, c2.entries[k].split);
    }
}

TEST(Split, RejectsTinyDomainsAndBadRatios) {
    auto gs = toy_graphs("A", 5, 4);
    for (auto& g : toy_graphs("TINY", 2, 4)) gs.push_back(g);
    try {
        split(gs, {}, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("TINY"), std::string::npos);
    }
    EXPECT_THROW(split(toy_graphs("A", 5, 4), {0.5, 0.1, 0.1}, 0), ConfigError);
}

TEST(Stats, TableColumnsAndValues) {
    const Corpus c = split(toy_graphs("A", 4, 5), {}, 1);
    const auto table = domain_stats(c, {"A", "MISSING"});
    ASSERT_EQ(table.rows.size(), 1u);
    ASSERT_EQ(table.warnings.size(), 1u);
    EXPECT_NE(table.warnings[0].find("MISSING"), std::string::npos);
    const auto& r = table.rows[0];
    EXPECT_EQ(r.count, 4);
    EXPECT_DOUBLE_EQ(r.nodes.mean, 5.0);
    EXPECT_DOUBLE_EQ(r.edges.mean, 4.5);
    EXPECT_DOUBLE_EQ(r.edges.std, 0.5);
    EXPECT_EQ(r.max_edges, 5);
    EXPECT_EQ(r.min_edges, 4);
    const std::string tsv = format_stats_tsv(table);
    const std::string header = tsv.substr(0, tsv.find('\n'));
    for (const char* col : {"nodes_mean", "edges_mean", "degree_mean", "clustering_mean", "count"})
        EXPECT_NE(header.find(col), std::string::npos) << col;
}

TEST(Manifest, WriteLoadRoundTrip) {
    const auto dir = temp_dir("manifest");
    auto gs = toy_graphs("A", 4, 5);
    gs[0].prompt.reset();
    const Corpus c = split(gs, {}, 3);
    const std::string manifest = write_corpus(c, dir.string());
    const Corpus back = load_corpus(manifest);
    ASSERT_EQ(back.entries.size(), c.entries.size());
    for (std::size_t k = 0; k < c.entries.size(); ++k) {
        EXPECT_EQ(back.entries[k].graph, c.entries[k].graph);
        EXPECT_EQ(back.entries[k].domain, c.entries[k].domain);
        EXPECT_EQ(back.entries[k].split, c.entries[k].split);
        EXPECT_EQ(back.entries[k].prompt, c.entries[k].prompt);
    }
    EXPECT_EQ(sha256_file(write_corpus(back, (dir / "again").string())), sha256_file(manifest));
}

TEST(Manifest, MissingGraphFileNamesPath) {
    const auto dir = temp_dir("manifest_missing");
    const Corpus c = split(toy_graphs("A", 3, 4), {}, 3);
    const std::string manifest = write_corpus(c, dir.string());
    const auto victim = load_corpus(manifest);
    fs::path gone;
    for (const auto& f : fs::directory_iterator(dir / "graphs")) {
        gone = f.path();
        break;
    }
    fs::remove(gone);
    try {
        load_corpus(manifest);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find(gone.filename().string()), std::string::npos) << e.what();
    }
}
