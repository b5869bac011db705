#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "gdiff/workflow.hpp"

using namespace gdiff;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("gdiff_wf_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string write_config(const fs::path& dir, const std::string& name, const Json& j) {
    const auto p = dir / name;
    std::ofstream(p) << j.dump(2);
    return p.string();
}

CommandResult run(const std::string& verb, const fs::path& dir, const Json& j, RunOptions opt = {}) {
    return run_command(verb, write_config(dir, verb + ".json", j), opt);
}

int run_cli(const std::string& args) {
    const int rc = std::system((std::string(GDIFF_CLI) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Json tiny_denoiser() { return {{"hidden_dim", 8}, {"layers", 1}, {"n_spectral", 2}, {"time_embed_dim", 4}, {"text_embed_dim", 16}}; }
Json tiny_optim(int epochs, double lr = 3e-3, int seed = 0) {
    return {{"epochs", epochs}, {"lr", lr}, {"batch", 4}, {"grad_accum", 1}, {"seed", seed}};
}

/// Two-domain corpus (POWER: 6-node paths, WS: 8-node lattices).
std::string two_domain_corpus(const fs::path& dir) {
    std::vector<LabeledGraph> gs;
    for (int i = 0; i < 10; ++i) {
        Graph p(6 + i % 2, CategorySpace{});
        for (int v = 0; v + 1 < p.n(); ++v) p.set_edge(v, v + 1, 1);
        gs.push_back({p, "POWER", render_domain_prompt("POWER", "grid" + std::to_string(i), 0).text, "grid" + std::to_string(i)});
        gs.push_back({watts_strogatz({8, 4, 0.1 * i, static_cast<std::uint64_t>(i)}), "WS", std::nullopt, "ws" + std::to_string(i)});
    }
    return write_corpus(split(gs, {}, 1), (dir / "corpus").string());
}

Json pretrain_config(const std::string& corpus, const fs::path& out) {
    return {{"schema_version", 1},       {"corpus", corpus},       {"transition", "marginal"},
            {"diffusion_steps", 10},     {"denoiser", tiny_denoiser()}, {"optim", tiny_optim(2)},
            {"prompt_mode", "domain"},   {"out", out.string()}};
}

}  // namespace

TEST(Ingest, FixtureDirectoryGivesManifestAndStats) {
    const auto dir = fresh_dir("ingest");
    const Json cfg = {{"schema_version", 1},
                      {"sources", {{{"path", std::string(GDIFF_FIXTURES) + "/three"}, {"domain", "TOY"}}}},
                      {"prompts", "domain"},
                      {"out", (dir / "run").string()}};
    run("ingest", dir, cfg);
    const Corpus c = load_corpus((dir / "run/corpus/manifest.json").string());
    EXPECT_EQ(c.entries.size(), 3u);
    for (const auto& e : c.entries) EXPECT_TRUE(e.prompt.has_value());
    std::ifstream tsv(dir / "run/stats.tsv");
    std::string header;
    std::getline(tsv, header);
    for (const char* col : {"domain", "nodes_mean", "edges_mean", "degree_mean", "clustering_mean", "count"})
        EXPECT_NE(header.find(col), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "run/log.txt"));
    EXPECT_TRUE(fs::exists(dir / "run/report.json"));
}

TEST(Ingest, EgoSamplingLargeGraph) {
    const auto dir = fresh_dir("ingest_ego");
    write_edge_list(watts_strogatz({60, 4, 0.1, 1}), (dir / "big.txt").string());
    const Json cfg = {{"schema_version", 1},
                      {"sources", {{{"path", (dir / "big.txt").string()}, {"domain", "BIG"}}}},
                      {"max_nodes", 15},
                      {"ego", {{"hops", 2}, {"count", 8}}},
                      {"out", (dir / "run").string()}};
    run("ingest", dir, cfg);
    const Corpus c = load_corpus((dir / "run/corpus/manifest.json").string());
    EXPECT_EQ(c.entries.size(), 8u);
    for (const auto& e : c.entries) EXPECT_LE(e.graph.n(), 15);
}

TEST(Ingest, MissingInputFailsWithPath) {
    const auto dir = fresh_dir("ingest_missing");
    const Json cfg = {{"schema_version", 1},
                      {"sources", {{{"path", "/nonexistent/graph.txt"}, {"domain", "TOY"}}}},
                      {"out", (dir / "run").string()}};
    try {
        run("ingest", dir, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/graph.txt"), std::string::npos);
    }
    EXPECT_NE(run_cli("ingest --config " + (dir / "ingest.json").string()), 0);
}

TEST(Config, UnknownKeysAndVersionsRejected) {
    const auto dir = fresh_dir("config");
    Json cfg = {{"schema_version", 1}, {"mode", "fixed"}, {"seed", 1}, {"out", (dir / "run").string()}, {"colour", "red"}};
    EXPECT_THROW(run("synth", dir, cfg), ConfigError);
    cfg.erase("colour");
    cfg["ws"] = {{"count", 6}, {"n", 10}, {"k", 4}, {"typo", 1}};
    EXPECT_THROW(run("synth", dir, cfg), ConfigError);
    cfg["ws"].erase("typo");
    cfg["schema_version"] = 2;
    EXPECT_THROW(run("synth", dir, cfg), ConfigError);
    cfg["schema_version"] = 1;
    EXPECT_NO_THROW(run("synth", dir, cfg));
    EXPECT_EQ(run_cli("synth --config " + (dir / "synth.json").string()), 0);
    EXPECT_NE(run_cli("sample --config " + (dir / "synth.json").string()), 0);
}

TEST(Synth, PropertyCorpusLayoutAndDeterminism) {
    const auto dir = fresh_dir("synth");
    const Json cfg = {{"schema_version", 1}, {"mode", "property"}, {"property", "CC"}, {"budget", 50}, {"seed", 4},
                      {"out", (dir / "a").string()}};
    run("synth", dir, cfg);
    const auto manifest = Json::parse(detail::read_text((dir / "a/corpus/manifest.json").string()));
    ASSERT_EQ(manifest.at("entries").size(), 150u);
    for (const auto& e : manifest.at("entries")) {
        ASSERT_TRUE(e.contains("prompt_file"));
        EXPECT_TRUE(fs::exists(dir / "a/corpus" / e.at("prompt_file").get<std::string>()));
    }
    RunOptions opt;
    opt.out_override = (dir / "b").string();
    run("synth", dir, cfg, opt);
    EXPECT_EQ(sha256_file((dir / "a/corpus/manifest.json").string()), sha256_file((dir / "b/corpus/manifest.json").string()));
}

TEST(Pretrain, HeldOutDomainExcluded) {
    const auto dir = fresh_dir("pretrain_heldout");
    const std::string corpus = two_domain_corpus(dir);
    Json cfg = pretrain_config(corpus, dir / "run");
    cfg["held_out"] = "POWER";
    run("pretrain", dir, cfg);
    const Checkpoint ck = load_checkpoint((dir / "run/checkpoint.gdc").string());
    ASSERT_EQ(ck.provenance.size(), 1u);
    const Corpus c = load_corpus(corpus);
    for (const auto& e : c.entries) {
        if (e.domain != "POWER") continue;
        const auto h = graph_hash(e.graph);
        for (const auto& g : ck.provenance[0].graph_hashes) EXPECT_NE(g, h);
    }
    EXPECT_EQ(ck.provenance[0].held_out, std::optional<std::string>("POWER"));
    EXPECT_EQ(ck.node_counts.count("POWER"), 0u);
    EXPECT_EQ(ck.provenance[0].domains, std::vector<std::string>{"WS"});
}

TEST(Pretrain, ResumeWithZeroEpochsIsByteIdentical) {
    const auto dir = fresh_dir("pretrain_resume");
    const std::string corpus = two_domain_corpus(dir);
    run("pretrain", dir, pretrain_config(corpus, dir / "first"));
    const Json resume = {{"schema_version", 1},      {"corpus", corpus},
                         {"resume", (dir / "first/checkpoint.gdc").string()},
                         {"optim", tiny_optim(0)},    {"prompt_mode", "domain"},
                         {"out", (dir / "second").string()}};
    run("pretrain", dir, resume);
    EXPECT_EQ(detail::read_text((dir / "first/checkpoint.gdc").string()),
              detail::read_text((dir / "second/checkpoint.gdc").string()));
}

TEST(Pretrain, SeedsChangeWeightsAndRunsRepeat) {
    const auto dir = fresh_dir("pretrain_seeds");
    const std::string corpus = two_domain_corpus(dir);
    run("pretrain", dir, pretrain_config(corpus, dir / "a"));
    run("pretrain", dir, pretrain_config(corpus, dir / "a2"));
    RunOptions opt;
    opt.seed_override = 17;
    run("pretrain", dir, pretrain_config(corpus, dir / "b"), opt);
    const auto a = load_checkpoint((dir / "a/checkpoint.gdc").string());
    const auto b = load_checkpoint((dir / "b/checkpoint.gdc").string());
    EXPECT_NE(a.params.weights, b.params.weights);
    EXPECT_EQ(b.provenance[0].seed, 17u);
    EXPECT_EQ(sha256_file((dir / "a/checkpoint.gdc").string()), sha256_file((dir / "a2/checkpoint.gdc").string()));
}

TEST(Finetune, ZeroLrKeepsWeightsAndChainsProvenance) {
    const auto dir = fresh_dir("finetune");
    const std::string corpus = two_domain_corpus(dir);
    Json pre = pretrain_config(corpus, dir / "pre");
    pre["held_out"] = "POWER";
    run("pretrain", dir, pre);
    const std::string parent = (dir / "pre/checkpoint.gdc").string();
    const Json ft = {{"schema_version", 1}, {"checkpoint", parent},     {"corpus", corpus},
                     {"domain", "POWER"},   {"optim", tiny_optim(2, 0.0)}, {"prompt_mode", "domain"},
                     {"out", (dir / "ft").string()}};
    run("finetune", dir, ft);
    const auto a = load_checkpoint(parent), b = load_checkpoint((dir / "ft/checkpoint.gdc").string());
    EXPECT_EQ(a.params.weights, b.params.weights);
    ASSERT_EQ(b.provenance.size(), 2u);
    EXPECT_EQ(b.provenance[0].stage, "pretrain");
    EXPECT_EQ(b.provenance[1].stage, "finetune");
    EXPECT_EQ(b.parent_hash, std::optional<std::string>(sha256_file(parent)));
    EXPECT_EQ(b.node_counts.count("POWER"), 1u);
}

TEST(Finetune, TrainFractionLimitsGraphs) {
    const auto dir = fresh_dir("finetune_fraction");
    const std::string corpus = two_domain_corpus(dir);
    run("pretrain", dir, pretrain_config(corpus, dir / "pre"));
    Json ft = {{"schema_version", 1},
               {"checkpoint", (dir / "pre/checkpoint.gdc").string()},
               {"corpus", corpus},
               {"train_fraction", 0.5},
               {"refit_transition", true},
               {"optim", tiny_optim(1)},
               {"out", (dir / "ft").string()}};
    run("finetune", dir, ft);
    const auto b = load_checkpoint((dir / "ft/checkpoint.gdc").string());
    const auto full = b.provenance[0].graph_hashes.size();
    EXPECT_EQ(b.provenance[1].graph_hashes.size(), (full + 1) / 2);
    ft["train_fraction"] = 0.0;
    EXPECT_THROW(run("finetune", dir, ft), ConfigError);
}

TEST(Sample, CountFilesAndDeterminism) {
    const auto dir = fresh_dir("sample");
    const std::string corpus = two_domain_corpus(dir);
    run("pretrain", dir, pretrain_config(corpus, dir / "pre"));
    Json cfg = {{"schema_version", 1},
                {"checkpoint", (dir / "pre/checkpoint.gdc").string()},
                {"count", 5},
                {"seed", 3},
                {"prompt_mode", "property"},
                {"prompts", {"The graph has a low average clustering coefficient of 0.05."}},
                {"out", (dir / "s1").string()}};
    run("sample", dir, cfg);
    cfg["out"] = (dir / "s2").string();
    run("sample", dir, cfg);
    int files = 0;
    for (const auto& f : fs::directory_iterator(dir / "s1/samples")) {
        if (f.path().extension() != ".txt") continue;
        ++files;
        EXPECT_NO_THROW(read_graph(f.path().string()));
        EXPECT_EQ(detail::read_text(f.path().string()),
                  detail::read_text((dir / "s2/samples" / f.path().filename()).string()));
    }
    EXPECT_EQ(files, 5);
    const Corpus back = load_corpus((dir / "s1/samples/manifest.json").string());
    EXPECT_EQ(back.entries.size(), 5u);
    cfg.erase("prompts");
    EXPECT_THROW(run("sample", dir, cfg), ConfigError);
}

TEST(Eval, TestSplitAgainstItselfIsZero) {
    const auto dir = fresh_dir("eval_self");
    const std::string corpus = two_domain_corpus(dir);
    const Json cfg = {{"schema_version", 1},
                      {"reference", {{"corpus", corpus}, {"split", "test"}}},
                      {"generated", {{"corpus", corpus}, {"split", "test"}}},
                      {"mmd", {{"sigma", 1.0}, {"distance", "total_variation"}}},
                      {"group_by_domain", true},
                      {"out", (dir / "run").string()}};
    run("eval", dir, cfg);
    const auto rep = Json::parse(detail::read_text((dir / "run/report.json").string()));
    for (const char* s : {"deg", "cc", "spec", "orb"}) EXPECT_LE(std::abs(rep["mmd"][s].get<double>()), 1e-9) << s;
    EXPECT_EQ(rep["config"]["sigma"].get<double>(), 1.0);
    EXPECT_EQ(rep["config"]["distance"].get<std::string>(), "total_variation");
    EXPECT_TRUE(rep["per_domain"].contains("POWER"));
}

TEST(Eval, SampleThenEvaluateWithShuffledPrompts) {
    const auto dir = fresh_dir("eval_sample");
    const std::string corpus = two_domain_corpus(dir);
    run("pretrain", dir, pretrain_config(corpus, dir / "pre"));
    const std::string ck = (dir / "pre/checkpoint.gdc").string();
    const Json cfg = {{"schema_version", 1},
                      {"reference", {{"corpus", corpus}, {"split", "test"}}},
                      {"sample",
                       {{"checkpoint", ck},
                        {"corpus", corpus},
                        {"split", "test"},
                        {"count", 4},
                        {"seed", 5},
                        {"prompt_mode", "domain"},
                        {"shuffle_prompts", true}}},
                      {"out", (dir / "run").string()}};
    run("eval", dir, cfg);
    const auto rep = Json::parse(detail::read_text((dir / "run/report.json").string()));
    EXPECT_EQ(rep["generated"]["provenance"]["seed"].get<int>(), 5);
    EXPECT_TRUE(rep["generated"]["provenance"]["shuffle_prompts"].get<bool>());
    EXPECT_EQ(rep["generated"]["provenance"]["checkpoint_sha256"].get<std::string>(), sha256_file(ck));
    EXPECT_EQ(rep["mmd"]["generated_size"].get<int>(), 4);
}
