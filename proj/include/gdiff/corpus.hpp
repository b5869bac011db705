#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gdiff/corpus_types.hpp"
#include "gdiff/error.hpp"
#include "gdiff/graph.hpp"
#include "gdiff/hash.hpp"
#include "gdiff/io.hpp"
#include "gdiff/rng.hpp"
#include "gdiff/stats.hpp"

namespace gdiff {

/// Reads one graph file (edge list or Matrix Market). When `expected` is
/// given the file's category space must match it.
inline std::vector<Graph> ingest(const std::string& path, const std::string& domain,
                                 const std::optional<CategorySpace>& expected = {}) {
    if (domain.empty()) throw Error("ingest " + path + ": empty domain label");
    Graph g = read_graph(path);
    if (expected && !(g.space() == *expected))
        throw GraphError(path + ": category space (" + std::to_string(g.space().d_x) + "," +
                         std::to_string(g.space().d_e) + ") differs from the corpus space (" +
                         std::to_string(expected->d_x) + "," + std::to_string(expected->d_e) + ")");
    std::vector<Graph> out;
    out.push_back(std::move(g));
    return out;
}

// ---------------------------------------------------------------------------
// Ego subgraphs

/// Nodes of the `hops`-ball around `center` in BFS order, each distance layer
/// sorted by node id, truncated to `max_nodes`.
inline std::vector<int> ego_ball(const Graph& g, int center, int hops, int max_nodes) {
    if (center < 0 || center >= g.n()) throw GraphError("ego center " + std::to_string(center) + " out of range");
    if (hops < 0 || max_nodes < 1) throw Error("ego ball: hops >= 0 and max_nodes >= 1 required");
    const auto adj = g.adjacency_lists();
    std::vector<int> dist(static_cast<std::size_t>(g.n()), -1);
    std::vector<int> order{center}, layer{center};
    dist[static_cast<std::size_t>(center)] = 0;
    for (int h = 1; h <= hops && !layer.empty() && static_cast<int>(order.size()) < max_nodes; ++h) {
        std::vector<int> next;
        for (int u : layer)
            for (int v : adj[static_cast<std::size_t>(u)])
                if (dist[static_cast<std::size_t>(v)] < 0) {
                    dist[static_cast<std::size_t>(v)] = h;
                    next.push_back(v);
                }
        std::sort(next.begin(), next.end());
        for (int v : next) order.push_back(v);
        layer = std::move(next);
    }
    if (static_cast<int>(order.size()) > max_nodes) order.resize(static_cast<std::size_t>(max_nodes));
    return order;
}

/// Induced subgraph on the truncated ego ball; nodes keep their relative id order.
inline Graph ego_subgraph(const Graph& g, int center, int hops, int max_nodes) {
    auto nodes = ego_ball(g, center, hops, max_nodes);
    std::sort(nodes.begin(), nodes.end());
    return g.induced(nodes);
}

struct EgoSampleResult {
    std::vector<Graph> graphs;
    int rejected = 0;        // too small or duplicate draws
    bool exhausted = false;  // retry cap hit before reaching `count`
};

inline EgoSampleResult ego_sample(const Graph& g, int hops, int max_nodes, int count, std::uint64_t seed,
                                  int retry_cap = 0) {
    if (g.n() == 0) throw GraphError("ego_sample: empty graph");
    if (max_nodes < 2) throw Error("ego_sample: max_nodes must be >= 2");
    if (hops < 1) throw Error("ego_sample: hops must be >= 1");
    if (retry_cap <= 0) retry_cap = 20 * std::max(count, 1);
    Rng rng(seed);
    EgoSampleResult out;
    std::set<std::string> seen;
    int attempts = 0;
    while (static_cast<int>(out.graphs.size()) < count) {
        if (attempts++ >= retry_cap) {
            out.exhausted = true;
            break;
        }
        const int center = static_cast<int>(rng.index(static_cast<std::uint64_t>(g.n())));
        auto nodes = ego_ball(g, center, hops, max_nodes);
        if (nodes.size() < 2) {
            ++out.rejected;
            continue;
        }
        std::sort(nodes.begin(), nodes.end());
        // Canonical key: the sorted original-id edge set plus node set.
        std::ostringstream key;
        for (int v : nodes) key << v << ',';
        key << '|';
        Graph sub = g.induced(nodes);
        key << to_edge_list(sub);
        if (!seen.insert(sha256_hex(key.str())).second) {
            ++out.rejected;
            continue;
        }
        out.graphs.push_back(std::move(sub));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Splitting

struct LabeledGraph {
    Graph graph;
    std::string domain;
    std::optional<std::string> prompt;
    std::string name;
};

struct SplitRatios {
    double train = 0.8, val = 0.1, test = 0.1;
};

/// Per-domain stratified random split. Counts per domain are
/// round(c*train), round(c*val) and the remainder for test, with at least one
/// Train graph.
inline Corpus split(std::vector<LabeledGraph> graphs, const SplitRatios& ratios, std::uint64_t seed) {
    if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
        std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
        throw ConfigError("split ratios must be non-negative and sum to 1");
    Corpus corpus;
    if (graphs.empty()) return corpus;
    corpus.space = graphs.front().graph.space();
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::size_t>> by_domain;
    for (std::size_t k = 0; k < graphs.size(); ++k) {
        const auto& lg = graphs[k];
        if (lg.domain.empty()) throw Error("graph '" + lg.name + "' has an empty domain label");
        if (!(lg.graph.space() == corpus.space))
            throw GraphError("graph '" + lg.name + "' uses a different category space from the rest of the corpus");
        if (!by_domain.count(lg.domain)) order.push_back(lg.domain);
        by_domain[lg.domain].push_back(k);
    }
    std::string small;
    for (const auto& d : order)
        if (by_domain[d].size() < 3) small += (small.empty() ? "" : ", ") + d + " (" + std::to_string(by_domain[d].size()) + ")";
    if (!small.empty()) throw Error("cannot stratify: fewer than 3 graphs in domain " + small);

    for (const auto& d : order) {
        auto idx = by_domain[d];
        Rng rng(derive_seed(seed, d));
        rng.shuffle(idx);
        const auto c = static_cast<long long>(idx.size());
        long long n_train = std::llround(static_cast<double>(c) * ratios.train);
        long long n_val = std::llround(static_cast<double>(c) * ratios.val);
        n_train = std::clamp(n_train, 1LL, c);
        n_val = std::clamp(n_val, 0LL, c - n_train);
        for (long long k = 0; k < c; ++k) {
            auto& lg = graphs[idx[static_cast<std::size_t>(k)]];
            const Split s = k < n_train ? Split::Train : (k < n_train + n_val ? Split::Val : Split::Test);
            corpus.entries.push_back({std::move(lg.graph), lg.domain, s, lg.prompt, lg.name});
        }
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// Per-domain statistics table

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
    MeanStd r;
    if (v.empty()) return r;
    for (double x : v) r.mean += x;
    r.mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(v.size()));
    return r;
}

struct DomainStatsRow {
    std::string domain;
    long long count = 0;
    MeanStd nodes, edges, avg_degree, avg_clustering;
    long long max_nodes = 0, min_nodes = 0, max_edges = 0, min_edges = 0;
};

struct DomainStatsTable {
    std::vector<DomainStatsRow> rows;
    std::vector<std::string> warnings;
};

/// Aggregates per-domain statistics (population standard deviation). Domains
/// listed in `declared` that have no graphs are skipped with a warning.
inline DomainStatsTable domain_stats(const Corpus& corpus, const std::vector<std::string>& declared = {}) {
    DomainStatsTable table;
    auto domains = corpus.domains();
    for (const auto& d : declared)
        if (std::find(domains.begin(), domains.end(), d) == domains.end()) domains.push_back(d);
    for (const auto& d : domains) {
        const auto entries = corpus.select(std::nullopt, &d);
        if (entries.empty()) {
            table.warnings.push_back("domain " + d + " has no graphs; excluded from the statistics table");
            continue;
        }
        DomainStatsRow row;
        row.domain = d;
        row.count = static_cast<long long>(entries.size());
        std::vector<double> nodes, edges, deg, cc;
        row.min_nodes = row.min_edges = std::numeric_limits<long long>::max();
        for (const auto* e : entries) {
            const long long n = e->graph.n(), m = e->graph.edge_count();
            nodes.push_back(static_cast<double>(n));
            edges.push_back(static_cast<double>(m));
            deg.push_back(average_degree(e->graph));
            cc.push_back(clustering_coefficient(e->graph).mean);
            row.max_nodes = std::max(row.max_nodes, n);
            row.min_nodes = std::min(row.min_nodes, n);
            row.max_edges = std::max(row.max_edges, m);
            row.min_edges = std::min(row.min_edges, m);
        }
        row.nodes = mean_std(nodes);
        row.edges = mean_std(edges);
        row.avg_degree = mean_std(deg);
        row.avg_clustering = mean_std(cc);
        table.rows.push_back(row);
    }
    return table;
}

inline std::string format_stats_tsv(const DomainStatsTable& table) {
    std::ostringstream out;
    out << "domain\tnodes_mean\tnodes_std\tedges_mean\tedges_std\tdegree_mean\tdegree_std\tclustering_mean\t"
           "clustering_std\tmax_nodes\tmin_nodes\tmax_edges\tmin_edges\tcount\n";
    char buf[64];
    auto num = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.6f", x);
        return std::string(buf);
    };
    for (const auto& r : table.rows) {
        out << r.domain << '\t' << num(r.nodes.mean) << '\t' << num(r.nodes.std) << '\t' << num(r.edges.mean) << '\t'
            << num(r.edges.std) << '\t' << num(r.avg_degree.mean) << '\t' << num(r.avg_degree.std) << '\t'
            << num(r.avg_clustering.mean) << '\t' << num(r.avg_clustering.std) << '\t' << r.max_nodes << '\t'
            << r.min_nodes << '\t' << r.max_edges << '\t' << r.min_edges << '\t' << r.count << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Corpus manifest (JSON):
//
//   { "format": "gdiff-corpus", "version": 1,
//     "category_space": {"d_x": 1, "d_e": 2},
//     "entries": [ {"path": "graphs/a.txt", "domain": "FB", "split": "train",
//                   "name": "a", "prompt_file": "prompts/a.txt"} ] }
//
// Paths are relative to the manifest's directory.

inline constexpr const char* kManifestFormat = "gdiff-corpus";
inline constexpr int kManifestVersion = 1;

namespace detail {

inline std::string safe_file_stem(const std::string& name, std::size_t index) {
    std::string s;
    for (char c : name) s += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
    if (s.empty() || s == "." || s == "..") s = "graph";
    char buf[16];
    std::snprintf(buf, sizeof buf, "%05zu_", index);
    return buf + s;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

}  // namespace detail

/// Writes every graph (and prompt sidecar) under `dir` and returns the manifest path.
inline std::string write_corpus(const Corpus& corpus, const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    fs::create_directories(root);
    nlohmann::ordered_json j;
    j["format"] = kManifestFormat;
    j["version"] = kManifestVersion;
    j["category_space"] = {{"d_x", corpus.space.d_x}, {"d_e", corpus.space.d_e}};
    j["entries"] = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < corpus.entries.size(); ++k) {
        const auto& e = corpus.entries[k];
        const std::string stem = detail::safe_file_stem(e.name.empty() ? e.domain : e.name, k);
        const std::string gpath = "graphs/" + stem + ".txt";
        detail::write_text(root / gpath, to_edge_list(e.graph));
        nlohmann::ordered_json row;
        row["path"] = gpath;
        row["domain"] = e.domain;
        row["split"] = to_string(e.split);
        row["name"] = e.name;
        if (e.prompt) {
            const std::string ppath = "prompts/" + stem + ".txt";
            detail::write_text(root / ppath, *e.prompt + "\n");
            row["prompt_file"] = ppath;
        }
        j["entries"].push_back(row);
    }
    const fs::path manifest = root / "manifest.json";
    detail::write_text(manifest, j.dump(2) + "\n");
    return manifest.string();
}

inline std::string read_prompt_file(const std::string& path) {
    std::string text = detail::read_text(path);
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    if (text.empty()) throw Error(path + ": empty prompt file");
    return text;
}

inline Corpus load_corpus(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_text(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(manifest_path, 0, e.what());
    }
    auto bad = [&](const std::string& what) { return ConfigError(manifest_path + ": " + what); };
    if (!j.is_object() || j.value("format", "") != kManifestFormat) throw bad("not a corpus manifest");
    if (j.value("version", 0) != kManifestVersion) throw bad("unsupported manifest version");
    Corpus corpus;
    try {
        corpus.space.d_x = j.at("category_space").at("d_x").get<int>();
        corpus.space.d_e = j.at("category_space").at("d_e").get<int>();
        corpus.space.validate();
        const fs::path base = fs::path(manifest_path).parent_path();
        for (const auto& row : j.at("entries")) {
            const std::string rel = row.at("path").get<std::string>();
            const std::string path = (base / rel).string();
            if (!fs::exists(path)) throw Error(manifest_path + ": graph file not found: " + path);
            CorpusEntry e{ingest(path, row.at("domain").get<std::string>(), corpus.space).front(),
                          row.at("domain").get<std::string>(), parse_split(row.value("split", "train")), std::nullopt,
                          row.value("name", rel)};
            if (row.contains("prompt_file")) {
                const std::string ppath = (base / row.at("prompt_file").get<std::string>()).string();
                if (!fs::exists(ppath)) throw Error(manifest_path + ": prompt file not found: " + ppath);
                e.prompt = read_prompt_file(ppath);
            } else if (row.contains("prompt")) {
                e.prompt = row.at("prompt").get<std::string>();
            }
            corpus.entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw bad(e.what());
    }
    return corpus;
}

}  // namespace gdiff
