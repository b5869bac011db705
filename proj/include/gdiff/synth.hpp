#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "gdiff/corpus.hpp"
#include "gdiff/error.hpp"
#include "gdiff/graph.hpp"
#include "gdiff/rng.hpp"
#include "gdiff/stats.hpp"
#include "gdiff/text.hpp"

namespace gdiff {

struct WsSpec {
    int n = 10;
    int k = 4;
    double p = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (k < 2 || k % 2 != 0 || n <= k)
            throw ConfigError("Watts-Strogatz needs an even k >= 2 and n > k (n=" + std::to_string(n) +
                              ", k=" + std::to_string(k) + ")");
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("Watts-Strogatz rewiring probability must lie in [0,1]");
    }
};

/// Ring lattice with k/2 neighbours on each side, then every lattice edge
/// (u, u+j) is visited in order j = 1..k/2, u = 0..n-1 and with probability p
/// its far endpoint is replaced by a uniform node that is neither u nor an
/// existing neighbour of u. Rewiring is skipped when u is saturated.
inline Graph watts_strogatz(const WsSpec& spec) {
    spec.validate();
    const int n = spec.n, half = spec.k / 2;
    Graph g(n, CategorySpace{});
    for (int j = 1; j <= half; ++j)
        for (int u = 0; u < n; ++u) g.set_edge(u, (u + j) % n, 1);
    if (spec.p == 0.0) return g;
    Rng rng(spec.seed);
    for (int j = 1; j <= half; ++j) {
        for (int u = 0; u < n; ++u) {
            const int v = (u + j) % n;
            if (!rng.bernoulli(spec.p)) continue;
            if (g.degree(u) >= n - 1) continue;
            int w;
            do {
                w = static_cast<int>(rng.index(static_cast<std::uint64_t>(n)));
            } while (w == u || g.adjacent(u, w));
            // The lattice edge may already have been rewired away from v.
            if (!g.adjacent(u, v)) continue;
            g.set_edge(u, v, 0);
            g.set_edge(u, w, 1);
        }
    }
    return g;
}

/// G(n, p) random graph; used as a density-matched baseline.
inline Graph erdos_renyi(int n, double p, std::uint64_t seed) {
    if (n < 0 || !(p >= 0.0 && p <= 1.0)) throw ConfigError("Erdos-Renyi needs n >= 0 and p in [0,1]");
    Rng rng(seed);
    Graph g(n, CategorySpace{});
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.bernoulli(p)) g.set_edge(i, j, 1);
    return g;
}

/// Edge probability giving the same expected edge count as the given graphs.
inline double matched_density(const std::vector<Graph>& graphs) {
    double edges = 0.0, pairs = 0.0;
    for (const auto& g : graphs) {
        edges += static_cast<double>(g.edge_count());
        pairs += 0.5 * g.n() * (g.n() - 1.0);
    }
    return pairs > 0.0 ? edges / pairs : 0.0;
}

// ---------------------------------------------------------------------------
// Property-grouped corpus

struct PropertyThresholds {
    double low = 0.0;   // statistic < low  -> low group
    double high = 0.0;  // statistic >= high -> high group
};

inline PropertyThresholds default_thresholds(PropertyKind kind) {
    return kind == PropertyKind::Clustering ? PropertyThresholds{0.15, 0.40} : PropertyThresholds{12.0, 40.0};
}

inline PropertyLevel assign_level(double value, const PropertyThresholds& th) {
    if (value < th.low) return PropertyLevel::Low;
    if (value < th.high) return PropertyLevel::Medium;
    return PropertyLevel::High;
}

/// Largest admissible initial-neighbour count for n nodes: even, at most
/// max(6, n/2) and below n.
inline int max_lattice_k(int n) {
    int k = std::max(6, n / 2);
    if (k % 2) --k;
    while (k >= n) k -= 2;
    return k;
}

struct PropertyCorpusConfig {
    int budget = 50;  // graphs per group
    std::uint64_t seed = 0;
    PropertyKind property = PropertyKind::Clustering;
    int n_min = 10;
    int n_max = 110;
    int k_min = 6;
    std::optional<PropertyThresholds> thresholds;
    SplitRatios ratios{0.8, 0.1, 0.1};
    long long max_attempts = 0;  // 0: 2000 * budget

    void validate() const {
        if (budget < 1) throw ConfigError("property corpus budget must be >= 1");
        if (n_min < 8 || n_max < n_min) throw ConfigError("property corpus needs 8 <= n_min <= n_max");
        if (k_min < 2) throw ConfigError("property corpus needs k_min >= 2");
    }
};

inline std::string property_domain(PropertyKind kind, PropertyLevel level) {
    return to_string(kind) + "_" + to_string(level);
}

struct SweepDraw {
    WsSpec spec;
    Graph graph;
    PropertyStats stats;
};

/// One random draw from the Watts-Strogatz parameter sweep.
inline SweepDraw draw_ws(Rng& rng, int n_min, int n_max, int k_min) {
    for (;;) {
        WsSpec s;
        s.n = static_cast<int>(rng.integer(n_min, n_max));
        const int k_lo = k_min + (k_min % 2), k_hi = max_lattice_k(s.n);
        if (k_hi < k_lo) continue;
        s.k = k_lo + 2 * static_cast<int>(rng.integer(0, (k_hi - k_lo) / 2));
        s.p = rng.uniform();
        s.seed = rng.next();
        Graph g = watts_strogatz(s);
        PropertyStats st{average_degree(g), clustering_coefficient(g).mean};
        return {s, std::move(g), st};
    }
}

/// Draws Watts-Strogatz graphs until every low/medium/high group of the chosen
/// statistic holds `budget` graphs, attaches a property prompt per graph and
/// splits each group.
inline Corpus build_property_corpus(const PropertyCorpusConfig& cfg) {
    cfg.validate();
    const auto th = cfg.thresholds.value_or(default_thresholds(cfg.property));
    const long long cap = cfg.max_attempts > 0 ? cfg.max_attempts : 2000LL * cfg.budget;
    Rng rng(derive_seed(cfg.seed, "property-sweep"));
    std::array<std::vector<LabeledGraph>, 3> groups;
    long long attempts = 0;
    auto full = [&] {
        return std::all_of(groups.begin(), groups.end(),
                           [&](const auto& g) { return static_cast<int>(g.size()) >= cfg.budget; });
    };
    while (!full()) {
        if (attempts++ >= cap) {
            std::string counts;
            for (int l = 0; l < 3; ++l)
                counts += (l ? ", " : "") + to_string(static_cast<PropertyLevel>(l)) + "=" + std::to_string(groups[static_cast<std::size_t>(l)].size());
            throw Error("property corpus: could not fill every group with thresholds low < " +
                        detail::format_stat(th.low) + " <= medium < " + detail::format_stat(th.high) +
                        " <= high for " + to_string(cfg.property) + " (" + counts + ")");
        }
        auto d = draw_ws(rng, cfg.n_min, cfg.n_max, cfg.k_min);
        const double value = cfg.property == PropertyKind::Clustering ? d.stats.avg_clustering : d.stats.avg_degree;
        const auto level = assign_level(value, th);
        auto& bucket = groups[static_cast<std::size_t>(level)];
        if (static_cast<int>(bucket.size()) >= cfg.budget) continue;
        const auto idx = bucket.size();
        const Prompt prompt = render_property_prompt(d.stats, {level, cfg.property}, rng.next());
        char name[96];
        std::snprintf(name, sizeof name, "ws_%s_%03zu_n%d_k%d", property_domain(cfg.property, level).c_str(), idx, d.spec.n, d.spec.k);
        bucket.push_back({std::move(d.graph), property_domain(cfg.property, level), prompt.text, name});
    }
    std::vector<LabeledGraph> all;
    for (auto& g : groups)
        for (auto& lg : g) all.push_back(std::move(lg));
    return split(std::move(all), cfg.ratios, derive_seed(cfg.seed, "property-split"));
}

/// Plain Watts-Strogatz corpus with fixed (n, k) and p ~ U[p_min, p_max].
struct WsCorpusConfig {
    int count = 50;
    int n = 30;
    int k = 6;
    double p_min = 0.0;
    double p_max = 1.0;
    std::uint64_t seed = 0;
    std::string domain = "WS_SYNTH";
    SplitRatios ratios{0.8, 0.1, 0.1};
};

inline std::vector<LabeledGraph> ws_graphs(const WsCorpusConfig& cfg) {
    if (cfg.count < 1) throw ConfigError("WS corpus count must be >= 1");
    if (!(cfg.p_min >= 0.0 && cfg.p_max <= 1.0 && cfg.p_min <= cfg.p_max))
        throw ConfigError("WS corpus needs 0 <= p_min <= p_max <= 1");
    Rng rng(derive_seed(cfg.seed, "ws-corpus"));
    std::vector<LabeledGraph> out;
    for (int i = 0; i < cfg.count; ++i) {
        WsSpec s{cfg.n, cfg.k, rng.uniform(cfg.p_min, cfg.p_max), rng.next()};
        const Prompt prompt = render_domain_prompt(cfg.domain, cfg.domain + "-" + std::to_string(i), rng.next());
        out.push_back({watts_strogatz(s), cfg.domain, prompt.text, cfg.domain + "_" + std::to_string(i)});
    }
    return out;
}

inline Corpus build_ws_corpus(const WsCorpusConfig& cfg) {
    return split(ws_graphs(cfg), cfg.ratios, derive_seed(cfg.seed, "ws-split"));
}

}  // namespace gdiff
