#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gdiff/error.hpp"
#include "gdiff/hash.hpp"
#include "gdiff/io.hpp"
#include "gdiff/rng.hpp"

namespace gdiff {

enum class PromptKind { DomainName, Property };

struct Prompt {
    std::string text;
    PromptKind kind = PromptKind::DomainName;
    std::map<std::string, std::string> metadata;
};

struct TextEmbedding {
    std::vector<double> vector;
    std::string encoder_id;
};

// ---------------------------------------------------------------------------
// Domain / name prompts

namespace detail {

struct DomainPhrases {
    std::string_view key;
    std::string_view label;      // human readable domain name
    std::string_view entities;   // what the nodes are
    std::string_view relation;   // what the edges are
    std::string_view system;     // the surrounding system
};

inline constexpr std::array<DomainPhrases, 14> kDomainPhrases{{
    {"FB", "Facebook social", "users", "friendships", "online social platform"},
    {"ASN", "animal social", "animals", "observed interactions", "wildlife population"},
    {"EMAIL", "email communication", "mailboxes", "messages exchanged", "corporate email system"},
    {"WEB", "web", "web pages", "hyperlinks", "world wide web crawl"},
    {"ROAD", "road", "intersections", "road segments", "urban transportation infrastructure"},
    {"POWER", "power grid", "buses", "transmission lines", "power distribution system"},
    {"CHEM", "chemical", "atoms", "chemical bonds", "molecular compound"},
    {"BIO", "biological", "proteins", "biochemical interactions", "cellular interaction system"},
    {"ECON", "economic", "economic agents", "trade flows", "economic exchange system"},
    {"RT", "retweet", "twitter accounts", "retweets", "social media information cascade"},
    {"COL", "collaboration", "researchers", "co-authored papers", "scientific collaboration community"},
    {"ECO", "ecological", "species", "feeding relations", "ecosystem food web"},
    {"CITATION", "citation", "papers", "citations", "scholarly publication record"},
    {"WS_SYNTH", "small-world", "nodes", "rewired lattice links", "synthetic small-world model"},
}};

inline std::string upper(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

inline std::string replace_all(std::string s, std::string_view key, std::string_view value) {
    for (std::size_t pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size()))
        s.replace(pos, key.size(), value);
    return s;
}

inline std::string fill(std::string tmpl, const std::map<std::string, std::string>& vars) {
    for (const auto& [k, v] : vars) tmpl = replace_all(std::move(tmpl), "{" + k + "}", v);
    return tmpl;
}

inline std::string format_stat(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace detail

inline Prompt render_domain_prompt(const std::string& domain, const std::string& name, std::uint64_t seed) {
    if (domain.empty() || name.empty()) throw Error("domain prompt needs a non-empty domain and name");
    static constexpr std::array<std::string_view, 4> known{
        "The {name} graph represents a network of {entities} in a {system}.",
        "{name} is a {label} network whose nodes are {entities} connected by {relation} within a {system}.",
        "Generate a {label} network like {name}, where {entities} are linked through {relation}.",
        "A graph of {entities} and the {relation} between them, taken from the {name} {label} network of a {system}.",
    };
    static constexpr std::array<std::string_view, 3> generic{
        "The {name} graph represents a network from the {domain} domain.",
        "{name} is a network drawn from the {domain} domain.",
        "Generate a graph resembling {name}, a network of the {domain} domain.",
    };
    Prompt p;
    p.kind = PromptKind::DomainName;
    p.metadata = {{"domain", domain}, {"name", name}, {"seed", std::to_string(seed)}};
    const std::string key = detail::upper(domain);
    for (const auto& d : detail::kDomainPhrases) {
        if (d.key != key) continue;
        const auto& tmpl = known[seed % known.size()];
        p.text = detail::fill(std::string(tmpl), {{"name", name},
                                                  {"label", std::string(d.label)},
                                                  {"entities", std::string(d.entities)},
                                                  {"relation", std::string(d.relation)},
                                                  {"system", std::string(d.system)}});
        p.metadata["template"] = std::to_string(seed % known.size());
        return p;
    }
    p.text = detail::fill(std::string(generic[seed % generic.size()]), {{"name", name}, {"domain", domain}});
    p.metadata["template"] = "generic-" + std::to_string(seed % generic.size());
    return p;
}

// ---------------------------------------------------------------------------
// Property prompts

enum class PropertyKind { Clustering, Degree };
enum class PropertyLevel { Low = 0, Medium = 1, High = 2 };

inline std::string to_string(PropertyKind k) { return k == PropertyKind::Clustering ? "CC" : "DEG"; }
inline std::string to_string(PropertyLevel l) {
    switch (l) {
        case PropertyLevel::Low: return "low";
        case PropertyLevel::Medium: return "medium";
        case PropertyLevel::High: return "high";
    }
    return "low";
}

inline PropertyKind parse_property_kind(const std::string& s) {
    if (s == "CC" || s == "cc" || s == "clustering") return PropertyKind::Clustering;
    if (s == "DEG" || s == "deg" || s == "degree") return PropertyKind::Degree;
    throw ConfigError("unknown property '" + s + "' (expected CC or DEG)");
}

struct PropertyGroup {
    PropertyLevel level;
    PropertyKind kind;
};

struct PropertyStats {
    double avg_degree = 0.0;
    double avg_clustering = 0.0;
};

inline Prompt render_property_prompt(const PropertyStats& stats, PropertyGroup group, std::uint64_t seed) {
    if (!std::isfinite(stats.avg_degree) || !std::isfinite(stats.avg_clustering))
        throw Error("property prompt needs finite statistics");
    static constexpr std::array<std::string_view, 4> degree_templates{
        "The graph has a {level} average degree of {value}, suitable for modeling {use}.",
        "Generate a network with a {level} average degree: every node has about {value} neighbors, so {feel}.",
        "A {level}-degree graph with average degree {value}, where {feel}.",
        "We need a graph whose average degree is {level} ({value}); {feel}, as in {use}.",
    };
    static constexpr std::array<std::string_view, 4> cc_templates{
        "The graph has a {level} average clustering coefficient of {value}, suitable for modeling {use}.",
        "Generate a network with a {level} clustering coefficient of {value}, in which {feel}.",
        "A {level}-clustering graph with average clustering coefficient {value}, where {feel}.",
        "We need a graph whose average clustering is {level} ({value}); {feel}, as in {use}.",
    };
    static constexpr std::array<std::array<std::string_view, 3>, 2> feel{{
        {"neighbors of a node rarely know each other", "some triangles close among neighbors",
         "neighborhoods form tight-knit triangle-rich clusters"},
        {"connections are sparse and nodes keep few links", "nodes keep a moderate number of links",
         "connections are dense and nodes keep many links"},
    }};
    static constexpr std::array<std::array<std::string_view, 3>, 2> use{{
        {"random communication networks", "organizational contact networks", "close-knit friendship circles"},
        {"social media interactions", "collaboration networks", "densely connected neural circuits"},
    }};
    const bool deg = group.kind == PropertyKind::Degree;
    const auto level = static_cast<std::size_t>(group.level);
    const std::size_t which = deg ? 1 : 0;
    const auto& pool = deg ? degree_templates : cc_templates;
    const double value = deg ? stats.avg_degree : stats.avg_clustering;
    Prompt p;
    p.kind = PromptKind::Property;
    p.text = detail::fill(std::string(pool[seed % pool.size()]), {{"level", to_string(group.level)},
                                                                  {"value", detail::format_stat(value)},
                                                                  {"feel", std::string(feel[which][level])},
                                                                  {"use", std::string(use[which][level])}});
    p.metadata = {{"property", to_string(group.kind)},
                  {"level", to_string(group.level)},
                  {"value", detail::format_stat(value)},
                  {"avg_degree", detail::format_stat(stats.avg_degree)},
                  {"avg_clustering", detail::format_stat(stats.avg_clustering)}};
    return p;
}

// ---------------------------------------------------------------------------
// Default encoder: signed feature hashing of word unigrams and character
// trigrams, L2-normalised.

inline constexpr std::string_view kHashEncoderId = "hashgram-v1";

namespace detail {

inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        const bool digit_dot = c == '.' && !cur.empty() && std::isdigit(static_cast<unsigned char>(cur.back())) &&
                               i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]));
        if (std::isalnum(c) || c == '-' || c == '_' || digit_dot) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

inline void add_feature(std::vector<double>& v, std::string_view feature, double weight) {
    const std::uint64_t h = fnv1a64(feature);
    const std::size_t idx = static_cast<std::size_t>(h % v.size());
    const double sign = ((h >> 40) & 1U) ? -1.0 : 1.0;
    v[idx] += sign * weight;
}

}  // namespace detail

inline TextEmbedding encode(std::string_view text, int dim) {
    if (dim < 8) throw Error("text embedding dimension must be >= 8, got " + std::to_string(dim));
    const auto tokens = detail::tokenize(text);
    if (tokens.empty()) throw Error("cannot encode empty text");
    std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
    for (const auto& tok : tokens) {
        detail::add_feature(v, "w:" + tok, 1.0);
        const std::string padded = "<" + tok + ">";
        for (std::size_t i = 0; i + 3 <= padded.size(); ++i) detail::add_feature(v, "c:" + padded.substr(i, 3), 0.25);
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
        // All features cancelled; fall back to a deterministic basis direction.
        v[static_cast<std::size_t>(fnv1a64(text) % v.size())] = 1.0;
        norm = 1.0;
    }
    for (auto& x : v) x /= norm;
    return {std::move(v), std::string(kHashEncoderId)};
}

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t k = 0; k < a.size() && k < b.size(); ++k) {
        ab += a[k] * b[k];
        aa += a[k] * a[k];
        bb += b[k] * b[k];
    }
    return (aa > 0.0 && bb > 0.0) ? ab / std::sqrt(aa * bb) : 0.0;
}

// ---------------------------------------------------------------------------
// Precomputed embedding files:
//
//     dim=<d> encoder=<id>
//     <sha256 of prompt text> f_1 ... f_d

struct EmbeddingTable {
    int dim = 0;
    std::string encoder_id;
    std::map<std::string, std::vector<double>> by_hash;

    void insert(std::string_view text, std::vector<double> v) { by_hash[sha256_hex(text)] = std::move(v); }

    /// Embedding of `text`. Missing prompts raise in strict mode, otherwise
    /// fall back to the hashed encoder at the table's dimension.
    TextEmbedding lookup(std::string_view text, bool strict) const {
        auto it = by_hash.find(sha256_hex(text));
        if (it != by_hash.end()) return {it->second, encoder_id};
        if (strict) throw Error("no precomputed embedding for prompt \"" + std::string(text) + "\"");
        return encode(text, dim);
    }
};

inline void normalize_unit(std::vector<double>& v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (auto& x : v) x /= norm;
}

inline EmbeddingTable parse_embeddings(std::string_view text, const std::string& source, int expected_dim = 0) {
    EmbeddingTable table;
    std::size_t pos = 0, line_no = 0, row = 0;
    bool header = false;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        const std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        const auto tok = detail::split_ws(line);
        if (tok.empty()) continue;
        if (!header) {
            for (const auto& t : tok) {
                if (t.rfind("dim=", 0) == 0) table.dim = static_cast<int>(detail::parse_int(t.substr(4), source, line_no));
                else if (t.rfind("encoder=", 0) == 0) table.encoder_id = std::string(t.substr(8));
            }
            if (table.dim <= 0) throw ParseError(source, line_no, "header must be 'dim=<d> encoder=<id>'");
            if (expected_dim > 0 && table.dim != expected_dim)
                throw ParseError(source, line_no, "embedding dimension " + std::to_string(table.dim) +
                                                       " does not match configured " + std::to_string(expected_dim));
            header = true;
            continue;
        }
        if (tok.size() != static_cast<std::size_t>(table.dim) + 1)
            throw ParseError(source, line_no, "row " + std::to_string(row) + ": expected hash and " +
                                                   std::to_string(table.dim) + " floats, found " +
                                                   std::to_string(tok.size() - 1) + " values");
        std::vector<double> v(static_cast<std::size_t>(table.dim));
        for (int k = 0; k < table.dim; ++k) {
            const std::string s(tok[static_cast<std::size_t>(k) + 1]);
            char* end = nullptr;
            v[static_cast<std::size_t>(k)] = std::strtod(s.c_str(), &end);
            if (end != s.c_str() + s.size() || !std::isfinite(v[static_cast<std::size_t>(k)]))
                throw ParseError(source, line_no, "row " + std::to_string(row) + ": malformed float '" + s + "'");
        }
        normalize_unit(v);
        table.by_hash[std::string(tok[0])] = std::move(v);
        ++row;
    }
    if (!header) throw ParseError(source, 0, "missing header line");
    return table;
}

inline EmbeddingTable load_embeddings(const std::string& path, int expected_dim = 0) {
    return parse_embeddings(detail::read_text(path), path, expected_dim);
}

inline std::string format_embeddings(const EmbeddingTable& table) {
    std::ostringstream out;
    out << "dim=" << table.dim << " encoder=" << (table.encoder_id.empty() ? "unknown" : table.encoder_id) << '\n';
    char buf[40];
    for (const auto& [h, v] : table.by_hash) {
        out << h;
        for (double x : v) {
            std::snprintf(buf, sizeof buf, " %.17g", x);
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

inline void save_embeddings(const EmbeddingTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << format_embeddings(table);
}

}  // namespace gdiff
