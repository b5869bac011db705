#pragma once

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gdiff/error.hpp"
#include "gdiff/graph.hpp"
#include "gdiff/hash.hpp"

namespace gdiff {

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

inline long long parse_int(std::string_view tok, const std::string& source, std::size_t line) {
    long long v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size())
        throw ParseError(source, line, "expected an integer, got '" + std::string(tok) + "'");
    return v;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace detail

/// Edge-list text format:
///
///     n d_X d_E
///     i j category        (one line per undirected edge, 0-based, i < j)
///     v i category        (node category, only written when non-zero)
///
/// Blank lines and lines starting with '#' are ignored.
inline std::string to_edge_list(const Graph& g) {
    std::ostringstream out;
    out << g.n() << ' ' << g.space().d_x << ' ' << g.space().d_e << '\n';
    for (int i = 0; i < g.n(); ++i)
        if (g.node_category(i) != 0) out << "v " << i << ' ' << g.node_category(i) << '\n';
    for (const auto& e : g.edges()) out << e.i << ' ' << e.j << ' ' << e.category << '\n';
    return out.str();
}

inline Graph parse_edge_list(std::string_view text, const std::string& source = "<edge-list>") {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool have_header = false;
    int n = 0;
    CategorySpace space;
    std::vector<EdgeSpec> edges;
    std::vector<int> node_cat;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        auto tok = detail::split_ws(line);
        if (tok.empty() || tok[0].front() == '#') {
            if (eol == text.size()) break;
            continue;
        }
        if (!have_header) {
            if (tok.size() != 3) throw ParseError(source, line_no, "header must be 'n d_X d_E'");
            n = static_cast<int>(detail::parse_int(tok[0], source, line_no));
            const int dx = static_cast<int>(detail::parse_int(tok[1], source, line_no));
            const int de = static_cast<int>(detail::parse_int(tok[2], source, line_no));
            if (n < 0) throw ParseError(source, line_no, "negative node count");
            try {
                space = CategorySpace(dx, de);
            } catch (const GraphError& e) {
                throw ParseError(source, line_no, e.what());
            }
            node_cat.assign(static_cast<std::size_t>(n), 0);
            have_header = true;
        } else if (tok[0] == "v") {
            if (tok.size() != 3) throw ParseError(source, line_no, "node line must be 'v i category'");
            const long long i = detail::parse_int(tok[1], source, line_no);
            const long long c = detail::parse_int(tok[2], source, line_no);
            if (i < 0 || i >= n) throw ParseError(source, line_no, "node index out of range");
            if (c < 0 || c >= space.d_x) throw ParseError(source, line_no, "node category out of range");
            node_cat[static_cast<std::size_t>(i)] = static_cast<int>(c);
        } else {
            if (tok.size() != 3) throw ParseError(source, line_no, "edge line must be 'i j category'");
            edges.push_back({static_cast<int>(detail::parse_int(tok[0], source, line_no)),
                             static_cast<int>(detail::parse_int(tok[1], source, line_no)),
                             static_cast<int>(detail::parse_int(tok[2], source, line_no))});
            try {
                // Validate incrementally so the error carries this line number.
                const auto& e = edges.back();
                if (e.i < 0 || e.i >= n || e.j < 0 || e.j >= n) throw GraphError("node index out of range");
                if (e.i == e.j) throw GraphError("self-loop");
                if (e.category < 1 || e.category >= space.d_e) throw GraphError("edge category out of range");
            } catch (const GraphError& err) {
                throw ParseError(source, line_no, err.what());
            }
        }
        if (eol == text.size()) break;
    }
    if (!have_header) throw ParseError(source, 0, "missing header line");
    try {
        return new_graph(n, edges, space, node_cat);
    } catch (const GraphError& err) {
        throw ParseError(source, 0, err.what());
    }
}

inline Graph read_edge_list(const std::string& path) { return parse_edge_list(detail::read_text(path), path); }

inline void write_edge_list(const Graph& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << to_edge_list(g);
}

/// Content hash of a graph's canonical edge-list serialization.
inline std::string graph_hash(const Graph& g) { return sha256_hex(to_edge_list(g)); }

/// Matrix Market coordinate file. Every stored entry becomes an edge of
/// category 1; values (for real/integer fields), self-loops and repeated
/// pairs are ignored.
inline Graph parse_matrix_market(std::string_view text, const std::string& source = "<mtx>") {
    std::size_t pos = 0, line_no = 0;
    bool have_banner = false, have_size = false;
    long long rows = 0, cols = 0, nnz = 0, seen = 0;
    std::set<std::pair<int, int>> pairs;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!have_banner) {
            if (line.rfind("%%MatrixMarket", 0) != 0) throw ParseError(source, line_no, "missing %%MatrixMarket banner");
            auto tok = detail::split_ws(line);
            if (tok.size() < 4 || tok[1] != "matrix" || tok[2] != "coordinate")
                throw ParseError(source, line_no, "only 'matrix coordinate' files are supported");
            have_banner = true;
            continue;
        }
        auto tok = detail::split_ws(line);
        if (tok.empty() || tok[0].front() == '%') continue;
        if (!have_size) {
            if (tok.size() != 3) throw ParseError(source, line_no, "size line must be 'rows cols entries'");
            rows = detail::parse_int(tok[0], source, line_no);
            cols = detail::parse_int(tok[1], source, line_no);
            nnz = detail::parse_int(tok[2], source, line_no);
            if (rows != cols) throw ParseError(source, line_no, "adjacency matrix must be square");
            have_size = true;
            continue;
        }
        if (tok.size() < 2) throw ParseError(source, line_no, "entry line must start with 'i j'");
        const long long i = detail::parse_int(tok[0], source, line_no);
        const long long j = detail::parse_int(tok[1], source, line_no);
        if (i < 1 || i > rows || j < 1 || j > cols) throw ParseError(source, line_no, "entry index out of range");
        ++seen;
        if (i == j) continue;
        pairs.emplace(static_cast<int>(std::min(i, j) - 1), static_cast<int>(std::max(i, j) - 1));
    }
    if (!have_size) throw ParseError(source, 0, "missing size line");
    if (seen != nnz)
        throw ParseError(source, 0, "declared " + std::to_string(nnz) + " entries, found " + std::to_string(seen));
    Graph g(static_cast<int>(rows), CategorySpace{1, 2});
    for (auto [a, b] : pairs) g.set_edge(a, b, 1);
    return g;
}

inline Graph read_matrix_market(const std::string& path) {
    return parse_matrix_market(detail::read_text(path), path);
}

/// Reads either format, chosen by extension (.mtx) or the banner.
inline Graph read_graph(const std::string& path) {
    std::string text = detail::read_text(path);
    if (text.rfind("%%MatrixMarket", 0) == 0) return parse_matrix_market(text, path);
    return parse_edge_list(text, path);
}

}  // namespace gdiff
