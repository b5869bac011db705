#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gdiff/error.hpp"
#include "gdiff/graph.hpp"
#include "gdiff/orbits.hpp"
#include "gdiff/stats.hpp"

namespace gdiff {

enum class StatKind { Degree, Clustering, Spectrum, Orbit };
inline constexpr std::array<StatKind, 4> kAllStats{StatKind::Degree, StatKind::Clustering, StatKind::Spectrum,
                                                   StatKind::Orbit};

inline std::string to_string(StatKind s) {
    switch (s) {
        case StatKind::Degree: return "deg";
        case StatKind::Clustering: return "cc";
        case StatKind::Spectrum: return "spec";
        case StatKind::Orbit: return "orb";
    }
    return "deg";
}

enum class HistDistance { SquaredEuclidean, TotalVariation };

inline std::string to_string(HistDistance d) {
    return d == HistDistance::SquaredEuclidean ? "squared_euclidean" : "total_variation";
}

inline HistDistance parse_hist_distance(const std::string& s) {
    if (s == "squared_euclidean" || s == "euclidean") return HistDistance::SquaredEuclidean;
    if (s == "total_variation" || s == "tv") return HistDistance::TotalVariation;
    throw ConfigError("unknown histogram distance '" + s + "' (expected squared_euclidean or total_variation)");
}

struct MmdConfig {
    double sigma = 1.0;
    int cc_bins = 100;
    int spec_bins = 200;
    HistDistance distance = HistDistance::SquaredEuclidean;

    void validate() const {
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("MMD sigma must be positive");
        if (cc_bins < 2 || spec_bins < 2) throw ConfigError("MMD histograms need at least 2 bins");
    }
};

namespace detail {

inline void normalize_mass(std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    if (s > 0.0)
        for (auto& x : v) x /= s;
}

inline std::vector<double> bin_values(std::span<const double> values, double lo, double hi, int bins) {
    std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
    for (double v : values) {
        auto b = static_cast<long long>(std::floor((v - lo) / (hi - lo) * bins));
        b = std::clamp<long long>(b, 0, bins - 1);
        h[static_cast<std::size_t>(b)] += 1.0;
    }
    normalize_mass(h);
    return h;
}

}  // namespace detail

/// Per-graph descriptor fed to the MMD kernel.
inline std::vector<double> stat_histogram(const Graph& g, StatKind which, const MmdConfig& cfg = {}) {
    switch (which) {
        case StatKind::Degree: {
            const auto counts = degree_histogram(g);
            std::vector<double> h(counts.begin(), counts.end());
            detail::normalize_mass(h);
            return h;
        }
        case StatKind::Clustering:
            return detail::bin_values(clustering_coefficient(g).per_node, 0.0, 1.0, cfg.cc_bins);
        case StatKind::Spectrum:
            return detail::bin_values(laplacian_spectrum(g), 0.0, 2.0, cfg.spec_bins);
        case StatKind::Orbit: {
            const auto oc = orbit_counts(g);
            std::vector<double> h(kOrbitCount, 0.0);
            for (const auto& row : oc.per_node)
                for (int k = 0; k < kOrbitCount; ++k) h[static_cast<std::size_t>(k)] += static_cast<double>(row[static_cast<std::size_t>(k)]);
            if (g.n() > 0)
                for (auto& x : h) x /= g.n();
            detail::normalize_mass(h);
            return h;
        }
    }
    return {};
}

inline std::vector<std::vector<double>> descriptors(std::span<const Graph> graphs, StatKind which,
                                                    const MmdConfig& cfg = {}) {
    std::vector<std::vector<double>> out;
    out.reserve(graphs.size());
    for (const auto& g : graphs) out.push_back(stat_histogram(g, which, cfg));
    return out;
}

inline double hist_distance(std::span<const double> a, std::span<const double> b, HistDistance d) {
    const std::size_t len = std::max(a.size(), b.size());
    double s = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
        const double x = k < a.size() ? a[k] : 0.0, y = k < b.size() ? b[k] : 0.0;
        s += d == HistDistance::SquaredEuclidean ? (x - y) * (x - y) : std::abs(x - y);
    }
    return d == HistDistance::TotalVariation ? 0.5 * s : s;
}

inline double rbf_kernel(std::span<const double> a, std::span<const double> b, const MmdConfig& cfg) {
    return std::exp(-hist_distance(a, b, cfg.distance) / (2.0 * cfg.sigma * cfg.sigma));
}

using Descriptors = std::vector<std::vector<double>>;

namespace detail {

inline double mean_kernel(const Descriptors& a, const Descriptors& b, const MmdConfig& cfg) {
    double s = 0.0;
    for (const auto& x : a)
        for (const auto& y : b) s += rbf_kernel(x, y, cfg);
    return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

}  // namespace detail

/// Biased (diagonal-inclusive) squared MMD between two descriptor sets.
/// Shorter histograms are zero-padded. The cross term is always summed in a
/// canonical orientation so the result is exactly symmetric.
inline double mmd(const Descriptors& ref, const Descriptors& gen, const MmdConfig& cfg = {}) {
    cfg.validate();
    if (ref.empty() || gen.empty()) throw Error("MMD needs two non-empty graph sets");
    const bool swap = gen < ref;
    const double cross = swap ? detail::mean_kernel(gen, ref, cfg) : detail::mean_kernel(ref, gen, cfg);
    return (detail::mean_kernel(ref, ref, cfg) + detail::mean_kernel(gen, gen, cfg)) - 2.0 * cross;
}

inline double mmd(std::span<const Graph> ref, std::span<const Graph> gen, StatKind which, const MmdConfig& cfg = {}) {
    if (ref.empty() || gen.empty()) throw Error("MMD needs two non-empty graph sets");
    return mmd(descriptors(ref, which, cfg), descriptors(gen, which, cfg), cfg);
}

struct MmdReport {
    double deg = 0.0, cc = 0.0, spec = 0.0, orb = 0.0;
    std::size_t m = 0;  // reference set size
    std::size_t n = 0;  // generated set size
    MmdConfig config;

    double get(StatKind s) const {
        switch (s) {
            case StatKind::Degree: return deg;
            case StatKind::Clustering: return cc;
            case StatKind::Spectrum: return spec;
            case StatKind::Orbit: return orb;
        }
        return deg;
    }
    void set(StatKind s, double v) {
        switch (s) {
            case StatKind::Degree: deg = v; break;
            case StatKind::Clustering: cc = v; break;
            case StatKind::Spectrum: spec = v; break;
            case StatKind::Orbit: orb = v; break;
        }
    }
};

inline MmdReport report(std::span<const Graph> ref, std::span<const Graph> gen, const MmdConfig& cfg = {}) {
    MmdReport r;
    r.m = ref.size();
    r.n = gen.size();
    r.config = cfg;
    for (auto s : kAllStats) r.set(s, mmd(ref, gen, s, cfg));
    return r;
}

inline nlohmann::ordered_json report_json(const MmdReport& r) {
    nlohmann::ordered_json j;
    j["deg"] = r.deg;
    j["cc"] = r.cc;
    j["spec"] = r.spec;
    j["orb"] = r.orb;
    j["reference_size"] = r.m;
    j["generated_size"] = r.n;
    j["sigma"] = r.config.sigma;
    j["distance"] = to_string(r.config.distance);
    j["bins"] = {{"degree", "max_degree+1"}, {"cc", r.config.cc_bins}, {"spec", r.config.spec_bins}};
    return j;
}

}  // namespace gdiff
