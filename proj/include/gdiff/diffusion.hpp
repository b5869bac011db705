#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gdiff/corpus_types.hpp"
#include "gdiff/error.hpp"
#include "gdiff/graph.hpp"
#include "gdiff/rng.hpp"

namespace gdiff {

/// Noise levels for steps 0..T. Index 0 is the clean state (alpha = alpha_bar = 1).
struct NoiseSchedule {
    int T = 0;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;

    void check_step(int t) const {
        if (t < 0 || t > T) throw Error("diffusion step " + std::to_string(t) + " outside [0," + std::to_string(T) + "]");
    }
};

/// Cosine schedule: alpha_bar(t) = f(t)/f(0), f(t) = cos^2(pi/2 * (t/T + s)/(1 + s)).
/// Per-step alpha(t) = alpha_bar(t)/alpha_bar(t-1) is clamped into (0, 1] and
/// alpha_bar is then rebuilt as the running product, so the two stay consistent.
inline NoiseSchedule cosine_schedule(int T, double s = 0.008) {
    if (T < 2) throw Error("cosine schedule needs T >= 2, got " + std::to_string(T));
    auto f = [&](double t) {
        const double c = std::cos(0.5 * std::numbers::pi * (t / T + s) / (1.0 + s));
        return c * c;
    };
    NoiseSchedule sch;
    sch.T = T;
    sch.alpha.assign(static_cast<std::size_t>(T) + 1, 1.0);
    sch.alpha_bar.assign(static_cast<std::size_t>(T) + 1, 1.0);
    const double f0 = f(0.0);
    double prev = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double bar = f(t) / f0;
        double a = bar / prev;
        a = std::clamp(a, 1e-12, 1.0);
        sch.alpha[static_cast<std::size_t>(t)] = a;
        sch.alpha_bar[static_cast<std::size_t>(t)] = sch.alpha_bar[static_cast<std::size_t>(t) - 1] * a;
        prev = bar;
    }
    return sch;
}

enum class TransitionKind { Uniform, Marginal, DomainSpecific };

inline std::string to_string(TransitionKind k) {
    switch (k) {
        case TransitionKind::Uniform: return "uniform";
        case TransitionKind::Marginal: return "marginal";
        case TransitionKind::DomainSpecific: return "domain";
    }
    return "uniform";
}

inline TransitionKind parse_transition_kind(const std::string& s) {
    if (s == "uniform") return TransitionKind::Uniform;
    if (s == "marginal") return TransitionKind::Marginal;
    if (s == "domain" || s == "domain_specific") return TransitionKind::DomainSpecific;
    throw ConfigError("unknown transition kind '" + s + "' (expected uniform, marginal or domain)");
}

/// Stationary category distributions for nodes and edges.
struct Marginals {
    std::vector<double> m_x;
    std::vector<double> m_e;

    friend bool operator==(const Marginals&, const Marginals&) = default;
};

struct TransitionModel {
    TransitionKind kind = TransitionKind::Uniform;
    CategorySpace space;
    NoiseSchedule schedule;
    Marginals global;
    std::map<std::string, Marginals> per_domain;

    /// Stationary distribution used for `domain`.
    const Marginals& stationary(const std::optional<std::string>& domain) const {
        if (kind != TransitionKind::DomainSpecific) return global;
        if (!domain) throw Error("domain-specific transition model requires a domain");
        auto it = per_domain.find(*domain);
        if (it == per_domain.end())
            throw Error("domain-specific transition model has no marginals for unseen domain '" + *domain + "'");
        return it->second;
    }
};

/// Per-category frequencies over all node slots and all n^2 edge slots
/// (diagonal counted as category 0), pooled across graphs.
template <class GraphRange>
Marginals count_marginals(const GraphRange& graphs, CategorySpace space) {
    std::vector<double> cx(static_cast<std::size_t>(space.d_x), 0.0), ce(static_cast<std::size_t>(space.d_e), 0.0);
    double nx = 0.0, ne = 0.0;
    for (const Graph& g : graphs) {
        if (!(g.space() == space)) throw ShapeError("graph category space differs from the model's");
        for (int i = 0; i < g.n(); ++i) {
            cx[static_cast<std::size_t>(g.node_category(i))] += 1.0;
            for (int j = 0; j < g.n(); ++j) ce[static_cast<std::size_t>(g.edge_category(i, j))] += 1.0;
        }
        nx += g.n();
        ne += static_cast<double>(g.n()) * g.n();
    }
    if (nx == 0.0) throw Error("cannot fit marginals: no training nodes");
    for (auto& v : cx) v /= nx;
    for (auto& v : ce) v /= ne;
    return {cx, ce};
}

inline Marginals uniform_marginals(CategorySpace space) {
    return {std::vector<double>(static_cast<std::size_t>(space.d_x), 1.0 / space.d_x),
            std::vector<double>(static_cast<std::size_t>(space.d_e), 1.0 / space.d_e)};
}

/// Fits the stationary distributions on the corpus Train split.
inline TransitionModel fit_marginals(const Corpus& corpus, TransitionKind kind, NoiseSchedule schedule) {
    TransitionModel tm;
    tm.kind = kind;
    tm.space = corpus.space;
    tm.schedule = std::move(schedule);
    if (kind == TransitionKind::Uniform) {
        tm.global = uniform_marginals(corpus.space);
        return tm;
    }
    auto collect = [&](const std::string* domain) {
        std::vector<Graph> gs;
        for (const auto* e : corpus.select(Split::Train, domain)) gs.push_back(e->graph);
        return gs;
    };
    const auto train = collect(nullptr);
    if (train.empty()) throw Error("cannot fit marginals: empty Train split");
    tm.global = count_marginals(train, corpus.space);
    if (kind == TransitionKind::DomainSpecific) {
        for (const auto& d : corpus.domains()) {
            const auto gs = collect(&d);
            if (gs.empty()) throw Error("cannot fit marginals: domain '" + d + "' has no Train graphs");
            tm.per_domain[d] = count_marginals(gs, corpus.space);
        }
    }
    return tm;
}

namespace detail {

inline Eigen::MatrixXd mimic_matrix(double a, const std::vector<double>& m) {
    const auto d = static_cast<Eigen::Index>(m.size());
    Eigen::MatrixXd Q(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) Q(r, c) = (r == c ? a : 0.0) + (1.0 - a) * m[static_cast<std::size_t>(c)];
    return Q;
}

}  // namespace detail

struct TransitionPair {
    Eigen::MatrixXd x;
    Eigen::MatrixXd e;
};

/// Q^t = alpha^t I + (1 - alpha^t) 1 m^T for nodes and edges.
inline TransitionPair q_step(const TransitionModel& tm, int t, const std::optional<std::string>& domain = {}) {
    if (t < 1 || t > tm.schedule.T)
        throw Error("transition step " + std::to_string(t) + " outside [1," + std::to_string(tm.schedule.T) + "]");
    const auto& m = tm.stationary(domain);
    const double a = tm.schedule.alpha[static_cast<std::size_t>(t)];
    return {detail::mimic_matrix(a, m.m_x), detail::mimic_matrix(a, m.m_e)};
}

/// Accumulated Q^1 ... Q^t in closed form: alpha_bar^t I + (1 - alpha_bar^t) 1 m^T.
inline TransitionPair q_bar(const TransitionModel& tm, int t, const std::optional<std::string>& domain = {}) {
    tm.schedule.check_step(t);
    const auto& m = tm.stationary(domain);
    const double a = tm.schedule.alpha_bar[static_cast<std::size_t>(t)];
    return {detail::mimic_matrix(a, m.m_x), detail::mimic_matrix(a, m.m_e)};
}

/// Draws G^t ~ q(G^t | G). Edge slots are drawn once per unordered pair and mirrored.
inline Graph forward_sample(const Graph& g, const TransitionModel& tm, int t, Rng& rng,
                            const std::optional<std::string>& domain = {}) {
    if (!(g.space() == tm.space)) throw ShapeError("forward_sample: graph category space does not match the transition model");
    const auto Q = q_bar(tm, t, domain);
    Graph out(g.n(), g.space());
    std::vector<double> row;
    for (int i = 0; i < g.n(); ++i) {
        row.resize(static_cast<std::size_t>(g.space().d_x));
        for (int c = 0; c < g.space().d_x; ++c) row[static_cast<std::size_t>(c)] = Q.x(g.node_category(i), c);
        out.set_node_category(i, static_cast<int>(rng.categorical(row)));
    }
    row.resize(static_cast<std::size_t>(g.space().d_e));
    for (int i = 0; i < g.n(); ++i)
        for (int j = i + 1; j < g.n(); ++j) {
            const int c0 = g.edge_category(i, j);
            for (int c = 0; c < g.space().d_e; ++c) row[static_cast<std::size_t>(c)] = Q.e(c0, c);
            const int c = static_cast<int>(rng.categorical(row));
            if (c != 0) out.set_edge(i, j, c);
        }
    return out;
}

inline Graph forward_sample(const Graph& g, const TransitionModel& tm, int t, std::uint64_t seed,
                            const std::optional<std::string>& domain = {}) {
    Rng rng(seed);
    return forward_sample(g, tm, t, rng, domain);
}

namespace detail {

/// Single-slot reverse step: P(x^{t-1} | x^t = a) = sum_x0 p(x0) * post(x^{t-1} | a, x0),
/// each per-x0 posterior being Q^t[., a] * Qbar^{t-1}[x0, .] normalised by Qbar^t[x0, a].
/// Returns false when no x0 with positive mass is compatible with a.
inline bool slot_posterior(const Eigen::MatrixXd& Qt, const Eigen::MatrixXd& Qbar_prev, int a,
                           std::span<const double> p0, std::span<double> out) {
    const auto d = static_cast<Eigen::Index>(p0.size());
    for (auto& v : out) v = 0.0;
    bool any = false;
    for (Eigen::Index x0 = 0; x0 < d; ++x0) {
        const double w = p0[static_cast<std::size_t>(x0)];
        if (w <= 0.0) continue;
        double z = 0.0;
        for (Eigen::Index xp = 0; xp < d; ++xp) z += Qt(xp, a) * Qbar_prev(x0, xp);
        if (z <= 0.0) continue;
        any = true;
        for (Eigen::Index xp = 0; xp < d; ++xp) out[static_cast<std::size_t>(xp)] += w * Qt(xp, a) * Qbar_prev(x0, xp) / z;
    }
    if (!any) return false;
    double s = 0.0;
    for (double v : out) s += v;
    for (auto& v : out) v /= s;
    return true;
}

}  // namespace detail

/// Reverse-step distribution P(G^{t-1} | G^t) given a (possibly soft) clean-graph estimate.
inline SoftGraph posterior_step(const Graph& g_t, const SoftGraph& g0, const TransitionModel& tm, int t,
                                const std::optional<std::string>& domain = {}) {
    if (t < 1 || t > tm.schedule.T)
        throw Error("posterior step " + std::to_string(t) + " outside [1," + std::to_string(tm.schedule.T) + "]");
    if (g_t.n() != g0.n() || !(g_t.space() == g0.space()) || !(g_t.space() == tm.space))
        throw ShapeError("posterior_step: shapes of G^t, G^0 and the transition model disagree");
    const auto Q = q_step(tm, t, domain);
    const auto Qb = q_bar(tm, t - 1, domain);
    const int n = g_t.n();
    SoftGraph out(n, g_t.space());
    for (int i = 0; i < n; ++i) {
        if (!detail::slot_posterior(Q.x, Qb.x, g_t.node_category(i), g0.node_row(i), out.node_row(i)))
            throw NumericError("posterior: zero normaliser at node " + std::to_string(i) + " (step " + std::to_string(t) + ")");
        out.e(i, i, 0) = 1.0;
        for (int j = i + 1; j < n; ++j) {
            if (!detail::slot_posterior(Q.e, Qb.e, g_t.edge_category(i, j), g0.edge_row(i, j), out.edge_row(i, j)))
                throw NumericError("posterior: zero normaliser at edge (" + std::to_string(i) + "," + std::to_string(j) +
                                   ") (step " + std::to_string(t) + ")");
            for (int c = 0; c < g_t.space().d_e; ++c) out.e(j, i, c) = out.e(i, j, c);
        }
    }
    return out;
}

inline SoftGraph posterior_step(const Graph& g_t, const Graph& g0, const TransitionModel& tm, int t,
                                const std::optional<std::string>& domain = {}) {
    return posterior_step(g_t, SoftGraph::from_graph(g0), tm, t, domain);
}

/// Draws a hard graph slot-wise from a soft graph; edges drawn once per pair and mirrored.
inline Graph sample_graph(const SoftGraph& p, Rng& rng) {
    Graph g(p.n(), p.space());
    for (int i = 0; i < p.n(); ++i) {
        g.set_node_category(i, static_cast<int>(rng.categorical(p.node_row(i))));
        for (int j = i + 1; j < p.n(); ++j) {
            const int c = static_cast<int>(rng.categorical(p.edge_row(i, j)));
            if (c != 0) g.set_edge(i, j, c);
        }
    }
    return g;
}

}  // namespace gdiff
