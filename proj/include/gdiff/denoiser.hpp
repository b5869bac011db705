#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gdiff/diffusion.hpp"
#include "gdiff/error.hpp"
#include "gdiff/graph.hpp"
#include "gdiff/rng.hpp"
#include "gdiff/stats.hpp"

namespace gdiff {

struct DenoiserConfig {
    int hidden_dim = 64;
    int layers = 2;
    int n_spectral = 8;
    int time_embed_dim = 16;
    int text_embed_dim = 64;  ///< 0 disables text conditioning
    double node_weight = 1.0;
    double edge_weight = 5.0;

    void validate() const {
        if (hidden_dim < 1 || layers < 1 || n_spectral < 0 || time_embed_dim < 0 || text_embed_dim < 0)
            throw ConfigError("denoiser config: hidden_dim and layers must be positive, other widths non-negative");
        if (node_weight < 0.0 || edge_weight < 0.0 || node_weight + edge_weight <= 0.0)
            throw ConfigError("denoiser config: loss weights must be non-negative with a positive sum");
    }

    int node_feature_dim(const CategorySpace& s) const { return s.d_x + 2; }
    int graph_feature_dim() const { return n_spectral + time_embed_dim + text_embed_dim; }

    friend bool operator==(const DenoiserConfig&, const DenoiserConfig&) = default;
};

/// Structural pair inputs: cn/(1+cn), cn/sqrt(d_i d_j) and adjacency * cn/(1+cn),
/// with cn the number of common neighbours in G^t.
inline constexpr int kPairFeatureDim = 3;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

/// A named rows x cols slice of the flat parameter vector.
struct ParamBlock {
    std::string name;
    std::size_t offset = 0;
    int rows = 0;
    int cols = 0;
    int fan_in = 1;
    double init_gain = 1.0;
    std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

/// Offsets of every weight block for a given config and category space.
class ParamLayout {
public:
    struct Layer {
        std::size_t A, B, G, C, c;
    };

    ParamLayout(const DenoiserConfig& cfg, const CategorySpace& space) {
        cfg.validate();
        const int H = cfg.hidden_dim, dx = space.d_x, de = space.d_e;
        const int fg = cfg.graph_feature_dim(), fn = cfg.node_feature_dim(space);
        graph_W = add("graph.W", H, fg, fg);
        graph_b = add("graph.b", H, 1, 1, 0.0);
        in_W = add("in.W", H, fn, fn);
        in_b = add("in.b", H, 1, 1, 0.0);
        for (int l = 0; l < cfg.layers; ++l) {
            const std::string p = "layer" + std::to_string(l) + ".";
            Layer L{};
            L.A = add(p + "A", H, H, H, 0.5);
            L.B = add(p + "B", H, H, H);
            L.G = add(p + "G", H, de, 1);
            L.C = add(p + "C", H, H, H, 0.5);
            L.c = add(p + "c", H, 1, 1, 0.0);
            layers.push_back(L);
        }
        node_W = add("node_head.W", dx, H, H, 0.1);
        node_b = add("node_head.b", dx, 1, 1, 0.0);
        pair_M = add("pair_head.M", de, H, H, 0.1);
        pair_S = add("pair_head.S", de, H, H, 0.1);
        pair_D = add("pair_head.D", de, H, H, 0.1);
        pair_E = add("pair_head.E", de, de, 1, 0.1);
        pair_P = add("pair_head.P", de, kPairFeatureDim, kPairFeatureDim, 0.1);
        // Graph-embedding modulation of the E and P coefficients (rows (c, e) and (c, k)).
        pair_EY = add("pair_head.EY", de * de, H, H, 0.1);
        pair_PY = add("pair_head.PY", de * kPairFeatureDim, H, H, 0.1);
        pair_Y = add("pair_head.Y", de, H, H, 0.1);
        pair_b = add("pair_head.b", de, 1, 1, 0.0);
    }

    std::size_t total() const { return total_; }
    const std::vector<ParamBlock>& blocks() const { return blocks_; }
    const ParamBlock& block(std::size_t offset) const {
        for (const auto& b : blocks_)
            if (b.offset == offset) return b;
        throw Error("no parameter block at offset " + std::to_string(offset));
    }

    std::size_t graph_W, graph_b, in_W, in_b, node_W, node_b;
    std::size_t pair_M, pair_S, pair_D, pair_E, pair_P, pair_EY, pair_PY, pair_Y, pair_b;
    std::vector<Layer> layers;

private:
    std::size_t add(const std::string& name, int rows, int cols, int fan_in, double gain = 1.0) {
        blocks_.push_back({name, total_, rows, cols, fan_in, gain});
        total_ += blocks_.back().size();
        return blocks_.back().offset;
    }

    std::vector<ParamBlock> blocks_;
    std::size_t total_ = 0;
};

/// Trainable weights of the clean-graph predictor together with the shapes they bind to.
struct DenoiserParams {
    DenoiserConfig config;
    CategorySpace space;
    std::vector<double> weights;

    ParamLayout layout() const { return ParamLayout(config, space); }

    /// Uniform(-a, a) with a = gain * sqrt(3 / fan_in); biases start at zero.
    static DenoiserParams initialize(const DenoiserConfig& cfg, const CategorySpace& space, std::uint64_t seed) {
        DenoiserParams p{cfg, space, {}};
        const ParamLayout lay(cfg, space);
        p.weights.assign(lay.total(), 0.0);
        Rng rng(seed);
        for (const auto& b : lay.blocks()) {
            const double a = b.init_gain * std::sqrt(3.0 / std::max(1, b.fan_in));
            for (std::size_t k = 0; k < b.size(); ++k) p.weights[b.offset + k] = a == 0.0 ? 0.0 : rng.uniform(-a, a);
        }
        return p;
    }

    static DenoiserParams zeros(const DenoiserConfig& cfg, const CategorySpace& space) {
        return {cfg, space, std::vector<double>(ParamLayout(cfg, space).total(), 0.0)};
    }

    bool all_finite() const {
        for (double w : weights)
            if (!std::isfinite(w)) return false;
        return true;
    }
};

/// Inputs to the network derived from a noisy graph.
struct Features {
    RowMatrix node;          ///< n x (d_X + 2): one-hot category, degree/n, local clustering
    std::vector<int> edge;   ///< n*n edge categories (the one-hot edge features in index form)
    std::vector<RowMatrix> pair;  ///< kPairFeatureDim symmetric n x n structural features
    Eigen::VectorXd graph;   ///< spectral block | time embedding | text embedding
    int n = 0;
};

inline void time_embedding(double tau, std::span<double> out) {
    const std::size_t half = out.size() / 2;
    for (std::size_t k = 0; k < half; ++k) {
        const double w = 0.5 * std::numbers::pi * static_cast<double>(k + 1);
        out[2 * k] = std::sin(w * tau);
        out[2 * k + 1] = std::cos(w * tau);
    }
    if (out.size() % 2 == 1) out.back() = tau;
}

inline Features extract_features(const Graph& g_t, int t, const NoiseSchedule& schedule, const DenoiserConfig& cfg,
                                 std::span<const double> text_embed = {}) {
    const int n = g_t.n();
    const auto& space = g_t.space();
    Features f;
    f.n = n;
    f.node = RowMatrix::Zero(n, cfg.node_feature_dim(space));
    const auto deg = g_t.degrees();
    const auto cc = clustering_coefficient(g_t);
    for (int i = 0; i < n; ++i) {
        f.node(i, g_t.node_category(i)) = 1.0;
        f.node(i, space.d_x) = static_cast<double>(deg[static_cast<std::size_t>(i)]) / n;
        f.node(i, space.d_x + 1) = cc.per_node[static_cast<std::size_t>(i)];
    }
    f.edge.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) f.edge[static_cast<std::size_t>(i * n + j)] = g_t.edge_category(i, j);

    {
        RowMatrix A = RowMatrix::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) A(i, j) = g_t.adjacent(i, j) ? 1.0 : 0.0;
        const RowMatrix cn = A * A;
        f.pair.assign(kPairFeatureDim, RowMatrix::Zero(n, n));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                const double c = cn(i, j), sat = c / (1.0 + c);
                const double dd = static_cast<double>(deg[static_cast<std::size_t>(i)]) * deg[static_cast<std::size_t>(j)];
                f.pair[0](i, j) = sat;
                f.pair[1](i, j) = dd > 0.0 ? c / std::sqrt(dd) : 0.0;
                f.pair[2](i, j) = A(i, j) * sat;
            }
    }

    f.graph = Eigen::VectorXd::Zero(cfg.graph_feature_dim());
    if (cfg.n_spectral > 0 && n > 0) {
        const auto spec = laplacian_spectrum(g_t);
        for (int k = 0; k < cfg.n_spectral && k < n; ++k) f.graph(k) = spec[static_cast<std::size_t>(k)];
    }
    const double tau = schedule.T > 0 ? static_cast<double>(t) / schedule.T : 0.0;
    time_embedding(tau, std::span<double>(f.graph.data() + cfg.n_spectral, static_cast<std::size_t>(cfg.time_embed_dim)));
    if (cfg.text_embed_dim > 0 && !text_embed.empty()) {
        if (static_cast<int>(text_embed.size()) != cfg.text_embed_dim)
            throw ShapeError("text embedding has dimension " + std::to_string(text_embed.size()) + ", model expects " +
                             std::to_string(cfg.text_embed_dim));
        for (int k = 0; k < cfg.text_embed_dim; ++k)
            f.graph(cfg.n_spectral + cfg.time_embed_dim + k) = text_embed[static_cast<std::size_t>(k)];
    }
    return f;
}

namespace detail {

/// Activations kept for the backward pass.
struct ForwardCache {
    Eigen::VectorXd yh;                 ///< graph embedding
    std::vector<RowMatrix> h;           ///< h[0] .. h[L], each n x H
    std::vector<RowMatrix> act;         ///< tanh outputs of each residual update
    std::vector<std::vector<RowMatrix>> agg;  ///< per layer, per edge category: n x H neighbor sums
    RowMatrix node_logits;              ///< n x d_X
    std::vector<RowMatrix> pair_logits; ///< per edge category: n x n symmetric, diagonal unused
    std::vector<std::vector<std::vector<int>>> nbr;  ///< nbr[c][i]: j with category c >= 1
};

inline void softmax_inplace(std::span<double> z) {
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double s = 0.0;
    for (auto& v : z) {
        v = std::exp(v - mx);
        s += v;
    }
    for (auto& v : z) v /= s;
}

/// Sums of U rows over neighbors of each edge category (category 0 = all non-neighbors).
inline std::vector<RowMatrix> aggregate(const RowMatrix& U, const std::vector<std::vector<std::vector<int>>>& nbr, int de) {
    const auto n = U.rows();
    std::vector<RowMatrix> agg(static_cast<std::size_t>(de), RowMatrix::Zero(n, U.cols()));
    const Eigen::RowVectorXd total = U.colwise().sum();
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::RowVectorXd rest = total - U.row(i);
        for (int c = 1; c < de; ++c) {
            for (int j : nbr[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)]) agg[static_cast<std::size_t>(c)].row(i) += U.row(j);
            rest -= agg[static_cast<std::size_t>(c)].row(i);
        }
        agg[0].row(i) = rest;
    }
    return agg;
}

inline void forward(const DenoiserParams& params, const ParamLayout& lay, const Features& f, ForwardCache& cache) {
    const auto& cfg = params.config;
    const int n = f.n, H = cfg.hidden_dim, de = params.space.d_e, dx = params.space.d_x;
    const double* w = params.weights.data();
    auto mat = [&](std::size_t off, int r, int c) { return ConstMatMap(w + off, r, c); };
    auto vec = [&](std::size_t off, int r) { return ConstVecMap(w + off, r); };

    cache.nbr.assign(static_cast<std::size_t>(de), std::vector<std::vector<int>>(static_cast<std::size_t>(n)));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int c = f.edge[static_cast<std::size_t>(i * n + j)];
            if (i != j && c != 0) cache.nbr[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)].push_back(j);
        }

    const int fg = cfg.graph_feature_dim();
    cache.yh = (mat(lay.graph_W, H, fg) * f.graph + vec(lay.graph_b, H)).array().tanh().matrix();

    cache.h.assign(1, RowMatrix());
    cache.act.clear();
    cache.agg.clear();
    {
        RowMatrix pre = f.node * mat(lay.in_W, H, cfg.node_feature_dim(params.space)).transpose();
        pre.rowwise() += (vec(lay.in_b, H) + cache.yh).transpose();
        cache.h[0] = pre.array().tanh().matrix();
    }
    const double inv_n = n > 0 ? 1.0 / n : 0.0;
    for (const auto& L : lay.layers) {
        const RowMatrix& h = cache.h.back();
        const RowMatrix U = h * mat(L.B, H, H).transpose();
        auto agg = aggregate(U, cache.nbr, de);
        const auto G = mat(L.G, H, de);
        RowMatrix pre = h * mat(L.A, H, H).transpose();
        for (int c = 0; c < de; ++c)
            pre += inv_n * (agg[static_cast<std::size_t>(c)].array().rowwise() * G.col(c).transpose().array()).matrix();
        pre.rowwise() += (mat(L.C, H, H) * cache.yh + vec(L.c, H)).transpose();
        RowMatrix a = pre.array().tanh().matrix();
        cache.h.push_back(h + a);
        cache.act.push_back(std::move(a));
        cache.agg.push_back(std::move(agg));
    }

    const RowMatrix& hL = cache.h.back();
    cache.node_logits = hL * mat(lay.node_W, dx, H).transpose();
    cache.node_logits.rowwise() += vec(lay.node_b, dx).transpose();

    const auto M = mat(lay.pair_M, de, H);
    const RowMatrix SD = 0.5 * (mat(lay.pair_S, de, H) + mat(lay.pair_D, de, H));
    const RowMatrix hs = hL * SD.transpose();  // n x de
    const Eigen::VectorXd ybias = mat(lay.pair_Y, de, H) * cache.yh + vec(lay.pair_b, de);
    // Effective coefficients E + EY yh and P + PY yh, reshaped row-major to de x de / de x kPairFeatureDim.
    const Eigen::VectorXd ey = mat(lay.pair_EY, de * de, H) * cache.yh;
    const Eigen::VectorXd py = mat(lay.pair_PY, de * kPairFeatureDim, H) * cache.yh;
    const RowMatrix E = mat(lay.pair_E, de, de) + ConstMatMap(ey.data(), de, de);
    const RowMatrix P = mat(lay.pair_P, de, kPairFeatureDim) + ConstMatMap(py.data(), de, kPairFeatureDim);
    cache.pair_logits.assign(static_cast<std::size_t>(de), RowMatrix());
    for (int c = 0; c < de; ++c) {
        const RowMatrix hm = (hL.array().rowwise() * M.row(c).array()).matrix();
        RowMatrix z = hm * hL.transpose();
        z.colwise() += hs.col(c);
        z.rowwise() += hs.col(c).transpose();
        z.array() += ybias(c);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) z(i, j) += E(c, f.edge[static_cast<std::size_t>(i * n + j)]);
        for (int k = 0; k < kPairFeatureDim; ++k) z += P(c, k) * f.pair[static_cast<std::size_t>(k)];
        cache.pair_logits[static_cast<std::size_t>(c)] = std::move(z);
    }

    for (Eigen::Index k = 0; k < cache.node_logits.size(); ++k)
        if (!std::isfinite(cache.node_logits.data()[k])) throw NumericError("denoiser: non-finite node activation");
    for (const auto& z : cache.pair_logits)
        for (Eigen::Index k = 0; k < z.size(); ++k)
            if (!std::isfinite(z.data()[k])) throw NumericError("denoiser: non-finite edge activation");
}

inline SoftGraph to_soft(const ForwardCache& cache, const CategorySpace& space, int n) {
    SoftGraph out(n, space);
    for (int i = 0; i < n; ++i) {
        auto row = out.node_row(i);
        for (int c = 0; c < space.d_x; ++c) row[static_cast<std::size_t>(c)] = cache.node_logits(i, c);
        softmax_inplace(row);
        out.e(i, i, 0) = 1.0;
        for (int j = i + 1; j < n; ++j) {
            auto er = out.edge_row(i, j);
            for (int c = 0; c < space.d_e; ++c) er[static_cast<std::size_t>(c)] = cache.pair_logits[static_cast<std::size_t>(c)](i, j);
            softmax_inplace(er);
            for (int c = 0; c < space.d_e; ++c) out.e(j, i, c) = er[static_cast<std::size_t>(c)];
        }
    }
    return out;
}

}  // namespace detail

/// Predicted clean-graph distribution for a noisy graph at step t.
inline SoftGraph predict(const DenoiserParams& params, const Graph& g_t, int t, const NoiseSchedule& schedule,
                         std::span<const double> text_embed = {}) {
    if (!(g_t.space() == params.space)) throw ShapeError("predict: graph category space does not match the model");
    const ParamLayout lay = params.layout();
    if (params.weights.size() != lay.total()) throw ShapeError("predict: weight vector does not match the config");
    const Features f = extract_features(g_t, t, schedule, params.config, text_embed);
    detail::ForwardCache cache;
    detail::forward(params, lay, f, cache);
    return detail::to_soft(cache, params.space, g_t.n());
}

/// Weighted cross-entropy of a predicted distribution against the one-hot
/// clean graph: (w_x * node mean + w_e * unordered-edge mean) / (w_x + w_e).
inline double cross_entropy(const SoftGraph& pred, const Graph& g0, const DenoiserConfig& cfg) {
    const int n = g0.n();
    if (pred.n() != n) throw ShapeError("loss: prediction and target have different node counts");
    double node_ce = 0.0, edge_ce = 0.0;
    for (int i = 0; i < n; ++i) node_ce -= std::log(std::max(pred.x(i, g0.node_category(i)), 1e-300));
    const double pairs = 0.5 * n * (n - 1.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) edge_ce -= std::log(std::max(pred.e(i, j, g0.edge_category(i, j)), 1e-300));
    double num = 0.0, den = 0.0;
    if (n > 0) {
        num += cfg.node_weight * node_ce / n;
        den += cfg.node_weight;
    }
    if (pairs > 0) {
        num += cfg.edge_weight * edge_ce / pairs;
        den += cfg.edge_weight;
    }
    return den > 0.0 ? num / den : 0.0;
}

inline double loss(const DenoiserParams& params, const Graph& g0, const Graph& g_t, int t, const NoiseSchedule& schedule,
                   std::span<const double> text_embed = {}) {
    if (g0.n() != g_t.n() || !(g0.space() == g_t.space())) throw ShapeError("loss: G and G^t have different shapes");
    return cross_entropy(predict(params, g_t, t, schedule, text_embed), g0, params.config);
}

/// One training example: clean graph, its noisy version, the step and an optional text embedding.
struct TrainingExample {
    const Graph* clean = nullptr;
    Graph noisy;
    int t = 0;
    std::vector<double> text;
};

/// Loss of one example; adds scale * d(loss)/d(weights) into `grad`.
inline double loss_and_grad(const DenoiserParams& params, const ParamLayout& lay, const Graph& g0, const Graph& g_t, int t,
                            const NoiseSchedule& schedule, std::span<const double> text_embed, double scale,
                            std::span<double> grad) {
    const auto& cfg = params.config;
    const int n = g0.n(), H = cfg.hidden_dim, de = params.space.d_e, dx = params.space.d_x;
    if (g_t.n() != n) throw ShapeError("loss_and_grad: G and G^t have different node counts");
    const Features f = extract_features(g_t, t, schedule, cfg, text_embed);
    detail::ForwardCache cache;
    detail::forward(params, lay, f, cache);

    const double* w = params.weights.data();
    auto mat = [&](std::size_t off, int r, int c) { return ConstMatMap(w + off, r, c); };
    auto gmat = [&](std::size_t off, int r, int c) { return MatMap(grad.data() + off, r, c); };
    auto gvec = [&](std::size_t off, int r) { return VecMap(grad.data() + off, r); };

    const double pairs = 0.5 * n * (n - 1.0);
    const double den = (n > 0 ? cfg.node_weight : 0.0) + (pairs > 0 ? cfg.edge_weight : 0.0);
    if (den <= 0.0) return 0.0;
    const double node_coef = n > 0 ? cfg.node_weight / (n * den) : 0.0;
    const double edge_coef = pairs > 0 ? cfg.edge_weight / (pairs * den) : 0.0;

    double total = 0.0;
    // Node head: dZ = coef * (softmax - onehot).
    RowMatrix dzx(n, dx);
    for (int i = 0; i < n; ++i) {
        std::vector<double> p(cache.node_logits.row(i).data(), cache.node_logits.row(i).data() + dx);
        detail::softmax_inplace(p);
        const int y = g0.node_category(i);
        total += node_coef * -std::log(std::max(p[static_cast<std::size_t>(y)], 1e-300));
        for (int c = 0; c < dx; ++c) dzx(i, c) = node_coef * (p[static_cast<std::size_t>(c)] - (c == y ? 1.0 : 0.0));
    }
    // Pair head: symmetric dZ per category, zero diagonal.
    std::vector<RowMatrix> dz(static_cast<std::size_t>(de), RowMatrix::Zero(n, n));
    std::vector<double> p(static_cast<std::size_t>(de));
    RowMatrix dE = RowMatrix::Zero(de, de);
    RowMatrix dP = RowMatrix::Zero(de, kPairFeatureDim);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            for (int c = 0; c < de; ++c) p[static_cast<std::size_t>(c)] = cache.pair_logits[static_cast<std::size_t>(c)](i, j);
            detail::softmax_inplace(p);
            const int y = g0.edge_category(i, j);
            const int e_in = f.edge[static_cast<std::size_t>(i * n + j)];
            total += edge_coef * -std::log(std::max(p[static_cast<std::size_t>(y)], 1e-300));
            for (int c = 0; c < de; ++c) {
                const double v = edge_coef * (p[static_cast<std::size_t>(c)] - (c == y ? 1.0 : 0.0));
                dz[static_cast<std::size_t>(c)](i, j) = v;
                dz[static_cast<std::size_t>(c)](j, i) = v;
                dE(c, e_in) += v;
                for (int k = 0; k < kPairFeatureDim; ++k) dP(c, k) += v * f.pair[static_cast<std::size_t>(k)](i, j);
            }
        }

    if (scale == 0.0) return total;
    for (auto& m : dz) m *= scale;
    dzx *= scale;
    dE *= scale;
    dP *= scale;

    const RowMatrix& hL = cache.h.back();
    RowMatrix dh = dzx * mat(lay.node_W, dx, H);
    gmat(lay.node_W, dx, H) += dzx.transpose() * hL;
    gvec(lay.node_b, dx) += dzx.colwise().sum().transpose();

    Eigen::VectorXd dyh = Eigen::VectorXd::Zero(H);
    const auto M = mat(lay.pair_M, de, H);
    const RowMatrix SD = 0.5 * (mat(lay.pair_S, de, H) + mat(lay.pair_D, de, H));
    Eigen::VectorXd dybias(de);
    RowMatrix rowsums(n, de);
    for (int c = 0; c < de; ++c) {
        const RowMatrix& D = dz[static_cast<std::size_t>(c)];
        const RowMatrix DH = D * hL;  // n x H
        gmat(lay.pair_M, de, H).row(c) += 0.5 * (hL.array() * DH.array()).colwise().sum().matrix();
        dh += (DH.array().rowwise() * M.row(c).array()).matrix();
        rowsums.col(c) = D.rowwise().sum();
        dybias(c) = 0.5 * D.sum();
    }
    const RowMatrix dSD = rowsums.transpose() * hL;  // de x H, gradient wrt SD
    gmat(lay.pair_S, de, H) += 0.5 * dSD;
    gmat(lay.pair_D, de, H) += 0.5 * dSD;
    dh += rowsums * SD;
    gmat(lay.pair_E, de, de) += dE;
    gmat(lay.pair_P, de, kPairFeatureDim) += dP;
    {
        const ConstVecMap dEv(dE.data(), de * de), dPv(dP.data(), de * kPairFeatureDim);
        gmat(lay.pair_EY, de * de, H) += dEv * cache.yh.transpose();
        gmat(lay.pair_PY, de * kPairFeatureDim, H) += dPv * cache.yh.transpose();
        dyh += mat(lay.pair_EY, de * de, H).transpose() * dEv;
        dyh += mat(lay.pair_PY, de * kPairFeatureDim, H).transpose() * dPv;
    }
    gmat(lay.pair_Y, de, H) += dybias * cache.yh.transpose();
    gvec(lay.pair_b, de) += dybias;
    dyh += mat(lay.pair_Y, de, H).transpose() * dybias;

    const double inv_n = n > 0 ? 1.0 / n : 0.0;
    for (int l = static_cast<int>(lay.layers.size()) - 1; l >= 0; --l) {
        const auto& L = lay.layers[static_cast<std::size_t>(l)];
        const RowMatrix& h = cache.h[static_cast<std::size_t>(l)];
        const RowMatrix& a = cache.act[static_cast<std::size_t>(l)];
        const auto& agg = cache.agg[static_cast<std::size_t>(l)];
        const RowMatrix dpre = (dh.array() * (1.0 - a.array().square())).matrix();
        RowMatrix dh_prev = dh;  // residual path
        gmat(L.A, H, H) += dpre.transpose() * h;
        dh_prev += dpre * mat(L.A, H, H);
        const Eigen::VectorXd dsum = dpre.colwise().sum().transpose();
        gmat(L.C, H, H) += dsum * cache.yh.transpose();
        gvec(L.c, H) += dsum;
        dyh += mat(L.C, H, H).transpose() * dsum;

        const auto G = mat(L.G, H, de);
        std::vector<RowMatrix> dagg(static_cast<std::size_t>(de));
        for (int c = 0; c < de; ++c) {
            gmat(L.G, H, de).col(c) += inv_n * (dpre.array() * agg[static_cast<std::size_t>(c)].array()).colwise().sum().matrix().transpose();
            dagg[static_cast<std::size_t>(c)] = inv_n * (dpre.array().rowwise() * G.col(c).transpose().array()).matrix();
        }
        // dU[j] = sum_{i != j} dagg[c_ij][i]
        RowMatrix dU(n, H);
        const Eigen::RowVectorXd total0 = dagg[0].colwise().sum();
        for (int j = 0; j < n; ++j) {
            Eigen::RowVectorXd r = total0 - dagg[0].row(j);
            for (int c = 1; c < de; ++c)
                for (int i : cache.nbr[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)])
                    r += dagg[static_cast<std::size_t>(c)].row(i) - dagg[0].row(i);
            dU.row(j) = r;
        }
        gmat(L.B, H, H) += dU.transpose() * h;
        dh_prev += dU * mat(L.B, H, H);
        dh = std::move(dh_prev);
    }

    // Input layer.
    const RowMatrix& h0 = cache.h[0];
    const RowMatrix dpre0 = (dh.array() * (1.0 - h0.array().square())).matrix();
    const int fn = cfg.node_feature_dim(params.space);
    gmat(lay.in_W, H, fn) += dpre0.transpose() * f.node;
    const Eigen::VectorXd dsum0 = dpre0.colwise().sum().transpose();
    gvec(lay.in_b, H) += dsum0;
    dyh += dsum0;

    const Eigen::VectorXd dyp = (dyh.array() * (1.0 - cache.yh.array().square())).matrix();
    const int fg = cfg.graph_feature_dim();
    gmat(lay.graph_W, H, fg) += dyp * f.graph.transpose();
    gvec(lay.graph_b, H) += dyp;
    return total;
}

/// Mean loss over a batch and its exact gradient (same layout as the weights).
inline double batch_loss_and_grad(const DenoiserParams& params, std::span<const TrainingExample> batch,
                                  const NoiseSchedule& schedule, std::vector<double>& grad) {
    if (batch.empty()) throw Error("gradient of an empty batch");
    const ParamLayout lay = params.layout();
    grad.assign(lay.total(), 0.0);
    const double scale = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (const auto& ex : batch)
        total += loss_and_grad(params, lay, *ex.clean, ex.noisy, ex.t, schedule, ex.text, scale, grad);
    for (double g : grad)
        if (!std::isfinite(g)) throw NumericError("non-finite gradient");
    return total * scale;
}

}  // namespace gdiff
