#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gdiff/corpus_types.hpp"
#include "gdiff/denoiser.hpp"
#include "gdiff/diffusion.hpp"
#include "gdiff/error.hpp"
#include "gdiff/rng.hpp"

namespace gdiff {

struct OptimConfig {
    double lr = 3e-3;
    int epochs = 300;
    int batch = 12;
    int grad_accum = 4;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-12;

    void validate() const {
        if (lr < 0.0 || epochs < 0 || batch < 1 || grad_accum < 1)
            throw ConfigError("optimizer: lr >= 0, epochs >= 0, batch >= 1 and grad_accum >= 1 required");
    }
};

/// Decoupled-weight-decay Adam.
class AdamW {
public:
    AdamW(std::size_t size, const OptimConfig& cfg) : cfg_(cfg), m_(size, 0.0), v_(size, 0.0) {}

    void step(std::vector<double>& w, std::span<const double> g) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
        const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
        for (std::size_t k = 0; k < w.size(); ++k) {
            m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * g[k];
            v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
            const double mhat = m_[k] / bc1, vhat = v_[k] / bc2;
            w[k] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w[k]);
        }
    }

    long long steps() const { return t_; }

private:
    OptimConfig cfg_;
    std::vector<double> m_, v_;
    long long t_ = 0;
};

struct TrainReport {
    std::vector<double> epoch_loss;
    double final_loss = 0.0;
    int epochs = 0;
    double wall_seconds = 0.0;
};

/// A clean training graph with the domain used for noising and its conditioning vector.
struct TrainItem {
    const Graph* graph = nullptr;
    std::optional<std::string> domain;
    std::vector<double> text;
};

using TextProvider = std::function<std::vector<double>(const CorpusEntry&)>;

inline std::vector<TrainItem> training_items(const Corpus& corpus, Split split, const TextProvider& text = {},
                                             const std::vector<std::string>& exclude_domains = {}) {
    std::vector<TrainItem> items;
    for (const auto* e : corpus.select(split)) {
        bool skip = false;
        for (const auto& d : exclude_domains) skip = skip || d == e->domain;
        if (skip) continue;
        items.push_back({&e->graph, e->domain, text ? text(*e) : std::vector<double>{}});
    }
    return items;
}

/// Optimizes `params` in place on `items`. Each graph in each epoch gets a
/// fresh t ~ U{1..T} and G^t ~ q(G^t | G); the optimizer steps once per
/// `grad_accum` micro-batches of `batch` graphs (and at the end of an epoch).
inline TrainReport train_in_place(DenoiserParams& params, std::span<const TrainItem> items, const TransitionModel& tm,
                                  const OptimConfig& opt) {
    opt.validate();
    if (items.empty()) throw Error("training set is empty");
    if (!(params.space == tm.space)) throw ShapeError("denoiser and transition model use different category spaces");
    const auto start = std::chrono::steady_clock::now();
    const ParamLayout lay = params.layout();
    if (params.weights.size() != lay.total()) throw ShapeError("checkpoint weights do not match the denoiser config");

    TrainReport report;
    AdamW adam(lay.total(), opt);
    Rng rng(derive_seed(opt.seed, "train"));
    std::vector<std::size_t> order(items.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::vector<double> grad, acc(lay.total(), 0.0);

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_sum = 0.0;
        int pending = 0;
        for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(opt.batch)) {
            const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(opt.batch));
            std::vector<TrainingExample> batch;
            for (std::size_t k = b; k < e; ++k) {
                const auto& item = items[order[k]];
                TrainingExample ex;
                ex.clean = item.graph;
                ex.t = static_cast<int>(rng.integer(1, tm.schedule.T));
                ex.noisy = forward_sample(*item.graph, tm, ex.t, rng, item.domain);
                ex.text = item.text;
                batch.push_back(std::move(ex));
            }
            double l = 0.0;
            try {
                l = batch_loss_and_grad(params, batch, tm.schedule, grad);
            } catch (const NumericError& err) {
                throw NumericError("training diverged in epoch " + std::to_string(epoch + 1) + ": " + err.what());
            }
            if (!std::isfinite(l)) throw NumericError("training diverged: non-finite loss in epoch " + std::to_string(epoch + 1));
            epoch_sum += l * static_cast<double>(batch.size());
            for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += grad[k];
            ++pending;
            const bool last = e == order.size();
            if (pending == opt.grad_accum || last) {
                for (auto& v : acc) v /= pending;
                adam.step(params.weights, acc);
                std::fill(acc.begin(), acc.end(), 0.0);
                pending = 0;
            }
        }
        report.epoch_loss.push_back(epoch_sum / static_cast<double>(items.size()));
    }
    report.epochs = opt.epochs;
    report.final_loss = report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back();
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

struct TrainResult {
    DenoiserParams params;
    TrainReport report;
};

/// Trains a freshly initialized denoiser on the corpus Train split.
inline TrainResult train(const Corpus& corpus, const TransitionModel& tm, const DenoiserConfig& config,
                         const OptimConfig& opt, const TextProvider& text = {}) {
    TrainResult r{DenoiserParams::initialize(config, corpus.space, derive_seed(opt.seed, "init")), {}};
    const auto items = training_items(corpus, Split::Train, text);
    r.report = train_in_place(r.params, items, tm, opt);
    return r;
}

/// Continues optimisation from pre-trained weights on a new corpus.
inline TrainResult fine_tune(const DenoiserParams& pretrained, const Corpus& corpus, const TransitionModel& tm,
                             const OptimConfig& opt, const TextProvider& text = {}) {
    if (!(pretrained.space == corpus.space))
        throw ShapeError("fine-tune: corpus category space differs from the pre-trained model's");
    TrainResult r{pretrained, {}};
    const auto items = training_items(corpus, Split::Train, text);
    r.report = train_in_place(r.params, items, tm, opt);
    return r;
}

/// Empirical node-count distribution used to pick n at generation time.
class NodeCountHistogram {
public:
    NodeCountHistogram() = default;
    explicit NodeCountHistogram(const std::vector<int>& counts) {
        for (int n : counts) ++hist_[n];
    }

    bool empty() const { return hist_.empty(); }
    const std::map<int, long long>& counts() const { return hist_; }
    void add(int n, long long c = 1) { hist_[n] += c; }

    int draw(Rng& rng) const {
        if (hist_.empty()) throw Error("node-count histogram is empty");
        std::vector<double> w;
        std::vector<int> keys;
        for (auto [n, c] : hist_) {
            keys.push_back(n);
            w.push_back(static_cast<double>(c));
        }
        return keys[rng.categorical(w)];
    }

private:
    std::map<int, long long> hist_;
};

/// Reverse-chain generation: G^T drawn from the stationary distribution, then
/// for t = T..1 the denoiser's clean-graph estimate is combined with the
/// closed-form posterior and G^{t-1} is drawn slot-wise.
inline Graph sample(const DenoiserParams& params, const TransitionModel& tm, int n_nodes, Rng& rng,
                    const std::optional<std::string>& domain = {}, std::span<const double> text_embed = {}) {
    if (n_nodes < 1) throw Error("sample: n_nodes must be >= 1");
    if (!(params.space == tm.space)) throw ShapeError("sample: denoiser and transition model category spaces differ");
    const auto& m = tm.stationary(domain);
    Graph g(n_nodes, tm.space);
    for (int i = 0; i < n_nodes; ++i) {
        g.set_node_category(i, static_cast<int>(rng.categorical(m.m_x)));
        for (int j = 0; j < i; ++j)
            if (int c = static_cast<int>(rng.categorical(m.m_e)); c != 0) g.set_edge(i, j, c);
    }
    for (int t = tm.schedule.T; t >= 1; --t) {
        const SoftGraph g0 = predict(params, g, t, tm.schedule, text_embed);
        const SoftGraph post = posterior_step(g, g0, tm, t, domain);
        g = sample_graph(post, rng);
    }
    return g;
}

inline Graph sample(const DenoiserParams& params, const TransitionModel& tm, int n_nodes, std::uint64_t seed,
                    const std::optional<std::string>& domain = {}, std::span<const double> text_embed = {}) {
    Rng rng(seed);
    return sample(params, tm, n_nodes, rng, domain, text_embed);
}

}  // namespace gdiff
