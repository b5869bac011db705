#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gdiff/denoiser.hpp"
#include "gdiff/rng.hpp"

namespace oracle {

struct BlockCheck {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t size = 0;
};

struct GradientProblem {
    gdiff::DenoiserParams params;
    gdiff::Graph clean, noisy;
    int t = 1;
    gdiff::NoiseSchedule schedule;
    std::vector<double> text;
};

/// Random instance with perturbed weights so no block sits at its init value.
inline GradientProblem gradient_problem(int n, int hidden, std::uint64_t seed) {
    using namespace gdiff;
    const CategorySpace space{2, 3};
    DenoiserConfig cfg;
    cfg.hidden_dim = hidden;
    cfg.layers = 2;
    cfg.n_spectral = 3;
    cfg.time_embed_dim = 4;
    cfg.text_embed_dim = 8;
    GradientProblem p{DenoiserParams::initialize(cfg, space, seed), Graph(n, space), Graph(n, space), 4,
                      cosine_schedule(10), std::vector<double>(8)};
    Rng rng(seed + 1);
    for (auto& w : p.params.weights) w += rng.uniform(-0.5, 0.5);
    for (int i = 0; i < n; ++i) {
        p.clean.set_node_category(i, static_cast<int>(rng.index(2)));
        p.noisy.set_node_category(i, static_cast<int>(rng.index(2)));
        for (int j = 0; j < i; ++j) {
            p.clean.set_edge(i, j, static_cast<int>(rng.index(3)));
            p.noisy.set_edge(i, j, static_cast<int>(rng.index(3)));
        }
    }
    for (auto& x : p.text) x = rng.uniform(-1.0, 1.0);
    return p;
}

/// Central differences against the analytic gradient, per parameter block.
/// Relative error |fd - g| / max(|fd|, |g|, floor).
inline std::vector<BlockCheck> check_gradient(const GradientProblem& p, double h = 1e-5, double floor = 1e-6) {
    using namespace gdiff;
    const ParamLayout lay = p.params.layout();
    std::vector<double> grad(lay.total(), 0.0);
    loss_and_grad(p.params, lay, p.clean, p.noisy, p.t, p.schedule, p.text, 1.0, grad);
    std::vector<BlockCheck> out;
    DenoiserParams q = p.params;
    for (const auto& b : lay.blocks()) {
        BlockCheck bc{b.name, 0.0, b.size()};
        for (std::size_t k = 0; k < b.size(); ++k) {
            const std::size_t idx = b.offset + k;
            const double w = q.weights[idx];
            q.weights[idx] = w + h;
            const double lp = loss(q, p.clean, p.noisy, p.t, p.schedule, p.text);
            q.weights[idx] = w - h;
            const double lm = loss(q, p.clean, p.noisy, p.t, p.schedule, p.text);
            q.weights[idx] = w;
            const double fd = (lp - lm) / (2.0 * h), an = grad[idx];
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), floor});
            bc.max_rel_error = std::max(bc.max_rel_error, rel);
        }
        out.push_back(bc);
    }
    return out;
}

}  // namespace oracle
