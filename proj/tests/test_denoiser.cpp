#include <gtest/gtest.h>

#include "gdiff/denoiser.hpp"
#include "oracles/finite_difference.hpp"

using namespace gdiff;

TEST(Denoiser, GradientMatchesFiniteDifferences) {
    for (std::uint64_t seed : {1u, 2u}) {
        const auto problem = oracle::gradient_problem(4, 8, seed);
        for (const auto& b : oracle::check_gradient(problem)) EXPECT_LE(b.max_rel_error, 1e-4) << b.name;
    }
}

TEST(Denoiser, GradientOnLargerGraph) {
    const auto problem = oracle::gradient_problem(7, 6, 9);
    for (const auto& b : oracle::check_gradient(problem)) EXPECT_LE(b.max_rel_error, 1e-4) << b.name;
}

TEST(Denoiser, ZeroWeightsPredictUniform) {
    DenoiserConfig cfg;
    cfg.hidden_dim = 8;
    cfg.text_embed_dim = 0;
    const CategorySpace space{3, 4};
    const auto params = DenoiserParams::zeros(cfg, space);
    const Graph g = new_graph(5, {{0, 1, 1}, {1, 2, 3}}, space);
    const SoftGraph p = predict(params, g, 3, cosine_schedule(10));
    EXPECT_LE(p.max_invariant_violation(), 1e-12);
    for (int i = 0; i < 5; ++i) {
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(p.x(i, c), 1.0 / 3.0, 1e-15);
        for (int j = 0; j < 5; ++j)
            if (i != j)
                for (int c = 0; c < 4; ++c) EXPECT_NEAR(p.e(i, j, c), 0.25, 1e-15);
    }
}

TEST(Denoiser, PermutationEquivariant) {
    auto problem = oracle::gradient_problem(6, 8, 4);
    const std::vector<int> perm{2, 5, 0, 4, 1, 3};
    const Graph pg = problem.noisy.permuted(perm);
    const SoftGraph a = predict(problem.params, problem.noisy, 5, problem.schedule, problem.text);
    const SoftGraph b = predict(problem.params, pg, 5, problem.schedule, problem.text);
    for (int i = 0; i < 6; ++i) {
        for (int c = 0; c < 2; ++c) EXPECT_NEAR(a.x(i, c), b.x(perm[i], c), 1e-9);
        for (int j = 0; j < 6; ++j)
            for (int c = 0; c < 3; ++c) EXPECT_NEAR(a.e(i, j, c), b.e(perm[i], perm[j], c), 1e-9);
    }
}

TEST(Denoiser, TextChangesPrediction) {
    auto problem = oracle::gradient_problem(5, 8, 6);
    const SoftGraph a = predict(problem.params, problem.noisy, 5, problem.schedule, problem.text);
    std::vector<double> other(problem.text.size(), 0.0);
    const SoftGraph b = predict(problem.params, problem.noisy, 5, problem.schedule, other);
    double diff = 0.0;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) diff += std::abs(a.e(i, j, 1) - b.e(i, j, 1));
    EXPECT_GT(diff, 1e-6);
    std::vector<double> wrong(3, 0.0);
    EXPECT_THROW(predict(problem.params, problem.noisy, 5, problem.schedule, wrong), ShapeError);
}

TEST(Denoiser, DuplicatedBatchHasSameGradient) {
    auto problem = oracle::gradient_problem(5, 8, 8);
    const ParamLayout lay = problem.params.layout();
    std::vector<double> single(lay.total(), 0.0), dup;
    const double l1 = loss_and_grad(problem.params, lay, problem.clean, problem.noisy, problem.t, problem.schedule,
                                    problem.text, 1.0, single);
    TrainingExample ex{&problem.clean, problem.noisy, problem.t, problem.text};
    const std::vector<TrainingExample> batch{ex, ex};
    const double l2 = batch_loss_and_grad(problem.params, batch, problem.schedule, dup);
    EXPECT_NEAR(l1, l2, 1e-14);
    for (std::size_t k = 0; k < single.size(); ++k) EXPECT_NEAR(single[k], dup[k], 1e-13);
}

TEST(Denoiser, LossMatchesCrossEntropyOfPrediction) {
    auto problem = oracle::gradient_problem(5, 8, 10);
    const SoftGraph p = predict(problem.params, problem.noisy, problem.t, problem.schedule, problem.text);
    double node = 0.0, edge = 0.0;
    for (int i = 0; i < 5; ++i) {
        node -= std::log(p.x(i, problem.clean.node_category(i)));
        for (int j = i + 1; j < 5; ++j) edge -= std::log(p.e(i, j, problem.clean.edge_category(i, j)));
    }
    const auto& cfg = problem.params.config;
    const double want = (cfg.node_weight * node / 5 + cfg.edge_weight * edge / 10) / (cfg.node_weight + cfg.edge_weight);
    EXPECT_NEAR(loss(problem.params, problem.clean, problem.noisy, problem.t, problem.schedule, problem.text), want, 1e-12);
}

TEST(Denoiser, ConfigAndShapeValidation) {
    DenoiserConfig bad;
    bad.hidden_dim = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
    auto problem = oracle::gradient_problem(4, 8, 1);
    const Graph other(4, CategorySpace{1, 2});
    EXPECT_THROW(predict(problem.params, other, 1, problem.schedule), ShapeError);
}
