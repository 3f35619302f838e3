#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "reat/trainer.hpp"
#include "test_support.hpp"

namespace reat {
namespace {

std::vector<Example> tiny_dataset() {
    // class = whether token 2 appears
    return {{{2, 3}, 1}, {{3, 4}, 0}, {{4, 2, 4}, 1}, {{3}, 0}, {{5, 3, 2}, 1}, {{5, 4}, 0}};
}

RnnModel tiny_model(Architecture arch) { return init_model(arch, {6, 4, 5, 2}, 11); }

TEST(Train, ZeroEpochsReturnsInit) {
    for (Architecture arch : testing::kArchitectures) {
        const RnnModel init = tiny_model(arch);
        TrainConfig cfg;
        cfg.epochs = 0;
        const TrainResult r = train(init, tiny_dataset(), {}, cfg);
        EXPECT_EQ(r.model, init);
        EXPECT_TRUE(r.history.empty());
        EXPECT_EQ(r.best_epoch, 0);
    }
}

TEST(Train, RejectsBadInput) {
    const RnnModel init = tiny_model(Architecture::gru);
    EXPECT_THROW(train(init, {}, {}, {}), std::invalid_argument);
    EXPECT_THROW(train(init, {{{1}, 2}}, {}, {}), std::invalid_argument);
    EXPECT_THROW(train(init, tiny_dataset(), {{{1}, 7}}, {}), std::invalid_argument);
}

TEST(Train, NonFiniteLossAborts) {
    RnnModel init = tiny_model(Architecture::gru);
    init.output(0, 0) = std::numeric_limits<double>::quiet_NaN();
    TrainConfig cfg;
    cfg.epochs = 1;
    EXPECT_THROW(train(init, tiny_dataset(), {}, cfg), TrainingError);
}

TEST(Train, FitsTinyDatasetDeterministically) {
    for (Architecture arch : testing::kArchitectures) {
        TrainConfig cfg;
        cfg.epochs = 40;
        cfg.learning_rate = 1e-2;
        cfg.seed = 5;
        const TrainResult a = train(tiny_model(arch), tiny_dataset(), {}, cfg);
        const TrainResult b = train(tiny_model(arch), tiny_dataset(), {}, cfg);
        EXPECT_EQ(a.model, b.model);
        ASSERT_EQ(a.history.size(), 40u);
        EXPECT_LT(a.history.back().train_loss, a.history.front().train_loss);
        EXPECT_EQ(evaluate(a.model, tiny_dataset()).accuracy, 1.0) << to_string(arch);
        // no dev set: dev metrics mirror the training metrics
        EXPECT_EQ(a.history.back().dev_accuracy, a.history.back().train_accuracy);
        EXPECT_EQ(a.history.back().dev_loss, a.history.back().train_loss);
    }
}

TEST(Train, BestSnapshotPrefersAccuracyThenLoss) {
    TrainConfig cfg;
    cfg.epochs = 25;
    cfg.learning_rate = 1e-2;
    const TrainResult r = train(tiny_model(Architecture::gru), tiny_dataset(), tiny_dataset(), cfg);
    ASSERT_GE(r.best_epoch, 1);
    const EpochMetrics& best = r.history[static_cast<std::size_t>(r.best_epoch - 1)];
    for (const EpochMetrics& m : r.history) {
        EXPECT_LE(m.dev_accuracy, best.dev_accuracy);
        if (m.dev_accuracy == best.dev_accuracy) {
            EXPECT_GE(m.dev_loss, best.dev_loss);
        }
    }
    const DatasetScore s = evaluate(r.model, tiny_dataset());
    EXPECT_EQ(s.accuracy, best.dev_accuracy);
    EXPECT_EQ(s.mean_loss, best.dev_loss);
}

TEST(Train, FrozenEmbeddingsStayPut) {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.freeze_embeddings = true;
    const RnnModel init = tiny_model(Architecture::lstm);
    const TrainResult r = train(init, tiny_dataset(), {}, cfg);
    EXPECT_EQ(r.model.embedding, init.embedding);
    EXPECT_NE(r.model.output, init.output);
    cfg.freeze_embeddings = false;
    EXPECT_NE(train(init, tiny_dataset(), {}, cfg).model.embedding, init.embedding);
}

TEST(Evaluate, MatchesManualCrossEntropy) {
    const RnnModel model = tiny_model(Architecture::bigru);
    const auto data = tiny_dataset();
    double loss = 0;
    std::size_t correct = 0;
    for (const Example& e : data) {
        const ForwardTrace t = forward(model, e.tokens);
        loss -= std::log(t.probabilities[e.label]);
        correct += t.predicted() == e.label;
    }
    const DatasetScore s = evaluate(model, data);
    EXPECT_NEAR(s.mean_loss, loss / static_cast<double>(data.size()), 1e-12);
    EXPECT_EQ(s.accuracy, static_cast<double>(correct) / static_cast<double>(data.size()));
}

TEST(ExampleGradientTest, MatchesFiniteDifferencesOfLoss) {
    for (Architecture arch : testing::kArchitectures) {
        const RnnModel model = testing::random_model(arch, 21, {6, 3, 4, 2});
        const Example ex{{2, 4, 1}, 1};
        const ExampleGradient g = example_gradient(model, ex);
        auto loss_at = [&](const RnnModel& m) { return -std::log(forward(m, ex.tokens).probabilities[ex.label]); };
        EXPECT_NEAR(g.loss, loss_at(model), 1e-12);
        RnnModel probe = model;
        auto blocks = probe.parameter_blocks();
        const auto grads = g.grads.parameter_blocks();
        Rng rng(1);
        for (int trial = 0; trial < 30; ++trial) {
            const std::size_t b = rng.below(blocks.size());
            if (blocks[b].empty()) continue;
            const std::size_t i = rng.below(blocks[b].size());
            const double saved = blocks[b][i];
            const double h = 1e-5;
            blocks[b][i] = saved + h;
            const double up = loss_at(probe);
            blocks[b][i] = saved - h;
            const double down = loss_at(probe);
            blocks[b][i] = saved;
            EXPECT_TRUE(testing::close_rel(grads[b][i], (up - down) / (2 * h), 1e-4, 1e-6))
                << to_string(arch) << " block " << b << " entry " << i;
        }
    }
}

}  // namespace
}  // namespace reat
