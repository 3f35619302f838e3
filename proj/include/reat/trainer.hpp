#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "reat/rnn.hpp"

namespace reat {

struct Example {
    std::vector<TokenId> tokens;
    ClassIndex label = 0;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 20;
    std::uint64_t seed = 0;
    double clip = 5.0;  // global L2 gradient norm; <= 0 disables clipping
    bool freeze_embeddings = false;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;  // mean cross-entropy after the epoch's updates
    double train_accuracy = 0.0;
    double dev_accuracy = 0.0;  // equals train_accuracy when no dev set is given
    double dev_loss = 0.0;      // equals train_loss when no dev set is given
};

struct TrainResult {
    RnnModel model;  // snapshot with the best development accuracy
    std::vector<EpochMetrics> history;
    int best_epoch = 0;  // 0 means the initial model was kept
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetScore {
    double mean_loss = 0.0;
    double accuracy = 0.0;
};

/// Mean cross-entropy and accuracy over `data`.
DatasetScore evaluate(const RnnModel& model, const std::vector<Example>& data);

/// Cross-entropy loss and full parameter gradient for one example. The
/// embedding gradient is dense (only rows of the example's tokens are
/// nonzero).
struct ExampleGradient {
    double loss = 0.0;
    RnnModel grads;
};
ExampleGradient example_gradient(const RnnModel& model, const Example& example);

/// Sequence-at-a-time BPTT with Adam and global-norm clipping. Returns the
/// epoch snapshot with the best dev accuracy; ties go to the lower dev loss,
/// then to the earlier epoch.
TrainResult train(const RnnModel& init, const std::vector<Example>& train_set, const std::vector<Example>& dev_set,
                  const TrainConfig& config);

}  // namespace reat
