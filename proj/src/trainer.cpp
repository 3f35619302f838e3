#include "reat/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace reat {

namespace {

void check_labels(const RnnModel& model, const std::vector<Example>& data) {
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].label >= model.output.rows())
            throw std::invalid_argument("example " + std::to_string(i) + ": label out of range");
        if (data[i].tokens.empty())
            throw std::invalid_argument("example " + std::to_string(i) + ": empty token sequence");
    }
}

double cross_entropy(const ForwardTrace& trace, ClassIndex label) {
    // log-softmax from logits avoids log(0) for confident predictions
    const double top = trace.logits[argmax(trace.logits)];
    double total = 0.0;
    for (double z : trace.logits) total += std::exp(z - top);
    return -(trace.logits[label] - top - std::log(total));
}

class Adam {
public:
    Adam(const RnnModel& shape, const TrainConfig& config)
        : config_(config), first_(RnnModel::zeros(shape.arch, shape.dims())), second_(first_) {}

    void step(RnnModel& model, RnnModel& grads) {
        ++t_;
        const double c1 = 1.0 - std::pow(config_.beta1, t_);
        const double c2 = 1.0 - std::pow(config_.beta2, t_);
        auto params = model.parameter_blocks();
        auto g = grads.parameter_blocks();
        auto m = first_.parameter_blocks();
        auto v = second_.parameter_blocks();
        const std::size_t first_block = config_.freeze_embeddings ? 1 : 0;
        for (std::size_t b = first_block; b < params.size(); ++b) {
            for (std::size_t i = 0; i < params[b].size(); ++i) {
                const double gi = g[b][i];
                m[b][i] = config_.beta1 * m[b][i] + (1.0 - config_.beta1) * gi;
                v[b][i] = config_.beta2 * v[b][i] + (1.0 - config_.beta2) * gi * gi;
                const double mhat = m[b][i] / c1;
                const double vhat = v[b][i] / c2;
                params[b][i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.adam_epsilon);
            }
        }
    }

private:
    TrainConfig config_;
    RnnModel first_;
    RnnModel second_;
    int t_ = 0;
};

void clip_global_norm(RnnModel& grads, double max_norm, bool skip_embedding) {
    if (max_norm <= 0.0) return;
    auto blocks = grads.parameter_blocks();
    double sq = 0.0;
    for (std::size_t b = skip_embedding ? 1 : 0; b < blocks.size(); ++b)
        for (double x : blocks[b]) sq += x * x;
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const double scale = max_norm / norm;
    for (auto block : blocks)
        for (double& x : block) x *= scale;
}

}  // namespace

DatasetScore evaluate(const RnnModel& model, const std::vector<Example>& data) {
    DatasetScore score;
    if (data.empty()) return score;
    std::size_t correct = 0;
    double loss = 0.0;
    for (const Example& ex : data) {
        const ForwardTrace trace = forward(model, ex.tokens);
        loss += cross_entropy(trace, ex.label);
        if (trace.predicted() == ex.label) ++correct;
    }
    score.mean_loss = loss / static_cast<double>(data.size());
    score.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return score;
}

ExampleGradient example_gradient(const RnnModel& model, const Example& example) {
    const std::vector<Vector> inputs = embed(model, example.tokens);
    const ForwardTrace trace = forward_inputs(model, inputs);
    Vector dlogits = trace.probabilities;
    dlogits[example.label] -= 1.0;
    BackwardResult back = backward(model, trace, inputs, dlogits, true);

    ExampleGradient out;
    out.loss = cross_entropy(trace, example.label);
    out.grads = std::move(*back.param_grads);
    out.grads.embedding = Matrix(model.embedding.rows(), model.embedding.cols());
    for (std::size_t t = 0; t < example.tokens.size(); ++t) {
        auto row = out.grads.embedding.row(example.tokens[t]);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += back.input_grads[t][j];
    }
    return out;
}

TrainResult train(const RnnModel& init, const std::vector<Example>& train_set, const std::vector<Example>& dev_set,
                  const TrainConfig& config) {
    if (train_set.empty()) throw std::invalid_argument("train: empty dataset");
    validate(init);
    check_labels(init, train_set);
    check_labels(init, dev_set);

    TrainResult result;
    result.model = init;
    if (config.epochs <= 0) return result;

    RnnModel model = init;
    Adam adam(model, config);
    Rng rng(config.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    double best_accuracy = -1.0;
    double best_loss = 0.0;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        for (std::size_t k = 0; k < order.size(); ++k) {
            ExampleGradient eg = example_gradient(model, train_set[order[k]]);
            if (!std::isfinite(eg.loss)) {
                std::ostringstream msg;
                msg << "non-finite loss at epoch " << epoch << ", step " << k << " (example " << order[k]
                    << ", length " << train_set[order[k]].tokens.size() << ")";
                throw TrainingError(msg.str());
            }
            clip_global_norm(eg.grads, config.clip, config.freeze_embeddings);
            adam.step(model, eg.grads);
        }

        EpochMetrics metrics;
        metrics.epoch = epoch;
        const DatasetScore train_score = evaluate(model, train_set);
        metrics.train_loss = train_score.mean_loss;
        metrics.train_accuracy = train_score.accuracy;
        if (dev_set.empty()) {
            metrics.dev_accuracy = train_score.accuracy;
            metrics.dev_loss = train_score.mean_loss;
        } else {
            const DatasetScore dev_score = evaluate(model, dev_set);
            metrics.dev_accuracy = dev_score.accuracy;
            metrics.dev_loss = dev_score.mean_loss;
        }
        if (!std::isfinite(metrics.train_loss))
            throw TrainingError("non-finite training loss after epoch " + std::to_string(epoch));
        result.history.push_back(metrics);

        // accuracy saturates on easy data; dev loss breaks ties
        if (metrics.dev_accuracy > best_accuracy ||
            (metrics.dev_accuracy == best_accuracy && metrics.dev_loss < best_loss)) {
            best_accuracy = metrics.dev_accuracy;
            best_loss = metrics.dev_loss;
            result.best_epoch = epoch;
            result.model = model;
        }
    }
    return result;
}

}  // namespace reat
