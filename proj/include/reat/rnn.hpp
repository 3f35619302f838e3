#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "reat/numerics.hpp"

namespace reat {

using TokenId = std::uint32_t;
using ClassIndex = std::size_t;

enum class Architecture : std::uint8_t { gru = 0, lstm = 1, bigru = 2 };

std::string_view to_string(Architecture arch) noexcept;
/// Accepts "gru", "lstm", "bigru" (case-insensitive).
Architecture parse_architecture(std::string_view name);

struct GruParams {
    Matrix wrx, wrh;
    Vector br;
    Matrix wux, wuh;
    Vector bu;
    Matrix wgx, wgh;
    Vector bg;

    static GruParams zeros(std::size_t input_dim, std::size_t hidden_dim);
    std::size_t hidden_dim() const noexcept { return bu.size(); }

    friend bool operator==(const GruParams&, const GruParams&) = default;
};

struct LstmParams {
    Matrix wix, wih;
    Vector bi;
    Matrix wfx, wfh;
    Vector bf;
    Matrix wox, woh;
    Vector bo;
    Matrix wgx, wgh;
    Vector bg;

    static LstmParams zeros(std::size_t input_dim, std::size_t hidden_dim);
    std::size_t hidden_dim() const noexcept { return bf.size(); }

    friend bool operator==(const LstmParams&, const LstmParams&) = default;
};

struct ModelDims {
    std::size_t vocab_size = 0;
    std::size_t embed_dim = 0;
    std::size_t hidden_dim = 0;
    std::size_t num_classes = 0;

    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Embedding -> recurrent cell(s) -> linear output layer (no bias, so the
/// logit is exactly W_c applied to the final hidden feature vector).
///
/// Only the parameter sets used by `arch` are populated; the others stay
/// empty. BiGRU holds two independent GRUs: `gru` runs in normal order and
/// `gru_reverse` over the reversed token sequence.
struct RnnModel {
    Architecture arch = Architecture::gru;
    Matrix embedding;  // vocab_size x embed_dim
    GruParams gru;
    GruParams gru_reverse;
    LstmParams lstm;
    Matrix output;  // num_classes x feature_dim

    static RnnModel zeros(Architecture arch, const ModelDims& dims);

    ModelDims dims() const noexcept;
    std::size_t feature_dim() const noexcept;

    /// Every parameter array in the canonical order: embedding, cell
    /// parameters (GRU: wrx wrh br wux wuh bu wgx wgh bg, BiGRU: normal set
    /// then reverse set, LSTM: wix wih bi wfx wfh bf wox woh bo wgx wgh bg),
    /// output. The model file stores weights in this order.
    std::vector<std::span<double>> parameter_blocks();
    std::vector<std::span<const double>> parameter_blocks() const;
    std::size_t parameter_count() const;

    friend bool operator==(const RnnModel&, const RnnModel&) = default;
};

/// Throws DimensionError if any shape disagrees with dims()/arch.
void validate(const RnnModel& model);

/// Seeded uniform(-scale, scale) initialization of every parameter.
RnnModel init_model(Architecture arch, const ModelDims& dims, std::uint64_t seed, double scale = 0.08);

/// Gate activations recorded at one time step. GRU fills reset/update/
/// candidate; LSTM fills input/forget/output/candidate/cell.
struct StepGates {
    Vector reset, update, candidate;
    Vector input, forget, output, cell;
};

/// One recurrent pass in processing order: hidden[0] (and cell[0] for LSTM)
/// is the zero initial state, hidden[s] is the state after s inputs, and
/// gates[s-1] holds the activations of step s.
struct DirectionTrace {
    std::vector<Vector> hidden;
    std::vector<Vector> cell;
    std::vector<StepGates> gates;

    std::size_t steps() const noexcept { return gates.size(); }
};

struct ForwardTrace {
    Architecture arch = Architecture::gru;
    std::vector<TokenId> tokens;  // empty when run from raw embeddings
    DirectionTrace forward;
    /// BiGRU only: the reverse GRU run over x_T..x_1. Its processing step s
    /// corresponds to token position T+1-s, so h_{t,r} = reverse->hidden[T+1-t]
    /// and the boundary h_{T+1,r} = reverse->hidden[0] = 0.
    std::optional<DirectionTrace> reverse;
    Vector features;  // h_T, or h_{T,n} ++ h_{1,r} for BiGRU
    Vector logits;
    Vector probabilities;

    std::size_t length() const noexcept { return forward.steps(); }
    ClassIndex predicted() const { return argmax(logits); }
};

struct GruStep {
    Vector hidden;
    StepGates gates;
};

struct LstmStep {
    Vector hidden;
    Vector cell;
    StepGates gates;
};

GruStep gru_step(const GruParams& params, std::span<const double> h_prev, std::span<const double> x);
LstmStep lstm_step(const LstmParams& params, std::span<const double> h_prev, std::span<const double> c_prev,
                   std::span<const double> x);

/// Rows of the embedding table for `tokens`. Throws std::out_of_range on an
/// index >= vocab_size.
std::vector<Vector> embed(const RnnModel& model, std::span<const TokenId> tokens);

ForwardTrace forward(const RnnModel& model, std::span<const TokenId> tokens);
/// Forward pass from explicit input vectors (used by perturbation methods).
ForwardTrace forward_inputs(const RnnModel& model, std::span<const Vector> inputs);

struct BackwardResult {
    std::vector<Vector> input_grads;  // one per position, length embed_dim
    std::optional<RnnModel> param_grads;  // shaped like the model; embedding left empty
};

/// Reverse-mode pass through a recorded trace given dL/dlogits.
BackwardResult backward(const RnnModel& model, const ForwardTrace& trace, std::span<const Vector> inputs,
                        std::span<const double> dlogits, bool want_param_grads);

/// d z_c / d x_t for every position t, as a T x embed_dim matrix.
Matrix grad_wrt_embeddings(const RnnModel& model, std::span<const TokenId> tokens, ClassIndex target_class);
std::vector<Vector> grad_wrt_inputs(const RnnModel& model, std::span<const Vector> inputs, ClassIndex target_class);

}  // namespace reat
