#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reat/rnn.hpp"

namespace reat {

/// Retention vectors of one recurrent direction, in processing order:
/// alpha[s-1] and residual[s-1] belong to processing step s, with
/// hidden[s] = alpha[s-1] * hidden[s-1] + residual[s-1].
struct DirectionAlpha {
    std::vector<Vector> alpha;
    std::vector<Vector> residual;
    std::size_t clamp_count = 0;  // LSTM: output-gate entries clamped by safe_divide
};

struct AlphaTrace {
    DirectionAlpha forward;
    std::optional<DirectionAlpha> reverse;  // BiGRU only

    bool clamped() const noexcept {
        return forward.clamp_count > 0 || (reverse && reverse->clamp_count > 0);
    }
};

/// GRU/BiGRU: alpha_t = u_t. LSTM: alpha_t = f_t * o_t / o_{t-1} with o_0 = 1
/// and the division guarded by safe_divide.
AlphaTrace extract_alpha(const ForwardTrace& trace);

/// alpha == 1 everywhere; REAT under this retention is the naive decomposition.
AlphaTrace unit_alpha(const ForwardTrace& trace);

/// Inclusive 1-based token range [first, last].
struct Span {
    std::size_t first = 1;
    std::size_t last = 1;

    std::size_t width() const noexcept { return last - first + 1; }
    friend bool operator==(const Span&, const Span&) = default;
};

/// Throws std::invalid_argument unless 1 <= first <= last <= length.
void check_span(const Span& span, std::size_t length);
/// Throws unless `spans` are sorted, contiguous and exactly cover [1, length].
void check_partition(std::span<const Span> spans, std::size_t length);
std::vector<Span> word_spans(std::size_t length);

enum class Method { reat, naive, vanilla_grad, integrated_grad, grad_input, occlusion, omission };

std::string_view to_string(Method method) noexcept;
/// Accepts the CLI spellings (reat, naive, vanilla-grad, integrated-grad,
/// grad-input, occlusion, omission); underscores are accepted for dashes.
Method parse_method(std::string_view name);

struct SpanScore {
    Span span;
    double score = 0.0;
    /// Normal-direction and reverse-direction parts of `score` (BiGRU); for
    /// unidirectional models `forward_part == score` and `reverse_part == 0`.
    double forward_part = 0.0;
    double reverse_part = 0.0;
    std::string text;
};

struct AttributionResult {
    Method method = Method::reat;
    ClassIndex target_class = 0;
    double logit = 0.0;  // z_c of the unperturbed input
    std::vector<SpanScore> spans;

    double total() const noexcept;
    std::vector<double> scores() const;
};

/// One REAT score per token (logit units).
AttributionResult reat_word_scores(const RnnModel& model, const ForwardTrace& trace, const AlphaTrace& alpha,
                                   ClassIndex target_class);

/// REAT score of a single phrase.
SpanScore reat_phrase_score(const RnnModel& model, const ForwardTrace& trace, const AlphaTrace& alpha,
                            const Span& span, ClassIndex target_class);

/// REAT scores for many spans sharing one set of suffix products.
AttributionResult reat_span_scores(const RnnModel& model, const ForwardTrace& trace, const AlphaTrace& alpha,
                                   std::span<const Span> spans, ClassIndex target_class);

/// S(x_t) = W_c (h_t - h_{t-1}) per direction.
AttributionResult naive_scores(const RnnModel& model, const ForwardTrace& trace, ClassIndex target_class);

struct BaselineOptions {
    std::size_t integrated_steps = 50;
};

/// Word-level attribution by any method. Gradient methods differentiate the
/// logit z_c; perturbation methods report z_c(full) - z_c(perturbed).
AttributionResult attribute_words(Method method, const RnnModel& model, std::span<const TokenId> tokens,
                                  ClassIndex target_class, const BaselineOptions& options = {});

/// Same as attribute_words for the gradient/perturbation baselines; rejects
/// reat and naive.
AttributionResult baseline_attribute(Method method, const RnnModel& model, std::span<const TokenId> tokens,
                                     ClassIndex target_class, const BaselineOptions& options = {});

/// Span-level attribution: REAT and naive score spans directly; the
/// word-level baselines sum their word scores over each span.
AttributionResult attribute_spans(Method method, const RnnModel& model, std::span<const TokenId> tokens,
                                  std::span<const Span> spans, ClassIndex target_class,
                                  const BaselineOptions& options = {});

/// Fills SpanScore::text from surface tokens (joined by single spaces).
void label_spans(AttributionResult& result, std::span<const std::string> tokens);

/// Scores one partition of a text into units, for the evaluation harnesses.
using SpanAttributor = std::function<std::vector<double>(const RnnModel&, std::span<const TokenId>,
                                                         std::span<const Span>, ClassIndex)>;

SpanAttributor make_attributor(Method method, const BaselineOptions& options = {});

// ---------------------------------------------------------------------------
// Attribution record (line-oriented, tab-separated):
//   #attribution <TAB> method <TAB> class <TAB> logit <TAB> span count
//   q <TAB> r <TAB> score <TAB> forward_part <TAB> reverse_part <TAB> text
// Reals are printed with 17 significant digits, so reading a record back
// reproduces every value bit-exactly.
// ---------------------------------------------------------------------------
void write_attribution(std::ostream& out, const AttributionResult& result);
/// Reads the next record; returns nullopt at end of input.
std::optional<AttributionResult> read_attribution(std::istream& in);

}  // namespace reat
