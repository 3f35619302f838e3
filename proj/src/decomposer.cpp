#include "reat/decomposer.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace reat {

namespace {

DirectionAlpha gru_alpha(const DirectionTrace& dir) {
    DirectionAlpha out;
    out.alpha.reserve(dir.steps());
    out.residual.reserve(dir.steps());
    for (std::size_t s = 1; s <= dir.steps(); ++s) {
        const Vector& u = dir.gates[s - 1].update;
        if (u.size() != dir.hidden[s].size()) throw std::invalid_argument("extract_alpha: trace lacks GRU update gates");
        out.alpha.push_back(u);
        out.residual.push_back(subtract(dir.hidden[s], hadamard(u, dir.hidden[s - 1])));
    }
    return out;
}

DirectionAlpha lstm_alpha(const DirectionTrace& dir) {
    DirectionAlpha out;
    const std::size_t h = dir.hidden.front().size();
    Vector prev_output(h, 1.0);  // o_0
    for (std::size_t s = 1; s <= dir.steps(); ++s) {
        const StepGates& g = dir.gates[s - 1];
        if (g.forget.size() != h || g.output.size() != h)
            throw std::invalid_argument("extract_alpha: trace lacks LSTM forget/output gates");
        Vector a(h);
        for (std::size_t i = 0; i < h; ++i) {
            if (divide_clamps(prev_output[i])) ++out.clamp_count;
            a[i] = safe_divide(g.forget[i] * g.output[i], prev_output[i]);
        }
        out.residual.push_back(subtract(dir.hidden[s], hadamard(a, dir.hidden[s - 1])));
        out.alpha.push_back(std::move(a));
        prev_output = g.output;
    }
    return out;
}

DirectionAlpha ones_alpha(const DirectionTrace& dir) {
    DirectionAlpha out;
    for (std::size_t s = 1; s <= dir.steps(); ++s) {
        out.alpha.emplace_back(dir.hidden[s].size(), 1.0);
        out.residual.push_back(subtract(dir.hidden[s], dir.hidden[s - 1]));
    }
    return out;
}

// Suffix products: result[s] = prod_{k=s+1}^{T} alpha_k for s = 0..T, in
// processing-step indexing. One right-to-left pass.
std::vector<Vector> suffix_products(const DirectionAlpha& a, std::size_t hidden) {
    const std::size_t steps = a.alpha.size();
    std::vector<Vector> out(steps + 1);
    out[steps] = Vector(hidden, 1.0);
    for (std::size_t s = steps; s-- > 0;) out[s] = hadamard(out[s + 1], a.alpha[s]);
    return out;
}

std::span<const double> class_weights(const RnnModel& model, ClassIndex c, bool reverse_half) {
    const auto row = model.output.row(c);
    if (model.arch != Architecture::bigru) return row;
    const std::size_t h = row.size() / 2;
    return reverse_half ? row.subspan(h) : row.first(h);
}

void check_class(const RnnModel& model, ClassIndex c) {
    if (c >= model.output.rows())
        throw std::out_of_range("target class " + std::to_string(c) + " >= class count " +
                                std::to_string(model.output.rows()));
}

void check_alpha(const ForwardTrace& trace, const AlphaTrace& alpha) {
    if (alpha.forward.alpha.size() != trace.length() || alpha.reverse.has_value() != trace.reverse.has_value() ||
        (alpha.reverse && alpha.reverse->alpha.size() != trace.length()))
        throw DimensionError("alpha trace does not match forward trace");
}

// Scores spans for one direction over processing-step ranges [a, b].
class DirectionScorer {
public:
    DirectionScorer(const DirectionTrace& dir, const DirectionAlpha& alpha, std::span<const double> weights)
        : dir_(dir), alpha_(alpha), weights_(weights),
          suffix_(suffix_products(alpha, dir.hidden.front().size())) {}

    double word(std::size_t s) const {
        const Vector& res = alpha_.residual[s - 1];
        const Vector& suf = suffix_[s];
        double acc = 0.0;
        for (std::size_t i = 0; i < res.size(); ++i) acc += weights_[i] * (res[i] * suf[i]);
        return acc;
    }

    double range(std::size_t a, std::size_t b) const {
        const std::size_t h = weights_.size();
        Vector carried(h, 1.0);
        for (std::size_t j = a; j <= b; ++j)
            for (std::size_t i = 0; i < h; ++i) carried[i] *= alpha_.alpha[j - 1][i];
        const Vector& end = dir_.hidden[b];
        const Vector& before = dir_.hidden[a - 1];
        const Vector& suf = suffix_[b];
        double acc = 0.0;
        for (std::size_t i = 0; i < h; ++i) acc += weights_[i] * ((end[i] - carried[i] * before[i]) * suf[i]);
        return acc;
    }

private:
    const DirectionTrace& dir_;
    const DirectionAlpha& alpha_;
    std::span<const double> weights_;
    std::vector<Vector> suffix_;
};

AttributionResult empty_result(Method method, const ForwardTrace& trace, ClassIndex c) {
    AttributionResult r;
    r.method = method;
    r.target_class = c;
    r.logit = trace.logits[c];
    return r;
}

}  // namespace

AlphaTrace extract_alpha(const ForwardTrace& trace) {
    AlphaTrace out;
    switch (trace.arch) {
        case Architecture::gru: out.forward = gru_alpha(trace.forward); break;
        case Architecture::lstm: out.forward = lstm_alpha(trace.forward); break;
        case Architecture::bigru:
            if (!trace.reverse) throw std::invalid_argument("extract_alpha: BiGRU trace lacks the reverse direction");
            out.forward = gru_alpha(trace.forward);
            out.reverse = gru_alpha(*trace.reverse);
            break;
    }
    return out;
}

AlphaTrace unit_alpha(const ForwardTrace& trace) {
    AlphaTrace out;
    out.forward = ones_alpha(trace.forward);
    if (trace.reverse) out.reverse = ones_alpha(*trace.reverse);
    return out;
}

void check_span(const Span& span, std::size_t length) {
    if (span.first < 1 || span.first > span.last || span.last > length)
        throw std::invalid_argument("invalid span [" + std::to_string(span.first) + ", " + std::to_string(span.last) +
                                    "] for length " + std::to_string(length));
}

void check_partition(std::span<const Span> spans, std::size_t length) {
    std::size_t next = 1;
    for (const Span& s : spans) {
        check_span(s, length);
        if (s.first != next) throw std::invalid_argument("spans do not form a contiguous partition");
        next = s.last + 1;
    }
    if (next != length + 1) throw std::invalid_argument("spans do not cover the whole text");
}

std::vector<Span> word_spans(std::size_t length) {
    std::vector<Span> out;
    out.reserve(length);
    for (std::size_t t = 1; t <= length; ++t) out.push_back({t, t});
    return out;
}

std::string_view to_string(Method method) noexcept {
    switch (method) {
        case Method::reat: return "reat";
        case Method::naive: return "naive";
        case Method::vanilla_grad: return "vanilla-grad";
        case Method::integrated_grad: return "integrated-grad";
        case Method::grad_input: return "grad-input";
        case Method::occlusion: return "occlusion";
        case Method::omission: return "omission";
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    std::string s(name);
    std::replace(s.begin(), s.end(), '_', '-');
    for (Method m : {Method::reat, Method::naive, Method::vanilla_grad, Method::integrated_grad, Method::grad_input,
                     Method::occlusion, Method::omission})
        if (to_string(m) == s) return m;
    throw std::invalid_argument("unknown attribution method '" + std::string(name) + "'");
}

double AttributionResult::total() const noexcept {
    double sum = 0.0;
    for (const auto& s : spans) sum += s.score;
    return sum;
}

std::vector<double> AttributionResult::scores() const {
    std::vector<double> out;
    out.reserve(spans.size());
    for (const auto& s : spans) out.push_back(s.score);
    return out;
}

AttributionResult reat_word_scores(const RnnModel& model, const ForwardTrace& trace, const AlphaTrace& alpha,
                                   ClassIndex target_class) {
    check_class(model, target_class);
    check_alpha(trace, alpha);
    const std::size_t T = trace.length();
    AttributionResult result = empty_result(Method::reat, trace, target_class);

    const DirectionScorer fwd(trace.forward, alpha.forward, class_weights(model, target_class, false));
    std::optional<DirectionScorer> rev;
    if (trace.reverse) rev.emplace(*trace.reverse, *alpha.reverse, class_weights(model, target_class, true));

    for (std::size_t t = 1; t <= T; ++t) {
        SpanScore s;
        s.span = {t, t};
        s.forward_part = fwd.word(t);
        s.reverse_part = rev ? rev->word(T + 1 - t) : 0.0;
        s.score = s.forward_part + s.reverse_part;
        result.spans.push_back(std::move(s));
    }
    return result;
}

AttributionResult reat_span_scores(const RnnModel& model, const ForwardTrace& trace, const AlphaTrace& alpha,
                                   std::span<const Span> spans, ClassIndex target_class) {
    check_class(model, target_class);
    check_alpha(trace, alpha);
    const std::size_t T = trace.length();
    AttributionResult result = empty_result(Method::reat, trace, target_class);

    const DirectionScorer fwd(trace.forward, alpha.forward, class_weights(model, target_class, false));
    std::optional<DirectionScorer> rev;
    if (trace.reverse) rev.emplace(*trace.reverse, *alpha.reverse, class_weights(model, target_class, true));

    for (const Span& span : spans) {
        check_span(span, T);
        SpanScore s;
        s.span = span;
        s.forward_part = fwd.range(span.first, span.last);
        // reverse processing covers positions r..q as steps T+1-r .. T+1-q
        s.reverse_part = rev ? rev->range(T + 1 - span.last, T + 1 - span.first) : 0.0;
        s.score = s.forward_part + s.reverse_part;
        result.spans.push_back(std::move(s));
    }
    return result;
}

SpanScore reat_phrase_score(const RnnModel& model, const ForwardTrace& trace, const AlphaTrace& alpha,
                            const Span& span, ClassIndex target_class) {
    return reat_span_scores(model, trace, alpha, std::span<const Span>(&span, 1), target_class).spans.front();
}

AttributionResult naive_scores(const RnnModel& model, const ForwardTrace& trace, ClassIndex target_class) {
    check_class(model, target_class);
    const std::size_t T = trace.length();
    AttributionResult result = empty_result(Method::naive, trace, target_class);
    const auto wn = class_weights(model, target_class, false);
    const auto wr = class_weights(model, target_class, true);
    for (std::size_t t = 1; t <= T; ++t) {
        SpanScore s;
        s.span = {t, t};
        s.forward_part = dot(wn, subtract(trace.forward.hidden[t], trace.forward.hidden[t - 1]));
        if (trace.reverse) {
            const auto& hr = trace.reverse->hidden;
            s.reverse_part = dot(wr, subtract(hr[T + 1 - t], hr[T - t]));
        }
        s.score = s.forward_part + s.reverse_part;
        result.spans.push_back(std::move(s));
    }
    return result;
}

namespace {

AttributionResult per_token(Method method, const ForwardTrace& full, ClassIndex c, const std::vector<double>& scores) {
    AttributionResult r = empty_result(method, full, c);
    for (std::size_t t = 0; t < scores.size(); ++t) {
        SpanScore s;
        s.span = {t + 1, t + 1};
        s.score = s.forward_part = scores[t];
        r.spans.push_back(std::move(s));
    }
    return r;
}

}  // namespace

AttributionResult baseline_attribute(Method method, const RnnModel& model, std::span<const TokenId> tokens,
                                     ClassIndex target_class, const BaselineOptions& options) {
    check_class(model, target_class);
    const std::vector<Vector> inputs = embed(model, tokens);
    if (inputs.empty()) throw std::invalid_argument("attribution: empty token sequence");
    const ForwardTrace full = forward_inputs(model, inputs);
    const std::size_t T = inputs.size();
    std::vector<double> scores(T, 0.0);

    switch (method) {
        case Method::vanilla_grad: {
            const auto grads = grad_wrt_inputs(model, inputs, target_class);
            for (std::size_t t = 0; t < T; ++t) scores[t] = norm2(grads[t]);
            break;
        }
        case Method::grad_input: {
            const auto grads = grad_wrt_inputs(model, inputs, target_class);
            for (std::size_t t = 0; t < T; ++t) scores[t] = dot(grads[t], inputs[t]);
            break;
        }
        case Method::integrated_grad: {
            const std::size_t m = options.integrated_steps;
            if (m < 1) throw std::invalid_argument("integrated gradients needs at least one step");
            std::vector<Vector> mean_grad(T, Vector(inputs[0].size(), 0.0));
            std::vector<Vector> scaled = inputs;
            for (std::size_t k = 1; k <= m; ++k) {
                // midpoint of the k-th of m equal segments on the path 0 -> x
                const double a = (static_cast<double>(k) - 0.5) / static_cast<double>(m);
                for (std::size_t t = 0; t < T; ++t)
                    for (std::size_t j = 0; j < scaled[t].size(); ++j) scaled[t][j] = a * inputs[t][j];
                const auto grads = grad_wrt_inputs(model, scaled, target_class);
                for (std::size_t t = 0; t < T; ++t)
                    for (std::size_t j = 0; j < grads[t].size(); ++j) mean_grad[t][j] += grads[t][j];
            }
            for (std::size_t t = 0; t < T; ++t) scores[t] = dot(mean_grad[t], inputs[t]) / static_cast<double>(m);
            break;
        }
        case Method::occlusion: {
            for (std::size_t t = 0; t < T; ++t) {
                std::vector<Vector> occluded = inputs;
                std::fill(occluded[t].begin(), occluded[t].end(), 0.0);
                scores[t] = full.logits[target_class] - forward_inputs(model, occluded).logits[target_class];
            }
            break;
        }
        case Method::omission: {
            if (T == 1) throw std::invalid_argument("omission needs at least two tokens");
            for (std::size_t t = 0; t < T; ++t) {
                std::vector<Vector> omitted;
                omitted.reserve(T - 1);
                for (std::size_t k = 0; k < T; ++k)
                    if (k != t) omitted.push_back(inputs[k]);
                scores[t] = full.logits[target_class] - forward_inputs(model, omitted).logits[target_class];
            }
            break;
        }
        case Method::reat:
        case Method::naive:
            throw std::invalid_argument("baseline_attribute: '" + std::string(to_string(method)) +
                                        "' is not a baseline method");
    }
    return per_token(method, full, target_class, scores);
}

AttributionResult attribute_words(Method method, const RnnModel& model, std::span<const TokenId> tokens,
                                  ClassIndex target_class, const BaselineOptions& options) {
    switch (method) {
        case Method::reat: {
            const ForwardTrace trace = forward(model, tokens);
            return reat_word_scores(model, trace, extract_alpha(trace), target_class);
        }
        case Method::naive: return naive_scores(model, forward(model, tokens), target_class);
        default: return baseline_attribute(method, model, tokens, target_class, options);
    }
}

AttributionResult attribute_spans(Method method, const RnnModel& model, std::span<const TokenId> tokens,
                                  std::span<const Span> spans, ClassIndex target_class,
                                  const BaselineOptions& options) {
    if (method == Method::reat || method == Method::naive) {
        const ForwardTrace trace = forward(model, tokens);
        const AlphaTrace alpha = method == Method::reat ? extract_alpha(trace) : unit_alpha(trace);
        AttributionResult r = reat_span_scores(model, trace, alpha, spans, target_class);
        r.method = method;
        return r;
    }
    const AttributionResult words = baseline_attribute(method, model, tokens, target_class, options);
    AttributionResult r;
    r.method = method;
    r.target_class = target_class;
    r.logit = words.logit;
    for (const Span& span : spans) {
        check_span(span, tokens.size());
        SpanScore s;
        s.span = span;
        for (std::size_t t = span.first; t <= span.last; ++t) s.score += words.spans[t - 1].score;
        s.forward_part = s.score;
        r.spans.push_back(std::move(s));
    }
    return r;
}

void label_spans(AttributionResult& result, std::span<const std::string> tokens) {
    for (SpanScore& s : result.spans) {
        check_span(s.span, tokens.size());
        s.text.clear();
        for (std::size_t t = s.span.first; t <= s.span.last; ++t) {
            if (t > s.span.first) s.text += ' ';
            s.text += tokens[t - 1];
        }
    }
}

SpanAttributor make_attributor(Method method, const BaselineOptions& options) {
    return [method, options](const RnnModel& model, std::span<const TokenId> tokens, std::span<const Span> spans,
                             ClassIndex target_class) {
        return attribute_spans(method, model, tokens, spans, target_class, options).scores();
    };
}

namespace {

std::string format_real(double x) {
    char buf[32];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf, static_cast<std::size_t>(n));
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    for (std::size_t tab; (tab = line.find('\t')) != std::string_view::npos;) {
        out.push_back(line.substr(0, tab));
        line.remove_prefix(tab + 1);
    }
    out.push_back(line);
    return out;
}

template <typename T>
T parse_field(std::string_view s, const char* what) {
    T value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw std::invalid_argument(std::string("attribution record: bad ") + what + " '" + std::string(s) + "'");
    return value;
}

}  // namespace

void write_attribution(std::ostream& out, const AttributionResult& result) {
    out << "#attribution\t" << to_string(result.method) << '\t' << result.target_class << '\t'
        << format_real(result.logit) << '\t' << result.spans.size() << '\n';
    for (const SpanScore& s : result.spans) {
        out << s.span.first << '\t' << s.span.last << '\t' << format_real(s.score) << '\t'
            << format_real(s.forward_part) << '\t' << format_real(s.reverse_part) << '\t' << s.text << '\n';
    }
}

std::optional<AttributionResult> read_attribution(std::istream& in) {
    std::string line;
    while (std::getline(in, line) && line.empty()) {
    }
    if (!in && line.empty()) return std::nullopt;
    const auto head = split_tabs(line);
    if (head.size() != 5 || head[0] != "#attribution")
        throw std::invalid_argument("attribution record: expected '#attribution' header");
    AttributionResult r;
    r.method = parse_method(head[1]);
    r.target_class = parse_field<std::size_t>(head[2], "class");
    r.logit = parse_field<double>(head[3], "logit");
    const auto count = parse_field<std::size_t>(head[4], "span count");
    for (std::size_t i = 0; i < count; ++i) {
        if (!std::getline(in, line)) throw std::invalid_argument("attribution record: missing span lines");
        const auto f = split_tabs(line);
        if (f.size() != 6) throw std::invalid_argument("attribution record: span line needs 6 fields");
        SpanScore s;
        s.span = {parse_field<std::size_t>(f[0], "q"), parse_field<std::size_t>(f[1], "r")};
        s.score = parse_field<double>(f[2], "score");
        s.forward_part = parse_field<double>(f[3], "forward part");
        s.reverse_part = parse_field<double>(f[4], "reverse part");
        s.text = std::string(f[5]);
        r.spans.push_back(std::move(s));
    }
    return r;
}

}  // namespace reat
