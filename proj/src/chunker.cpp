#include "reat/chunker.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace reat {

namespace {

// Verb-chunk NFA. A: leading VERB*, B: ADV*, C: PART*, D: VERB+ (accepting),
// E: trailing PART* (accepting). States are bits of a set.
enum : unsigned { kA = 1, kB = 2, kC = 4, kD = 8, kE = 16 };

unsigned verb_step(unsigned states, CoarseTag t) {
    unsigned next = 0;
    switch (t) {
        case CoarseTag::verb:
            if (states & kA) next |= kA | kD;
            if (states & (kB | kC | kD)) next |= kD;
            break;
        case CoarseTag::adv:
            if (states & (kA | kB)) next |= kB;
            break;
        case CoarseTag::part:
            if (states & (kA | kB | kC)) next |= kC;
            if (states & (kD | kE)) next |= kE;
            break;
        default: break;
    }
    return next;
}

// Noun-chunk DFA.
enum class NounState { start, det, noun, joiner, dead };

NounState noun_step(NounState s, CoarseTag t) {
    switch (s) {
        case NounState::start:
            if (t == CoarseTag::det) return NounState::det;
            return t == CoarseTag::noun ? NounState::noun : NounState::dead;
        case NounState::det:
        case NounState::joiner: return t == CoarseTag::noun ? NounState::noun : NounState::dead;
        case NounState::noun:
            if (t == CoarseTag::noun) return NounState::noun;
            if (t == CoarseTag::adp || t == CoarseTag::conj) return NounState::joiner;
            return NounState::dead;
        case NounState::dead: break;
    }
    return NounState::dead;
}

}  // namespace

std::string_view to_string(ChunkLabel label) noexcept {
    switch (label) {
        case ChunkLabel::noun_chunk: return "NOUN_CHUNK";
        case ChunkLabel::verb_chunk: return "VERB_CHUNK";
        case ChunkLabel::singleton: return "SINGLETON";
    }
    return "SINGLETON";
}

std::vector<Span> PhrasePartition::spans() const {
    std::vector<Span> out;
    out.reserve(chunks.size());
    for (const Chunk& c : chunks) out.push_back(c.span);
    return out;
}

std::size_t longest_verb_chunk(std::span<const CoarseTag> tags, std::size_t start) {
    std::size_t best = 0;
    unsigned states = kA;
    for (std::size_t i = start; i < tags.size() && states != 0; ++i) {
        states = verb_step(states, tags[i]);
        if (states & (kD | kE)) best = i - start + 1;
    }
    return best;
}

std::size_t longest_noun_chunk(std::span<const CoarseTag> tags, std::size_t start) {
    std::size_t best = 0;
    NounState s = NounState::start;
    for (std::size_t i = start; i < tags.size() && s != NounState::dead; ++i) {
        s = noun_step(s, tags[i]);
        if (s == NounState::noun) best = i - start + 1;
    }
    return best;
}

PhrasePartition chunk(std::span<const CoarseTag> tags) {
    if (tags.empty()) throw std::invalid_argument("chunk: empty tag sequence");
    PhrasePartition out;
    std::size_t i = 0;
    while (i < tags.size()) {
        const std::size_t noun = longest_noun_chunk(tags, i);
        const std::size_t verb = longest_verb_chunk(tags, i);
        Chunk c;
        std::size_t len = 1;
        if (noun > 0 && noun >= verb) {
            len = noun;
            c.label = ChunkLabel::noun_chunk;
        } else if (verb > 0) {
            len = verb;
            c.label = ChunkLabel::verb_chunk;
        }
        c.span = {i + 1, i + len};
        out.chunks.push_back(c);
        i += len;
    }
    return out;
}

bool is_clause_delimiter(std::string_view token) {
    if (token == "." || token == "," || token == ";") return true;
    if (token.size() != 3) return false;
    std::string lower(token);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return lower == "but";
}

namespace {

template <typename IsDelimiter>
std::vector<Span> split_after(std::span<const std::string> tokens, IsDelimiter is_delimiter, const char* what) {
    if (tokens.empty()) throw std::invalid_argument(std::string(what) + ": empty token sequence");
    std::vector<Span> out;
    std::size_t first = 1;
    bool has_content = false;
    for (std::size_t t = 1; t <= tokens.size(); ++t) {
        if (!is_delimiter(tokens[t - 1])) {
            has_content = true;
            continue;
        }
        // a delimiter-only segment stays open and joins the next unit
        if (has_content) {
            out.push_back({first, t});
            first = t + 1;
            has_content = false;
        }
    }
    if (first <= tokens.size()) {
        if (has_content || out.empty())
            out.push_back({first, tokens.size()});
        else
            out.back().last = tokens.size();
    }
    return out;
}

}  // namespace

std::vector<Span> clauses(std::span<const std::string> tokens) {
    return split_after(tokens, [](const std::string& w) { return is_clause_delimiter(w); }, "clauses");
}

bool is_sentence_delimiter(std::string_view token) { return token == "." || token == "!" || token == "?"; }

std::vector<Span> sentences(std::span<const std::string> tokens) {
    return split_after(tokens, [](const std::string& w) { return is_sentence_delimiter(w); }, "sentences");
}

std::vector<const AttributionResult*> HierarchicalAttribution::levels() const {
    std::vector<const AttributionResult*> out{&word, &phrase};
    if (clause) out.push_back(&*clause);
    return out;
}

HierarchicalAttribution hierarchy(const RnnModel& model, std::span<const TokenId> ids,
                                  std::span<const std::string> words, std::span<const CoarseTag> tags,
                                  ClassIndex target_class, Method method, bool with_clauses,
                                  const BaselineOptions& options) {
    if (ids.size() != words.size() || ids.size() != tags.size())
        throw std::invalid_argument("hierarchy: ids, words and tags differ in length");
    HierarchicalAttribution out;
    out.chunks = chunk(tags);
    const std::vector<Span> phrase_spans = out.chunks.spans();
    std::vector<Span> clause_spans;
    if (with_clauses) clause_spans = clauses(words);

    if (method == Method::reat || method == Method::naive) {
        const ForwardTrace trace = forward(model, ids);
        const AlphaTrace alpha = method == Method::reat ? extract_alpha(trace) : unit_alpha(trace);
        out.word = method == Method::reat ? reat_word_scores(model, trace, alpha, target_class)
                                          : naive_scores(model, trace, target_class);
        out.phrase = reat_span_scores(model, trace, alpha, phrase_spans, target_class);
        out.phrase.method = method;
        if (with_clauses) {
            out.clause = reat_span_scores(model, trace, alpha, clause_spans, target_class);
            out.clause->method = method;
        }
    } else {
        out.word = baseline_attribute(method, model, ids, target_class, options);
        auto group = [&](const std::vector<Span>& spans) {
            AttributionResult r;
            r.method = method;
            r.target_class = target_class;
            r.logit = out.word.logit;
            for (const Span& span : spans) {
                SpanScore s;
                s.span = span;
                for (std::size_t t = span.first; t <= span.last; ++t) s.score += out.word.spans[t - 1].score;
                s.forward_part = s.score;
                r.spans.push_back(std::move(s));
            }
            return r;
        };
        out.phrase = group(phrase_spans);
        if (with_clauses) out.clause = group(clause_spans);
    }
    label_spans(out.word, words);
    label_spans(out.phrase, words);
    if (out.clause) label_spans(*out.clause, words);
    return out;
}

}  // namespace reat
