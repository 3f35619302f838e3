#include "reat/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <ostream>

namespace reat {

namespace {

// Runs fn(i) for i in [0, n). Parallel runs write only to per-index slots, so
// results match the serial order exactly; the lowest-index exception wins.
template <typename Fn>
void run_indexed(std::size_t n, Execution execution, Fn&& fn) {
    if (execution == Execution::serial) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return s;
}

std::string format_real(double x) {
    char buf[32];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf, static_cast<std::size_t>(n));
}

bool counts_clamps(const Attributor& attributor, const RnnModel& model) {
    return attributor.name == "reat" && model.arch == Architecture::lstm;
}

bool text_clamps(const RnnModel& model, std::span<const TokenId> ids) {
    return extract_alpha(forward(model, ids)).clamped();
}

std::vector<double> score_units(const Attributor& attributor, const RnnModel& model, std::span<const TokenId> ids,
                                 std::span<const Span> units, ClassIndex c) {
    std::vector<double> scores = attributor.score(model, ids, units, c);
    if (scores.size() != units.size())
        throw EvalError("attributor '" + attributor.name + "' returned " + std::to_string(scores.size()) +
                        " scores for " + std::to_string(units.size()) + " units");
    return scores;
}

void finish_counts(EvalReport& report) {
    for (const ItemRecord& item : report.items) {
        if (item.skipped.empty())
            ++report.processed;
        else
            ++report.skipped;
    }
}

std::vector<std::string> read_word_list(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw EvalError("cannot open lexicon " + path.string());
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
        std::size_t start = 0;
        while (start < line.size() && std::isspace(static_cast<unsigned char>(line[start]))) ++start;
        line.erase(0, start);
        if (line.empty() || line[0] == '#') continue;
        out.push_back(line);
    }
    return out;
}

}  // namespace

EvalText make_eval_text(const Vocabulary& vocab, const LabeledText& text) {
    return {text.tokens, vocab.encode(text.tokens), text.pos_tags};
}

std::vector<EvalText> make_eval_texts(const Vocabulary& vocab, const std::vector<LabeledText>& texts) {
    std::vector<EvalText> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(make_eval_text(vocab, t));
    return out;
}

SentimentLexicons make_lexicons(const std::vector<std::string>& positive, const std::vector<std::string>& negative) {
    SentimentLexicons lex;
    for (const auto& w : positive) lex.positive.insert(lowercase(w));
    for (const auto& w : negative) {
        const std::string lw = lowercase(w);
        if (lex.positive.contains(lw)) throw EvalError("lexicon word '" + lw + "' is both positive and negative");
        lex.negative.insert(lw);
    }
    return lex;
}

SentimentLexicons load_lexicons(const std::filesystem::path& positive, const std::filesystem::path& negative) {
    return make_lexicons(read_word_list(positive), read_word_list(negative));
}

Attributor method_attributor(Method method, const BaselineOptions& options) {
    return {std::string(to_string(method)), make_attributor(method, options)};
}

Attributor random_attributor(std::uint64_t seed) {
    return {"random", [seed](const RnnModel&, std::span<const TokenId> ids, std::span<const Span> spans, ClassIndex) {
                std::uint64_t h = mix64(seed);
                for (TokenId id : ids) h = mix64(h ^ id);
                Rng rng(h);
                std::vector<double> out(spans.size());
                for (double& x : out) x = rng.uniform(-1.0, 1.0);
                return out;
            }};
}

Attributor constant_attributor() {
    return {"constant", [](const RnnModel&, std::span<const TokenId>, std::span<const Span> spans, ClassIndex) {
                return std::vector<double>(spans.size(), 0.0);
            }};
}

double ItemRecord::field(std::string_view name) const {
    for (const auto& [k, v] : fields)
        if (k == name) return v;
    throw std::out_of_range("item record has no field '" + std::string(name) + "'");
}

double EvalReport::score(std::string_view name) const {
    for (const auto& [k, v] : scores)
        if (k == name) return v;
    throw std::out_of_range("report has no score '" + std::string(name) + "'");
}

std::string_view to_string(DeletionUnit unit) noexcept {
    return unit == DeletionUnit::sentence ? "sentence" : "clause";
}

DeletionUnit parse_deletion_unit(std::string_view name) {
    if (name == "sentence") return DeletionUnit::sentence;
    if (name == "clause") return DeletionUnit::clause;
    throw std::invalid_argument("unknown deletion unit '" + std::string(name) + "' (sentence|clause)");
}

std::vector<Span> deletion_units(std::span<const std::string> words, DeletionUnit unit) {
    return unit == DeletionUnit::sentence ? sentences(words) : clauses(words);
}

double faithfulness_score(std::span<const double> y_before, std::span<const double> y_after) {
    if (y_before.size() != y_after.size()) throw DimensionError("faithfulness: before/after lengths differ");
    if (y_before.empty()) throw EvalError("faithfulness: no eligible texts");
    double sum = 0.0;
    for (std::size_t i = 0; i < y_before.size(); ++i) sum += y_before[i] - y_after[i];
    return sum / static_cast<double>(y_before.size());
}

double interpretability_score(std::size_t matches, std::size_t mismatches) {
    if (matches + mismatches == 0) throw EvalError("interpretability: no eligible texts");
    return static_cast<double>(matches) / static_cast<double>(matches + mismatches);
}

EvalReport faithfulness(const RnnModel& model, std::span<const EvalText> texts, const Attributor& attributor,
                        DeletionUnit unit, Execution execution) {
    EvalReport report;
    report.metric = "faithfulness-" + std::string(to_string(unit));
    report.method = attributor.name;
    report.items.resize(texts.size());
    std::vector<char> clamped(texts.size(), 0);
    const bool check_clamps = counts_clamps(attributor, model);

    run_indexed(texts.size(), execution, [&](std::size_t i) {
        const EvalText& text = texts[i];
        ItemRecord& item = report.items[i];
        item.index = i;
        const std::vector<Span> units = deletion_units(text.words, unit);
        if (units.size() < 2) {
            item.skipped = "fewer than two units";
            return;
        }
        const ForwardTrace trace = forward(model, text.ids);
        const ClassIndex c = trace.predicted();
        const std::vector<double> scores = score_units(attributor, model, text.ids, units, c);
        const auto top = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
        std::vector<TokenId> kept;
        kept.reserve(text.ids.size());
        for (std::size_t t = 1; t <= text.ids.size(); ++t)
            if (t < units[top].first || t > units[top].last) kept.push_back(text.ids[t - 1]);
        const double before = trace.probabilities[c];
        const double after = forward(model, kept).probabilities[c];
        item.fields = {{"class", static_cast<double>(c)},
                       {"units", static_cast<double>(units.size())},
                       {"deleted_first", static_cast<double>(units[top].first)},
                       {"deleted_last", static_cast<double>(units[top].last)},
                       {"y_before", before},
                       {"y_after", after},
                       {"drop", before - after}};
        if (check_clamps) clamped[i] = text_clamps(model, text.ids);
    });

    std::vector<double> before, after;
    for (const ItemRecord& item : report.items) {
        if (!item.skipped.empty()) continue;
        before.push_back(item.field("y_before"));
        after.push_back(item.field("y_after"));
    }
    finish_counts(report);
    report.clamped = static_cast<std::size_t>(std::count(clamped.begin(), clamped.end(), 1));
    report.scores = {{"faithfulness", faithfulness_score(before, after)}};
    return report;
}

EvalReport interpretability(const RnnModel& model, std::span<const EvalText> texts,
                            const SentimentLexicons& lexicons, const Attributor& attributor,
                            ClassIndex positive_class, Execution execution) {
    EvalReport report;
    report.metric = "interpretability";
    report.method = attributor.name;
    report.items.resize(texts.size());
    std::vector<char> clamped(texts.size(), 0);
    const bool check_clamps = counts_clamps(attributor, model);

    run_indexed(texts.size(), execution, [&](std::size_t i) {
        const EvalText& text = texts[i];
        ItemRecord& item = report.items[i];
        item.index = i;
        std::vector<std::size_t> pos, neg;
        for (std::size_t t = 0; t < text.words.size(); ++t) {
            const std::string w = lowercase(text.words[t]);
            if (lexicons.positive.contains(w)) pos.push_back(t);
            if (lexicons.negative.contains(w)) neg.push_back(t);
        }
        if (pos.empty() || neg.empty()) {
            item.skipped = "needs a positive and a negative lexicon word";
            return;
        }
        const std::vector<Span> words = word_spans(text.ids.size());
        const std::vector<double> scores = score_units(attributor, model, text.ids, words, positive_class);
        double pos_sum = 0.0, neg_sum = 0.0;
        for (std::size_t t : pos) pos_sum += scores[t];
        for (std::size_t t : neg) neg_sum += scores[t];
        const double pos_mean = pos_sum / static_cast<double>(pos.size());
        const double neg_mean = neg_sum / static_cast<double>(neg.size());
        item.fields = {{"positive_mean", pos_mean},
                       {"negative_mean", neg_mean},
                       {"match", pos_mean > neg_mean ? 1.0 : 0.0}};
        if (check_clamps) clamped[i] = text_clamps(model, text.ids);
    });

    std::size_t matches = 0, mismatches = 0;
    for (const ItemRecord& item : report.items) {
        if (!item.skipped.empty()) continue;
        if (item.field("match") > 0.5)
            ++matches;
        else
            ++mismatches;
    }
    finish_counts(report);
    report.clamped = static_cast<std::size_t>(std::count(clamped.begin(), clamped.end(), 1));
    report.scores = {{"interpretability", interpretability_score(matches, mismatches)},
                     {"matches", static_cast<double>(matches)},
                     {"mismatches", static_cast<double>(mismatches)}};
    return report;
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty set");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level outside [0, 1]");
    const double h = static_cast<double>(values.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    auto nth = values.begin() + static_cast<std::ptrdiff_t>(lo);
    std::nth_element(values.begin(), nth, values.end());
    const double below = *nth;
    if (lo + 1 >= values.size()) return below;
    const double above = *std::min_element(nth + 1, values.end());
    return below + (h - static_cast<double>(lo)) * (above - below);
}

PosDistribution pos_distribution(const RnnModel& model, std::span<const EvalText> texts,
                                 const Attributor& attributor, Execution execution) {
    PosDistribution out;
    EvalReport& report = out.report;
    report.metric = "pos-distribution";
    report.method = attributor.name;
    report.items.resize(texts.size());
    std::vector<std::vector<std::pair<CoarseTag, double>>> per_text(texts.size());

    run_indexed(texts.size(), execution, [&](std::size_t i) {
        const EvalText& text = texts[i];
        ItemRecord& item = report.items[i];
        item.index = i;
        std::vector<CoarseTag> tags;
        if (text.pos_tags)
            tags = tag(text.words, std::span<const std::string>(*text.pos_tags));
        else
            tags = tag(text.words);
        const ClassIndex c = forward(model, text.ids).predicted();
        const std::vector<Span> words = word_spans(text.ids.size());
        const std::vector<double> scores = score_units(attributor, model, text.ids, words, c);
        for (std::size_t t = 0; t < scores.size(); ++t) per_text[i].emplace_back(tags[t], scores[t]);
        item.fields = {{"class", static_cast<double>(c)}, {"words", static_cast<double>(scores.size())}};
    });

    std::vector<std::vector<double>> by_tag(std::size(kAllCoarseTags));
    for (const auto& text : per_text)
        for (const auto& [t, s] : text) by_tag[static_cast<std::size_t>(t)].push_back(s);

    for (CoarseTag t : kAllCoarseTags) {
        const auto& values = by_tag[static_cast<std::size_t>(t)];
        if (values.empty()) continue;
        TagStatistics st;
        st.tag = t;
        st.count = values.size();
        double sum = 0.0;
        for (double v : values) sum += v;
        st.mean = sum / static_cast<double>(values.size());
        st.q1 = quantile(values, 0.25);
        st.median = quantile(values, 0.5);
        st.q3 = quantile(values, 0.75);
        const double iqr = st.q3 - st.q1;
        st.lower_fence = st.q1 - 1.5 * iqr;
        st.upper_fence = st.q3 + 1.5 * iqr;
        st.outliers = static_cast<std::size_t>(std::count_if(
            values.begin(), values.end(), [&](double v) { return v < st.lower_fence || v > st.upper_fence; }));
        out.ranked.push_back(st);
    }
    std::stable_sort(out.ranked.begin(), out.ranked.end(),
                     [](const TagStatistics& a, const TagStatistics& b) { return a.median > b.median; });

    finish_counts(report);
    for (const TagStatistics& st : out.ranked) {
        const std::string name(to_string(st.tag));
        report.scores.emplace_back(name + ".count", static_cast<double>(st.count));
        report.scores.emplace_back(name + ".mean", st.mean);
        report.scores.emplace_back(name + ".median", st.median);
    }
    return out;
}

SwapReport adversarial_swap(const RnnModel& model, const Vocabulary& vocab, const std::vector<std::string>& words,
                            const std::string& word, const std::vector<std::string>& replacements) {
    SwapReport report;
    report.word = word;
    const auto it = std::find(words.begin(), words.end(), word);
    if (it == words.end()) {
        report.note = "word '" + word + "' does not occur in the text; nothing swapped";
        return report;
    }
    report.applied = true;
    report.position = static_cast<std::size_t>(it - words.begin()) + 1;

    std::vector<TokenId> ids = vocab.encode(words);
    const ForwardTrace before = forward(model, ids);
    const ClassIndex c = before.predicted();
    report.original_predicted = c;
    report.original_probability = before.probabilities[c];
    const double score_before = reat_word_scores(model, before, extract_alpha(before), c).spans[report.position - 1].score;

    for (const std::string& replacement : replacements) {
        SwapOutcome o;
        o.replacement = replacement;
        o.out_of_vocabulary = !vocab.contains(replacement);
        if (o.out_of_vocabulary)
            report.warnings.push_back("replacement '" + replacement + "' is out of vocabulary; using " +
                                      std::string(Vocabulary::kUnkToken));
        std::vector<TokenId> swapped = ids;
        swapped[report.position - 1] = vocab.lookup(replacement);
        const ForwardTrace after = forward(model, swapped);
        o.predicted = after.predicted();
        o.probability = after.probabilities[o.predicted];
        o.original_class_probability = after.probabilities[c];
        o.flipped = o.predicted != c;
        o.score_before = score_before;
        o.score_after = reat_word_scores(model, after, extract_alpha(after), c).spans[report.position - 1].score;
        report.outcomes.push_back(std::move(o));
    }
    return report;
}

std::vector<AttributionResult> attribute_batch(const RnnModel& model, std::span<const EvalText> texts,
                                               Method method, Execution execution, const BaselineOptions& options) {
    std::vector<AttributionResult> out(texts.size());
    run_indexed(texts.size(), execution, [&](std::size_t i) {
        const ClassIndex c = forward(model, texts[i].ids).predicted();
        out[i] = attribute_words(method, model, texts[i].ids, c, options);
        label_spans(out[i], texts[i].words);
    });
    return out;
}

void write_report(std::ostream& out, const EvalReport& report) {
    auto field = [](const std::string& s) { return s.empty() ? std::string("-") : s; };
    out << "#report\t" << report.metric << '\t' << field(report.dataset_id) << '\t' << field(report.model_id) << '\t'
        << report.method << '\t' << report.processed << '\t' << report.skipped << '\t' << report.clamped << '\n';
    for (const auto& [name, value] : report.scores) out << "score\t" << name << '\t' << format_real(value) << '\n';
    for (const ItemRecord& item : report.items) {
        out << "item\t" << item.index << '\t' << (item.skipped.empty() ? "ok" : "skipped:" + item.skipped);
        for (const auto& [name, value] : item.fields) out << '\t' << name << '=' << format_real(value);
        out << '\n';
    }
}

void write_summary(std::ostream& out, const std::vector<EvalReport>& reports) {
    char line[256];
    std::snprintf(line, sizeof line, "%-22s %-16s %-18s %10s %9s %8s %8s\n", "metric", "method", "dataset", "score",
                  "processed", "skipped", "clamped");
    out << line;
    for (const EvalReport& r : reports) {
        const double value = r.scores.empty() ? std::nan("") : r.scores.front().second;
        std::snprintf(line, sizeof line, "%-22s %-16s %-18s %10.4f %9zu %8zu %8zu\n", r.metric.c_str(),
                      r.method.c_str(), r.dataset_id.empty() ? "-" : r.dataset_id.c_str(), value, r.processed,
                      r.skipped, r.clamped);
        out << line;
    }
}

void write_pos_table(std::ostream& out, const PosDistribution& distribution) {
    char line[256];
    std::snprintf(line, sizeof line, "%-6s %7s %10s %10s %10s %10s %9s\n", "tag", "count", "q1", "median", "q3",
                  "mean", "outliers");
    out << line;
    for (const TagStatistics& st : distribution.ranked) {
        std::snprintf(line, sizeof line, "%-6s %7zu %10.4f %10.4f %10.4f %10.4f %9zu\n",
                      std::string(to_string(st.tag)).c_str(), st.count, st.q1, st.median, st.q3, st.mean,
                      st.outliers);
        out << line;
    }
}

void write_swap_report(std::ostream& out, const SwapReport& report) {
    if (!report.applied) {
        out << "#swap\tnot-applied\t" << report.note << '\n';
        return;
    }
    out << "#swap\t" << report.word << '\t' << report.position << '\t' << report.original_predicted << '\t'
        << format_real(report.original_probability) << '\n';
    for (const SwapOutcome& o : report.outcomes) {
        out << o.replacement << '\t' << (o.out_of_vocabulary ? "oov" : "in-vocab") << '\t' << o.predicted << '\t'
            << format_real(o.probability) << '\t' << format_real(o.original_class_probability) << '\t'
            << (o.flipped ? "flipped" : "kept") << '\t' << format_real(o.score_before) << '\t'
            << format_real(o.score_after) << '\n';
    }
    for (const std::string& w : report.warnings) out << "warning\t" << w << '\n';
}

}  // namespace reat
