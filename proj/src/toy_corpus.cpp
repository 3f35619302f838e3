#include "reat/toy_corpus.hpp"

#include <algorithm>
#include <array>
#include <string_view>

namespace reat {

namespace {

constexpr std::array<std::string_view, 10> kNouns = {"film",   "movie", "plot",   "story", "acting",
                                                     "cast",   "script", "ending", "music", "dialogue"};
constexpr std::array<std::string_view, 10> kPositive = {"good",       "great",     "excellent", "wonderful",
                                                        "brilliant",  "refreshing", "enjoyable", "delightful",
                                                        "superb",     "charming"};
constexpr std::array<std::string_view, 10> kNegative = {"bad",        "terrible", "awful",   "boring", "dull",
                                                        "ridiculous", "tedious",  "horrible", "weak",   "painful"};
constexpr std::array<std::string_view, 3> kDeterminers = {"the", "this", "that"};
constexpr std::array<std::string_view, 2> kCopulas = {"is", "was"};
constexpr std::array<std::string_view, 3> kIntensifiers = {"really", "very", "truly"};
constexpr std::array<std::string_view, 2> kNegators = {"not", "n't"};

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& words, Rng& rng) {
    return words[rng.below(N)];
}

struct Builder {
    LabeledText text;

    void push(std::string_view token, std::string_view tag) {
        text.tokens.emplace_back(token);
        text.pos_tags->emplace_back(tag);
    }
};

// Appends one clause; returns its polarity (1 positive, 0 negative).
int add_clause(Builder& b, Rng& rng, bool allow_negation) {
    b.push(pick(kDeterminers, rng), "DET");
    b.push(pick(kNouns, rng), "NOUN");
    b.push(pick(kCopulas, rng), "VERB");
    const bool negated = allow_negation && rng.uniform() < 0.4;
    if (negated) b.push(pick(kNegators, rng), "ADV");
    if (rng.uniform() < 0.3) b.push(pick(kIntensifiers, rng), "ADV");
    const bool positive = rng.uniform() < 0.5;
    b.push(positive ? pick(kPositive, rng) : pick(kNegative, rng), "OTHER");
    return (positive != negated) ? 1 : 0;
}

LabeledText sample_text(Rng& rng) {
    Builder b;
    b.text.pos_tags.emplace();
    int label = 0;
    if (rng.uniform() < 0.5) {
        label = add_clause(b, rng, true);
    } else {
        add_clause(b, rng, false);
        b.push("but", "CONJ");
        label = add_clause(b, rng, false);
    }
    if (rng.uniform() < 0.5) b.push(".", "OTHER");
    b.text.label = static_cast<ClassIndex>(label);
    return std::move(b.text);
}

std::vector<LabeledText> sample_split(Rng rng, std::size_t n) {
    std::vector<LabeledText> out;
    out.reserve(n);
    const std::size_t cap = (n + 1) / 2;
    std::array<std::size_t, 2> counts{0, 0};
    while (out.size() < n) {
        LabeledText t = sample_text(rng);
        if (counts[t.label] >= cap) continue;
        ++counts[t.label];
        out.push_back(std::move(t));
    }
    return out;
}

template <std::size_t N>
bool contains(const std::array<std::string_view, N>& words, const std::string& w) {
    return std::find(words.begin(), words.end(), w) != words.end();
}

}  // namespace

ToyCorpus generate_toy_corpus(std::uint64_t seed, std::size_t n_train, std::size_t n_test) {
    if (n_train == 0 || n_test == 0) throw std::invalid_argument("toy corpus sizes must be positive");
    Rng root(seed);
    ToyCorpus corpus;
    corpus.train = sample_split(root.split(), n_train);
    corpus.test = sample_split(root.split(), n_test);
    corpus.positive_words.assign(kPositive.begin(), kPositive.end());
    corpus.negative_words.assign(kNegative.begin(), kNegative.end());
    return corpus;
}

int toy_rule_label(const std::vector<std::string>& tokens) {
    auto clause_start = tokens.begin();
    for (auto it = tokens.begin(); it != tokens.end(); ++it)
        if (*it == "but") clause_start = it + 1;
    bool negated = false;
    int polarity = -1;
    for (auto it = clause_start; it != tokens.end(); ++it) {
        if (contains(kNegators, *it)) negated = true;
        if (contains(kPositive, *it)) polarity = 1;
        if (contains(kNegative, *it)) polarity = 0;
    }
    if (polarity < 0) return -1;
    return negated ? 1 - polarity : polarity;
}

}  // namespace reat
