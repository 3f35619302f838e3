#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reat/model_store.hpp"

namespace reat {

/// Class indices used by the toy corpus and the interpretability harness.
inline constexpr ClassIndex kNegativeClass = 0;
inline constexpr ClassIndex kPositiveClass = 1;

/// Templated sentiment sentences with gold coarse POS tags.
///
/// A clause is "DET NOUN COPULA [ADV] ADJ" with the adjective drawn from the
/// positive or negative lexicon. Single-clause texts may insert a negator
/// ("not" / "n't") before the adjective, which flips the clause polarity.
/// Two-clause texts join clauses with "but" and take the polarity of the
/// second clause. Texts optionally end in ".". Each split is exactly
/// class-balanced (to within one text) by resampling.
struct ToyCorpus {
    std::vector<LabeledText> train;
    std::vector<LabeledText> test;
    std::vector<std::string> positive_words;
    std::vector<std::string> negative_words;
};

ToyCorpus generate_toy_corpus(std::uint64_t seed, std::size_t n_train, std::size_t n_test);

/// Label of a toy text by the generation rule (negation flips, last clause
/// after "but" decides). Returns nullopt-like -1 if the text has no
/// sentiment adjective.
int toy_rule_label(const std::vector<std::string>& tokens);

}  // namespace reat
