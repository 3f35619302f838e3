#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reat/decomposer.hpp"
#include "reat/pos_tags.hpp"

namespace reat {

enum class ChunkLabel : std::uint8_t { noun_chunk, verb_chunk, singleton };

std::string_view to_string(ChunkLabel label) noexcept;  // NOUN_CHUNK, VERB_CHUNK, SINGLETON

struct Chunk {
    Span span;
    ChunkLabel label = ChunkLabel::singleton;

    friend bool operator==(const Chunk&, const Chunk&) = default;
};

/// Sorted, contiguous chunks exactly covering [1, T].
struct PhrasePartition {
    std::vector<Chunk> chunks;

    std::vector<Span> spans() const;
};

/// Length of the longest match of  VERB* ADV* PART* VERB+ PART*  starting at
/// tags[start]; 0 if none.
std::size_t longest_verb_chunk(std::span<const CoarseTag> tags, std::size_t start);

/// Length of the longest match of  DET? (NOUN+ (ADP|CONJ))* NOUN+  starting
/// at tags[start]; 0 if none. (ADP|CONJ) is one token of either tag.
std::size_t longest_noun_chunk(std::span<const CoarseTag> tags, std::size_t start);

/// Left-to-right scan; at each position the longer of the two patterns wins
/// (NOUN on ties) and positions matching neither become singletons.
/// Throws std::invalid_argument on an empty sequence.
PhrasePartition chunk(std::span<const CoarseTag> tags);

/// ".", ",", ";" and "but" (any case).
bool is_clause_delimiter(std::string_view token);

/// Splits after each delimiter token, so delimiters end the clause they
/// follow. A segment made only of delimiters joins the next clause (or the
/// previous one at the end of the text). Throws on an empty sequence.
std::vector<Span> clauses(std::span<const std::string> tokens);

/// ".", "!" and "?".
bool is_sentence_delimiter(std::string_view token);
/// Same splitting rule as clauses() with the sentence delimiters.
std::vector<Span> sentences(std::span<const std::string> tokens);

struct HierarchicalAttribution {
    AttributionResult word;
    AttributionResult phrase;
    std::optional<AttributionResult> clause;
    PhrasePartition chunks;

    std::vector<const AttributionResult*> levels() const;
};

/// Word, phrase (over chunk(tags)) and clause scores for one text. REAT and
/// naive reuse one forward trace for every level; the baselines score words
/// once and sum them per span. Span text is filled from `words`.
HierarchicalAttribution hierarchy(const RnnModel& model, std::span<const TokenId> ids,
                                  std::span<const std::string> words, std::span<const CoarseTag> tags,
                                  ClassIndex target_class, Method method = Method::reat, bool with_clauses = true,
                                  const BaselineOptions& options = {});

}  // namespace reat
