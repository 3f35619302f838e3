#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "reat/chunker.hpp"
#include "reat/decomposer.hpp"
#include "reat/model_store.hpp"

namespace reat {

enum class Execution { serial, parallel };

class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A text prepared for evaluation: surface words, their vocabulary ids and
/// optional external POS tags.
struct EvalText {
    std::vector<std::string> words;
    std::vector<TokenId> ids;
    std::optional<std::vector<std::string>> pos_tags;
};

EvalText make_eval_text(const Vocabulary& vocab, const LabeledText& text);
std::vector<EvalText> make_eval_texts(const Vocabulary& vocab, const std::vector<LabeledText>& texts);

struct SentimentLexicons {
    std::unordered_set<std::string> positive;
    std::unordered_set<std::string> negative;
};

/// One lowercase word per line; blank lines and lines starting with '#' are
/// ignored. Throws EvalError if a word is in both lists.
SentimentLexicons make_lexicons(const std::vector<std::string>& positive, const std::vector<std::string>& negative);
SentimentLexicons load_lexicons(const std::filesystem::path& positive, const std::filesystem::path& negative);

/// Scores a partition of one text for a class.
struct Attributor {
    std::string name;
    SpanAttributor score;
};

Attributor method_attributor(Method method, const BaselineOptions& options = {});
/// Uniform(-1, 1) scores, seeded by `seed` mixed with the text's token ids, so
/// results do not depend on evaluation order.
Attributor random_attributor(std::uint64_t seed);
/// Every unit scores 0 (the deletion then always removes the first unit).
Attributor constant_attributor();

struct ItemRecord {
    std::size_t index = 0;  // position of the text in the input
    std::string skipped;    // empty when processed, else the reason
    std::vector<std::pair<std::string, double>> fields;

    /// Value of a named field; throws std::out_of_range if absent.
    double field(std::string_view name) const;
};

struct EvalReport {
    std::string metric;
    std::string dataset_id;
    std::string model_id;
    std::string method;
    std::vector<std::pair<std::string, double>> scores;
    std::size_t processed = 0;
    std::size_t skipped = 0;
    std::size_t clamped = 0;  // texts whose LSTM retention hit the divide clamp (reat only)
    std::vector<ItemRecord> items;

    double score(std::string_view name) const;
};

enum class DeletionUnit { sentence, clause };

std::string_view to_string(DeletionUnit unit) noexcept;
DeletionUnit parse_deletion_unit(std::string_view name);
std::vector<Span> deletion_units(std::span<const std::string> words, DeletionUnit unit);

/// Mean of y_c(x) - y_c(x without its top-scoring unit), c the original
/// prediction, over texts with at least two units. Units are removed
/// entirely. Item fields: class, units, deleted_first, deleted_last,
/// y_before, y_after, drop. Throws EvalError if no text is eligible.
EvalReport faithfulness(const RnnModel& model, std::span<const EvalText> texts, const Attributor& attributor,
                        DeletionUnit unit, Execution execution = Execution::parallel);

/// matches / (matches + mismatches) over texts holding at least one positive
/// and one negative lexicon word. Word scores target `positive_class`; a match
/// needs the mean positive-word score strictly above the mean negative-word
/// score, each mean taken over occurrences. Item fields: positive_mean,
/// negative_mean, match. Throws EvalError if no text is eligible.
EvalReport interpretability(const RnnModel& model, std::span<const EvalText> texts,
                            const SentimentLexicons& lexicons, const Attributor& attributor,
                            ClassIndex positive_class, Execution execution = Execution::parallel);

/// Pure score arithmetic shared by the harnesses.
double faithfulness_score(std::span<const double> y_before, std::span<const double> y_after);
double interpretability_score(std::size_t matches, std::size_t mismatches);

struct TagStatistics {
    CoarseTag tag = CoarseTag::other;
    std::size_t count = 0;
    double mean = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double lower_fence = 0.0;  // q1 - 1.5 IQR
    double upper_fence = 0.0;  // q3 + 1.5 IQR
    std::size_t outliers = 0;
};

/// Linear-interpolation quantile (R type 7) of unsorted values, p in [0, 1].
double quantile(std::vector<double> values, double p);

struct PosDistribution {
    EvalReport report;
    std::vector<TagStatistics> ranked;  // nonempty categories, highest median first
};

/// Word scores toward each text's predicted class, grouped by coarse tag.
/// External tags are used when present, else the bundled tagger.
PosDistribution pos_distribution(const RnnModel& model, std::span<const EvalText> texts,
                                 const Attributor& attributor, Execution execution = Execution::parallel);

struct SwapOutcome {
    std::string replacement;
    bool out_of_vocabulary = false;  // replaced by <unk>
    ClassIndex predicted = 0;
    double probability = 0.0;           // of `predicted`
    double original_class_probability = 0.0;
    bool flipped = false;
    double score_before = 0.0;  // REAT score of the swapped position, original class
    double score_after = 0.0;
};

struct SwapReport {
    bool applied = false;
    std::string note;  // why nothing was swapped
    std::string word;
    std::size_t position = 0;  // 1-based; first occurrence
    ClassIndex original_predicted = 0;
    double original_probability = 0.0;
    std::vector<SwapOutcome> outcomes;
    std::vector<std::string> warnings;
};

/// Replaces the first occurrence of `word` by each replacement in turn.
SwapReport adversarial_swap(const RnnModel& model, const Vocabulary& vocab, const std::vector<std::string>& words,
                            const std::string& word, const std::vector<std::string>& replacements);

/// Attribution of many texts toward their predicted classes, one result per
/// text in input order.
std::vector<AttributionResult> attribute_batch(const RnnModel& model, std::span<const EvalText> texts,
                                               Method method, Execution execution = Execution::parallel,
                                               const BaselineOptions& options = {});

// ---------------------------------------------------------------------------
// Report output. Records are tab-separated:
//   #report  metric dataset model method processed skipped clamped
//   score    name value
//   item     index status [name=value ...]
// ---------------------------------------------------------------------------
void write_report(std::ostream& out, const EvalReport& report);
void write_summary(std::ostream& out, const std::vector<EvalReport>& reports);
void write_pos_table(std::ostream& out, const PosDistribution& distribution);
void write_swap_report(std::ostream& out, const SwapReport& report);

}  // namespace reat
