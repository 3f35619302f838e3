#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace reat {

/// Closed tag alphabet used by the phrase chunker.
enum class CoarseTag : std::uint8_t { verb, adv, part, noun, det, adp, conj, other };

inline constexpr CoarseTag kAllCoarseTags[] = {CoarseTag::verb, CoarseTag::adv,  CoarseTag::part,
                                               CoarseTag::noun, CoarseTag::det,  CoarseTag::adp,
                                               CoarseTag::conj, CoarseTag::other};

std::string_view to_string(CoarseTag tag) noexcept;

/// Maps an external tag (Penn Treebank, NLTK universal, UD, or a coarse tag
/// name) to the coarse alphabet using the bundled table in
/// data/tag_map.tsv. Unknown tags map to OTHER.
CoarseTag normalize_tag(std::string_view fine_tag);

/// Bundled fallback tagger for one token: closed-class word lists
/// (data/lexicon/*.txt), then punctuation, then suffix heuristics, then NOUN.
CoarseTag lexicon_tag(std::string_view token);

/// Tags a token sequence. External tags, when given, are normalized and must
/// match the token count (std::invalid_argument otherwise).
std::vector<CoarseTag> tag(std::span<const std::string> tokens,
                           std::optional<std::span<const std::string>> external_tags = std::nullopt);

}  // namespace reat
