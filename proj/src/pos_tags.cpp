#include "reat/pos_tags.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "reat_data.inc"

namespace reat {

std::string_view to_string(CoarseTag tag) noexcept {
    switch (tag) {
        case CoarseTag::verb: return "VERB";
        case CoarseTag::adv: return "ADV";
        case CoarseTag::part: return "PART";
        case CoarseTag::noun: return "NOUN";
        case CoarseTag::det: return "DET";
        case CoarseTag::adp: return "ADP";
        case CoarseTag::conj: return "CONJ";
        case CoarseTag::other: return "OTHER";
    }
    return "OTHER";
}

namespace {

std::optional<CoarseTag> parse_coarse(std::string_view name) {
    for (CoarseTag t : kAllCoarseTags)
        if (to_string(t) == name) return t;
    return std::nullopt;
}

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return out;
}

std::unordered_map<std::string, CoarseTag> load_tag_map() {
    std::unordered_map<std::string, CoarseTag> map;
    std::istringstream in{std::string(data::kTagMap)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw std::logic_error("tag_map.tsv: malformed line: " + line);
        const auto coarse = parse_coarse(line.substr(tab + 1));
        if (!coarse) throw std::logic_error("tag_map.tsv: unknown coarse tag in: " + line);
        map.emplace(line.substr(0, tab), *coarse);
    }
    return map;
}

std::unordered_map<std::string, CoarseTag> load_lexicon() {
    const std::array<std::pair<std::string_view, CoarseTag>, 8> lists{{
        {data::kLexiconDet, CoarseTag::det},
        {data::kLexiconAdp, CoarseTag::adp},
        {data::kLexiconConj, CoarseTag::conj},
        {data::kLexiconPart, CoarseTag::part},
        {data::kLexiconAdv, CoarseTag::adv},
        {data::kLexiconVerb, CoarseTag::verb},
        {data::kLexiconOther, CoarseTag::other},
        {data::kLexiconAdj, CoarseTag::other},
    }};
    std::unordered_map<std::string, CoarseTag> map;
    for (const auto& [text, tag] : lists) {
        std::istringstream in{std::string(text)};
        std::string word;
        while (in >> word) map.emplace(lowercase(word), tag);
    }
    return map;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() > suffix.size() + 1 && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

CoarseTag normalize_tag(std::string_view fine_tag) {
    static const auto map = load_tag_map();
    if (const auto it = map.find(std::string(fine_tag)); it != map.end()) return it->second;
    if (const auto coarse = parse_coarse(fine_tag)) return *coarse;
    return CoarseTag::other;
}

CoarseTag lexicon_tag(std::string_view token) {
    static const auto lexicon = load_lexicon();
    const std::string word = lowercase(token);
    if (const auto it = lexicon.find(word); it != lexicon.end()) return it->second;
    if (std::none_of(word.begin(), word.end(), [](unsigned char ch) { return std::isalnum(ch); }))
        return CoarseTag::other;
    if (std::all_of(word.begin(), word.end(), [](unsigned char ch) { return std::isdigit(ch) || ch == '.'; }))
        return CoarseTag::other;
    if (ends_with(word, "ly")) return CoarseTag::adv;
    if (ends_with(word, "ing") || ends_with(word, "ed")) return CoarseTag::verb;
    for (std::string_view adj : {"ous", "ful", "ive", "able", "ible", "less", "ic", "ish", "ent", "ant"})
        if (ends_with(word, adj)) return CoarseTag::other;
    return CoarseTag::noun;
}

std::vector<CoarseTag> tag(std::span<const std::string> tokens,
                           std::optional<std::span<const std::string>> external_tags) {
    if (tokens.empty()) throw std::invalid_argument("tag: empty token sequence");
    std::vector<CoarseTag> out;
    out.reserve(tokens.size());
    if (external_tags) {
        if (external_tags->size() != tokens.size())
            throw std::invalid_argument("tag: " + std::to_string(external_tags->size()) + " tags for " +
                                        std::to_string(tokens.size()) + " tokens");
        for (const std::string& t : *external_tags) out.push_back(normalize_tag(t));
        return out;
    }
    for (const std::string& t : tokens) out.push_back(lexicon_tag(t));
    return out;
}

}  // namespace reat
