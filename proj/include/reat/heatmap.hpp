#pragma once

#include <span>
#include <string>
#include <vector>

#include "reat/chunker.hpp"
#include "reat/decomposer.hpp"

namespace reat {

struct HeatmapRow {
    std::string level;  // "word", "phrase", "clause"
    std::vector<SpanScore> spans;
};

struct HeatmapSection {
    std::string caption;
    std::vector<HeatmapRow> rows;
};

HeatmapSection heatmap_section(const AttributionResult& result, const std::string& level);
HeatmapSection heatmap_section(const HierarchicalAttribution& attribution);

/// Background color for a score given the document's max |score|: white
/// blended toward green (positive) or red (negative) by |score| / max_abs.
/// Zero scores and an all-zero document render white.
std::string heatmap_color(double score, double max_abs);

/// Self-contained HTML page (inline styles only), one table row per level.
/// Colors are normalized by the largest |score| in the whole document; span
/// text is HTML-escaped.
std::string render_heatmap(std::span<const HeatmapSection> sections);

std::string html_escape(std::string_view text);

}  // namespace reat
