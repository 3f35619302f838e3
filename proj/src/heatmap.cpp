#include "reat/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace reat {

namespace {

struct Rgb {
    int r, g, b;
};

constexpr Rgb kWhite{255, 255, 255};
constexpr Rgb kGreen{0, 190, 0};
constexpr Rgb kRed{215, 0, 0};

int blend(int from, int to, double t) {
    return static_cast<int>(std::lround(static_cast<double>(from) + (static_cast<double>(to - from)) * t));
}

std::string fixed(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    std::string s(buf);
    if (s.find_first_not_of("-0.") == std::string::npos) s = s.substr(s[0] == '-' ? 1 : 0);  // no "-0.0000"
    return s;
}

}  // namespace

HeatmapSection heatmap_section(const AttributionResult& result, const std::string& level) {
    HeatmapSection s;
    s.caption = "method " + std::string(to_string(result.method)) + ", class " + std::to_string(result.target_class) +
                ", logit " + fixed(result.logit, 4);
    s.rows.push_back({level, result.spans});
    return s;
}

HeatmapSection heatmap_section(const HierarchicalAttribution& attribution) {
    HeatmapSection s = heatmap_section(attribution.word, "word");
    s.rows.push_back({"phrase", attribution.phrase.spans});
    if (attribution.clause) s.rows.push_back({"clause", attribution.clause->spans});
    return s;
}

std::string heatmap_color(double score, double max_abs) {
    Rgb c = kWhite;
    if (max_abs > 0.0 && score != 0.0) {
        const double t = std::min(1.0, std::abs(score) / max_abs);
        const Rgb& target = score > 0.0 ? kGreen : kRed;
        c = {blend(kWhite.r, target.r, t), blend(kWhite.g, target.g, t), blend(kWhite.b, target.b, t)};
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

std::string html_escape(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char ch : text) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&#39;"; break;
            default: out += ch;
        }
    }
    return out;
}

std::string render_heatmap(std::span<const HeatmapSection> sections) {
    double max_abs = 0.0;
    for (const auto& section : sections)
        for (const auto& row : section.rows) {
            if (row.spans.empty()) throw std::invalid_argument("heatmap row '" + row.level + "' has no spans");
            for (const auto& s : row.spans) max_abs = std::max(max_abs, std::abs(s.score));
        }

    std::string html;
    html += "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>attribution heatmap</title>\n</head>\n";
    html += "<body style=\"font-family:sans-serif;margin:16px\">\n";
    html += "<p style=\"font-size:12px;color:#555\">green: supports the class, red: opposes it; intensity = |score| / " +
            fixed(max_abs, 4) + "</p>\n";
    for (const auto& section : sections) {
        html += "<div style=\"margin-bottom:18px\">\n";
        html += "<p style=\"font-size:12px;color:#333;margin:4px 0\">" + html_escape(section.caption) + "</p>\n";
        html += "<table style=\"border-collapse:collapse\">\n";
        for (const auto& row : section.rows) {
            html += "<tr><th style=\"text-align:right;padding:4px 8px;font-size:12px;color:#555\">" +
                    html_escape(row.level) + "</th><td style=\"padding:4px 0\">";
            for (const auto& s : row.spans) {
                html += "<span style=\"display:inline-block;margin:0 2px;padding:2px 5px;border:1px solid #ddd;"
                        "background-color:" +
                        heatmap_color(s.score, max_abs) + "\" title=\"" + fixed(s.score, 4) + "\">" +
                        html_escape(s.text) + "</span>";
            }
            html += "</td></tr>\n";
        }
        html += "</table>\n</div>\n";
    }
    html += "</body>\n</html>\n";
    return html;
}

}  // namespace reat
