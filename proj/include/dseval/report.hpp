#pragma once
// Plain-text and plot-ready rendering of score reports.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dseval/metrics.hpp"

namespace dseval::report {

using metrics::ScoreReport;
using json = nlohmann::json;

inline std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v * 100.0);
    return buf;
}

inline std::string pct_or_dash(const ScoreReport& r, bool forget) {
    if (!r.degradation || !r.degradation->defined) return "-";
    return pct(forget ? r.degradation->forget_rate : r.degradation->lead_astray_rate);
}

// Aligned table matching the headline column order:
// Knowledge Suff. | Search Score | Generation Score | Good Refusal F1 |
// Knowledge Util. F1 | Forget | Lead-astray | Pass@1
inline std::string render_table(const std::vector<std::pair<std::string, ScoreReport>>& rows) {
    std::vector<std::string> headers = {"Run",         "Knowledge Suff. (%)",
                                        "Search Score (%)", "Generation Score (%)",
                                        "Good Refusal F1 (%)", "Knowledge Util. F1 (%)",
                                        "Forget (%)",  "Lead-astray (%)",
                                        "Pass@1 (%)"};
    std::vector<std::vector<std::string>> cells;
    for (const auto& [name, r] : rows) {
        cells.push_back({name, pct(r.knowledge_score), pct(r.search_score), pct(r.gen_score),
                         pct(r.gr_f1), pct(r.ku_f1), pct_or_dash(r, true),
                         pct_or_dash(r, false), pct(r.pass_at_1)});
    }
    std::vector<std::size_t> widths(headers.size());
    for (std::size_t c = 0; c < headers.size(); ++c) {
        widths[c] = headers[c].size();
        for (const auto& row : cells) widths[c] = std::max(widths[c], row[c].size());
    }
    auto emit_row = [&](const std::vector<std::string>& row) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            line += row[c];
            line.append(widths[c] - row[c].size() + 2, ' ');
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        return line + "\n";
    };
    std::string out = emit_row(headers);
    std::size_t total = 0;
    for (auto w : widths) total += w + 2;
    out += std::string(total - 2, '-') + "\n";
    for (const auto& row : cells) out += emit_row(row);
    return out;
}

// (x = configuration label, y = metric) series for sweep plots.
inline json plot_data(const std::vector<std::pair<std::string, ScoreReport>>& rows) {
    json series = json::object();
    series["format_version"] = 1;
    auto add = [&](const char* metric, auto getter) {
        json points = json::array();
        for (const auto& [name, r] : rows) points.push_back({{"x", name}, {"y", getter(r)}});
        series[metric] = points;
    };
    add("knowledge_score", [](const ScoreReport& r) { return r.knowledge_score; });
    add("search_score", [](const ScoreReport& r) { return r.search_score; });
    add("gen_score", [](const ScoreReport& r) { return r.gen_score; });
    add("gr_f1", [](const ScoreReport& r) { return r.gr_f1; });
    add("ku_f1", [](const ScoreReport& r) { return r.ku_f1; });
    add("pass_at_1", [](const ScoreReport& r) { return r.pass_at_1; });
    return series;
}

}  // namespace dseval::report
