#pragma once

// Result tables in the layout
//   Model | # Shots | Dem. Samp. | Matching | Acc. | F1 | # Invalids
// rows ordered by model (first appearance), shots, then Random, TF-IDF, BM-25,
// content matching before rationale matching. Values print with 3 decimals.

#include <xicl/metrics.hpp>

#include <cstdio>
#include <map>

namespace xicl {

enum class Comparison { above, below, equal };

inline std::string_view to_string(Comparison c) {
    switch (c) {
        case Comparison::above: return "above";
        case Comparison::below: return "below";
        case Comparison::equal: return "equal";
    }
    return "?";
}

/// Accuracy of a few-shot cell relative to its zero-shot baseline.
inline Comparison compare_zero_shot(const MetricsReport& report, const MetricsReport& baseline) {
    if (report.test_fingerprint != baseline.test_fingerprint || report.n_total != baseline.n_total) {
        throw DataError("cannot compare cells scored on different test sets");
    }
    if (report.invalid_policy != baseline.invalid_policy) {
        throw DataError("cannot compare cells scored under different invalid policies");
    }
    if (report.accuracy > baseline.accuracy) return Comparison::above;
    if (report.accuracy < baseline.accuracy) return Comparison::below;
    return Comparison::equal;
}

struct ReportCell {
    CellDescriptor cell;
    MetricsReport metrics;
};

enum class TableFormat { markdown, csv };

inline TableFormat parse_table_format(std::string_view s) {
    if (s == "markdown" || s == "md") return TableFormat::markdown;
    if (s == "csv") return TableFormat::csv;
    throw UsageError("invalid table format '" + std::string(s) + "' (expected markdown or csv)");
}

inline std::string format3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

inline std::string shots_label(std::size_t shots) {
    return std::to_string(shots) + (shots == 1 || shots == 0 ? "-shot" : "-shots");
}

inline std::string sampling_label(Strategy s) {
    switch (s) {
        case Strategy::none: return "-";
        case Strategy::random: return "Random";
        case Strategy::tfidf: return "TF-IDF";
        case Strategy::bm25: return "BM-25";
    }
    return "?";
}

inline std::string matching_label(const CellDescriptor& c) {
    if (!c.matching_key) return "-";
    if (*c.matching_key == MatchingKey::rationale) return "Rationale";
    return c.support_modality == Modality::meme ? "Text + Cap." : "Text";
}

inline int strategy_rank(Strategy s) {
    switch (s) {
        case Strategy::none: return 0;
        case Strategy::random: return 1;
        case Strategy::tfidf: return 2;
        case Strategy::bm25: return 3;
    }
    return 4;
}

/// Sorts rows into table order. Stable for cells with identical keys.
inline std::vector<ReportCell> order_rows(std::vector<ReportCell> rows) {
    std::map<std::string, std::size_t> model_order;
    for (const auto& r : rows) model_order.emplace(r.cell.model, model_order.size());
    auto key = [&](const ReportCell& r) {
        const int matching = !r.cell.matching_key ? 0 : (*r.cell.matching_key == MatchingKey::content ? 1 : 2);
        return std::tuple(model_order.at(r.cell.model), r.cell.shots, strategy_rank(r.cell.strategy), matching,
                          r.cell.support_modality == Modality::meme, r.cell.name);
    };
    std::stable_sort(rows.begin(), rows.end(), [&](const ReportCell& a, const ReportCell& b) { return key(a) < key(b); });
    return rows;
}

/// Comparison of each row with the zero-shot row of the same model, test set and
/// invalid policy; empty for zero-shot rows and rows without a baseline.
inline std::vector<std::optional<Comparison>> baseline_comparisons(std::span<const ReportCell> rows) {
    std::vector<std::optional<Comparison>> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].cell.shots == 0) continue;
        for (const auto& base : rows) {
            if (base.cell.shots == 0 && base.cell.model == rows[i].cell.model &&
                base.metrics.test_fingerprint == rows[i].metrics.test_fingerprint &&
                base.metrics.invalid_policy == rows[i].metrics.invalid_policy) {
                out[i] = compare_zero_shot(rows[i].metrics, base.metrics);
                break;
            }
        }
    }
    return out;
}

namespace detail {
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}
}  // namespace detail

/// Markdown marks cells below their zero-shot baseline with a trailing '*'.
inline std::string emit_table(std::vector<ReportCell> cells, TableFormat format) {
    const auto rows = order_rows(std::move(cells));
    const auto versus = baseline_comparisons(rows);
    std::string out;
    if (format == TableFormat::csv) {
        out = "Model,# Shots,Dem. Samp.,Matching,Acc.,F1,# Invalids\n";
        for (const auto& r : rows) {
            out += detail::csv_field(r.cell.model) + "," + shots_label(r.cell.shots) + "," +
                   sampling_label(r.cell.strategy) + "," + detail::csv_field(matching_label(r.cell)) + "," +
                   format3(r.metrics.accuracy) + "," + format3(r.metrics.macro_f1) + "," +
                   std::to_string(r.metrics.n_invalid) + "\n";
        }
        return out;
    }
    out = "| Model | # Shots | Dem. Samp. | Matching | Acc. | F1 | # Invalids |\n";
    out += "|---|---|---|---|---:|---:|---:|\n";
    bool any_below = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const bool below = versus[i] == Comparison::below;
        any_below = any_below || below;
        out += "| " + r.cell.model + " | " + shots_label(r.cell.shots) + " | " + sampling_label(r.cell.strategy) +
               " | " + matching_label(r.cell) + " | " + format3(r.metrics.accuracy) + (below ? "*" : "") + " | " +
               format3(r.metrics.macro_f1) + " | " + std::to_string(r.metrics.n_invalid) + " |\n";
    }
    if (any_below) out += "\n\\* accuracy below the zero-shot baseline of the same model.\n";
    return out;
}

/// Loads and scores predictions files. `policy` overrides the policy recorded in
/// each file's header.
inline std::vector<ReportCell> score_files(std::span<const fs::path> files,
                                           std::optional<InvalidPolicy> policy = std::nullopt) {
    std::vector<ReportCell> cells;
    for (const auto& f : files) {
        auto pf = read_predictions(f);
        const auto effective = policy.value_or(pf.cell.invalid_policy);
        pf.cell.invalid_policy = effective;
        cells.push_back({pf.cell, compute_metrics(pf.records, effective)});
    }
    return cells;
}

}  // namespace xicl
