#pragma once

// Accuracy, per-class and macro F1, invalid counts.
//
// count_as_wrong: an invalid prediction stays in the denominator and adds to the
// FN of its gold class, never to any class's FP.
// exclude: invalid predictions are dropped before counting.

#include <xicl/hash.hpp>
#include <xicl/runner.hpp>

#include <algorithm>
#include <span>

namespace xicl {

struct ClassCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
    double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
    double f1() const {
        const double p = precision();
        const double r = recall();
        return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    }

    bool operator==(const ClassCounts&) const = default;
};

struct MetricsReport {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::size_t n_invalid = 0;
    std::size_t n_total = 0;
    std::size_t n_correct = 0;
    ClassCounts hateful;
    ClassCounts not_hateful;
    InvalidPolicy invalid_policy = InvalidPolicy::count_as_wrong;
    std::string test_fingerprint;  // digest of the sorted test ids

    bool operator==(const MetricsReport&) const = default;
};

inline std::string test_fingerprint(std::span<const PredictionRecord> predictions) {
    std::vector<std::string> ids;
    ids.reserve(predictions.size());
    for (const auto& p : predictions) ids.push_back(p.test_id);
    std::sort(ids.begin(), ids.end());
    std::string buf;
    for (const auto& id : ids) buf += id + '\n';
    return sha256_hex(buf);
}

inline MetricsReport compute_metrics(std::span<const PredictionRecord> predictions,
                                     InvalidPolicy policy = InvalidPolicy::count_as_wrong) {
    if (predictions.empty()) throw DataError("cannot score an empty prediction list");
    MetricsReport m;
    m.invalid_policy = policy;
    m.n_total = predictions.size();
    m.test_fingerprint = test_fingerprint(predictions);
    for (const auto& p : predictions) {
        if (!p.gold_label) throw DataError("prediction for '" + p.test_id + "' has no gold label");
        const bool invalid = p.parsed_label == ParsedLabel::invalid;
        if (invalid) ++m.n_invalid;
        if (invalid && policy == InvalidPolicy::exclude) continue;

        const bool gold_h = *p.gold_label == Label::hateful;
        const bool pred_h = p.parsed_label == ParsedLabel::hateful;
        const bool pred_n = p.parsed_label == ParsedLabel::not_hateful;
        if (p.parsed_label == to_parsed(*p.gold_label)) ++m.n_correct;

        // hateful as the positive class
        if (gold_h && pred_h) ++m.hateful.tp;
        else if (!gold_h && pred_h) ++m.hateful.fp;
        else if (gold_h) ++m.hateful.fn;
        else ++m.hateful.tn;
        // not_hateful as the positive class
        if (!gold_h && pred_n) ++m.not_hateful.tp;
        else if (gold_h && pred_n) ++m.not_hateful.fp;
        else if (!gold_h) ++m.not_hateful.fn;
        else ++m.not_hateful.tn;
    }
    const std::size_t denominator = policy == InvalidPolicy::exclude ? m.n_total - m.n_invalid : m.n_total;
    m.accuracy = denominator == 0 ? 0.0 : static_cast<double>(m.n_correct) / static_cast<double>(denominator);
    m.macro_f1 = (m.hateful.f1() + m.not_hateful.f1()) / 2.0;
    return m;
}

}  // namespace xicl
