#pragma once

// Brute-force reference implementations used only by tests. They recompute the
// formulas from scratch over dense vectors and share no code with the library
// beyond plain data types.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Doc = std::vector<std::string>;

struct Scored {
    std::string id;
    double score;
};

inline std::vector<std::string> vocabulary(const std::vector<Doc>& docs) {
    std::set<std::string> v;
    for (const auto& d : docs) v.insert(d.begin(), d.end());
    return {v.begin(), v.end()};
}

inline double count(const Doc& d, const std::string& t) {
    return static_cast<double>(std::count(d.begin(), d.end(), t));
}

inline double doc_freq(const std::vector<Doc>& docs, const std::string& t) {
    double df = 0;
    for (const auto& d : docs) df += count(d, t) > 0 ? 1 : 0;
    return df;
}

// Smoothed idf: ln((1 + N) / (1 + df)) + 1, raw counts, L2 normalisation.
inline std::vector<double> tfidf_scores(const std::vector<Doc>& docs, const Doc& query) {
    const auto vocab = vocabulary(docs);
    const double n = static_cast<double>(docs.size());
    std::vector<double> idf;
    for (const auto& t : vocab) idf.push_back(std::log((1 + n) / (1 + doc_freq(docs, t))) + 1);
    auto vec = [&](const Doc& d) {
        std::vector<double> v;
        for (std::size_t i = 0; i < vocab.size(); ++i) v.push_back(count(d, vocab[i]) * idf[i]);
        double norm = 0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 0) {
            for (double& x : v) x /= norm;
        }
        return v;
    };
    const auto q = vec(query);
    std::vector<double> out;
    for (const auto& d : docs) {
        const auto dv = vec(d);
        double dot = 0;
        for (std::size_t i = 0; i < vocab.size(); ++i) dot += q[i] * dv[i];
        out.push_back(dot);
    }
    return out;
}

// Okapi BM25 with negative idf values floored to epsilon * mean(idf).
inline std::vector<double> bm25_scores(const std::vector<Doc>& docs, const Doc& query, double k1 = 1.5,
                                       double b = 0.75, double epsilon = 0.25) {
    const double n = static_cast<double>(docs.size());
    double total_len = 0;
    for (const auto& d : docs) total_len += static_cast<double>(d.size());
    const double avgdl = total_len / n;
    std::map<std::string, double> idf;
    double sum = 0;
    for (const auto& t : vocabulary(docs)) {
        const double df = doc_freq(docs, t);
        idf[t] = std::log((n - df + 0.5) / (df + 0.5));
        sum += idf[t];
    }
    const double floor = epsilon * sum / static_cast<double>(idf.size());
    for (auto& [t, v] : idf) {
        if (v < 0) v = floor;
    }
    std::vector<double> out;
    for (const auto& d : docs) {
        double s = 0;
        const double dl = static_cast<double>(d.size());
        for (const auto& t : query) {
            auto it = idf.find(t);
            if (it == idf.end()) continue;
            const double tf = count(d, t);
            s += it->second * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl));
        }
        out.push_back(s);
    }
    return out;
}

// Full sort, descending score, ascending id on ties.
inline std::vector<Scored> ranked(const std::vector<std::string>& ids, const std::vector<double>& scores,
                                  std::size_t k) {
    std::vector<Scored> all;
    for (std::size_t i = 0; i < ids.size(); ++i) all.push_back({ids[i], scores[i]});
    std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
        return a.score != b.score ? a.score > b.score : a.id < b.id;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

// Labels: 0 hateful, 1 not hateful, 2 invalid (predictions only).
struct Metrics {
    double accuracy;
    double macro_f1;
    int invalid;
};

inline Metrics metrics(const std::vector<int>& gold, const std::vector<int>& pred, bool exclude_invalid) {
    // confusion[g][p], p in {0, 1, 2}
    double confusion[2][3] = {};
    int invalid = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (pred[i] == 2) ++invalid;
        if (pred[i] == 2 && exclude_invalid) continue;
        confusion[gold[i]][pred[i]] += 1;
    }
    double total = 0;
    for (auto& row : confusion) {
        for (double c : row) total += c;
    }
    const double correct = confusion[0][0] + confusion[1][1];
    double f1_sum = 0;
    for (int c = 0; c < 2; ++c) {
        const double tp = confusion[c][c];
        const double fp = confusion[1 - c][c];
        const double fn = confusion[c][1 - c] + confusion[c][2];
        const double p = tp + fp > 0 ? tp / (tp + fp) : 0;
        const double r = tp + fn > 0 ? tp / (tp + fn) : 0;
        f1_sum += p + r > 0 ? 2 * p * r / (p + r) : 0;
    }
    return {total > 0 ? correct / total : 0, f1_sum / 2, invalid};
}

// Random corpora over a small vocabulary so terms repeat across documents.
inline std::vector<Doc> random_corpus(std::mt19937_64& rng, std::size_t max_docs = 50, std::size_t max_len = 20,
                                      std::size_t vocab_size = 30) {
    std::uniform_int_distribution<std::size_t> n_docs(1, max_docs), len(1, max_len), word(0, vocab_size - 1);
    std::vector<Doc> docs(n_docs(rng));
    for (auto& d : docs) {
        const auto l = len(rng);
        for (std::size_t i = 0; i < l; ++i) d.push_back("w" + std::to_string(word(rng)));
    }
    return docs;
}

inline Doc random_query(std::mt19937_64& rng, std::size_t vocab_size = 34) {
    std::uniform_int_distribution<std::size_t> len(1, 8), word(0, vocab_size - 1);
    Doc q(len(rng));
    for (auto& t : q) t = "w" + std::to_string(word(rng));
    return q;
}

}  // namespace oracle
