#pragma once

// Lexical retrieval over a support set: a shared tokenizer, an immutable
// inverted index, TF-IDF cosine and Okapi BM25 scoring, and deterministic top-k.
//
// TF-IDF: raw counts, idf(t) = ln((1 + N) / (1 + df(t))) + 1, L2-normalised
// vectors, cosine similarity.
// BM25 (Okapi): idf(t) = ln((N - df(t) + 0.5) / (df(t) + 0.5)); negative entries
// are replaced by epsilon * mean(idf) taken before replacement; k1 = 1.5,
// b = 0.75, epsilon = 0.25 by default.

#include <xicl/corpus.hpp>
#include <xicl/types.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xicl {

using TokenSeq = std::vector<std::string>;

namespace detail {
inline bool is_word_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}
}  // namespace detail

/// Lowercased maximal runs of two or more word characters ([A-Za-z0-9_]).
inline TokenSeq tokenize(std::string_view text) {
    TokenSeq tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!detail::is_word_byte(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && detail::is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
        if (j - i >= 2) tokens.push_back(ascii_lower(text.substr(i, j - i)));
        i = j;
    }
    return tokens;
}

/// Text a support record contributes to the index under `key`.
inline std::string matching_text(const Record& r, MatchingKey key) {
    if (key == MatchingKey::rationale) {
        if (!r.rationale || r.rationale->empty()) throw DataError("record '" + r.id + "' has no rationale");
        return *r.rationale;
    }
    if (r.modality == Modality::meme) {
        if (!r.caption || r.caption->empty()) throw DataError("meme '" + r.id + "' has no caption");
        return r.text + " " + *r.caption;
    }
    if (trim(r.text).empty()) throw DataError("record '" + r.id + "' has empty text");
    return r.text;
}

/// Text of a test record used as the retrieval query: its text plus caption.
inline std::string query_text(const Record& r) {
    return r.caption ? r.text + " " + *r.caption : r.text;
}

struct Bm25Params {
    double k1 = 1.5;
    double b = 0.75;
    double epsilon = 0.25;

    bool operator==(const Bm25Params&) const = default;
};

struct ScoredDoc {
    std::string record_id;
    double score = 0.0;
};

struct RankedHit {
    std::string record_id;
    double score = 0.0;
    std::size_t rank = 0;  // 1-based

    bool operator==(const RankedHit&) const = default;
};

/// Raw term counts of one document, sorted by term.
using TermCounts = std::map<std::string, std::uint32_t>;

inline TermCounts count_terms(const TokenSeq& tokens) {
    TermCounts counts;
    for (const auto& t : tokens) ++counts[t];
    return counts;
}

class RetrievalIndex {
public:
    struct Posting {
        std::uint32_t doc;
        std::uint32_t tf;
    };

    struct Term {
        std::string text;
        std::uint32_t df = 0;
        double idf = 0.0;
        std::vector<Posting> postings;
    };

    /// Builds from support records; document order is input order.
    static RetrievalIndex build(std::span<const Record> records, IndexKind kind, MatchingKey key,
                                Bm25Params params = {}) {
        std::vector<std::string> ids;
        std::vector<TermCounts> docs;
        ids.reserve(records.size());
        docs.reserve(records.size());
        for (const auto& r : records) {
            ids.push_back(r.id);
            docs.push_back(count_terms(tokenize(matching_text(r, key))));
        }
        return from_counts(kind, key, std::move(ids), std::move(docs), params);
    }

    static RetrievalIndex from_tokens(IndexKind kind, MatchingKey key, std::vector<std::string> ids,
                                      const std::vector<TokenSeq>& docs, Bm25Params params = {}) {
        std::vector<TermCounts> counts;
        counts.reserve(docs.size());
        for (const auto& d : docs) counts.push_back(count_terms(d));
        return from_counts(kind, key, std::move(ids), std::move(counts), params);
    }

    static RetrievalIndex from_counts(IndexKind kind, MatchingKey key, std::vector<std::string> ids,
                                      std::vector<TermCounts> docs, Bm25Params params = {}) {
        if (ids.empty()) throw DataError("cannot build a retrieval index over an empty corpus");
        if (ids.size() != docs.size()) throw DataError("index: id/document count mismatch");
        {
            std::vector<std::string> sorted = ids;
            std::sort(sorted.begin(), sorted.end());
            if (auto dup = std::adjacent_find(sorted.begin(), sorted.end()); dup != sorted.end()) {
                throw DataError("index: duplicate document id '" + *dup + "'");
            }
        }

        RetrievalIndex index;
        index.kind_ = kind;
        index.key_ = key;
        index.params_ = params;
        index.doc_ids_ = std::move(ids);
        index.doc_counts_ = std::move(docs);

        std::map<std::string, std::vector<Posting>> postings;
        index.doc_lengths_.reserve(index.doc_counts_.size());
        double total_length = 0.0;
        for (std::uint32_t d = 0; d < index.doc_counts_.size(); ++d) {
            std::uint64_t length = 0;
            for (const auto& [term, tf] : index.doc_counts_[d]) {
                postings[term].push_back({d, tf});
                length += tf;
            }
            index.doc_lengths_.push_back(length);
            total_length += static_cast<double>(length);
        }
        const double n = static_cast<double>(index.doc_ids_.size());
        index.avg_doc_length_ = total_length / n;

        index.terms_.reserve(postings.size());
        for (auto& [text, list] : postings) {
            Term t;
            t.text = text;
            t.df = static_cast<std::uint32_t>(list.size());
            t.postings = std::move(list);
            index.term_ids_.emplace(t.text, index.terms_.size());
            index.terms_.push_back(std::move(t));
        }

        if (kind == IndexKind::tfidf) {
            for (auto& t : index.terms_) t.idf = std::log((1.0 + n) / (1.0 + t.df)) + 1.0;
            index.doc_norms_.assign(index.doc_ids_.size(), 0.0);
            for (const auto& t : index.terms_) {
                for (const auto& p : t.postings) {
                    const double w = p.tf * t.idf;
                    index.doc_norms_[p.doc] += w * w;
                }
            }
            for (auto& norm : index.doc_norms_) norm = std::sqrt(norm);
        } else {
            double idf_sum = 0.0;
            for (auto& t : index.terms_) {
                t.idf = std::log((n - t.df + 0.5) / (t.df + 0.5));
                idf_sum += t.idf;
            }
            const double replacement =
                index.terms_.empty() ? 0.0 : params.epsilon * (idf_sum / static_cast<double>(index.terms_.size()));
            for (auto& t : index.terms_) {
                if (t.idf < 0.0) t.idf = replacement;
            }
        }
        return index;
    }

    IndexKind kind() const noexcept { return kind_; }
    MatchingKey matching_key() const noexcept { return key_; }
    const Bm25Params& params() const noexcept { return params_; }
    std::size_t n_docs() const noexcept { return doc_ids_.size(); }
    const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
    const std::vector<TermCounts>& doc_term_counts() const noexcept { return doc_counts_; }
    const std::vector<std::uint64_t>& doc_lengths() const noexcept { return doc_lengths_; }
    double avg_doc_length() const noexcept { return avg_doc_length_; }
    const std::vector<Term>& terms() const noexcept { return terms_; }

    const Term* find(const std::string& term) const {
        auto it = term_ids_.find(term);
        return it == term_ids_.end() ? nullptr : &terms_[it->second];
    }

    double idf(const std::string& term) const {
        const Term* t = find(term);
        return t ? t->idf : 0.0;
    }

    std::uint32_t df(const std::string& term) const {
        const Term* t = find(term);
        return t ? t->df : 0;
    }

    double doc_norm(std::size_t doc) const { return doc_norms_.at(doc); }

private:
    RetrievalIndex() = default;

    IndexKind kind_ = IndexKind::tfidf;
    MatchingKey key_ = MatchingKey::content;
    Bm25Params params_;
    std::vector<std::string> doc_ids_;
    std::vector<TermCounts> doc_counts_;
    std::vector<std::uint64_t> doc_lengths_;
    double avg_doc_length_ = 0.0;
    std::vector<Term> terms_;  // sorted by text
    std::unordered_map<std::string, std::size_t> term_ids_;
    std::vector<double> doc_norms_;  // tfidf only
};

/// Cosine of L2-normalised tf*idf vectors; one entry per document in index order.
/// Query terms outside the vocabulary are dropped; zero vectors score 0.
inline std::vector<ScoredDoc> score_tfidf(const RetrievalIndex& index, const TokenSeq& query) {
    if (index.kind() != IndexKind::tfidf) throw DataError("score_tfidf called on a bm25 index");
    std::vector<double> acc(index.n_docs(), 0.0);

    double query_norm = 0.0;
    std::vector<std::pair<const RetrievalIndex::Term*, double>> weights;
    for (const auto& [term, count] : count_terms(query)) {
        if (const auto* t = index.find(term)) {
            const double w = count * t->idf;
            weights.emplace_back(t, w);
            query_norm += w * w;
        }
    }
    query_norm = std::sqrt(query_norm);
    if (query_norm > 0.0) {
        for (const auto& [t, w] : weights) {
            for (const auto& p : t->postings) acc[p.doc] += (w / query_norm) * (p.tf * t->idf / index.doc_norm(p.doc));
        }
    }

    std::vector<ScoredDoc> out;
    out.reserve(index.n_docs());
    for (std::size_t d = 0; d < index.n_docs(); ++d) out.push_back({index.doc_ids()[d], acc[d]});
    return out;
}

/// Okapi BM25. Each query-token occurrence contributes once; out-of-vocabulary
/// tokens contribute 0.
inline std::vector<ScoredDoc> score_bm25(const RetrievalIndex& index, const TokenSeq& query) {
    if (index.kind() != IndexKind::bm25) throw DataError("score_bm25 called on a tfidf index");
    const auto& p = index.params();
    const double avgdl = index.avg_doc_length();
    std::vector<double> acc(index.n_docs(), 0.0);
    for (const auto& token : query) {
        const auto* t = index.find(token);
        if (!t) continue;
        for (const auto& post : t->postings) {
            const double tf = post.tf;
            const double dl = static_cast<double>(index.doc_lengths()[post.doc]);
            acc[post.doc] += t->idf * (tf * (p.k1 + 1.0)) / (tf + p.k1 * (1.0 - p.b + p.b * dl / avgdl));
        }
    }
    std::vector<ScoredDoc> out;
    out.reserve(index.n_docs());
    for (std::size_t d = 0; d < index.n_docs(); ++d) out.push_back({index.doc_ids()[d], acc[d]});
    return out;
}

inline std::vector<ScoredDoc> score(const RetrievalIndex& index, const TokenSeq& query) {
    return index.kind() == IndexKind::tfidf ? score_tfidf(index, query) : score_bm25(index, query);
}

/// Orders by descending score, ties by ascending record id.
inline bool hit_before(const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.record_id < b.record_id;
}

inline std::vector<RankedHit> top_k(std::span<const ScoredDoc> scores, std::size_t k) {
    std::vector<ScoredDoc> sorted(scores.begin(), scores.end());
    k = std::min(k, sorted.size());
    std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end(), hit_before);
    std::vector<RankedHit> hits;
    hits.reserve(k);
    for (std::size_t i = 0; i < k; ++i) hits.push_back({sorted[i].record_id, sorted[i].score, i + 1});
    return hits;
}

}  // namespace xicl
