#pragma once

// Index files are JSON lines:
//   line 1      header {"format":"xicl-index","version":1,kind,matching_key,n_docs,
//               n_terms,avg_doc_length,params,support_digest}
//   n_terms     {"term":t,"df":n} in term order
//   n_docs      {"id":id,"length":len,"tf":[[term_index,count],...]} in document order
// Loading rebuilds the index from the stored counts and cross-checks df and lengths.

#include <xicl/hash.hpp>
#include <xicl/retrieval.hpp>

#include <sstream>

namespace xicl {

inline constexpr int kIndexFormatVersion = 1;

/// Digest of the (id, matching text) pairs an index was built from.
inline std::string support_digest(std::span<const Record> records, MatchingKey key) {
    std::string buf;
    for (const auto& r : records) {
        buf += r.id;
        buf += '\x1f';
        buf += matching_text(r, key);
        buf += '\x1e';
    }
    return sha256_hex(buf);
}

struct LoadedIndex {
    RetrievalIndex index;
    std::string support_digest;
};

inline std::string serialize_index(const RetrievalIndex& index, const std::string& digest) {
    std::ostringstream out;
    ordered_json header;
    header["format"] = "xicl-index";
    header["version"] = kIndexFormatVersion;
    header["kind"] = to_string(index.kind());
    header["matching_key"] = to_string(index.matching_key());
    header["n_docs"] = index.n_docs();
    header["n_terms"] = index.terms().size();
    header["avg_doc_length"] = index.avg_doc_length();
    header["params"] = {{"k1", index.params().k1}, {"b", index.params().b}, {"epsilon", index.params().epsilon}};
    header["support_digest"] = digest;
    out << header.dump() << '\n';

    std::unordered_map<std::string, std::size_t> term_index;
    for (std::size_t i = 0; i < index.terms().size(); ++i) {
        const auto& t = index.terms()[i];
        term_index.emplace(t.text, i);
        ordered_json line;
        line["term"] = t.text;
        line["df"] = t.df;
        out << line.dump() << '\n';
    }
    for (std::size_t d = 0; d < index.n_docs(); ++d) {
        ordered_json line;
        line["id"] = index.doc_ids()[d];
        line["length"] = index.doc_lengths()[d];
        json tf = json::array();
        for (const auto& [term, count] : index.doc_term_counts()[d]) tf.push_back({term_index.at(term), count});
        line["tf"] = std::move(tf);
        out << line.dump() << '\n';
    }
    return out.str();
}

inline void save_index(const fs::path& path, const RetrievalIndex& index, const std::string& digest) {
    write_file_atomic(path, serialize_index(index, digest));
}

inline LoadedIndex load_index(const fs::path& path) {
    std::vector<json> lines;
    for_each_json_line(path, [&](const json& j, std::size_t) { lines.push_back(j); });
    const auto where = path.string();
    if (lines.empty()) throw DataError(where + ": empty index file");
    const json& h = lines.front();
    try {
        if (h.at("format") != "xicl-index") throw DataError(where + ": not an index file");
        if (h.at("version").get<int>() != kIndexFormatVersion) {
            throw DataError(where + ": unsupported index format version " + h.at("version").dump());
        }
        const auto kind = parse_index_kind(h.at("kind").get<std::string>());
        const auto key = parse_matching_key(h.at("matching_key").get<std::string>());
        const auto n_docs = h.at("n_docs").get<std::size_t>();
        const auto n_terms = h.at("n_terms").get<std::size_t>();
        Bm25Params params{h.at("params").at("k1").get<double>(), h.at("params").at("b").get<double>(),
                          h.at("params").at("epsilon").get<double>()};
        if (lines.size() != 1 + n_terms + n_docs) throw DataError(where + ": truncated index file");

        std::vector<std::string> terms;
        std::vector<std::uint32_t> dfs;
        for (std::size_t i = 0; i < n_terms; ++i) {
            terms.push_back(lines[1 + i].at("term").get<std::string>());
            dfs.push_back(lines[1 + i].at("df").get<std::uint32_t>());
        }
        std::vector<std::string> ids;
        std::vector<TermCounts> docs;
        for (std::size_t d = 0; d < n_docs; ++d) {
            const json& line = lines[1 + n_terms + d];
            ids.push_back(line.at("id").get<std::string>());
            TermCounts counts;
            for (const auto& pair : line.at("tf")) {
                counts.emplace(terms.at(pair.at(0).get<std::size_t>()), pair.at(1).get<std::uint32_t>());
            }
            docs.push_back(std::move(counts));
        }
        auto index = RetrievalIndex::from_counts(kind, key, std::move(ids), std::move(docs), params);
        if (index.terms().size() != n_terms) throw DataError(where + ": vocabulary size mismatch");
        for (std::size_t i = 0; i < n_terms; ++i) {
            if (index.terms()[i].text != terms[i] || index.terms()[i].df != dfs[i]) {
                throw DataError(where + ": document frequency mismatch for term '" + terms[i] + "'");
            }
        }
        for (std::size_t d = 0; d < n_docs; ++d) {
            if (index.doc_lengths()[d] != lines[1 + n_terms + d].at("length").get<std::uint64_t>()) {
                throw DataError(where + ": length mismatch for document '" + index.doc_ids()[d] + "'");
            }
        }
        return {std::move(index), h.at("support_digest").get<std::string>()};
    } catch (const json::exception& e) {
        throw DataError(where + ": malformed index: " + e.what());
    } catch (const UsageError& e) {
        throw DataError(where + ": " + e.what());
    }
}

}  // namespace xicl
