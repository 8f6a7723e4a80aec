#pragma once

// One experiment cell end to end: load support/test sets, pick demonstrations,
// build prompts, query the gateway, parse answers, persist predictions.
//
// Predictions file (JSON lines): a header
//   {"type":"header","harness":"xicl","version":...,"config_hash":...,"cell":{...},"config":{...}}
// followed by one PredictionRecord per test record in test-set order.

#include <xicl/corpus.hpp>
#include <xicl/gateway.hpp>
#include <xicl/index_io.hpp>
#include <xicl/parallel.hpp>
#include <xicl/prompt.hpp>
#include <xicl/retrieval.hpp>
#include <xicl/sampling.hpp>
#include <xicl/version.hpp>

#include <fstream>
#include <mutex>
#include <set>

namespace xicl {

struct ExperimentConfig {
    std::string name;  // cell name; derived from the fields below when empty
    std::string model_id;
    std::string endpoint;
    fs::path support_path;
    Modality support_modality = Modality::text_post;
    std::optional<fs::path> support_captions;
    std::optional<fs::path> support_rationales;
    fs::path test_path;
    Modality test_modality = Modality::meme;
    std::optional<fs::path> test_captions;
    std::size_t shots = 0;
    Strategy strategy = Strategy::random;
    MatchingKey matching_key = MatchingKey::content;
    std::int64_t seed = 0;
    InvalidPolicy invalid_policy = InvalidPolicy::count_as_wrong;
    bool balance_labels = false;
    double temperature = 0.0;
    int max_tokens = 256;
    fs::path cache_dir;
    fs::path output_dir = "runs";

    /// shots = 0 ignores the strategy.
    Strategy effective_strategy() const { return shots == 0 ? Strategy::none : strategy; }

    /// Only similarity strategies use a matching key.
    std::optional<MatchingKey> effective_matching_key() const {
        const auto s = effective_strategy();
        if (s == Strategy::tfidf || s == Strategy::bm25) return matching_key;
        return std::nullopt;
    }

    DecodingParams decoding() const { return {model_id, temperature, max_tokens}; }
};

inline void validate(const ExperimentConfig& c) {
    if (c.model_id.empty()) throw UsageError("--model is required");
    if (c.support_path.empty() && c.shots > 0) throw UsageError("--support is required when shots > 0");
    if (c.test_path.empty()) throw UsageError("--test is required");
    if (c.shots > 0 && c.strategy == Strategy::none) throw UsageError("shots > 0 needs a strategy (random, tfidf, bm25)");
    validate(c.decoding());
}

inline std::string sanitize_name(std::string_view s) {
    std::string out;
    for (unsigned char c : s) {
        out += (std::isalnum(c) || c == '-' || c == '.' || c == '_') ? static_cast<char>(c) : '_';
    }
    return out;
}

inline std::string cell_name(const ExperimentConfig& c) {
    if (!c.name.empty()) return sanitize_name(c.name);
    std::string out = sanitize_name(c.model_id) + "__" + std::to_string(c.shots) + "shot";
    if (c.effective_strategy() != Strategy::none) out += "__" + std::string(to_string(c.effective_strategy()));
    if (auto k = c.effective_matching_key()) out += "__" + std::string(to_string(*k));
    if (c.balance_labels && c.shots > 0) out += "__balanced";
    return out;
}

inline fs::path predictions_path(const ExperimentConfig& c) { return c.output_dir / (cell_name(c) + ".jsonl"); }

namespace detail {
inline json file_digest(const std::optional<fs::path>& p) {
    if (!p || p->empty()) return nullptr;
    return sha256_hex(read_file(*p));
}
}  // namespace detail

/// Everything that determines the predictions, with ignored fields dropped and
/// input files identified by content digest rather than path.
inline ordered_json canonical_config(const ExperimentConfig& c, const PromptTemplates& tpl = PromptTemplates::defaults()) {
    ordered_json j;
    j["model_id"] = c.model_id;
    j["endpoint"] = c.endpoint;
    j["decoding"] = {{"temperature", c.temperature}, {"max_tokens", c.max_tokens}};
    j["shots"] = c.shots;
    j["strategy"] = to_string(c.effective_strategy());
    const auto key = c.effective_matching_key();
    j["matching_key"] = key ? ordered_json(std::string(to_string(*key))) : ordered_json(nullptr);
    j["seed"] = c.effective_strategy() == Strategy::random ? ordered_json(c.seed) : ordered_json(nullptr);
    j["balance_labels"] = c.shots > 0 && c.balance_labels;
    if (c.shots > 0) {
        j["support"] = {{"sha256", detail::file_digest(c.support_path)},
                        {"modality", to_string(c.support_modality)},
                        {"captions_sha256", detail::file_digest(c.support_captions)},
                        {"rationales_sha256", detail::file_digest(c.support_rationales)}};
    } else {
        j["support"] = nullptr;
    }
    j["test"] = {{"sha256", detail::file_digest(c.test_path)},
                 {"modality", to_string(c.test_modality)},
                 {"captions_sha256", detail::file_digest(c.test_captions)}};
    j["templates"] = {{"version", tpl.version}, {"sha256", sha256_hex(tpl.system + '\0' + tpl.post + '\0' + tpl.meme)}};
    return j;
}

inline std::string config_hash(const ExperimentConfig& c, const PromptTemplates& tpl = PromptTemplates::defaults()) {
    return sha256_hex(canonical_config(c, tpl).dump());
}

// Answers ---------------------------------------------------------------------

/// First line, after leading whitespace and an optional "Answer:" prefix:
/// "not hateful" / "non-hateful" -> not_hateful, else "hateful" -> hateful,
/// else invalid. Case-insensitive.
inline ParsedLabel parse_answer(std::string_view raw) {
    auto text = trim(raw);
    if (ascii_lower(text.substr(0, 7)) == "answer:") text = trim(text.substr(7));
    const auto first_line = ascii_lower(text.substr(0, text.find('\n')));
    if (first_line.starts_with("not hateful") || first_line.starts_with("non-hateful")) return ParsedLabel::not_hateful;
    if (first_line.starts_with("hateful")) return ParsedLabel::hateful;
    return ParsedLabel::invalid;
}

struct PredictionRecord {
    std::string test_id;
    std::vector<std::string> demo_ids;
    std::string raw_response;
    ParsedLabel parsed_label = ParsedLabel::invalid;
    std::optional<Label> gold_label;
    std::string prompt_hash;
    std::int64_t latency_ms = 0;
    std::optional<std::string> error;  // gateway failure, counted as invalid

    bool operator==(const PredictionRecord&) const = default;
};

inline ordered_json to_json(const PredictionRecord& p) {
    ordered_json j;
    j["test_id"] = p.test_id;
    j["demo_ids"] = p.demo_ids;
    j["raw_response"] = p.raw_response;
    j["parsed_label"] = to_string(p.parsed_label);
    j["gold_label"] = p.gold_label ? ordered_json(std::string(to_string(*p.gold_label))) : ordered_json(nullptr);
    j["prompt_hash"] = p.prompt_hash;
    j["latency_ms"] = p.latency_ms;
    if (p.error) j["error"] = *p.error;
    return j;
}

template <class Json>
PredictionRecord prediction_from_json(const Json& j) {
    PredictionRecord p;
    p.test_id = j.at("test_id").template get<std::string>();
    p.demo_ids = j.at("demo_ids").template get<std::vector<std::string>>();
    p.raw_response = j.at("raw_response").template get<std::string>();
    p.parsed_label = parse_parsed_label(j.at("parsed_label").template get<std::string>());
    if (!j.at("gold_label").is_null()) p.gold_label = parse_label(j.at("gold_label").template get<std::string>());
    p.prompt_hash = j.at("prompt_hash").template get<std::string>();
    p.latency_ms = j.at("latency_ms").template get<std::int64_t>();
    if (j.contains("error")) p.error = j.at("error").template get<std::string>();
    return p;
}

/// Cell descriptor as stored in a predictions header.
struct CellDescriptor {
    std::string name;
    std::string model;
    std::size_t shots = 0;
    Strategy strategy = Strategy::none;
    std::optional<MatchingKey> matching_key;
    Modality support_modality = Modality::text_post;
    InvalidPolicy invalid_policy = InvalidPolicy::count_as_wrong;

    bool operator==(const CellDescriptor&) const = default;
};

inline CellDescriptor describe(const ExperimentConfig& c) {
    return {cell_name(c), c.model_id, c.shots, c.effective_strategy(), c.effective_matching_key(), c.support_modality,
            c.invalid_policy};
}

inline ordered_json to_json(const CellDescriptor& d) {
    ordered_json j;
    j["name"] = d.name;
    j["model"] = d.model;
    j["shots"] = d.shots;
    j["strategy"] = to_string(d.strategy);
    j["matching_key"] = d.matching_key ? ordered_json(std::string(to_string(*d.matching_key))) : ordered_json(nullptr);
    j["support_modality"] = to_string(d.support_modality);
    j["invalid_policy"] = to_string(d.invalid_policy);
    return j;
}

template <class Json>
CellDescriptor cell_from_json(const Json& j) {
    CellDescriptor d;
    d.name = j.at("name").template get<std::string>();
    d.model = j.at("model").template get<std::string>();
    d.shots = j.at("shots").template get<std::size_t>();
    d.strategy = parse_strategy(j.at("strategy").template get<std::string>());
    if (!j.at("matching_key").is_null()) d.matching_key = parse_matching_key(j.at("matching_key").template get<std::string>());
    d.support_modality = parse_modality(j.at("support_modality").template get<std::string>());
    d.invalid_policy = parse_invalid_policy(j.at("invalid_policy").template get<std::string>());
    return d;
}

struct PredictionsFile {
    ordered_json header;
    std::string config_hash;
    CellDescriptor cell;
    std::vector<PredictionRecord> records;  // file order; later duplicates dropped
};

/// Reads a predictions file. With `tolerate_torn_tail`, a malformed final line
/// (an interrupted append) is ignored. Later lines for the same test id replace
/// earlier ones.
inline PredictionsFile read_predictions(const fs::path& path, bool tolerate_torn_tail = false) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!trim(line).empty()) lines.push_back(std::move(line));
    }
    if (lines.empty()) throw DataError(path.string() + ": empty predictions file");
    PredictionsFile out;
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto where = line_context(path, i + 1);
        try {
            const auto j = ordered_json::parse(lines[i]);
            if (i == 0) {
                if (j.value("type", "") != "header") throw DataError(where + ": missing predictions header");
                out.header = j;
                out.config_hash = j.at("config_hash").get<std::string>();
                out.cell = cell_from_json(j.at("cell"));
                continue;
            }
            auto p = prediction_from_json(j);
            if (auto it = position.find(p.test_id); it != position.end()) {
                out.records[it->second] = std::move(p);
            } else {
                position.emplace(p.test_id, out.records.size());
                out.records.push_back(std::move(p));
            }
        } catch (const json::exception& e) {
            if (tolerate_torn_tail && i + 1 == lines.size() && i > 0) break;
            throw DataError(where + ": malformed prediction line: " + e.what());
        } catch (const UsageError& e) {
            throw DataError(where + ": " + e.what());
        }
    }
    return out;
}

// Inputs ----------------------------------------------------------------------

struct ExperimentData {
    std::vector<Record> test;
    std::vector<Record> support;  // eligible demonstrations only, file order
    std::size_t excluded_missing_caption = 0;
    std::size_t excluded_missing_rationale = 0;
};

/// Support records usable as demonstrations under `c`, in file order. Memes
/// without captions are dropped (and counted); so are records without a
/// rationale when matching on rationales.
inline std::vector<Record> load_support_set(const ExperimentConfig& c, ExperimentData* counts = nullptr) {
    const auto key = c.effective_matching_key();
    if (key == MatchingKey::rationale && !c.support_rationales) {
        throw DataError("matching on rationales needs a rationale sidecar (--support-rationales)");
    }
    auto support = load_dataset(c.support_path, c.support_modality);
    if (c.support_captions) support = merge_sidecar(std::move(support), *c.support_captions, SidecarField::caption);
    if (c.support_rationales) {
        support = merge_sidecar(std::move(support), *c.support_rationales, SidecarField::rationale);
    }
    std::vector<Record> eligible;
    for (auto& r : support) {
        if (!r.label) throw DataError("support record '" + r.id + "' has no label");
        if (r.modality == Modality::meme && !r.caption) {
            if (counts) ++counts->excluded_missing_caption;
            continue;
        }
        if (key == MatchingKey::rationale && !r.rationale) {
            if (counts) ++counts->excluded_missing_rationale;
            continue;
        }
        eligible.push_back(std::move(r));
    }
    if (eligible.empty()) throw DataError("no usable support records in '" + c.support_path.string() + "'");
    return eligible;
}

inline ExperimentData load_experiment_data(const ExperimentConfig& c) {
    ExperimentData data;
    data.test = load_dataset(c.test_path, c.test_modality);
    if (c.test_captions) data.test = merge_sidecar(std::move(data.test), *c.test_captions, SidecarField::caption);
    for (const auto& r : data.test) {
        if (!r.label) throw DataError("test record '" + r.id + "' has no label; scoring needs gold labels");
        if (r.modality == Modality::meme && !r.caption) {
            throw DataError("test meme '" + r.id + "' has no caption; merge a caption sidecar (--test-captions)");
        }
    }
    if (c.shots > 0) data.support = load_support_set(c, &data);
    return data;
}

struct RunOptions {
    std::shared_ptr<const RetrievalIndex> index;  // prebuilt index for the cell's strategy
    std::optional<std::string> index_digest;      // support digest stored with `index`
    bool build_index = false;
    std::optional<fs::path> dump_prompts_dir;
    std::optional<PromptTemplates> templates;
    std::size_t max_in_flight = 4;
    bool overwrite = false;  // ignore an existing predictions file instead of resuming
};

struct RunResult {
    std::vector<PredictionRecord> predictions;
    fs::path output;
    std::string config_hash;
    std::size_t computed = 0;
    std::size_t reused = 0;
    std::size_t gateway_failures = 0;
};

// Demonstration selection -----------------------------------------------------

namespace detail {

/// First k entries of `ordered` with at most k/2 hateful and k - k/2 not hateful;
/// a class that runs short is topped up from the other in order.
inline std::vector<std::string> pick_balanced(const std::vector<std::string>& ordered,
                                              const std::unordered_map<std::string_view, const Record*>& by_id,
                                              std::size_t k) {
    const std::size_t want_h = k / 2;
    const std::size_t want_n = k - want_h;
    std::vector<char> taken(ordered.size(), 0);
    std::size_t h = 0, nh = 0, total = 0;
    for (std::size_t i = 0; i < ordered.size() && total < k; ++i) {
        const bool hateful = by_id.at(ordered[i])->label == Label::hateful;
        if (hateful ? h < want_h : nh < want_n) {
            taken[i] = 1;
            (hateful ? h : nh)++;
            ++total;
        }
    }
    for (std::size_t i = 0; i < ordered.size() && total < k; ++i) {
        if (!taken[i]) {
            taken[i] = 1;
            ++total;
        }
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        if (taken[i]) out.push_back(ordered[i]);
    }
    return out;
}

}  // namespace detail

class ExperimentRunner {
public:
    /// `gateway` may be null when only prompts are needed (dump_prompts, bundle_for).
    ExperimentRunner(ExperimentConfig config, Gateway* gateway, RunOptions options = {})
        : config_(std::move(config)), gateway_(gateway), options_(std::move(options)),
          templates_(options_.templates.value_or(PromptTemplates::defaults())) {
        validate(config_);
        hash_ = config_hash(config_, templates_);
        data_ = load_experiment_data(config_);
        for (const auto& r : data_.support) support_by_id_.emplace(r.id, &r);
        prepare_index();
    }

    ExperimentRunner(const ExperimentRunner&) = delete;
    ExperimentRunner& operator=(const ExperimentRunner&) = delete;

    const ExperimentConfig& config() const noexcept { return config_; }
    const std::string& hash() const noexcept { return hash_; }
    const ExperimentData& data() const noexcept { return data_; }
    const RetrievalIndex* index() const noexcept { return index_.get(); }

    /// Demonstration hits for the test record at `ordinal`, ranked (similarity)
    /// or in draw order (random). Never contains the test record itself.
    std::vector<RankedHit> select(std::size_t ordinal) const {
        const auto& test = data_.test.at(ordinal);
        const std::size_t k = config_.shots;
        if (k == 0) return {};
        std::vector<std::string> ids;
        if (config_.effective_strategy() == Strategy::random) {
            std::span<const Record> candidates = data_.support;
            std::vector<Record> without_self;
            if (support_by_id_.count(test.id)) {
                std::copy_if(data_.support.begin(), data_.support.end(), std::back_inserter(without_self),
                             [&](const Record& r) { return r.id != test.id; });
                candidates = without_self;
            }
            const auto seed = static_cast<std::uint64_t>(config_.seed);
            if (config_.balance_labels) {
                const auto perm = random_sample(candidates, candidates.size(), seed, ordinal);
                ids = detail::pick_balanced(perm, support_by_id_, k);
            } else {
                ids = random_sample(candidates, k, seed, ordinal);
            }
            std::vector<RankedHit> hits;
            for (auto& id : ids) hits.push_back({std::move(id), 0.0, hits.size() + 1});
            return hits;
        }

        auto scores = score(*index_, tokenize(query_text(test)));
        std::erase_if(scores, [&](const ScoredDoc& s) { return s.record_id == test.id; });
        if (!config_.balance_labels) return top_k(scores, k);
        const auto ranked = top_k(scores, scores.size());
        std::vector<std::string> order;
        std::unordered_map<std::string, double> score_of;
        for (const auto& h : ranked) {
            order.push_back(h.record_id);
            score_of.emplace(h.record_id, h.score);
        }
        std::vector<RankedHit> hits;
        for (auto& id : detail::pick_balanced(order, support_by_id_, k)) {
            hits.push_back({id, score_of.at(id), hits.size() + 1});
        }
        return hits;
    }

    PromptBundle bundle_for(std::size_t ordinal) const {
        const auto hits = select(ordinal);
        const auto demos = order_demonstrations(hits, config_.effective_strategy(), data_.support, templates_);
        auto bundle = build_classification_prompt(data_.test.at(ordinal), demos, templates_);
        bundle.meta.strategy = config_.effective_strategy();
        bundle.meta.matching_key = config_.effective_matching_key();
        return bundle;
    }

    ordered_json header() const {
        ordered_json h;
        h["type"] = "header";
        h["harness"] = kHarnessName;
        h["version"] = kHarnessVersion;
        h["config_hash"] = hash_;
        h["cell"] = to_json(describe(config_));
        h["config"] = canonical_config(config_, templates_);
        return h;
    }

    /// Writes every bundle as a transcript under <dir>/<cell>/.
    void dump_prompts(const fs::path& dir) const {
        const auto cell_dir = dir / cell_name(config_);
        fs::create_directories(cell_dir);
        for (std::size_t i = 0; i < data_.test.size(); ++i) write_transcript(cell_dir, i, bundle_for(i));
    }

    /// Runs the cell, resuming from `partial` (or the cell's own output file if it
    /// exists) and writing the complete, test-ordered file to the output path.
    RunResult run(std::optional<fs::path> partial = std::nullopt) {
        if (!gateway_) throw UsageError("experiment runner has no gateway");
        RunResult result;
        result.output = predictions_path(config_);
        result.config_hash = hash_;

        std::unordered_map<std::string, PredictionRecord> existing;
        if (!partial && !options_.overwrite && fs::exists(result.output)) partial = result.output;
        if (partial) {
            auto file = read_predictions(*partial, true);
            if (file.config_hash != hash_) {
                throw DataError("'" + partial->string() + "' was produced by a different configuration (config hash " +
                                file.config_hash.substr(0, 12) + " vs " + hash_.substr(0, 12) +
                                "); use a new --output-dir or pass --overwrite");
            }
            std::set<std::string> test_ids;
            for (const auto& t : data_.test) test_ids.insert(t.id);
            for (auto& p : file.records) {
                if (!test_ids.count(p.test_id)) {
                    throw DataError("'" + partial->string() + "' has a prediction for unknown test id '" + p.test_id + "'");
                }
                if (!p.error) existing.emplace(p.test_id, std::move(p));
            }
        }

        const std::size_t n = data_.test.size();
        std::vector<std::optional<PredictionRecord>> slots(n);
        std::vector<std::size_t> todo;
        for (std::size_t i = 0; i < n; ++i) {
            if (auto it = existing.find(data_.test[i].id); it != existing.end()) {
                slots[i] = std::move(it->second);
                ++result.reused;
            } else {
                todo.push_back(i);
            }
        }

        // Append new records as their test-order prefix completes; an interrupted
        // run leaves a resumable file. The final file is rewritten in test order.
        fs::create_directories(result.output.parent_path().empty() ? fs::path(".") : result.output.parent_path());
        const bool appending = partial && *partial == result.output;
        bool torn_tail = false;
        if (appending) {
            const auto existing_bytes = read_file(result.output);
            torn_tail = !existing_bytes.empty() && existing_bytes.back() != '\n';
        }
        std::ofstream journal(result.output, appending ? std::ios::app : std::ios::trunc);
        if (!journal) throw DataError("cannot write '" + result.output.string() + "'");
        if (torn_tail) journal << '\n';
        if (!appending) journal << header().dump() << '\n' << std::flush;

        std::mutex flush_mutex;
        std::size_t flushed = 0;
        std::vector<char> done(todo.size(), 0);
        std::optional<fs::path> transcript_dir;
        if (options_.dump_prompts_dir) {
            transcript_dir = *options_.dump_prompts_dir / cell_name(config_);
            fs::create_directories(*transcript_dir);
        }
        const auto params = config_.decoding();

        parallel_for(todo.size(), options_.max_in_flight, [&](std::size_t t) {
            const std::size_t i = todo[t];
            const auto bundle = bundle_for(i);
            if (transcript_dir) write_transcript(*transcript_dir, i, bundle);
            PredictionRecord p;
            p.test_id = data_.test[i].id;
            p.demo_ids = bundle.meta.demo_ids;
            p.gold_label = data_.test[i].label;
            p.prompt_hash = prompt_hash(bundle.messages);
            try {
                const auto completion = gateway_->complete(bundle, params);
                p.raw_response = completion.text;
                p.latency_ms = completion.latency_ms;
                p.parsed_label = parse_answer(completion.text);
            } catch (const GatewayError& e) {
                p.parsed_label = ParsedLabel::invalid;
                p.error = e.what();
            }
            std::lock_guard lock(flush_mutex);
            slots[i] = std::move(p);
            done[t] = 1;
            while (flushed < todo.size() && done[flushed]) {
                journal << to_json(*slots[todo[flushed]]).dump() << '\n';
                ++flushed;
            }
            journal.flush();
        });
        journal.close();

        std::string contents = header().dump() + "\n";
        for (auto& slot : slots) {
            if (slot->error) ++result.gateway_failures;
            contents += to_json(*slot).dump() + "\n";
            result.predictions.push_back(std::move(*slot));
        }
        write_file_atomic(result.output, contents);
        result.computed = todo.size();
        return result;
    }

private:
    void prepare_index() {
        const auto strategy = config_.effective_strategy();
        if (strategy != Strategy::tfidf && strategy != Strategy::bm25) return;
        const auto kind = strategy == Strategy::tfidf ? IndexKind::tfidf : IndexKind::bm25;
        const auto key = *config_.effective_matching_key();
        const auto digest = support_digest(data_.support, key);
        if (options_.index) {
            if (options_.index->kind() != kind || options_.index->matching_key() != key) {
                throw DataError("index is " + std::string(to_string(options_.index->kind())) + "/" +
                                std::string(to_string(options_.index->matching_key())) + " but the cell needs " +
                                std::string(to_string(kind)) + "/" + std::string(to_string(key)));
            }
            if (options_.index_digest && *options_.index_digest != digest) {
                throw DataError("index was built from a different support set; rebuild it with `xicl index`");
            }
            index_ = options_.index;
            return;
        }
        if (!options_.build_index) {
            throw UsageError("strategy " + std::string(to_string(strategy)) +
                            " needs a retrieval index: build one with `xicl index` and pass --index, or pass "
                            "--build-index");
        }
        index_ = std::make_shared<const RetrievalIndex>(RetrievalIndex::build(data_.support, kind, key));
    }

    static void write_transcript(const fs::path& dir, std::size_t ordinal, const PromptBundle& bundle) {
        char prefix[16];
        std::snprintf(prefix, sizeof prefix, "%05zu_", ordinal);
        write_file_atomic(dir / (prefix + sanitize_name(bundle.meta.test_record_id) + ".txt"), transcript(bundle));
    }

    ExperimentConfig config_;
    Gateway* gateway_;
    RunOptions options_;
    PromptTemplates templates_;
    std::string hash_;
    ExperimentData data_;
    std::unordered_map<std::string_view, const Record*> support_by_id_;
    std::shared_ptr<const RetrievalIndex> index_;
};

inline RunResult run_experiment(const ExperimentConfig& config, Gateway& gateway, RunOptions options = {}) {
    return ExperimentRunner(config, &gateway, std::move(options)).run();
}

/// Completes an interrupted run from its partial predictions file.
inline RunResult resume(const ExperimentConfig& config, const fs::path& partial_output, Gateway& gateway,
                        RunOptions options = {}) {
    return ExperimentRunner(config, &gateway, std::move(options)).run(partial_output);
}

// Grid manifests --------------------------------------------------------------

/// Applies JSON overrides (keys as in the CLI flags, e.g. "shots", "strategy",
/// "matching", "support-rationales") to a config. Relative paths resolve
/// against `base_dir`.
inline void apply_overrides(ExperimentConfig& c, const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw DataError("grid entries must be JSON objects");
    auto path = [&](const json& v) {
        fs::path p = v.get<std::string>();
        return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    };
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "name") c.name = v.get<std::string>();
            else if (key == "model") c.model_id = v.get<std::string>();
            else if (key == "endpoint") c.endpoint = v.get<std::string>();
            else if (key == "support") c.support_path = path(v);
            else if (key == "support-modality") c.support_modality = parse_modality(v.get<std::string>());
            else if (key == "support-captions") c.support_captions = path(v);
            else if (key == "support-rationales") c.support_rationales = path(v);
            else if (key == "test") c.test_path = path(v);
            else if (key == "test-modality") c.test_modality = parse_modality(v.get<std::string>());
            else if (key == "test-captions") c.test_captions = path(v);
            else if (key == "shots") c.shots = v.get<std::size_t>();
            else if (key == "strategy") c.strategy = parse_strategy(v.get<std::string>());
            else if (key == "matching") c.matching_key = parse_matching_key(v.get<std::string>());
            else if (key == "seed") c.seed = v.get<std::int64_t>();
            else if (key == "invalid-policy") c.invalid_policy = parse_invalid_policy(v.get<std::string>());
            else if (key == "balance-labels") c.balance_labels = v.get<bool>();
            else if (key == "temperature") c.temperature = v.get<double>();
            else if (key == "max-tokens") c.max_tokens = v.get<int>();
            else throw DataError("unknown grid key '" + key + "'");
        } catch (const json::exception& e) {
            throw DataError("grid key '" + key + "': " + e.what());
        } catch (const UsageError& e) {
            throw DataError("grid key '" + key + "': " + e.what());
        }
    }
}

/// Grid manifest: {"base": {...}, "cells": [{...}, ...]}. Each cell is a set of
/// overrides on `base` (itself applied over `defaults`). Cell names must be unique.
inline std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& defaults, const json& manifest,
                                                 const fs::path& base_dir = {}) {
    if (!manifest.is_object() || !manifest.contains("cells") || !manifest.at("cells").is_array()) {
        throw DataError("grid manifest needs a \"cells\" array");
    }
    ExperimentConfig base = defaults;
    if (manifest.contains("base")) apply_overrides(base, manifest.at("base"), base_dir);
    std::vector<ExperimentConfig> cells;
    std::set<std::string> names;
    for (const auto& delta : manifest.at("cells")) {
        ExperimentConfig c = base;
        apply_overrides(c, delta, base_dir);
        try {
            validate(c);
        } catch (const UsageError& e) {
            throw DataError("grid cell " + std::to_string(cells.size() + 1) + ": " + e.what());
        }
        if (!names.insert(cell_name(c)).second) throw DataError("duplicate grid cell '" + cell_name(c) + "'");
        cells.push_back(std::move(c));
    }
    return cells;
}

inline std::vector<ExperimentConfig> load_grid(const ExperimentConfig& defaults, const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": malformed grid manifest: " + e.what());
    }
    try {
        return expand_grid(defaults, j, path.parent_path());
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace xicl
