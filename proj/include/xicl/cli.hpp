#pragma once

// The `xicl` command line: one binary, one subcommand per pipeline stage.
//
//   stats          label counts of a dataset
//   ingest         normalize a dataset declared by a manifest
//   caption-merge  merge a caption or rationale sidecar into a dataset
//   rationales     generate rationale sidecars for support records
//   index          build and save a retrieval index
//   run            run one experiment cell, or a grid of them
//   report         score predictions files into a results table
//   dump-prompts   write prompt transcripts without querying a model
//
// Every subcommand accepts --config <file> with `flag = value` lines (flag
// names without leading dashes); flags given on the command line win.

#include <xicl/http_backend.hpp>
#include <xicl/metrics.hpp>
#include <xicl/rationale.hpp>
#include <xicl/report.hpp>
#include <xicl/runner.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace xicl::cli {

namespace detail {

struct ExperimentFlags {
    ExperimentConfig config;
    std::string support_modality = "text_post";
    std::string test_modality = "meme";
    std::string strategy = "random";
    std::string matching = "content";
    std::string invalid_policy = "count_as_wrong";
    std::string support, support_captions, support_rationales;
    std::string test, test_captions;
    std::string templates;

    void add_to(CLI::App& app) {
        app.add_option("--name", config.name, "Cell name (derived from the settings when omitted)");
        app.add_option("--model", config.model_id, "Model id sent to the endpoint; 'mock' selects the built-in mock");
        app.add_option("--support", support, "Support (demonstration) dataset, JSON lines");
        app.add_option("--support-modality", support_modality, "text_post or meme")->capture_default_str();
        app.add_option("--support-captions", support_captions, "Caption sidecar for meme support records");
        app.add_option("--support-rationales", support_rationales, "Rationale sidecar for support records");
        app.add_option("--test", test, "Test dataset, JSON lines");
        app.add_option("--test-modality", test_modality, "text_post or meme")->capture_default_str();
        app.add_option("--test-captions", test_captions, "Caption sidecar for meme test records");
        app.add_option("--shots", config.shots, "Demonstrations per prompt")->capture_default_str();
        app.add_option("--strategy", strategy, "random, tfidf or bm25")->capture_default_str();
        app.add_option("--matching", matching, "content or rationale")->capture_default_str();
        app.add_option("--seed", config.seed, "Seed for random sampling")->capture_default_str();
        app.add_option("--invalid-policy", invalid_policy, "count_as_wrong or exclude")->capture_default_str();
        app.add_flag("--balance-labels", config.balance_labels, "Pick half hateful, half not hateful demonstrations");
        app.add_option("--temperature", config.temperature)->capture_default_str();
        app.add_option("--max-tokens", config.max_tokens)->capture_default_str();
        app.add_option("--templates", templates, "Prompt template file (built-in templates when omitted)");
    }

    ExperimentConfig resolve() const {
        ExperimentConfig c = config;
        c.support_path = support;
        c.support_modality = parse_modality(support_modality);
        if (!support_captions.empty()) c.support_captions = support_captions;
        if (!support_rationales.empty()) c.support_rationales = support_rationales;
        c.test_path = test;
        c.test_modality = parse_modality(test_modality);
        if (!test_captions.empty()) c.test_captions = test_captions;
        c.strategy = parse_strategy(strategy);
        c.matching_key = parse_matching_key(matching);
        c.invalid_policy = parse_invalid_policy(invalid_policy);
        return c;
    }

    std::optional<PromptTemplates> load_templates() const {
        if (templates.empty()) return std::nullopt;
        return PromptTemplates::load(templates);
    }
};

struct GatewayFlags {
    std::string endpoint;
    std::string mock_script;
    std::string api_key_env = "OPENAI_API_KEY";
    std::string cache_dir;
    int max_in_flight = 4;
    int retries = 3;
    int retry_delay_ms = 500;

    void add_to(CLI::App& app) {
        app.add_option("--endpoint", endpoint, "Chat-completions base URL, e.g. http://localhost:8000/v1");
        app.add_option("--mock", mock_script, "Answer from a scripted mock backend instead of an endpoint");
        app.add_option("--api-key-env", api_key_env, "Environment variable holding the API key")->capture_default_str();
        app.add_option("--cache-dir", cache_dir, "Response cache directory (no caching when omitted)");
        app.add_option("--max-in-flight", max_in_flight, "Concurrent requests")->capture_default_str();
        app.add_option("--retries", retries, "Attempts per request on retryable failures")->capture_default_str();
        app.add_option("--retry-delay-ms", retry_delay_ms, "Delay before the first retry, doubled afterwards")
            ->capture_default_str();
    }

    /// Backend for `model`, and the endpoint identity recorded in configs.
    std::pair<std::shared_ptr<Backend>, std::string> backend(const std::string& model) const {
        if (!mock_script.empty()) {
            auto b = MockBackend::from_script(mock_script);
            return {b, b->fingerprint()};
        }
        if (model == "mock" || endpoint == "mock") {
            auto b = std::make_shared<MockBackend>();
            return {b, b->fingerprint()};
        }
        if (endpoint.empty()) throw UsageError("--endpoint is required (or --mock <script>, or --model mock)");
        return {std::make_shared<HttpBackend>(HttpBackend::Options{endpoint, api_key_env}), endpoint};
    }

    std::unique_ptr<Gateway> gateway(std::shared_ptr<Backend> backend) const {
        if (max_in_flight < 1) throw UsageError("--max-in-flight must be at least 1");
        RetryPolicy retry{retries, std::chrono::milliseconds(retry_delay_ms)};
        return std::make_unique<Gateway>(std::move(backend), ResponseCache(cache_dir), retry, max_in_flight);
    }
};

inline LabelMap parse_label_map(const std::vector<std::string>& entries) {
    LabelMap map;
    for (const auto& e : entries) {
        const auto eq = e.find('=');
        if (eq == std::string::npos) throw UsageError("--label-map entries look like RAW=hateful, got '" + e + "'");
        map[ascii_lower(trim(std::string_view(e).substr(0, eq)))] = parse_label(ascii_lower(trim(e.substr(eq + 1))));
    }
    return map;
}

/// Help entry only; Command::main hoists the flag to the root app.
inline void add_config(CLI::App& app) {
    app.add_option("--config")->description("TOML file of `flag = value` lines; command-line flags override it");
}

/// TOML config whose top-level keys belong to one subcommand.
class ScopedConfig : public CLI::ConfigTOML {
public:
    explicit ScopedConfig(std::string scope) : scope_(std::move(scope)) {}

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        auto items = CLI::ConfigTOML::from_config(input);
        for (auto& item : items) {
            if (item.parents.empty()) item.parents = {scope_};
        }
        return items;
    }

private:
    std::string scope_;
};

/// Moves `SUB ... --config FILE` to `--config FILE SUB ...`.
inline std::optional<std::string> hoist_config(std::vector<std::string>& args) {
    if (args.empty() || args[0].starts_with("-")) return std::nullopt;
    for (std::size_t i = 1; i < args.size(); ++i) {
        std::optional<std::string> file;
        if (args[i] == "--config" && i + 1 < args.size()) {
            file = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
        } else if (args[i].starts_with("--config=")) {
            file = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
        }
        if (file) {
            args.insert(args.begin(), {"--config", *file});
            return args[2];
        }
    }
    return std::nullopt;
}

}  // namespace detail

class Command {
public:
    Command(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

    int main(std::vector<std::string> args) {
        CLI::App app{"Cross-modality few-shot in-context learning harness", std::string(kHarnessName)};
        app.set_version_flag("--version", std::string(kHarnessVersion));
        app.require_subcommand(1);
        app.set_config("--config", "", "TOML config for the subcommand; see `SUB --help`");
        if (auto scope = detail::hoist_config(args)) app.config_formatter(std::make_shared<detail::ScopedConfig>(*scope));
        std::function<int()> action;
        register_stats(app, action);
        register_ingest(app, action);
        register_caption_merge(app, action);
        register_rationales(app, action);
        register_index(app, action);
        register_run(app, action);
        register_report(app, action);
        register_dump_prompts(app, action);

        try {
            std::vector<const char*> argv{kHarnessName.data()};
            for (const auto& a : args) argv.push_back(a.c_str());
            app.parse(static_cast<int>(argv.size()), argv.data());
        } catch (const CLI::ParseError& e) {
            const int rc = app.exit(e, out_, err_);
            return rc == 0 ? 0 : static_cast<int>(ExitCode::usage);
        }
        try {
            return action();
        } catch (const Error& e) {
            err_ << "xicl: error: " << e.what() << "\n";
            return static_cast<int>(e.exit_code());
        } catch (const fs::filesystem_error& e) {
            err_ << "xicl: error: " << e.what() << "\n";
            return static_cast<int>(ExitCode::data);
        }
    }

private:
    void register_stats(CLI::App& app, std::function<int()>& action) {
        auto* sub = app.add_subcommand("stats", "Print record and label counts of a dataset");
        detail::add_config(*sub);
        auto dataset = std::make_shared<std::string>();
        auto manifest = std::make_shared<std::string>();
        auto modality = std::make_shared<std::string>("text_post");
        auto captions = std::make_shared<std::string>();
        auto rationales = std::make_shared<std::string>();
        auto label_map = std::make_shared<std::vector<std::string>>();
        auto as_json = std::make_shared<bool>(false);
        auto* d = sub->add_option("--dataset", *dataset, "Dataset, JSON lines");
        auto* m = sub->add_option("--manifest", *manifest, "Dataset manifest (instead of --dataset)");
        d->excludes(m);
        sub->add_option("--modality", *modality, "text_post or meme")->capture_default_str();
        sub->add_option("--captions", *captions, "Caption sidecar to merge first");
        sub->add_option("--rationales", *rationales, "Rationale sidecar to merge first");
        sub->add_option("--label-map", *label_map, "Raw label mapping, e.g. 1=hateful 0=not_hateful");
        sub->add_flag("--json", *as_json, "Print a JSON object");
        sub->callback([=, this, &action] {
            action = [=, this] {
                std::vector<Record> records;
                std::string name;
                if (!manifest->empty()) {
                    const auto mf = load_manifest(*manifest);
                    records = load_from_manifest(mf);
                    name = mf.name;
                } else {
                    if (dataset->empty()) throw UsageError("stats needs --dataset or --manifest");
                    LoadOptions opts{detail::parse_label_map(*label_map), {}, {}};
                    records = load_dataset(*dataset, parse_modality(*modality), opts);
                    if (!captions->empty()) records = merge_sidecar(std::move(records), *captions, SidecarField::caption);
                    if (!rationales->empty()) {
                        records = merge_sidecar(std::move(records), *rationales, SidecarField::rationale);
                    }
                    name = fs::path(*dataset).stem().string();
                }
                print_stats(name, stats(records), *as_json);
                return 0;
            };
        });
    }

    void print_stats(const std::string& name, const DatasetStats& s, bool as_json) {
        if (as_json) {
            ordered_json j;
            j["dataset"] = name;
            j["records"] = s.n_records;
            j["hateful"] = s.n_hateful;
            j["not_hateful"] = s.n_not_hateful;
            j["missing_caption"] = s.n_missing_caption;
            j["missing_rationale"] = s.n_missing_rationale;
            out_ << j.dump() << "\n";
            return;
        }
        out_ << "dataset: " << name << "\n"
             << "records: " << s.n_records << "\n"
             << "hateful/not_hateful: " << s.n_hateful << "/" << s.n_not_hateful << "\n"
             << "missing captions: " << s.n_missing_caption << "\n"
             << "missing rationales: " << s.n_missing_rationale << "\n";
    }

    void register_ingest(CLI::App& app, std::function<int()>& action) {
        auto* sub = app.add_subcommand("ingest", "Normalize a dataset declared by a manifest into JSON lines");
        detail::add_config(*sub);
        auto manifest = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        sub->add_option("--manifest", *manifest, "Dataset manifest")->required();
        sub->add_option("--out", *out, "Normalized dataset to write")->required();
        sub->callback([=, this, &action] {
            action = [=, this] {
                const auto mf = load_manifest(*manifest);
                const auto records = load_from_manifest(mf);
                write_dataset(fs::path(*out), records);
                print_stats(mf.name, stats(records), false);
                return 0;
            };
        });
    }

    void register_caption_merge(CLI::App& app, std::function<int()>& action) {
        auto* sub = app.add_subcommand("caption-merge", "Merge a caption (or rationale) sidecar into a dataset");
        detail::add_config(*sub);
        auto dataset = std::make_shared<std::string>();
        auto modality = std::make_shared<std::string>("meme");
        auto sidecar = std::make_shared<std::string>();
        auto field = std::make_shared<std::string>("caption");
        auto out = std::make_shared<std::string>();
        sub->add_option("--dataset", *dataset, "Dataset, JSON lines")->required();
        sub->add_option("--modality", *modality, "text_post or meme")->capture_default_str();
        sub->add_option("--sidecar", *sidecar, "Sidecar file of {id, value, producer} lines")->required();
        sub->add_option("--field", *field, "caption or rationale")->capture_default_str();
        sub->add_option("--out", *out, "Merged dataset to write")->required();
        sub->callback([=, this, &action] {
            action = [=, this] {
                auto records = load_dataset(*dataset, parse_modality(*modality));
                records = merge_sidecar(std::move(records), *sidecar, parse_sidecar_field(*field));
                write_dataset(fs::path(*out), records);
                print_stats(fs::path(*dataset).stem().string(), stats(records), false);
                return 0;
            };
        });
    }

    void register_rationales(CLI::App& app, std::function<int()>& action) {
        auto* sub = app.add_subcommand("rationales", "Generate a rationale sidecar for support records");
        detail::add_config(*sub);
        auto support = std::make_shared<std::string>();
        auto modality = std::make_shared<std::string>("text_post");
        auto captions = std::make_shared<std::string>();
        auto exemplars = std::make_shared<std::string>();
        auto model = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto failures = std::make_shared<std::string>();
        auto gw = std::make_shared<detail::GatewayFlags>();
        sub->add_option("--support", *support, "Support dataset, JSON lines")->required();
        sub->add_option("--support-modality", *modality, "text_post or meme")->capture_default_str();
        sub->add_option("--support-captions", *captions, "Caption sidecar for meme support records");
        sub->add_option("--exemplars", *exemplars, "Ten labelled exemplars with rationales")->required();
        sub->add_option("--model", *model, "Model id")->required();
        sub->add_option("--out", *out, "Rationale sidecar to write")->required();
        sub->add_option("--failures", *failures, "Write failed ids and reasons here");
        gw->add_to(*sub);
        sub->callback([=, this, &action] {
            action = [=, this] {
                auto records = load_dataset(*support, parse_modality(*modality));
                if (!captions->empty()) records = merge_sidecar(std::move(records), *captions, SidecarField::caption);
                const auto ex = load_exemplars(*exemplars);
                auto [backend, endpoint_id] = gw->backend(*model);
                auto gateway = gw->gateway(backend);
                err_ << "xicl: generating rationales for " << records.size() << " records with " << *model << " ("
                     << endpoint_id << ")\n";
                const auto result = generate_rationales(records, *gateway, ex, rationale_decoding(*model),
                                                        static_cast<std::size_t>(gw->max_in_flight));
                write_sidecar(*out, result.lines);
                if (!failures->empty()) {
                    std::string buf;
                    for (const auto& f : result.failures) buf += json({{"id", f.id}, {"reason", f.reason}}).dump() + "\n";
                    write_file_atomic(*failures, buf);
                }
                out_ << "wrote " << result.lines.size() << " rationales to " << *out << "\n";
                if (!result.failures.empty()) {
                    err_ << "xicl: error: " << result.failures.size() << " records failed, first: '"
                         << result.failures.front().id << "': " << result.failures.front().reason << "\n";
                    return static_cast<int>(ExitCode::gateway);
                }
                return 0;
            };
        });
    }

    void register_index(CLI::App& app, std::function<int()>& action) {
        auto* sub = app.add_subcommand("index", "Build a retrieval index over support records and save it");
        detail::add_config(*sub);
        auto flags = std::make_shared<detail::ExperimentFlags>();
        auto kind = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        sub->add_option("--support", flags->support, "Support dataset, JSON lines")->required();
        sub->add_option("--support-modality", flags->support_modality, "text_post or meme")->capture_default_str();
        sub->add_option("--support-captions", flags->support_captions, "Caption sidecar for meme support records");
        sub->add_option("--support-rationales", flags->support_rationales, "Rationale sidecar for support records");
        sub->add_option("--kind", *kind, "tfidf or bm25")->required();
        sub->add_option("--matching", flags->matching, "content or rationale")->capture_default_str();
        sub->add_option("--out", *out, "Index file to write")->required();
        sub->callback([=, this, &action] {
            action = [=, this] {
                auto c = flags->resolve();
                const auto k = parse_index_kind(*kind);
                c.shots = 1;
                c.strategy = k == IndexKind::tfidf ? Strategy::tfidf : Strategy::bm25;
                ExperimentData counts;
                const auto support = load_support_set(c, &counts);
                const auto index = RetrievalIndex::build(support, k, c.matching_key);
                save_index(*out, index, support_digest(support, c.matching_key));
                out_ << "indexed " << index.n_docs() << " documents, " << index.terms().size() << " terms ("
                     << to_string(k) << "/" << to_string(c.matching_key) << ") -> " << *out << "\n";
                if (counts.excluded_missing_caption + counts.excluded_missing_rationale > 0) {
                    err_ << "xicl: skipped " << counts.excluded_missing_caption << " memes without captions, "
                         << counts.excluded_missing_rationale << " records without rationales\n";
                }
                return 0;
            };
        });
    }

    void register_run(CLI::App& app, std::function<int()>& action) {
        auto* sub = app.add_subcommand("run", "Run an experiment cell (or a grid of cells) and write predictions");
        detail::add_config(*sub);
        auto flags = std::make_shared<detail::ExperimentFlags>();
        auto gw = std::make_shared<detail::GatewayFlags>();
        auto grid = std::make_shared<std::string>();
        auto indexes = std::make_shared<std::vector<std::string>>();
        auto build_index = std::make_shared<bool>(false);
        auto output_dir = std::make_shared<std::string>("runs");
        auto dump = std::make_shared<std::string>();
        auto overwrite = std::make_shared<bool>(false);
        flags->add_to(*sub);
        gw->add_to(*sub);
        sub->add_option("--grid", *grid, "Grid manifest {\"base\": {...}, \"cells\": [{...}]} over these flags");
        sub->add_option("--index", *indexes, "Saved index (repeatable; each cell uses the one matching its strategy)");
        sub->add_flag("--build-index", *build_index, "Build missing indexes in memory");
        sub->add_option("--output-dir", *output_dir, "Where predictions files go")->capture_default_str();
        sub->add_option("--dump-prompts", *dump, "Also write prompt transcripts under this directory");
        sub->add_flag("--overwrite", *overwrite, "Discard existing predictions instead of resuming");
        sub->callback([=, this, &action] {
            action = [=, this] {
                auto defaults = flags->resolve();
                defaults.output_dir = *output_dir;
                defaults.cache_dir = gw->cache_dir;
                auto [backend, endpoint_id] = gw->backend(defaults.model_id);
                defaults.endpoint = endpoint_id;
                std::vector<ExperimentConfig> cells;
                if (grid->empty()) {
                    cells.push_back(defaults);
                } else {
                    cells = load_grid(defaults, *grid);
                }
                std::vector<LoadedIndex> loaded;
                for (const auto& p : *indexes) loaded.push_back(load_index(p));
                auto gateway = gw->gateway(backend);

                std::size_t failures = 0;
                for (const auto& cell : cells) {
                    RunOptions opts;
                    opts.build_index = *build_index;
                    opts.overwrite = *overwrite;
                    opts.templates = flags->load_templates();
                    opts.max_in_flight = static_cast<std::size_t>(gw->max_in_flight);
                    if (!dump->empty()) opts.dump_prompts_dir = fs::path(*dump);
                    pick_index(cell, loaded, opts);
                    ExperimentRunner runner(cell, gateway.get(), opts);
                    err_ << "xicl: cell " << cell_name(cell) << " config_hash=" << runner.hash() << "\n";
                    const auto result = runner.run();
                    const auto m = compute_metrics(result.predictions, cell.invalid_policy);
                    out_ << cell_name(cell) << ": acc=" << format3(m.accuracy) << " f1=" << format3(m.macro_f1)
                         << " invalid=" << m.n_invalid << " (" << result.computed << " computed, " << result.reused
                         << " reused) -> " << result.output.string() << "\n";
                    failures += result.gateway_failures;
                }
                err_ << "xicl: " << gateway->network_calls() << " requests, " << gateway->cache_hits()
                     << " cache hits\n";
                if (failures > 0) {
                    err_ << "xicl: error: " << failures
                         << " requests failed and were recorded as invalid; rerun to retry them\n";
                    return static_cast<int>(ExitCode::gateway);
                }
                return 0;
            };
        });
    }

    static void pick_index(const ExperimentConfig& cell, const std::vector<LoadedIndex>& loaded, RunOptions& opts) {
        const auto s = cell.effective_strategy();
        if (s != Strategy::tfidf && s != Strategy::bm25) return;
        const auto kind = s == Strategy::tfidf ? IndexKind::tfidf : IndexKind::bm25;
        for (const auto& li : loaded) {
            if (li.index.kind() == kind && li.index.matching_key() == *cell.effective_matching_key()) {
                opts.index = std::make_shared<const RetrievalIndex>(li.index);
                opts.index_digest = li.support_digest;
                return;
            }
        }
        if (!loaded.empty() && !opts.build_index) {
            throw UsageError("none of the --index files is " + std::string(to_string(kind)) + "/" +
                             std::string(to_string(*cell.effective_matching_key())) + " as cell '" + cell_name(cell) +
                             "' needs; add one or pass --build-index");
        }
    }

    void register_report(CLI::App& app, std::function<int()>& action) {
        auto* sub = app.add_subcommand("report", "Score predictions files into a results table");
        detail::add_config(*sub);
        auto files = std::make_shared<std::vector<std::string>>();
        auto dir = std::make_shared<std::string>();
        auto format = std::make_shared<std::string>("markdown");
        auto markdown_out = std::make_shared<std::string>();
        auto csv_out = std::make_shared<std::string>();
        auto policy = std::make_shared<std::string>();
        auto min_acc = std::make_shared<double>(-1.0);
        auto min_f1 = std::make_shared<double>(-1.0);
        sub->add_option("predictions", *files, "Predictions files");
        sub->add_option("--dir", *dir, "Score every *.jsonl predictions file in this directory");
        sub->add_option("--format", *format, "Table printed to stdout: markdown or csv")->capture_default_str();
        sub->add_option("--markdown-out", *markdown_out, "Also write the markdown table here");
        sub->add_option("--csv-out", *csv_out, "Also write the CSV table here");
        sub->add_option("--invalid-policy", *policy, "Override the policy recorded in each file");
        sub->add_option("--min-accuracy", *min_acc, "Fail (exit 4) when any cell's accuracy is lower");
        sub->add_option("--min-f1", *min_f1, "Fail (exit 4) when any cell's macro F1 is lower");
        sub->callback([=, this, &action] {
            action = [=, this] {
                std::vector<fs::path> paths(files->begin(), files->end());
                if (!dir->empty()) {
                    std::vector<fs::path> found;
                    for (const auto& e : fs::directory_iterator(*dir)) {
                        if (e.is_regular_file() && e.path().extension() == ".jsonl") found.push_back(e.path());
                    }
                    std::sort(found.begin(), found.end());
                    paths.insert(paths.end(), found.begin(), found.end());
                }
                if (paths.empty()) throw UsageError("report needs predictions files or --dir");
                std::optional<InvalidPolicy> override_policy;
                if (!policy->empty()) override_policy = parse_invalid_policy(*policy);
                const auto table_format = parse_table_format(*format);
                const auto cells = score_files(paths, override_policy);
                out_ << emit_table(cells, table_format);
                if (!markdown_out->empty()) write_file_atomic(*markdown_out, emit_table(cells, TableFormat::markdown));
                if (!csv_out->empty()) write_file_atomic(*csv_out, emit_table(cells, TableFormat::csv));

                int rc = 0;
                for (const auto& c : cells) {
                    if (c.metrics.accuracy < *min_acc) {
                        err_ << "xicl: cell " << c.cell.name << " accuracy " << format3(c.metrics.accuracy)
                             << " is below the floor " << format3(*min_acc) << "\n";
                        rc = static_cast<int>(ExitCode::floor);
                    }
                    if (c.metrics.macro_f1 < *min_f1) {
                        err_ << "xicl: cell " << c.cell.name << " macro F1 " << format3(c.metrics.macro_f1)
                             << " is below the floor " << format3(*min_f1) << "\n";
                        rc = static_cast<int>(ExitCode::floor);
                    }
                }
                return rc;
            };
        });
    }

    void register_dump_prompts(CLI::App& app, std::function<int()>& action) {
        auto* sub = app.add_subcommand("dump-prompts", "Write the prompt transcripts of a cell without querying a model");
        detail::add_config(*sub);
        auto flags = std::make_shared<detail::ExperimentFlags>();
        auto out = std::make_shared<std::string>();
        auto indexes = std::make_shared<std::vector<std::string>>();
        auto build_index = std::make_shared<bool>(false);
        flags->add_to(*sub);
        sub->add_option("--out", *out, "Transcript directory")->required();
        sub->add_option("--index", *indexes, "Saved index (repeatable)");
        sub->add_flag("--build-index", *build_index, "Build the index in memory");
        sub->callback([=, this, &action] {
            action = [=, this] {
                auto cfg = flags->resolve();
                if (cfg.model_id.empty()) cfg.model_id = "none";
                std::vector<LoadedIndex> loaded;
                for (const auto& p : *indexes) loaded.push_back(load_index(p));
                RunOptions opts;
                opts.build_index = *build_index;
                opts.templates = flags->load_templates();
                pick_index(cfg, loaded, opts);
                ExperimentRunner runner(cfg, nullptr, opts);
                runner.dump_prompts(*out);
                out_ << "wrote " << runner.data().test.size() << " transcripts to "
                     << (fs::path(*out) / cell_name(cfg)).string() << "\n";
                return 0;
            };
        });
    }

    std::ostream& out_;
    std::ostream& err_;
};

/// Runs the command line `args` (without the program name).
inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return Command(out, err).main(std::move(args));
}

inline int run(int argc, char** argv) { return run(std::vector<std::string>(argv + 1, argv + argc)); }

}  // namespace xicl::cli
