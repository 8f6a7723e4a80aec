#pragma once

// Cached, retrying access to a chat-completion backend.

#include <xicl/error.hpp>
#include <xicl/hash.hpp>
#include <xicl/io.hpp>
#include <xicl/prompt.hpp>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <memory>
#include <optional>
#include <regex>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

namespace xicl {

struct DecodingParams {
    std::string model_id;
    double temperature = 0.0;
    int max_tokens = 256;

    bool operator==(const DecodingParams&) const = default;
};

inline void validate(const DecodingParams& p) {
    if (!(p.temperature >= 0.0)) throw UsageError("temperature must be >= 0");
    if (p.max_tokens <= 0) throw UsageError("max_tokens must be positive");
    if (p.model_id.empty()) throw UsageError("model id must not be empty");
}

/// SHA-256 over the canonical JSON of the messages alone.
inline std::string prompt_hash(std::span<const Message> messages) {
    return sha256_hex(messages_json(messages).dump());
}

/// SHA-256 over the canonical JSON of {model, messages, temperature, max_tokens}.
/// nlohmann::json objects keep keys sorted and print doubles round-trip exactly,
/// so the digest is stable across runs and platforms.
inline std::string cache_key(std::span<const Message> messages, const DecodingParams& p) {
    const json doc = {{"model", p.model_id},
                      {"messages", messages_json(messages)},
                      {"temperature", p.temperature},
                      {"max_tokens", p.max_tokens}};
    return sha256_hex(doc.dump());
}

inline std::string cache_key(const PromptBundle& bundle, const DecodingParams& p) {
    return cache_key(bundle.messages, p);
}

// Backends --------------------------------------------------------------------

class Backend {
public:
    virtual ~Backend() = default;
    /// Returns the assistant text or throws GatewayError.
    virtual std::string complete(std::span<const Message> messages, const DecodingParams& params) = 0;
    /// Identifies the endpoint in cache entries.
    virtual std::string fingerprint() const = 0;
};

/// Scripted offline backend. Script file (JSON):
///   {"rules": [{"match": "<ECMAScript regex>", "icase": true, "response": "..."},
///              {"prompt_hash": "<hex>", "response": "..."},
///              {"match": "...", "status": 500}],
///    "default": "..."}
/// Regexes are searched in the last user message; rules are tried in order. A
/// rule with "status" fails with that HTTP status. With no script, the backend
/// answers "Hateful" or "Not Hateful" from the parity of the first byte of
/// SHA-256(last user message).
class MockBackend : public Backend {
public:
    struct Rule {
        std::optional<std::regex> match;
        std::optional<std::string> prompt_hash;
        std::optional<std::string> response;
        int status = 0;
    };

    MockBackend() = default;
    explicit MockBackend(std::vector<Rule> rules, std::optional<std::string> fallback = std::nullopt)
        : rules_(std::move(rules)), fallback_(std::move(fallback)), scripted_(true) {}

    static std::shared_ptr<MockBackend> from_script(const fs::path& path) {
        json j;
        try {
            j = json::parse(read_file(path));
        } catch (const json::parse_error& e) {
            throw DataError(path.string() + ": malformed mock script: " + e.what());
        }
        std::vector<Rule> rules;
        try {
            for (const auto& r : j.value("rules", json::array())) {
                Rule rule;
                if (r.contains("match")) {
                    auto flags = std::regex::ECMAScript;
                    if (r.value("icase", false)) flags |= std::regex::icase;
                    rule.match.emplace(r.at("match").get<std::string>(), flags);
                }
                if (r.contains("prompt_hash")) rule.prompt_hash = r.at("prompt_hash").get<std::string>();
                if (r.contains("response")) rule.response = r.at("response").get<std::string>();
                rule.status = r.value("status", 0);
                if (!rule.response && rule.status == 0) {
                    throw DataError(path.string() + ": mock rule needs a response or a status");
                }
                rules.push_back(std::move(rule));
            }
        } catch (const std::regex_error& e) {
            throw DataError(path.string() + ": bad regex in mock script: " + e.what());
        } catch (const json::exception& e) {
            throw DataError(path.string() + ": malformed mock script: " + e.what());
        }
        std::optional<std::string> fallback;
        if (j.contains("default")) fallback = j.at("default").get<std::string>();
        auto backend = std::make_shared<MockBackend>(std::move(rules), std::move(fallback));
        backend->fingerprint_ = "mock:" + sha256_hex(j.dump()).substr(0, 16);
        return backend;
    }

    std::string complete(std::span<const Message> messages, const DecodingParams&) override {
        ++calls_;
        std::string last_user;
        for (const auto& m : messages) {
            if (m.role == Role::user) last_user = m.content;
        }
        if (!scripted_) {
            const auto h = sha256_hex(last_user);
            const int nibble = h[1] >= 'a' ? h[1] - 'a' + 10 : h[1] - '0';
            return (nibble % 2 == 0) ? "Hateful" : "Not Hateful";
        }
        std::optional<std::string> hash;
        for (const auto& rule : rules_) {
            bool hit = false;
            if (rule.prompt_hash) {
                if (!hash) hash = prompt_hash(messages);
                hit = *hash == *rule.prompt_hash;
            } else if (rule.match) {
                hit = std::regex_search(last_user, *rule.match);
            }
            if (!hit) continue;
            if (rule.status != 0) {
                throw GatewayError("mock backend returned HTTP " + std::to_string(rule.status), rule.status,
                                   rule.status >= 500 || rule.status == 429);
            }
            return *rule.response;
        }
        if (fallback_) return *fallback_;
        throw GatewayError("mock backend: no rule matched and no default response");
    }

    std::string fingerprint() const override { return fingerprint_; }

    std::size_t calls() const noexcept { return calls_.load(); }

private:
    std::vector<Rule> rules_;
    std::optional<std::string> fallback_;
    bool scripted_ = false;
    std::string fingerprint_ = "mock:builtin";
    std::atomic<std::size_t> calls_{0};
};

// Cache -----------------------------------------------------------------------

struct CacheEntry {
    std::string key;
    std::string model_id;
    std::string response_text;
    std::int64_t timestamp = 0;  // unix seconds
    std::string endpoint_fingerprint;
    std::int64_t latency_ms = 0;
};

/// Content-addressed store, one JSON file per entry at <dir>/<key[0:2]>/<key>.json.
/// Entries are written once via temp-file + rename; a disabled cache (empty dir)
/// never hits.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(fs::path dir) : dir_(std::move(dir)) {}

    bool enabled() const noexcept { return !dir_.empty(); }
    const fs::path& dir() const noexcept { return dir_; }

    fs::path path_for(const std::string& key) const { return dir_ / key.substr(0, 2) / (key + ".json"); }

    std::optional<CacheEntry> get(const std::string& key) const {
        if (!enabled()) return std::nullopt;
        const auto path = path_for(key);
        std::error_code ec;
        if (!fs::exists(path, ec)) return std::nullopt;
        try {
            const json j = json::parse(read_file(path));
            CacheEntry e;
            e.key = j.at("key").get<std::string>();
            e.model_id = j.at("model_id").get<std::string>();
            e.response_text = j.at("response_text").get<std::string>();
            e.timestamp = j.value("timestamp", std::int64_t{0});
            e.endpoint_fingerprint = j.value("endpoint_fingerprint", "");
            e.latency_ms = j.value("latency_ms", std::int64_t{0});
            if (e.key != key) throw DataError("cache entry key mismatch in '" + path.string() + "'");
            return e;
        } catch (const json::exception& ex) {
            throw DataError("corrupt cache entry '" + path.string() + "': " + ex.what());
        }
    }

    void put(const CacheEntry& e) const {
        if (!enabled()) return;
        const auto path = path_for(e.key);
        std::error_code ec;
        if (fs::exists(path, ec)) return;  // immutable once written
        ordered_json j;
        j["key"] = e.key;
        j["model_id"] = e.model_id;
        j["response_text"] = e.response_text;
        j["timestamp"] = e.timestamp;
        j["endpoint_fingerprint"] = e.endpoint_fingerprint;
        j["latency_ms"] = e.latency_ms;
        write_file_atomic(path, j.dump(2) + "\n");
    }

private:
    fs::path dir_;
};

// Gateway ---------------------------------------------------------------------

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds base_delay{500};  // doubles after each failed attempt
};

struct Completion {
    std::string text;
    std::string key;
    std::int64_t latency_ms = 0;  // latency of the original network call
    bool from_cache = false;
};

class Gateway {
public:
    Gateway(std::shared_ptr<Backend> backend, ResponseCache cache, RetryPolicy retry = {}, int max_in_flight = 4)
        : backend_(std::move(backend)), cache_(std::move(cache)), retry_(retry),
          slots_(std::max(1, std::min(max_in_flight, kMaxInFlight))) {
        if (!backend_) throw UsageError("gateway needs a backend");
        if (retry_.attempts < 1) retry_.attempts = 1;
    }

    Completion complete(std::span<const Message> messages, const DecodingParams& params) {
        validate(params);
        Completion out;
        out.key = cache_key(messages, params);
        if (auto hit = cache_.get(out.key)) {
            ++cache_hits_;
            out.text = hit->response_text;
            out.latency_ms = hit->latency_ms;
            out.from_cache = true;
            return out;
        }

        auto delay = retry_.base_delay;
        for (int attempt = 1;; ++attempt) {
            try {
                const auto start = std::chrono::steady_clock::now();
                std::string text;
                {
                    slots_.acquire();
                    struct Release {
                        std::counting_semaphore<kMaxInFlight>& s;
                        ~Release() { s.release(); }
                    } release{slots_};
                    ++network_calls_;
                    text = backend_->complete(messages, params);
                }
                out.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                     std::chrono::steady_clock::now() - start)
                                     .count();
                if (trim(text).empty()) throw GatewayError("empty completion from " + backend_->fingerprint());
                out.text = std::move(text);
                break;
            } catch (const GatewayError& e) {
                if (!e.retryable()) throw;
                if (attempt >= retry_.attempts) {
                    throw GatewayError("giving up after " + std::to_string(attempt) + " attempts: " + e.what(),
                                       e.status(), false);
                }
            }
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }

        cache_.put({out.key, params.model_id, out.text, static_cast<std::int64_t>(std::time(nullptr)),
                    backend_->fingerprint(), out.latency_ms});
        return out;
    }

    Completion complete(const PromptBundle& bundle, const DecodingParams& params) {
        return complete(bundle.messages, params);
    }

    std::size_t network_calls() const noexcept { return network_calls_.load(); }
    std::size_t cache_hits() const noexcept { return cache_hits_.load(); }
    const ResponseCache& cache() const noexcept { return cache_; }
    Backend& backend() noexcept { return *backend_; }

private:
    static constexpr int kMaxInFlight = 256;

    std::shared_ptr<Backend> backend_;
    ResponseCache cache_;
    RetryPolicy retry_;
    std::counting_semaphore<kMaxInFlight> slots_;
    std::atomic<std::size_t> network_calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
};

}  // namespace xicl
