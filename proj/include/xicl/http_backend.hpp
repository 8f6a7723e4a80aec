#pragma once

// OpenAI-style chat-completions over HTTP(S):
//   POST {endpoint}/chat/completions  {model, messages, temperature, max_tokens}
//   -> choices[0].message.content
// Bearer auth comes from an environment variable (default OPENAI_API_KEY).

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <xicl/gateway.hpp>

#include <cstdlib>

namespace xicl {

struct EndpointUrl {
    std::string scheme_host_port;  // "http://localhost:8000"
    std::string base_path;         // "/v1" (no trailing slash)
};

inline EndpointUrl parse_endpoint(std::string_view url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) {
        throw UsageError("endpoint '" + std::string(url) + "' must start with http:// or https://");
    }
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw UsageError("unsupported endpoint scheme '" + std::string(scheme) + "'");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    EndpointUrl out;
    out.scheme_host_port = std::string(url.substr(0, path_start));
    if (path_start != std::string_view::npos) out.base_path = std::string(url.substr(path_start));
    while (!out.base_path.empty() && out.base_path.back() == '/') out.base_path.pop_back();
    if (out.scheme_host_port.size() <= scheme_end + 3) throw UsageError("endpoint '" + std::string(url) + "' has no host");
    return out;
}

class HttpBackend : public Backend {
public:
    struct Options {
        std::string endpoint;
        std::string api_key_env = "OPENAI_API_KEY";
        std::chrono::seconds timeout{120};
    };

    explicit HttpBackend(Options options) : options_(std::move(options)), url_(parse_endpoint(options_.endpoint)) {
        if (const char* key = std::getenv(options_.api_key_env.c_str())) api_key_ = key;
    }

    std::string complete(std::span<const Message> messages, const DecodingParams& params) override {
        httplib::Client client(url_.scheme_host_port);
        client.set_connection_timeout(std::chrono::seconds(10));
        client.set_read_timeout(options_.timeout);
        client.set_write_timeout(options_.timeout);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

        const json body = {{"model", params.model_id},
                           {"messages", messages_json(messages)},
                           {"temperature", params.temperature},
                           {"max_tokens", params.max_tokens}};
        auto res = client.Post(url_.base_path + "/chat/completions", headers, body.dump(), "application/json");
        if (!res) {
            throw GatewayError("request to " + options_.endpoint + " failed: " + httplib::to_string(res.error()), 0,
                               true);
        }
        if (res->status < 200 || res->status >= 300) {
            const bool retryable = res->status >= 500 || res->status == 429 || res->status == 408;
            throw GatewayError("endpoint " + options_.endpoint + " returned HTTP " + std::to_string(res->status), res->status,
                               retryable);
        }
        try {
            const json reply = json::parse(res->body);
            const auto& content = reply.at("choices").at(0).at("message").at("content");
            if (content.is_null()) return {};
            return content.get<std::string>();
        } catch (const json::exception& e) {
            throw GatewayError(std::string("malformed completion response: ") + e.what());
        }
    }

    std::string fingerprint() const override { return options_.endpoint; }

private:
    Options options_;
    EndpointUrl url_;
    std::string api_key_;
};

}  // namespace xicl
