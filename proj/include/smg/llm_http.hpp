#pragma once

#include <cstdlib>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "smg/errors.hpp"
#include "smg/llm_client.hpp"

// HTTP chat-completion client (OpenAI-compatible wire format). Kept in its
// own header so the offline test suite never links transport code; only the
// CLI includes this.

namespace smg {

struct HttpLlmConfig {
    std::string endpoint;  // full URL, e.g. https://host/v1/chat/completions
    std::string api_key;
    double timeout_seconds = 30.0;

    // Credentials come from the environment so configs stay shareable.
    static HttpLlmConfig from_env() {
        HttpLlmConfig c;
        if (const char* e = std::getenv("SMG_LLM_ENDPOINT")) c.endpoint = e;
        if (const char* k = std::getenv("SMG_LLM_API_KEY")) c.api_key = k;
        return c;
    }
};

namespace detail {

struct ParsedUrl {
    std::string scheme_host;  // scheme://host[:port]
    std::string path;
};

inline ParsedUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error("LLM endpoint must be a full URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace detail

inline std::string parse_chat_response_body(const std::string& body) {
    nlohmann::json doc = nlohmann::json::parse(body, nullptr, false);
    if (doc.is_discarded()) throw LlmFailure("chat response is not JSON");
    if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
        throw LlmFailure("chat response has no choices");
    }
    const auto& message = doc["choices"][0].at("message");
    return message.at("content").get<std::string>();
}

class HttpLlmClient : public LlmClient {
  public:
    explicit HttpLlmClient(HttpLlmConfig config) : config_(std::move(config)) {
        if (config_.endpoint.empty()) {
            throw Error("LLM endpoint not configured (set SMG_LLM_ENDPOINT)");
        }
    }

    std::string complete(const ChatRequest& request) override {
        request.validate();
        const auto url = detail::split_url(config_.endpoint);
        httplib::Client cli(url.scheme_host);
        cli.set_connection_timeout(std::chrono::duration<double>(config_.timeout_seconds));
        cli.set_read_timeout(std::chrono::duration<double>(config_.timeout_seconds));
        httplib::Headers headers;
        if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

        const auto res = cli.Post(url.path, headers, chat_request_to_json(request).dump(),
                                  "application/json");
        if (!res) throw LlmFailure("chat request transport error: " + httplib::to_string(res.error()));
        if (res->status != 200) {
            throw LlmFailure("chat request failed with HTTP " + std::to_string(res->status));
        }
        return parse_chat_response_body(res->body);
    }

  private:
    HttpLlmConfig config_;
};

}  // namespace smg
