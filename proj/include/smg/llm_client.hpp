#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "smg/errors.hpp"

// Transport-agnostic chat-completion client plus deterministic test doubles:
// a scripted mock and a transcript-replay client, so every LLM-dependent
// code path runs offline.

namespace smg {

struct ChatMessage {
    std::string role;  // "system", "user" or "assistant"
    std::string content;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 1024;

    void validate() const {
        if (messages.empty()) throw Error("chat request: at least one message required");
        if (temperature < 0.0 || temperature > 2.0) throw Error("chat request: temperature outside [0,2]");
        for (const auto& m : messages) {
            if (m.role != "system" && m.role != "user" && m.role != "assistant") {
                throw Error("chat request: unknown role '" + m.role + "'");
            }
        }
    }
};

inline nlohmann::json chat_request_to_json(const ChatRequest& req) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : req.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    return {{"model", req.model},
            {"messages", messages},
            {"temperature", req.temperature},
            {"max_tokens", req.max_tokens}};
}

inline ChatRequest chat_request_from_json(const nlohmann::json& doc) {
    ChatRequest req;
    req.model = doc.at("model").get<std::string>();
    req.temperature = doc.value("temperature", 0.0);
    req.max_tokens = doc.value("max_tokens", 1024);
    for (const auto& m : doc.at("messages")) {
        req.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    }
    return req;
}

class LlmClient {
  public:
    virtual ~LlmClient() = default;
    // Returns the assistant reply text or throws LlmFailure on transport
    // problems. Blocking; safe to call from several threads.
    virtual std::string complete(const ChatRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Test doubles
// ---------------------------------------------------------------------------

// Replays a fixed list of canned outcomes in order; each entry is either a
// reply or a scripted transport failure. Exhausting the script is a failure.
class MockLlmClient : public LlmClient {
  public:
    struct Fail {
        std::string message = "scripted failure";
    };
    using Outcome = std::variant<std::string, Fail>;

    MockLlmClient() = default;
    explicit MockLlmClient(std::vector<Outcome> script) : script_(std::move(script)) {}

    MockLlmClient& reply(std::string text) {
        script_.emplace_back(std::move(text));
        return *this;
    }
    MockLlmClient& fail(std::string message = "scripted failure") {
        script_.emplace_back(Fail{std::move(message)});
        return *this;
    }

    std::string complete(const ChatRequest& request) override {
        request.validate();
        requests_.push_back(request);
        if (next_ >= script_.size()) throw LlmFailure("mock: script exhausted");
        const Outcome& o = script_[next_++];
        if (const auto* f = std::get_if<Fail>(&o)) throw LlmFailure(f->message);
        return std::get<std::string>(o);
    }

    std::size_t call_count() const { return requests_.size(); }
    const std::vector<ChatRequest>& requests() const { return requests_; }

  private:
    std::vector<Outcome> script_;
    std::size_t next_ = 0;
    std::vector<ChatRequest> requests_;
};

// Records request/reply pairs passing through an inner client, for replay in
// CI without credentials.
class TranscriptRecorder : public LlmClient {
  public:
    explicit TranscriptRecorder(LlmClient& inner) : inner_(inner) {}

    std::string complete(const ChatRequest& request) override {
        const std::string reply = inner_.complete(request);
        transcript_.push_back({{"request", chat_request_to_json(request)}, {"reply", reply}});
        return reply;
    }

    const nlohmann::json& transcript() const { return transcript_; }

  private:
    LlmClient& inner_;
    nlohmann::json transcript_ = nlohmann::json::array();
};

// Serves recorded replies in order, verifying each incoming request matches
// the recorded one, which makes replayed pipelines byte-identical.
class TranscriptReplayClient : public LlmClient {
  public:
    explicit TranscriptReplayClient(nlohmann::json transcript) : transcript_(std::move(transcript)) {
        if (!transcript_.is_array()) throw Error("transcript must be a JSON array");
    }

    std::string complete(const ChatRequest& request) override {
        if (next_ >= transcript_.size()) throw LlmFailure("replay: transcript exhausted");
        const auto& entry = transcript_[next_++];
        if (entry.at("request") != chat_request_to_json(request)) {
            throw LlmFailure("replay: request differs from transcript entry " + std::to_string(next_ - 1));
        }
        return entry.at("reply").get<std::string>();
    }

  private:
    nlohmann::json transcript_;
    std::size_t next_ = 0;
};

// ---------------------------------------------------------------------------
// Retry and reply parsing
// ---------------------------------------------------------------------------

using SleepFn = std::function<void(double seconds)>;

inline void default_sleep(double seconds) {
    std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

// First successful reply wins; exponential backoff (1 s base, doubling)
// between attempts. Throws LlmFailure after retries+1 transport failures.
inline std::string complete_with_retry(LlmClient& client, const ChatRequest& request, int retries,
                                       const SleepFn& sleep = default_sleep) {
    if (retries < 0) throw Error("complete_with_retry: retries must be >= 0");
    double backoff = 1.0;
    std::string last_error;
    for (int attempt = 0; attempt <= retries; ++attempt) {
        if (attempt > 0) {
            sleep(backoff);
            backoff *= 2.0;
        }
        try {
            return client.complete(request);
        } catch (const LlmFailure& e) {
            last_error = e.what();
        }
    }
    throw LlmFailure("all attempts failed; last error: " + last_error);
}

namespace detail {

// Candidate spans of balanced braces, longest first, string-aware.
inline std::vector<std::string> balanced_brace_spans(const std::string& text) {
    std::vector<std::string> spans;
    for (std::size_t start = 0; start < text.size(); ++start) {
        if (text[start] != '{') continue;
        int depth = 0;
        bool in_string = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            const char c = text[i];
            if (in_string) {
                if (c == '\\') {
                    ++i;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth == 0) {
                    spans.push_back(text.substr(start, i - start + 1));
                    break;
                }
            }
        }
    }
    std::sort(spans.begin(), spans.end(),
              [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
    return spans;
}

}  // namespace detail

// Extracts the first fenced code block that parses as JSON; falls back to
// the longest brace-balanced substring. Throws ParseFailure otherwise.
inline nlohmann::json extract_json_block(const std::string& reply) {
    std::size_t pos = 0;
    while ((pos = reply.find("```", pos)) != std::string::npos) {
        std::size_t body = reply.find('\n', pos);
        if (body == std::string::npos) break;
        const std::size_t end = reply.find("```", body);
        if (end == std::string::npos) break;
        const std::string block = reply.substr(body + 1, end - body - 1);
        nlohmann::json parsed = nlohmann::json::parse(block, nullptr, false);
        if (!parsed.is_discarded()) return parsed;
        pos = end + 3;
    }
    for (const auto& span : detail::balanced_brace_spans(reply)) {
        nlohmann::json parsed = nlohmann::json::parse(span, nullptr, false);
        if (!parsed.is_discarded()) return parsed;
    }
    throw ParseFailure("no JSON found in reply");
}

}  // namespace smg
