#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "factgenius/error.hpp"
#include "factgenius/prompts.hpp"

namespace factgenius {

struct LlmConfig {
  std::string endpoint_url = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model_name = "meta-llama/Meta-Llama-3-8B-Instruct";
  std::string api_key;  // sent as a bearer token when non-empty
  double temperature = 0.0;
  int max_attempts = 10;
  std::chrono::milliseconds request_timeout{60'000};
  std::chrono::milliseconds retry_backoff{0};
  int max_parallel_requests = 8;

  void validate() const {
    if (max_attempts < 1) throw Error(ErrorCode::InvalidArgument, "max_attempts must be >= 1");
    if (max_parallel_requests < 1) throw Error(ErrorCode::InvalidArgument, "max_parallel_requests must be >= 1");
    if (temperature < 0) throw Error(ErrorCode::InvalidArgument, "temperature must be >= 0");
  }
};

struct RawCompletion {
  std::string text;
  int attempt_index = 1;
  std::chrono::microseconds latency{0};
};

/// One chat-completion call as seen by a backend. `attempt` is 1-based.
struct CompletionRequest {
  const LlmConfig& config;
  const ChatMessages& messages;
  int attempt = 1;
};

/// Anything that turns messages into assistant text: the HTTP client, the
/// in-process mock, or the response cache wrapping either.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
};

// Wire format shared with the mock server.
namespace wire {

inline nlohmann::json messages_to_json(const ChatMessages& messages) {
  auto arr = nlohmann::json::array();
  for (const auto& m : messages) arr.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return arr;
}

inline std::string request_body(const LlmConfig& cfg, const ChatMessages& messages) {
  nlohmann::json body = {{"model", cfg.model_name}, {"temperature", cfg.temperature}, {"messages", messages_to_json(messages)}};
  return body.dump();
}

/// Parses a request body back into messages; throws ProtocolError.
inline ChatMessages parse_request_messages(std::string_view body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (!j.is_object() || !j.contains("messages") || !j["messages"].is_array()) {
    throw Error(ErrorCode::Protocol, "request has no messages array");
  }
  ChatMessages out;
  for (const auto& m : j["messages"]) {
    if (!m.is_object() || !m.value("role", nlohmann::json()).is_string() ||
        !m.value("content", nlohmann::json()).is_string()) {
      throw Error(ErrorCode::Protocol, "malformed message entry");
    }
    const auto role = m["role"].get<std::string>();
    if (role != "system" && role != "user") throw Error(ErrorCode::Protocol, "unsupported role '" + role + "'");
    out.push_back({role == "system" ? ChatRole::System : ChatRole::User, m["content"].get<std::string>()});
  }
  return out;
}

inline std::string response_body(std::string_view text, std::string_view model) {
  nlohmann::json body = {
      {"object", "chat.completion"},
      {"model", model},
      {"choices", nlohmann::json::array({{{"index", 0},
                                          {"message", {{"role", "assistant"}, {"content", text}}},
                                          {"finish_reason", "stop"}}})}};
  return body.dump();
}

/// Extracts choices[0].message.content; throws ProtocolError.
inline std::string parse_response_text(std::string_view body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::Protocol, "response is not JSON");
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw Error(ErrorCode::Protocol, "response has no choices");
  }
  const auto& first = j["choices"][0];
  if (!first.is_object() || !first.contains("message") || !first["message"].is_object()) {
    throw Error(ErrorCode::Protocol, "choices[0] has no message");
  }
  const auto& content = first["message"].value("content", nlohmann::json());
  if (!content.is_string()) throw Error(ErrorCode::Protocol, "choices[0].message.content is not a string");
  return content.get<std::string>();
}

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

inline Endpoint split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::InvalidArgument, "endpoint URL needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace wire

/// Chat-completion client over HTTP POST.
class HttpChatBackend : public CompletionBackend {
 public:
  std::string complete(const CompletionRequest& request) override {
    const auto& cfg = request.config;
    const auto endpoint = wire::split_url(cfg.endpoint_url);
    httplib::Client client(endpoint.scheme_host_port);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.request_timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg.request_timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);

    auto res = client.Post(endpoint.path, headers, wire::request_body(cfg, request.messages), "application/json");
    if (!res) throw Error(ErrorCode::Transport, cfg.endpoint_url + ": " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorCode::Server, "HTTP " + std::to_string(res->status) + " from " + cfg.endpoint_url);
    }
    return wire::parse_response_text(res->body);
  }
};

/// Per-call sampling overrides on top of the gateway's LlmConfig.
struct CallOptions {
  std::optional<double> temperature;
};

template <typename T>
struct Attempted {
  T value;
  int attempts = 1;
  std::vector<std::string> raw_texts;
};

/// Front door for every LLM call: bounds concurrency across threads and runs
/// the retry protocol.
class LlmGateway {
 public:
  LlmGateway(LlmConfig cfg, std::shared_ptr<CompletionBackend> backend)
      : cfg_(std::move(cfg)),
        backend_(std::move(backend)),
        limiter_(std::make_unique<std::counting_semaphore<>>(std::max(1, cfg_.max_parallel_requests))) {
    cfg_.validate();
    if (!backend_) throw Error(ErrorCode::InvalidArgument, "null completion backend");
  }

  const LlmConfig& config() const noexcept { return cfg_; }
  std::size_t requests_issued() const noexcept { return requests_.load(); }

  /// One request, no retry.
  RawCompletion complete(const ChatMessages& messages, int attempt = 1, const CallOptions& call = {}) {
    limiter_->acquire();
    struct Release {
      std::counting_semaphore<>* s;
      ~Release() { s->release(); }
    } release{limiter_.get()};
    ++requests_;
    const auto start = std::chrono::steady_clock::now();
    RawCompletion out;
    if (call.temperature) {
      LlmConfig adjusted = cfg_;
      adjusted.temperature = *call.temperature;
      out.text = backend_->complete({adjusted, messages, attempt});
    } else {
      out.text = backend_->complete({cfg_, messages, attempt});
    }
    out.attempt_index = attempt;
    out.latency = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start);
    return out;
  }

  /// Calls `complete` then `parse` until a parse succeeds. Transport, server
  /// and protocol errors and ParseError rejections each consume one attempt.
  /// The same messages are sent every time.
  template <typename Parse>
  auto request_with_retry(const ChatMessages& messages, Parse&& parse, const CallOptions& call = {})
      -> Attempted<std::invoke_result_t<Parse&, const std::string&>> {
    using Value = std::invoke_result_t<Parse&, const std::string&>;
    std::vector<std::string> raw;
    std::string last_reason = "no attempt made";
    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
      if (attempt > 1 && cfg_.retry_backoff.count() > 0) std::this_thread::sleep_for(cfg_.retry_backoff);
      try {
        auto completion = complete(messages, attempt, call);
        raw.push_back(completion.text);
        Value value = parse(raw.back());
        return Attempted<Value>{std::move(value), attempt, std::move(raw)};
      } catch (const Error& e) {
        switch (e.code()) {
          case ErrorCode::Transport:
          case ErrorCode::Server:
          case ErrorCode::Protocol:
          case ErrorCode::NoDictFound:
          case ErrorCode::UnbalancedBraces:
          case ErrorCode::MalformedDict:
          case ErrorCode::NoVerdictToken:
            last_reason = e.what();
            break;
          default:
            throw;
        }
      }
    }
    throw RetryExhaustedError(cfg_.max_attempts, last_reason, std::move(raw));
  }

 private:
  LlmConfig cfg_;
  std::shared_ptr<CompletionBackend> backend_;
  std::unique_ptr<std::counting_semaphore<>> limiter_;
  std::atomic<std::size_t> requests_{0};
};

}  // namespace factgenius
