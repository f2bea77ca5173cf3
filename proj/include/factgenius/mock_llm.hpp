#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "factgenius/llm_gateway.hpp"
#include "factgenius/prompts.hpp"
#include "factgenius/response_parser.hpp"

namespace factgenius::mock {

struct GoldEntry {
  std::string claim;
  Label label = Label::Refuted;
  /// What the mock classifier answers; defaults to `label`.
  std::optional<Label> answer;
  std::map<std::string, std::vector<std::string>> connections;
};

/// Gold answers keyed by claim text. JSON form:
///   {"claims": [{"claim": "...", "label": "Supported", "answer": "Refuted"?,
///                "connections": {"<entity>": ["<relation>", ...]}}]}
struct GoldTable {
  std::map<std::string, GoldEntry, std::less<>> by_claim;

  static GoldTable from_json(const nlohmann::json& j) {
    GoldTable table;
    if (!j.is_object() || !j.contains("claims") || !j["claims"].is_array()) {
      throw Error(ErrorCode::Schema, "gold table needs a \"claims\" array");
    }
    for (const auto& c : j["claims"]) {
      GoldEntry e;
      e.claim = c.at("claim").get<std::string>();
      auto label = parse_label(c.at("label").get<std::string>());
      if (!label) throw Error(ErrorCode::Schema, "bad gold label for claim '" + e.claim + "'");
      e.label = *label;
      if (c.contains("answer")) {
        auto answer = parse_label(c["answer"].get<std::string>());
        if (!answer) throw Error(ErrorCode::Schema, "bad answer for claim '" + e.claim + "'");
        e.answer = answer;
      }
      if (c.contains("connections")) e.connections = c["connections"].get<std::map<std::string, std::vector<std::string>>>();
      table.by_claim[e.claim] = std::move(e);
    }
    return table;
  }

  static GoldTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open gold table '" + path + "'");
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::Schema, "gold table '" + path + "' is not JSON");
    return from_json(j);
  }
};

enum class Behavior { Oracle, InvertedOracle, EchoAllOptions, Fixed, FailThen, StatusError };

struct MockScript {
  Behavior behavior = Behavior::EchoAllOptions;
  GoldTable gold;
  std::string text;
  int fail_count = 0;
  int status_code = 500;
  std::shared_ptr<const MockScript> then;

  static MockScript oracle(GoldTable g) {
    MockScript s;
    s.behavior = Behavior::Oracle;
    s.gold = std::move(g);
    return s;
  }
  static MockScript inverted_oracle(GoldTable g) {
    auto s = oracle(std::move(g));
    s.behavior = Behavior::InvertedOracle;
    return s;
  }
  static MockScript echo_all_options() { return MockScript{}; }
  static MockScript fixed(std::string t) {
    MockScript s;
    s.behavior = Behavior::Fixed;
    s.text = std::move(t);
    return s;
  }
  static MockScript status_error(int code) {
    MockScript s;
    s.behavior = Behavior::StatusError;
    s.status_code = code;
    return s;
  }
  static MockScript fail_then(int n, MockScript next) {
    MockScript s;
    s.behavior = Behavior::FailThen;
    s.fail_count = n;
    s.then = std::make_shared<const MockScript>(std::move(next));
    return s;
  }

  /// Command-line form: `oracle:<gold.json>`, `invert:<gold.json>`, `echo`,
  /// `fixed:<text>`, `status:<code>`, `fail:<n>:<script>`.
  static MockScript parse(std::string_view spec) {
    auto after = [&](std::string_view prefix) { return std::string(spec.substr(prefix.size())); };
    if (spec == "echo") return echo_all_options();
    if (spec.starts_with("oracle:")) return oracle(GoldTable::load(after("oracle:")));
    if (spec.starts_with("invert:")) return inverted_oracle(GoldTable::load(after("invert:")));
    if (spec.starts_with("fixed:")) return fixed(after("fixed:"));
    if (spec.starts_with("status:")) return status_error(std::stoi(after("status:")));
    if (spec.starts_with("fail:")) {
      const auto rest = spec.substr(5);
      const auto colon = rest.find(':');
      if (colon == std::string_view::npos) throw Error(ErrorCode::InvalidArgument, "fail:<n>:<script> expected");
      return fail_then(std::stoi(std::string(rest.substr(0, colon))), parse(rest.substr(colon + 1)));
    }
    throw Error(ErrorCode::InvalidArgument, "unknown mock script '" + std::string(spec) + "'");
  }
};

/// Fields the mock pulls out of a rendered prompt.
struct PromptView {
  bool is_filter = false;
  std::string claim;
  std::map<std::string, std::vector<std::string>, std::less<>> options;  // filter prompts only
};

inline std::string_view between(std::string_view s, std::string_view open, std::string_view close) {
  const auto a = s.find(open);
  if (a == std::string_view::npos) return {};
  const auto from = a + open.size();
  const auto b = s.find(close, from);
  return s.substr(from, b == std::string_view::npos ? std::string_view::npos : b - from);
}

inline PromptView inspect_prompt(const ChatMessages& messages) {
  PromptView view;
  std::string_view system, user;
  for (const auto& m : messages) (m.role == ChatRole::System ? system : user) = m.content;
  view.is_filter = system == prompt_text::kFilterSystem;
  if (!view.is_filter) {
    view.claim = std::string(between(user, prompt_text::kVerifyTask, "\n\n"));
    return view;
  }
  view.claim = std::string(between(user, "Claim1:\n", "\n\n## TASK:"));
  std::istringstream lines{std::string(user)};
  std::string line, pending;
  while (std::getline(lines, line)) {
    if (line.size() > 1 + prompt_text::kEntitySlot.size() && line.front() == '"' &&
        line.ends_with(prompt_text::kEntitySlot)) {
      pending = line.substr(1, line.size() - 1 - prompt_text::kEntitySlot.size());
      view.options[pending];
    } else if (!pending.empty() && line.starts_with(prompt_text::kOptionsMarker)) {
      std::string_view rest(line);
      rest.remove_prefix(prompt_text::kOptionsMarker.size());
      while (!rest.empty()) {
        const auto comma = rest.find(", ");
        const auto item = rest.substr(0, comma);
        if (item != prompt_text::kEllipsis && !item.empty()) view.options[pending].emplace_back(item);
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 2);
      }
      pending.clear();
    }
  }
  return view;
}

inline constexpr std::string_view kUnparseable = "Sorry, I am unable to help with that request.";

struct CallRecord {
  ChatMessages messages;
  std::string response;
  int status = 200;
};

/// Deterministic stand-in for the inference server.
class MockLlm : public CompletionBackend {
 public:
  explicit MockLlm(MockScript script) : script_(std::move(script)) {}

  /// Logs the call and returns its record; status-error scripts yield a
  /// non-200 status instead of a response.
  CallRecord handle(const ChatMessages& messages) {
    std::lock_guard lock(mutex_);
    const auto index = log_.size();
    CallRecord record{messages, {}, script_status(script_, index)};
    if (record.status == 200) record.response = answer(script_, messages, index);
    log_.push_back(record);
    return record;
  }

  /// In-process path. Throws Error(Server) for status-error scripts.
  std::string respond(const ChatMessages& messages) {
    auto record = handle(messages);
    if (record.status != 200) throw Error(ErrorCode::Server, "HTTP " + std::to_string(record.status) + " (mock)");
    return std::move(record.response);
  }

  std::string complete(const CompletionRequest& request) override { return respond(request.messages); }

  std::vector<CallRecord> call_log() const {
    std::lock_guard lock(mutex_);
    return log_;
  }
  std::size_t call_count() const {
    std::lock_guard lock(mutex_);
    return log_.size();
  }

 private:
  static int script_status(const MockScript& s, std::size_t index) {
    if (s.behavior == Behavior::FailThen && index >= static_cast<std::size_t>(s.fail_count)) {
      return script_status(*s.then, index - s.fail_count);
    }
    return s.behavior == Behavior::StatusError ? s.status_code : 200;
  }

  static std::string answer(const MockScript& s, const ChatMessages& messages, std::size_t index) {
    switch (s.behavior) {
      case Behavior::Fixed:
        return s.text;
      case Behavior::StatusError:
        return {};
      case Behavior::FailThen:
        if (index < static_cast<std::size_t>(s.fail_count)) return std::string(kUnparseable);
        return answer(*s.then, messages, index - s.fail_count);
      case Behavior::EchoAllOptions: {
        const auto view = inspect_prompt(messages);
        if (!view.is_filter) return "True, echo mode accepts every claim.";
        CandidateConnections c;
        for (const auto& [entity, options] : view.options) {
          c.entity(entity);
          for (const auto& o : options) c.add(entity, o);
        }
        return to_dict_literal(c);
      }
      case Behavior::Oracle:
      case Behavior::InvertedOracle: {
        const auto view = inspect_prompt(messages);
        const auto it = s.gold.by_claim.find(view.claim);
        if (view.is_filter) {
          CandidateConnections c;
          for (const auto& [entity, options] : view.options) {
            c.entity(entity);
            if (it == s.gold.by_claim.end()) continue;
            if (auto g = it->second.connections.find(entity); g != it->second.connections.end()) {
              for (const auto& r : g->second) c.add(entity, r);
            }
          }
          return to_dict_literal(c);
        }
        if (it == s.gold.by_claim.end()) return "False, The claim is not in the gold table.";
        Label label = it->second.answer.value_or(it->second.label);
        if (s.behavior == Behavior::InvertedOracle) label = label == Label::Supported ? Label::Refuted : Label::Supported;
        return label == Label::Supported ? "True, The claim agrees with the knowledge graph."
                                         : "False, The claim conflicts with the knowledge graph.";
      }
    }
    return {};
  }

  MockScript script_;
  mutable std::mutex mutex_;
  std::vector<CallRecord> log_;
};

/// Serves a MockLlm over the chat-completion wire protocol on a background thread.
class MockServer {
 public:
  /// `port` 0 picks a free port.
  explicit MockServer(std::shared_ptr<MockLlm> llm, const std::string& host = "127.0.0.1", int port = 0)
      : llm_(std::move(llm)), host_(host) {
    server_.Post(".*", [this](const httplib::Request& req, httplib::Response& res) { handle(req, res); });
    if (port == 0) {
      port_ = server_.bind_to_any_port(host_);
    } else {
      port_ = server_.bind_to_port(host_, port) ? port : -1;
    }
    if (port_ <= 0) throw Error(ErrorCode::Transport, "mock server cannot bind " + host_ + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  ~MockServer() { stop(); }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  /// Blocks until stop() is called from another thread.
  void wait() {
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }
  std::string url() const { return "http://" + host_ + ":" + std::to_string(port_) + "/v1/chat/completions"; }
  MockLlm& llm() { return *llm_; }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    ChatMessages messages;
    std::string model;
    try {
      messages = wire::parse_request_messages(req.body);
      auto j = nlohmann::json::parse(req.body, nullptr, false);
      if (j.is_object() && j.contains("model") && j["model"].is_string()) model = j["model"].get<std::string>();
    } catch (const Error& e) {
      res.status = 400;
      res.set_content(nlohmann::json({{"error", e.what()}}).dump(), "application/json");
      return;
    }
    const auto record = llm_->handle(messages);
    res.status = record.status;
    if (record.status == 200) {
      res.set_content(wire::response_body(record.response, model), "application/json");
    } else {
      res.set_content(R"({"error":"mock status error"})", "application/json");
    }
  }

  std::shared_ptr<MockLlm> llm_;
  std::string host_;
  int port_ = -1;
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace factgenius::mock
