#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "factgenius/cache.hpp"
#include "factgenius/evidence.hpp"
#include "factgenius/kg_store.hpp"
#include "factgenius/llm_gateway.hpp"
#include "factgenius/prompts.hpp"
#include "factgenius/relation_miner.hpp"
#include "factgenius/response_parser.hpp"

namespace factgenius {

enum class ReasoningType { OneHop, Conjunction, Existence, MultiHop, Negation };

inline constexpr ReasoningType kAllReasoningTypes[] = {ReasoningType::OneHop, ReasoningType::Conjunction,
                                                       ReasoningType::Existence, ReasoningType::MultiHop,
                                                       ReasoningType::Negation};

inline std::string_view to_string(ReasoningType t) {
  switch (t) {
    case ReasoningType::OneHop: return "one-hop";
    case ReasoningType::Conjunction: return "conjunction";
    case ReasoningType::Existence: return "existence";
    case ReasoningType::MultiHop: return "multi-hop";
    case ReasoningType::Negation: return "negation";
  }
  return "?";
}

/// One dataset row.
struct ClaimRecord {
  std::string id;
  std::string claim;
  std::set<std::string> entities;
  std::optional<Label> label;
  std::set<ReasoningType> types;
};

enum class PipelineMode { ClaimOnly, EvidenceZeroShot };

inline std::string_view to_string(PipelineMode m) { return m == PipelineMode::ClaimOnly ? "claim-only" : "evidence"; }
inline std::string_view to_string(MiningMode m) { return m == MiningMode::StageOneOnly ? "stage-1" : "two-stage"; }

struct PipelineConfig {
  PipelineMode mode = PipelineMode::EvidenceZeroShot;
  MiningMode stage = MiningMode::TwoStage;
  MiningOptions mining;
  std::size_t per_relation_cap = kDefaultPerRelationCap;
  LiteralQuotes literal_quotes = LiteralQuotes::Doubled;
  std::optional<std::size_t> options_cap;
  LlmConfig llm;
  CallOptions filter_call;
  CallOptions classify_call;
  std::optional<std::filesystem::path> cache_dir;
  int workers = 1;

  void validate() const {
    if (!(mining.threshold >= 0 && mining.threshold <= 100)) {
      throw Error(ErrorCode::InvalidArgument, "threshold must lie in [0, 100]");
    }
    if (per_relation_cap == 0) throw Error(ErrorCode::InvalidArgument, "per_relation_cap must be positive");
    if (workers < 1) throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");
    for (const auto* call : {&filter_call, &classify_call}) {
      if (call->temperature && *call->temperature < 0) {
        throw Error(ErrorCode::InvalidArgument, "temperature must be >= 0");
      }
    }
    llm.validate();
  }
};

/// Everything the pipeline saw and decided for one claim.
struct VerificationTrace {
  std::string id;
  std::string claim;
  CandidateConnections candidates;
  ValidatedConnections validated;
  std::vector<std::string> evidence_lines;
  int attempts_filter = 0;  // 0 when no filter request was made
  int attempts_classify = 0;
  Verdict verdict;
  /// Retries were exhausted; the verdict is then Refuted by default.
  bool failed = false;
  std::string failure;
};

/// Gateway for `cfg`: `backend` (HTTP when null), behind the response cache
/// when `cfg.cache_dir` is set.
inline std::shared_ptr<LlmGateway> make_gateway(const PipelineConfig& cfg,
                                                std::shared_ptr<CompletionBackend> backend = nullptr) {
  if (!backend) backend = std::make_shared<HttpChatBackend>();
  if (cfg.cache_dir) backend = std::make_shared<CachingBackend>(*cfg.cache_dir, std::move(backend));
  return std::make_shared<LlmGateway>(cfg.llm, std::move(backend));
}

namespace detail {

inline void require_entities(const ClaimRecord& rec) {
  if (rec.entities.empty()) throw Error(ErrorCode::EmptyEntities, "claim '" + rec.id + "' lists no entities");
}

// Filter prompt, mining and evidence. Returns false when the filter request
// ran out of attempts (trace marked failed).
inline bool retrieve_evidence(const PipelineConfig& cfg, const KnowledgeGraph& g, LlmGateway& llm,
                              const ClaimRecord& rec, VerificationTrace& trace) {
  std::map<std::string, std::vector<RelationLabel>, std::less<>> options;
  for (const auto& e : rec.entities) {
    const auto one_hop = g.one_hop_relations(e);
    options[e].assign(one_hop.begin(), one_hop.end());
  }
  const auto prompt = build_filter_prompt(rec.claim, options, cfg.options_cap);
  try {
    auto parsed = llm.request_with_retry(
        prompt, [&](const std::string& text) { return parse_connection_dict(text, rec.entities); },
        cfg.filter_call);
    trace.candidates = std::move(parsed.value);
    trace.attempts_filter = parsed.attempts;
  } catch (const RetryExhaustedError& e) {
    trace.attempts_filter = e.attempts();
    trace.failed = true;
    trace.failure = std::string("filter: ") + e.what();
    for (const auto& ent : rec.entities) trace.candidates.entity(ent);
    return false;
  }
  trace.validated = mine(g, trace.candidates, cfg.stage, cfg.mining);
  trace.evidence_lines =
      render_evidence(collect_evidence(g, trace.validated, cfg.per_relation_cap), cfg.literal_quotes);
  return true;
}

}  // namespace detail

/// Runs one claim end to end. Exhausted retries do not throw: the trace comes
/// back with `failed` set and a Refuted verdict.
inline VerificationTrace verify_claim(const PipelineConfig& cfg, const KnowledgeGraph& g, LlmGateway& llm,
                                      const ClaimRecord& rec) {
  VerificationTrace trace;
  trace.id = rec.id;
  trace.claim = rec.claim;

  ChatMessages prompt;
  if (cfg.mode == PipelineMode::ClaimOnly) {
    prompt = build_claim_only_prompt(rec.claim);
  } else {
    detail::require_entities(rec);
    if (!detail::retrieve_evidence(cfg, g, llm, rec, trace)) return trace;
    prompt = build_evidence_prompt(rec.claim, trace.evidence_lines);
  }

  try {
    auto parsed = llm.request_with_retry(
        prompt, [](const std::string& text) { return parse_verdict(text); }, cfg.classify_call);
    trace.verdict = std::move(parsed.value);
    trace.attempts_classify = parsed.attempts;
  } catch (const RetryExhaustedError& e) {
    trace.attempts_classify = e.attempts();
    trace.failed = true;
    trace.failure = std::string("classify: ") + e.what();
    trace.verdict = Verdict{Label::Refuted, {}, e.raw_texts().empty() ? std::string{} : e.raw_texts().back()};
  }
  return trace;
}

/// Verifies `records` on `workers` threads; results keep input order.
inline std::vector<VerificationTrace> verify_batch(const PipelineConfig& cfg, const KnowledgeGraph& g,
                                                   LlmGateway& llm, const std::vector<ClaimRecord>& records,
                                                   int workers) {
  std::vector<VerificationTrace> out(records.size());
  std::vector<std::exception_ptr> errors(records.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < records.size(); i = next++) {
      try {
        out[i] = verify_claim(cfg, g, llm, records[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n = static_cast<std::size_t>(std::max(1, workers));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < std::min(n, records.size()); ++t) pool.emplace_back(work);
    work();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

inline nlohmann::json to_json(const CandidateConnections& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [e, list] : c.entries) j[e] = list;
  return j;
}

inline nlohmann::json to_json(const ValidatedConnections& v) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [e, set] : v.entries) {
    auto arr = nlohmann::json::array();
    for (const auto& r : set.ordered()) arr.push_back(r.str());
    j[e] = std::move(arr);
  }
  return j;
}

inline nlohmann::json to_json(const VerificationTrace& t) {
  return {{"id", t.id},
          {"claim", t.claim},
          {"candidates", to_json(t.candidates)},
          {"validated", to_json(t.validated)},
          {"evidence_lines", t.evidence_lines},
          {"attempts_filter", t.attempts_filter},
          {"attempts_classify", t.attempts_classify},
          {"verdict",
           {{"label", to_string(t.verdict.label)},
            {"explanation", t.verdict.explanation},
            {"raw_text", t.verdict.raw_text}}},
          {"failed", t.failed},
          {"failure", t.failure}};
}

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json();
}

/// Run-config snapshot; never contains the API key.
inline nlohmann::json to_json(const PipelineConfig& cfg) {
  nlohmann::json j = {{"mode", to_string(cfg.mode)},
                      {"stage", to_string(cfg.stage)},
                      {"threshold", cfg.mining.threshold},
                      {"augment_reverse_pool", cfg.mining.augment_reverse_pool},
                      {"iterate_to_fixpoint", cfg.mining.iterate_to_fixpoint},
                      {"per_relation_cap", cfg.per_relation_cap},
                      {"literal_quotes", cfg.literal_quotes == LiteralQuotes::Doubled ? "doubled" : "single"},
                      {"options_cap", cfg.options_cap ? nlohmann::json(*cfg.options_cap) : nlohmann::json()},
                      {"endpoint_url", cfg.llm.endpoint_url},
                      {"model", cfg.llm.model_name},
                      {"temperature", cfg.llm.temperature},
                      {"filter_temperature", optional_json(cfg.filter_call.temperature)},
                      {"classify_temperature", optional_json(cfg.classify_call.temperature)},
                      {"max_attempts", cfg.llm.max_attempts},
                      {"max_parallel_requests", cfg.llm.max_parallel_requests},
                      {"workers", cfg.workers}};
  j["cache_dir"] = cfg.cache_dir ? nlohmann::json(cfg.cache_dir->string()) : nlohmann::json();
  return j;
}

/// Writes traces.jsonl and run_config.json into `dir`.
inline void write_run_directory(const std::filesystem::path& dir, const PipelineConfig& cfg,
                                const std::vector<VerificationTrace>& traces) {
  std::filesystem::create_directories(dir);
  std::ofstream cfg_out(dir / "run_config.json");
  cfg_out << to_json(cfg).dump(2) << '\n';
  std::ofstream traces_out(dir / "traces.jsonl");
  for (const auto& t : traces) traces_out << to_json(t).dump() << '\n';
  if (!cfg_out || !traces_out) throw Error(ErrorCode::Io, "cannot write run directory " + dir.string());
}

/// One JSONL line per record: {"id","claim","evidence","label"}; evidence is
/// the newline-joined evidence block (empty in claim-only mode). Returns the
/// number of lines written.
inline std::size_t export_training_data(const PipelineConfig& cfg, const KnowledgeGraph& g, LlmGateway& llm,
                                        const std::vector<ClaimRecord>& dataset, const std::filesystem::path& out) {
  for (const auto& rec : dataset) {
    if (!rec.label) throw Error(ErrorCode::MissingLabel, "record '" + rec.id + "' has no label");
  }
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorCode::Io, "cannot write '" + out.string() + "'");
  std::size_t written = 0;
  for (const auto& rec : dataset) {
    std::string evidence;
    if (cfg.mode == PipelineMode::EvidenceZeroShot) {
      detail::require_entities(rec);
      VerificationTrace trace;
      detail::retrieve_evidence(cfg, g, llm, rec, trace);
      for (std::size_t i = 0; i < trace.evidence_lines.size(); ++i) {
        if (i) evidence += '\n';
        evidence += trace.evidence_lines[i];
      }
    }
    nlohmann::json line = {{"id", rec.id}, {"claim", rec.claim}, {"evidence", evidence}, {"label", to_string(*rec.label)}};
    file << line.dump() << '\n';
    ++written;
  }
  return written;
}

}  // namespace factgenius
