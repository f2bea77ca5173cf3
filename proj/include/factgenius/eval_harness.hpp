#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "factgenius/pipeline.hpp"

namespace factgenius {

/// Maps dataset tag spellings to reasoning types. A tag mapped to nullopt is
/// recognised and ignored (FactKG's style tags); anything absent is rejected.
/// Lookups normalise case and treat ' ' and '_' as '-'.
class TypeAliasTable {
 public:
  static TypeAliasTable defaults() {
    TypeAliasTable t;
    for (auto type : kAllReasoningTypes) t.add(std::string(to_string(type)), type);
    t.add("onehop", ReasoningType::OneHop);
    t.add("num1", ReasoningType::OneHop);
    t.add("multi-claim", ReasoningType::Conjunction);
    t.add("multihop", ReasoningType::MultiHop);
    t.add("negation-claim", ReasoningType::Negation);
    for (const char* style : {"written", "coll:model", "coll:presup", "model", "presup", "substitution"}) {
      t.add(style, std::nullopt);
    }
    return t;
  }

  void add(const std::string& tag, std::optional<ReasoningType> type) { aliases_[normalize(tag)] = type; }

  /// Outer nullopt: unknown tag.
  std::optional<std::optional<ReasoningType>> lookup(const std::string& tag) const {
    auto it = aliases_.find(normalize(tag));
    if (it == aliases_.end()) return std::nullopt;
    return it->second;
  }

  static std::string normalize(std::string tag) {
    for (auto& c : tag) {
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (c == ' ' || c == '_') c = '-';
    }
    return tag;
  }

 private:
  std::map<std::string, std::optional<ReasoningType>> aliases_;
};

/// Reads dataset JSONL:
///   {"id","claim","entities":[...],"label":"Supported"|"Refuted","types":[...]}
/// `label` may be absent (unlabeled data); everything else is required.
inline std::vector<ClaimRecord> load_dataset(std::istream& in,
                                             const TypeAliasTable& aliases = TypeAliasTable::defaults()) {
  std::vector<ClaimRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fail = [&](const std::string& why) { throw FileError(ErrorCode::Schema, line_no, why); };
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail("not a JSON object");

    ClaimRecord rec;
    if (!j.contains("id")) fail("missing \"id\"");
    if (j["id"].is_string()) rec.id = j["id"].get<std::string>();
    else if (j["id"].is_number_integer()) rec.id = std::to_string(j["id"].get<long long>());
    else fail("\"id\" must be a string or integer");

    if (!j.contains("claim") || !j["claim"].is_string() || j["claim"].get_ref<const std::string&>().empty()) {
      fail("missing or empty \"claim\"");
    }
    rec.claim = j["claim"].get<std::string>();

    if (!j.contains("entities") || !j["entities"].is_array() || j["entities"].empty()) {
      fail("\"entities\" must be a non-empty array");
    }
    for (const auto& e : j["entities"]) {
      if (!e.is_string() || !EntityId::valid(e.get_ref<const std::string&>())) fail("invalid entity in \"entities\"");
      rec.entities.insert(e.get<std::string>());
    }

    if (j.contains("label") && !j["label"].is_null()) {
      if (!j["label"].is_string()) fail("\"label\" must be a string");
      rec.label = parse_label(j["label"].get<std::string>());
      if (!rec.label) fail("label must be Supported or Refuted");
    }

    if (!j.contains("types") || !j["types"].is_array()) fail("\"types\" must be an array");
    for (const auto& t : j["types"]) {
      if (!t.is_string()) fail("type tags must be strings");
      const auto tag = t.get<std::string>();
      auto mapped = aliases.lookup(tag);
      if (!mapped) throw FileError(ErrorCode::UnknownTypeTag, line_no, "unknown reasoning type '" + tag + "'");
      if (*mapped) rec.types.insert(**mapped);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::vector<ClaimRecord> load_dataset(const std::string& path,
                                             const TypeAliasTable& aliases = TypeAliasTable::defaults()) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open dataset '" + path + "'");
  return load_dataset(in, aliases);
}

struct ClaimOutcome {
  std::string id;
  Label gold = Label::Refuted;
  Label predicted = Label::Refuted;
  std::set<ReasoningType> types;
  bool failed = false;

  friend bool operator==(const ClaimOutcome&, const ClaimOutcome&) = default;
};

struct TypeStats {
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy() const { return count ? static_cast<double>(correct) / static_cast<double>(count) : 0.0; }

  friend bool operator==(const TypeStats&, const TypeStats&) = default;
};

/// Buckets per reasoning type: every tag of a claim (overlapping), or only
/// its first tag in canonical order (exclusive).
enum class TypeAggregation { Overlapping, Exclusive };

struct EvalReport {
  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t failed = 0;
  std::map<ReasoningType, TypeStats> per_type;
  /// confusion[gold][predicted], index 0 = Supported, 1 = Refuted.
  std::array<std::array<std::size_t, 2>, 2> confusion{};
  std::vector<ClaimOutcome> claims;

  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

inline std::size_t label_index(Label l) { return l == Label::Supported ? 0 : 1; }

/// Failed claims are counted (with their default Refuted prediction) and
/// additionally reported in `failed`.
inline EvalReport summarize(std::vector<ClaimOutcome> outcomes,
                            TypeAggregation aggregation = TypeAggregation::Overlapping) {
  EvalReport r;
  for (const auto& o : outcomes) {
    const bool ok = o.gold == o.predicted;
    ++r.total;
    r.correct += ok;
    r.failed += o.failed;
    ++r.confusion[label_index(o.gold)][label_index(o.predicted)];
    for (auto type : o.types) {
      auto& s = r.per_type[type];
      ++s.count;
      s.correct += ok;
      if (aggregation == TypeAggregation::Exclusive) break;
    }
  }
  r.claims = std::move(outcomes);
  return r;
}

inline EvalReport evaluate(const PipelineConfig& cfg, const KnowledgeGraph& g, LlmGateway& llm,
                           const std::vector<ClaimRecord>& dataset,
                           TypeAggregation aggregation = TypeAggregation::Overlapping,
                           std::vector<VerificationTrace>* traces = nullptr) {
  if (dataset.empty()) throw Error(ErrorCode::InvalidArgument, "dataset is empty");
  for (const auto& rec : dataset) {
    if (!rec.label) throw Error(ErrorCode::MissingLabel, "record '" + rec.id + "' has no label");
  }
  auto results = verify_batch(cfg, g, llm, dataset, cfg.workers);
  std::vector<ClaimOutcome> outcomes;
  outcomes.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    outcomes.push_back({dataset[i].id, *dataset[i].label, results[i].verdict.label, dataset[i].types, results[i].failed});
  }
  if (traces) *traces = std::move(results);
  return summarize(std::move(outcomes), aggregation);
}

enum class ReportFormat { Text, Json, Csv };

namespace detail {

inline std::optional<ReasoningType> reasoning_type_from(std::string_view s) {
  for (auto t : kAllReasoningTypes) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

inline std::string join_types(const std::set<ReasoningType>& types) {
  std::string out;
  for (auto t : types) {
    if (!out.empty()) out += ';';
    out += to_string(t);
  }
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace detail

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json per_type = nlohmann::json::object();
  for (const auto& [type, s] : r.per_type) {
    per_type[std::string(to_string(type))] = {{"count", s.count}, {"correct", s.correct}, {"accuracy", s.accuracy()}};
  }
  nlohmann::json confusion = nlohmann::json::object();
  for (auto gold : {Label::Supported, Label::Refuted}) {
    for (auto pred : {Label::Supported, Label::Refuted}) {
      confusion[std::string(to_string(gold))][std::string(to_string(pred))] =
          r.confusion[label_index(gold)][label_index(pred)];
    }
  }
  auto claims = nlohmann::json::array();
  for (const auto& c : r.claims) {
    auto types = nlohmann::json::array();
    for (auto t : c.types) types.push_back(to_string(t));
    claims.push_back({{"id", c.id},
                      {"gold", to_string(c.gold)},
                      {"predicted", to_string(c.predicted)},
                      {"types", types},
                      {"failed", c.failed}});
  }
  return {{"total", r.total},       {"correct", r.correct},   {"accuracy", r.accuracy()}, {"failed", r.failed},
          {"per_type", per_type},   {"confusion", confusion}, {"claims", claims}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  auto label = [](const nlohmann::json& v) {
    auto l = parse_label(v.get<std::string>());
    if (!l) throw Error(ErrorCode::Schema, "bad label in report");
    return *l;
  };
  auto type = [](const std::string& s) {
    auto t = detail::reasoning_type_from(s);
    if (!t) throw Error(ErrorCode::Schema, "bad reasoning type in report: " + s);
    return *t;
  };
  EvalReport r;
  r.total = j.at("total").get<std::size_t>();
  r.correct = j.at("correct").get<std::size_t>();
  r.failed = j.at("failed").get<std::size_t>();
  for (const auto& [name, s] : j.at("per_type").items()) {
    r.per_type[type(name)] = {s.at("count").get<std::size_t>(), s.at("correct").get<std::size_t>()};
  }
  for (auto gold : {Label::Supported, Label::Refuted}) {
    for (auto pred : {Label::Supported, Label::Refuted}) {
      r.confusion[label_index(gold)][label_index(pred)] =
          j.at("confusion").at(std::string(to_string(gold))).at(std::string(to_string(pred))).get<std::size_t>();
    }
  }
  for (const auto& c : j.at("claims")) {
    ClaimOutcome o{c.at("id").get<std::string>(), label(c.at("gold")), label(c.at("predicted")), {},
                   c.at("failed").get<bool>()};
    for (const auto& t : c.at("types")) o.types.insert(type(t.get<std::string>()));
    r.claims.push_back(std::move(o));
  }
  return r;
}

/// Text: a results table (one row per reasoning type present, then Total)
/// plus the confusion matrix. JSON: the whole report. CSV: one row per claim.
inline std::string render_report(const EvalReport& r, ReportFormat format) {
  if (format == ReportFormat::Json) return to_json(r).dump(2) + "\n";
  std::ostringstream out;
  if (format == ReportFormat::Csv) {
    out << "id,gold,predicted,types,failed\n";
    for (const auto& c : r.claims) {
      out << detail::csv_field(c.id) << ',' << to_string(c.gold) << ',' << to_string(c.predicted) << ','
          << detail::join_types(c.types) << ',' << (c.failed ? "true" : "false") << '\n';
    }
    return out.str();
  }
  char row[128];
  std::snprintf(row, sizeof row, "%-16s %8s %8s %9s\n", "Reasoning type", "Count", "Correct", "Accuracy");
  out << row;
  for (const auto& [type, s] : r.per_type) {
    std::snprintf(row, sizeof row, "%-16s %8zu %8zu %9s\n", std::string(to_string(type)).c_str(), s.count, s.correct,
                  detail::fixed4(s.accuracy()).c_str());
    out << row;
  }
  std::snprintf(row, sizeof row, "%-16s %8zu %8zu %9s\n", "Total", r.total, r.correct,
                detail::fixed4(r.accuracy()).c_str());
  out << row;
  out << "Failed (retries exhausted): " << r.failed << "\n\n";
  out << "Confusion (rows gold, columns predicted)\n";
  std::snprintf(row, sizeof row, "%-10s %10s %10s\n", "", "Supported", "Refuted");
  out << row;
  for (auto gold : {Label::Supported, Label::Refuted}) {
    std::snprintf(row, sizeof row, "%-10s %10zu %10zu\n", std::string(to_string(gold)).c_str(),
                  r.confusion[label_index(gold)][0], r.confusion[label_index(gold)][1]);
    out << row;
  }
  return out.str();
}

}  // namespace factgenius
