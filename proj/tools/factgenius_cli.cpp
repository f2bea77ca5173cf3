#include <pthread.h>
#include <signal.h>

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "factgenius/factgenius.hpp"

namespace fg = factgenius;
using nlohmann::json;

namespace {

std::string env_name(std::string flag) {
  for (auto& c : flag) c = c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return "FACTGENIUS_" + flag;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Config file lines are `key = value` with flag names as keys. Values are
// exported as FACTGENIUS_* variables unless already set, which gives
// flags > env > file once CLI11 applies the env fallbacks.
void apply_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw fg::Error(fg::ErrorCode::Io, "cannot open config file '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw fg::FileError(fg::ErrorCode::MalformedFile, line_no, "expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    for (auto& c : key) if (c == '_') c = '-';
    ::setenv(env_name(key).c_str(), value.c_str(), 0);
  }
}

std::optional<std::string> config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    std::string_view a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.starts_with("--config=")) return std::string(a.substr(9));
  }
  if (const char* env = std::getenv("FACTGENIUS_CONFIG")) return std::string(env);
  return std::nullopt;
}

template <class T>
CLI::Option* option(CLI::App* app, const std::string& name, T& var, const std::string& help) {
  return app->add_option("--" + name, var, help)->envname(env_name(name));
}

CLI::Option* flag(CLI::App* app, const std::string& name, bool& var, const std::string& help) {
  return app->add_flag("--" + name, var, help)->envname(env_name(name));
}

struct Options {
  std::string kg;
  std::string mode = "evidence";
  int stage = 2;
  double threshold = fg::fuzzy::kDefaultThreshold;
  bool literal_pool = false;
  bool fixpoint = false;
  std::string endpoint = fg::LlmConfig{}.endpoint_url;
  std::string model = fg::LlmConfig{}.model_name;
  std::string api_key;
  double temperature = 0.0;
  std::optional<double> filter_temperature;
  std::optional<double> classify_temperature;
  int max_attempts = 10;
  double timeout = 60.0;
  int max_parallel = 8;
  std::string cache_dir;
  std::size_t per_relation_cap = fg::kDefaultPerRelationCap;
  std::size_t options_cap = 0;
  std::string literal_quotes = "doubled";
  bool json = false;

  std::string claim;
  std::string entities;
  std::string id = "cli";
  std::string dataset;
  std::string out;
  int concurrency = 8;
  std::string aggregation = "overlapping";
  std::string format = "text";
  std::string candidates;
  std::string script;
  std::string host = "127.0.0.1";
  int port = 8000;
};

void add_mining_options(CLI::App* app, Options& o) {
  option(app, "stage", o.stage, "1: per-entity matching only, 2: with cross-entity pooling")
      ->check(CLI::IsMember({1, 2}))
      ->capture_default_str();
  option(app, "threshold", o.threshold, "keep matches with similarity strictly above this")
      ->check(CLI::Range(0.0, 100.0))
      ->capture_default_str();
  flag(app, "literal-pool", o.literal_pool, "stage-2 pool without reversed labels");
  flag(app, "fixpoint", o.fixpoint, "repeat stage 2 until nothing changes");
}

void add_pipeline_options(CLI::App* app, Options& o) {
  option(app, "kg", o.kg, "knowledge graph JSONL")->required();
  option(app, "mode", o.mode, "claim-only or evidence")
      ->check(CLI::IsMember({"claim-only", "evidence"}))
      ->capture_default_str();
  add_mining_options(app, o);
  option(app, "endpoint", o.endpoint, "chat-completions URL")->capture_default_str();
  option(app, "model", o.model, "model name sent to the endpoint")->capture_default_str();
  option(app, "api-key", o.api_key, "bearer token (prefer the environment variable)");
  option(app, "temperature", o.temperature, "sampling temperature")->check(CLI::NonNegativeNumber);
  option(app, "filter-temperature", o.filter_temperature, "temperature for the relation filter request")
      ->check(CLI::NonNegativeNumber);
  option(app, "classify-temperature", o.classify_temperature, "temperature for the verdict request")
      ->check(CLI::NonNegativeNumber);
  option(app, "max-attempts", o.max_attempts, "attempts per request before giving up")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  option(app, "timeout", o.timeout, "per-request timeout in seconds")->check(CLI::PositiveNumber);
  option(app, "max-parallel", o.max_parallel, "concurrent requests to the endpoint")->check(CLI::PositiveNumber);
  option(app, "cache-dir", o.cache_dir, "response cache directory");
  option(app, "per-relation-cap", o.per_relation_cap, "evidence triples per (entity, relation)")
      ->check(CLI::PositiveNumber);
  option(app, "options-cap", o.options_cap, "truncate filter-prompt option lists (0 = no limit)");
  option(app, "literal-quotes", o.literal_quotes, "quoting of literal evidence tails: doubled or single")
      ->check(CLI::IsMember({"doubled", "single"}))
      ->capture_default_str();
  flag(app, "json", o.json, "machine-readable output");
}

fg::MiningOptions mining_options(const Options& o) {
  fg::MiningOptions m;
  m.threshold = o.threshold;
  m.augment_reverse_pool = !o.literal_pool;
  m.iterate_to_fixpoint = o.fixpoint;
  return m;
}

fg::PipelineConfig pipeline_config(const Options& o) {
  fg::PipelineConfig cfg;
  cfg.mode = o.mode == "claim-only" ? fg::PipelineMode::ClaimOnly : fg::PipelineMode::EvidenceZeroShot;
  cfg.stage = o.stage == 1 ? fg::MiningMode::StageOneOnly : fg::MiningMode::TwoStage;
  cfg.mining = mining_options(o);
  cfg.per_relation_cap = o.per_relation_cap;
  cfg.literal_quotes = o.literal_quotes == "single" ? fg::LiteralQuotes::Single : fg::LiteralQuotes::Doubled;
  cfg.filter_call.temperature = o.filter_temperature;
  cfg.classify_call.temperature = o.classify_temperature;
  if (o.options_cap) cfg.options_cap = o.options_cap;
  cfg.llm.endpoint_url = o.endpoint;
  cfg.llm.model_name = o.model;
  cfg.llm.api_key = o.api_key;
  cfg.llm.temperature = o.temperature;
  cfg.llm.max_attempts = o.max_attempts;
  cfg.llm.request_timeout = std::chrono::milliseconds(static_cast<long long>(o.timeout * 1000));
  cfg.llm.max_parallel_requests = o.max_parallel;
  if (!o.cache_dir.empty()) cfg.cache_dir = o.cache_dir;
  cfg.validate();
  return cfg;
}

// Comma-separated, with "double quotes" around names that contain commas.
std::set<std::string> parse_entity_list(const std::string& csv) {
  std::set<std::string> out;
  std::string cur;
  bool quoted = false;
  auto flush = [&] {
    auto e = trim(cur);
    if (!e.empty()) out.insert(e);
    cur.clear();
  };
  for (char c : csv) {
    if (c == '"') quoted = !quoted;
    else if (c == ',' && !quoted) flush();
    else cur += c;
  }
  if (quoted) throw fg::Error(fg::ErrorCode::InvalidArgument, "unterminated quote in --entities");
  flush();
  return out;
}

void print_connections(std::ostream& out, const json& j) {
  for (const auto& [e, list] : j.items()) {
    std::string joined;
    for (const auto& r : list) joined += (joined.empty() ? "" : ", ") + r.get<std::string>();
    out << "  " << e << ": " << (joined.empty() ? "(none)" : joined) << '\n';
  }
}

void print_trace(std::ostream& out, const fg::VerificationTrace& t) {
  const auto j = fg::to_json(t);
  out << "Verdict: " << fg::to_string(t.verdict.label) << '\n';
  if (!t.verdict.explanation.empty()) out << "Explanation: " << t.verdict.explanation << '\n';
  if (!t.candidates.entries.empty()) {
    out << "Candidate connections:\n";
    print_connections(out, j["candidates"]);
    out << "Validated connections:\n";
    print_connections(out, j["validated"]);
    out << "Evidence:\n";
    for (const auto& line : t.evidence_lines) out << "  " << line << '\n';
    if (t.evidence_lines.empty()) out << "  (none)\n";
  }
  out << "Attempts: filter " << t.attempts_filter << ", classify " << t.attempts_classify << '\n';
  if (t.failed) out << "Failed: " << t.failure << '\n';
}

int run_kg_validate(const Options& o) {
  const auto g = fg::load_kg(o.kg);
  if (o.json) {
    std::cout << json{{"kg", o.kg},
                      {"entities", g.entity_count()},
                      {"edges", g.edge_count()},
                      {"repaired_edges", g.repaired_edges()}}
                     .dump(2)
              << '\n';
  } else {
    std::cout << "entities: " << g.entity_count() << "\nedges: " << g.edge_count()
              << "\nrepaired reverse edges: " << g.repaired_edges() << '\n';
  }
  return 0;
}

int run_verify(const Options& o) {
  const auto cfg = pipeline_config(o);
  const auto g = fg::load_kg(o.kg);
  fg::ClaimRecord rec{o.id, o.claim, parse_entity_list(o.entities), std::nullopt, {}};
  auto llm = fg::make_gateway(cfg);
  const auto trace = fg::verify_claim(cfg, g, *llm, rec);
  if (o.json) std::cout << fg::to_json(trace).dump(2) << '\n';
  else print_trace(std::cout, trace);
  if (trace.failed) {
    std::cerr << "factgenius: retries exhausted (" << trace.failure << ")\n";
    return 1;
  }
  return 0;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw fg::Error(fg::ErrorCode::Io, "cannot write " + path.string());
}

int run_evaluate(const Options& o) {
  auto cfg = pipeline_config(o);
  cfg.workers = o.concurrency;
  cfg.validate();
  const auto g = fg::load_kg(o.kg);
  const auto dataset = fg::load_dataset(o.dataset);
  auto llm = fg::make_gateway(cfg);
  const auto agg = o.aggregation == "exclusive" ? fg::TypeAggregation::Exclusive : fg::TypeAggregation::Overlapping;
  std::vector<fg::VerificationTrace> traces;
  const auto report = fg::evaluate(cfg, g, *llm, dataset, agg, &traces);

  if (!o.out.empty()) {
    const std::filesystem::path dir = o.out;
    fg::write_run_directory(dir, cfg, traces);
    write_text(dir / "report.txt", fg::render_report(report, fg::ReportFormat::Text));
    write_text(dir / "report.json", fg::render_report(report, fg::ReportFormat::Json));
    write_text(dir / "claims.csv", fg::render_report(report, fg::ReportFormat::Csv));
  }
  auto format = fg::ReportFormat::Text;
  if (o.json || o.format == "json") format = fg::ReportFormat::Json;
  else if (o.format == "csv") format = fg::ReportFormat::Csv;
  std::cout << fg::render_report(report, format);
  return 0;
}

int run_mine(const Options& o) {
  const auto g = fg::load_kg(o.kg);
  std::ifstream in(o.candidates);
  if (!in) throw fg::Error(fg::ErrorCode::Io, "cannot open candidates file '" + o.candidates + "'");
  const auto mode = o.stage == 1 ? fg::MiningMode::StageOneOnly : fg::MiningMode::TwoStage;
  const auto opts = mining_options(o);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto bad = [&](const std::string& why) { throw fg::FileError(fg::ErrorCode::MalformedFile, line_no, why); };
    const auto j = json::parse(line, nullptr, false);
    if (!j.is_object() || !j.contains("candidates") || !j["candidates"].is_object()) {
      bad("expected {\"id\": ..., \"candidates\": {entity: [relation, ...]}}");
    }
    fg::CandidateConnections a;
    for (const auto& [e, list] : j["candidates"].items()) {
      if (!list.is_array()) bad("candidate list for '" + e + "' is not an array");
      a.entity(e);
      for (const auto& r : list) {
        if (!r.is_string()) bad("candidate relations must be strings");
        a.add(e, r.get<std::string>());
      }
    }
    const auto v = fg::mine(g, a, mode, opts);
    json scores = json::object();
    for (const auto& [e, set] : v.entries) {
      scores[e] = json::object();
      for (const auto& [r, s] : set.scores()) scores[e][r.str()] = s;
    }
    json result = {{"id", j.value("id", json())}, {"validated", fg::to_json(v)}, {"scores", scores}};
    std::cout << result.dump() << '\n';
  }
  return 0;
}

int run_export(const Options& o) {
  const auto cfg = pipeline_config(o);
  const auto g = fg::load_kg(o.kg);
  const auto dataset = fg::load_dataset(o.dataset);
  auto llm = fg::make_gateway(cfg);
  const auto n = fg::export_training_data(cfg, g, *llm, dataset, o.out);
  if (o.json) std::cout << json{{"out", o.out}, {"records", n}}.dump() << '\n';
  else std::cout << "wrote " << n << " records to " << o.out << '\n';
  return 0;
}

int run_mock_serve(const Options& o) {
  // Block the stop signals before the server threads start so they inherit
  // the mask and sigwait below is the only receiver.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  auto llm = std::make_shared<fg::mock::MockLlm>(fg::mock::MockScript::parse(o.script));
  fg::mock::MockServer server(llm, o.host, o.port);
  std::cout << "listening on " << server.url() << std::endl;
  int sig = 0;
  sigwait(&stop_signals, &sig);
  server.stop();
  std::cerr << "served " << llm->call_count() << " requests\n";
  return 0;
}

std::string one_line(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fact verification over a knowledge graph with a chat-completion model", "factgenius"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config;
  app.add_option("--config", config, "key = value file with flag defaults (flags > env > file)")
      ->envname("FACTGENIUS_CONFIG");

  Options o;

  auto* kg = app.add_subcommand("kg", "knowledge graph utilities");
  kg->require_subcommand(1);
  auto* kg_validate = kg->add_subcommand("validate", "load a graph and report counts and reverse-edge repairs");
  option(kg_validate, "kg", o.kg, "knowledge graph JSONL")->required();
  flag(kg_validate, "json", o.json, "machine-readable output");

  auto* verify = app.add_subcommand("verify", "verify one claim");
  add_pipeline_options(verify, o);
  option(verify, "claim", o.claim, "claim text")->required();
  option(verify, "entities", o.entities, "comma-separated claim entities");
  option(verify, "id", o.id, "identifier recorded in the trace")->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "verify a labeled dataset and report accuracy");
  add_pipeline_options(evaluate, o);
  option(evaluate, "dataset", o.dataset, "claims JSONL")->required();
  option(evaluate, "out", o.out, "run directory for reports, per-claim CSV and traces");
  option(evaluate, "concurrency", o.concurrency, "pipeline workers")->check(CLI::PositiveNumber)->capture_default_str();
  option(evaluate, "aggregation", o.aggregation, "per-type buckets: overlapping or exclusive")
      ->check(CLI::IsMember({"overlapping", "exclusive"}))
      ->capture_default_str();
  option(evaluate, "format", o.format, "stdout report format: text, json or csv")
      ->check(CLI::IsMember({"text", "json", "csv"}))
      ->capture_default_str();

  auto* mine = app.add_subcommand("mine", "run relation mining on supplied candidate lists");
  option(mine, "kg", o.kg, "knowledge graph JSONL")->required();
  option(mine, "candidates", o.candidates, "JSONL of {\"id\", \"candidates\": {entity: [relation, ...]}}")->required();
  add_mining_options(mine, o);

  auto* export_train = app.add_subcommand("export-train", "write (claim, evidence, label) JSONL for fine-tuning");
  add_pipeline_options(export_train, o);
  option(export_train, "dataset", o.dataset, "labeled claims JSONL")->required();
  option(export_train, "out", o.out, "output JSONL file")->required();

  auto* mock_serve = app.add_subcommand("mock-serve", "serve a scripted chat-completion endpoint");
  option(mock_serve, "script", o.script,
         "oracle:<gold.json>, invert:<gold.json>, echo, fixed:<text>, status:<code> or fail:<n>:<script>")
      ->required();
  option(mock_serve, "port", o.port, "port (0 picks a free one)")->capture_default_str();
  option(mock_serve, "host", o.host, "bind address")->capture_default_str();

  try {
    if (auto path = config_path(argc, argv)) apply_config_file(*path);
  } catch (const std::exception& e) {
    std::cerr << "factgenius: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "factgenius: " << one_line(e.what()) << "\nRun with --help for usage.\n";
    return 2;
  }

  try {
    if (kg_validate->parsed()) return run_kg_validate(o);
    if (verify->parsed()) {
      if (o.mode == "evidence" && o.entities.empty()) {
        std::cerr << "factgenius: --entities is required in evidence mode\n";
        return 2;
      }
      return run_verify(o);
    }
    if (evaluate->parsed()) return run_evaluate(o);
    if (mine->parsed()) return run_mine(o);
    if (export_train->parsed()) return run_export(o);
    if (mock_serve->parsed()) return run_mock_serve(o);
  } catch (const std::exception& e) {
    std::cerr << "factgenius: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 2;
}
