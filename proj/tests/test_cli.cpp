#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "factgenius/mock_llm.hpp"
#include "golden.hpp"
#include "json_schema.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = FIXTURE_DIR;

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

// `env` is a prefix of VAR=value assignments for the child.
Run run(const std::string& args, const std::string& env = "") {
  const auto err_file = fs::temp_directory_path() / ("factgenius_cli_err_" + std::to_string(::getpid()));
  const auto cmd = "env -u FACTGENIUS_ENDPOINT -u FACTGENIUS_THRESHOLD -u FACTGENIUS_CONFIG " + env + " " +
                   std::string(CLI_PATH) + " " + args + " 2>" + err_file.string();
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  char buf[4096];
  while (auto n = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.err = golden::read_file(err_file.string());
  fs::remove(err_file);
  return r;
}

struct MockEndpoint {
  explicit MockEndpoint(const std::string& gold)
      : server(std::make_shared<factgenius::mock::MockLlm>(
            factgenius::mock::MockScript::oracle(factgenius::mock::GoldTable::load(kFixtures + "/" + gold)))) {}
  std::string flag() const { return "--endpoint " + server.url(); }
  factgenius::mock::MockServer server;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

void require_valid(const std::string& schema_name, const json& doc) {
  const auto errors = schema::load(schema_name).errors(doc);
  INFO(doc.dump(2));
  for (const auto& e : errors) UNSCOPED_INFO(e);
  CHECK(errors.empty());
}

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("factgenius_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("kg validate reports repairs", "[cli]") {
  const auto text = run("kg validate --kg " + kFixtures + "/kg_missing_reverse.jsonl");
  CHECK(text.status == 0);
  CHECK(text.out == "entities: 4\nedges: 8\nrepaired reverse edges: 2\n");

  const auto js = run("kg validate --json --kg " + kFixtures + "/kg_missing_reverse.jsonl");
  REQUIRE(js.status == 0);
  const auto doc = json::parse(js.out);
  require_valid("kg_validate.schema.json", doc);
  CHECK(doc["repaired_edges"] == 2);
}

TEST_CASE("verify json trace matches the golden", "[cli][golden]") {
  MockEndpoint mock("mini_gold.json");
  const auto r = run("verify --json --kg " + kFixtures + "/mini_kg.jsonl --claim " +
                     quote("A is connected to B by r.") + " --entities A,B " + mock.flag());
  INFO(r.err);
  REQUIRE(r.status == 0);
  CHECK(r.out == golden::expect("verify_trace.json", r.out));
  require_valid("verify_trace.schema.json", json::parse(r.out));
  CHECK(mock.server.llm().call_count() == 2);
}

TEST_CASE("verify human output", "[cli]") {
  MockEndpoint mock("mini_gold.json");
  const auto r = run("verify --kg " + kFixtures + "/mini_kg.jsonl --claim " + quote("B is connected to C by t.") +
                     " --entities B,C " + mock.flag());
  REQUIRE(r.status == 0);
  CHECK(r.out.starts_with("Verdict: Refuted\n"));
  CHECK(r.out.find("  B >- s -> C\n") != std::string::npos);

  const auto claim_only = run("verify --mode claim-only --kg " + kFixtures + "/mini_kg.jsonl --claim " +
                              quote("B is connected to C by t.") + " " + mock.flag());
  CHECK(claim_only.status == 0);
  CHECK(claim_only.out.find("Attempts: filter 0, classify 1") != std::string::npos);
}

TEST_CASE("evaluate writes a run directory", "[cli]") {
  MockEndpoint mock("gold10.json");
  const auto dir = fresh_dir("evaluate");
  const auto r = run("evaluate --json --concurrency 4 --kg " + kFixtures + "/demo_kg.jsonl --dataset " + kFixtures +
                     "/claims10.jsonl --out " + dir.string() + " " + mock.flag());
  INFO(r.err);
  REQUIRE(r.status == 0);
  const auto report = json::parse(r.out);
  require_valid("eval_report.schema.json", report);
  CHECK(report["accuracy"] == 1.0);
  CHECK(report["total"] == 10);

  for (auto name : {"report.txt", "report.json", "claims.csv", "traces.jsonl", "run_config.json"}) {
    CHECK(fs::exists(dir / name));
  }
  CHECK(json::parse(golden::read_file((dir / "report.json").string())) == report);
  std::istringstream traces(golden::read_file((dir / "traces.jsonl").string()));
  std::size_t lines = 0;
  for (std::string line; std::getline(traces, line); ++lines) require_valid("verify_trace.schema.json", json::parse(line));
  CHECK(lines == 10);
  const auto csv = golden::read_file((dir / "claims.csv").string());
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
}

TEST_CASE("mine", "[cli]") {
  const auto dir = fresh_dir("mine");
  const auto empty = dir / "empty.jsonl";
  std::ofstream(empty).flush();
  const auto none = run("mine --kg " + kFixtures + "/mini_kg.jsonl --candidates " + empty.string());
  CHECK(none.status == 0);
  CHECK(none.out.empty());

  const auto input = dir / "candidates.jsonl";
  std::ofstream(input) << R"({"id": "x", "candidates": {"A": ["r", "q"], "B": []}})" << "\n";
  const auto one = run("mine --kg " + kFixtures + "/mini_kg.jsonl --candidates " + input.string());
  REQUIRE(one.status == 0);
  const auto doc = json::parse(one.out);
  require_valid("mine_result.schema.json", doc);
  CHECK(doc["validated"]["A"] == json{"r"});
  CHECK(doc["validated"]["B"] == json{"~r"});
  CHECK(doc["scores"]["A"]["r"] == 100.0);

  const auto stage_one = run("mine --stage 1 --kg " + kFixtures + "/mini_kg.jsonl --candidates " + input.string());
  CHECK(json::parse(stage_one.out)["validated"]["B"] == json::array());

  std::ofstream(input) << "{\"id\": 1}\n";
  const auto bad = run("mine --kg " + kFixtures + "/mini_kg.jsonl --candidates " + input.string());
  CHECK(bad.status == 1);
  CHECK(bad.err.find("line 1") != std::string::npos);
}

TEST_CASE("flags over environment over config file", "[cli][config]") {
  const auto dir = fresh_dir("config");
  const auto input = dir / "candidates.jsonl";
  // "masss" scores 80 against "mass".
  std::ofstream(input) << R"({"id": "m", "candidates": {"1097_Vicia": ["masss"]}})" << "\n";
  const auto cfg = dir / "factgenius.toml";
  std::ofstream(cfg) << "# defaults\nthreshold = 75\nkg = \"" << kFixtures << "/demo_kg.jsonl\"\n";

  auto accepted = [&](const std::string& args, const std::string& env = "") {
    const auto r = run("mine --candidates " + input.string() + " " + args, env);
    INFO(r.err);
    REQUIRE(r.status == 0);
    return json::parse(r.out)["validated"]["1097_Vicia"] == json{"mass"};
  };
  const auto kg = "--kg " + kFixtures + "/demo_kg.jsonl";
  CHECK_FALSE(accepted(kg));
  CHECK(accepted(kg + " --threshold 75"));
  CHECK(accepted("--config " + cfg.string()));
  CHECK(accepted("", "FACTGENIUS_CONFIG=" + cfg.string()));
  CHECK_FALSE(accepted("--config " + cfg.string(), "FACTGENIUS_THRESHOLD=90"));
  CHECK(accepted("--config " + cfg.string() + " --threshold 79.9", "FACTGENIUS_THRESHOLD=90"));
  CHECK(accepted(kg, "FACTGENIUS_THRESHOLD=75"));
}

TEST_CASE("endpoint comes from the environment", "[cli][config]") {
  MockEndpoint mock("mini_gold.json");
  const auto args = "verify --kg " + kFixtures + "/mini_kg.jsonl --claim " + quote("A is connected to B by r.") +
                    " --entities A,B --max-attempts 1";
  CHECK(run(args, "FACTGENIUS_ENDPOINT=" + mock.server.url()).status == 0);
  // An unreachable endpoint in the environment loses to the flag.
  CHECK(run(args + " " + mock.flag(), "FACTGENIUS_ENDPOINT=http://127.0.0.1:1/v1/chat/completions").status == 0);
  const auto dead = run(args, "FACTGENIUS_ENDPOINT=http://127.0.0.1:1/v1/chat/completions FACTGENIUS_TIMEOUT=2");
  CHECK(dead.status == 1);
  CHECK(dead.err.find("retries exhausted") != std::string::npos);
}

TEST_CASE("exit codes", "[cli]") {
  CHECK(run("").status == 2);
  CHECK(run("--help").status == 0);
  CHECK(run("frobnicate").status == 2);
  CHECK(run("kg").status == 2);
  CHECK(run("verify --claim x --entities A").status == 2);
  CHECK(run("verify --kg k --claim x --entities A --mode sometimes").status == 2);
  CHECK(run("verify --kg k --claim x --entities A --threshold 120").status == 2);
  CHECK(run("mine --kg k --candidates c --stage 3").status == 2);
  CHECK(run("verify --kg k --claim x").status == 2);

  const auto missing = run("kg validate --kg /nonexistent/graph.jsonl");
  CHECK(missing.status == 1);
  CHECK(std::count(missing.err.begin(), missing.err.end(), '\n') == 1);
  CHECK(missing.err.starts_with("factgenius: "));

  const auto bad_dataset = run("evaluate --kg " + kFixtures + "/mini_kg.jsonl --dataset " + kFixtures +
                               "/mini_kg.jsonl");
  CHECK(bad_dataset.status == 1);
  CHECK(std::count(bad_dataset.err.begin(), bad_dataset.err.end(), '\n') == 1);
}

TEST_CASE("export-train", "[cli]") {
  MockEndpoint mock("mini_gold.json");
  const auto dir = fresh_dir("export");
  const auto out = dir / "train.jsonl";
  const auto r = run("export-train --kg " + kFixtures + "/mini_kg.jsonl --dataset " + kFixtures +
                     "/mini_claims.jsonl --out " + out.string() + " " + mock.flag());
  INFO(r.err);
  REQUIRE(r.status == 0);
  CHECK(r.out == "wrote 2 records to " + out.string() + "\n");
  std::istringstream lines(golden::read_file(out.string()));
  std::size_t n = 0;
  for (std::string line; std::getline(lines, line); ++n) require_valid("export_record.schema.json", json::parse(line));
  CHECK(n == 2);
}

TEST_CASE("mock-serve answers the pipeline", "[cli][mock]") {
  const auto cmd = "sh -c 'echo $$; exec " + std::string(CLI_PATH) + " mock-serve --port 0 --script oracle:" +
                   kFixtures + "/mini_gold.json' 2>/dev/null";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  char line[512];
  REQUIRE(std::fgets(line, sizeof line, pipe));
  const pid_t pid = std::stoi(line);
  REQUIRE(std::fgets(line, sizeof line, pipe));
  std::string url = line;
  REQUIRE(url.starts_with("listening on "));
  url = url.substr(13, url.size() - 14);

  const auto r = run("verify --json --kg " + kFixtures + "/mini_kg.jsonl --claim " +
                     quote("A is connected to B by r.") + " --entities A,B --endpoint " + url);
  ::kill(pid, SIGTERM);
  const int raw = ::pclose(pipe);
  REQUIRE(r.status == 0);
  CHECK(r.out == golden::read_file(std::string(GOLDEN_DIR) + "/verify_trace.json"));
  CHECK(WIFEXITED(raw));
  CHECK(WEXITSTATUS(raw) == 0);
}
