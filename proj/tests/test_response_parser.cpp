#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <random>

#include "factgenius/response_parser.hpp"
#include "golden.hpp"

using namespace factgenius;

namespace {

const std::set<std::string> kViciaEntities = {"1097_Vicia", "4.1"};

ErrorCode rejection(std::string_view text) {
  try {
    parse_connection_dict(text, kViciaEntities);
  } catch (const ParseError& e) {
    return e.code();
  }
  FAIL("expected a rejection for: " << text);
  return ErrorCode::InvalidArgument;
}

std::string random_bytes(std::mt19937& rng, std::size_t max_len, bool structured) {
  static const std::string tokens[] = {"{", "}", "[", "]", "\"", "'", ":", ",", "#", "\n", "true", "False",
                                       "\\", "```", "1097_Vicia", "4.1", "mass", " "};
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::string s;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (structured) s += tokens[rng() % std::size(tokens)];
    else s += static_cast<char>(rng() & 0xFF);
  }
  return s;
}

}  // namespace

TEST_CASE("two-entity answer parses", "[response_parser]") {
  const auto c = parse_connection_dict(R"({"1097_Vicia": ["mass"], "4.1": ["~mass"]})", kViciaEntities);
  REQUIRE(c.entries.size() == 2);
  CHECK(c.entries.at("1097_Vicia") == std::vector<std::string>{"mass"});
  CHECK(c.entries.at("4.1") == std::vector<std::string>{"~mass"});
}

TEST_CASE("empty literal is totalized", "[response_parser]") {
  const auto c = parse_connection_dict("{}", {"A"});
  REQUIRE(c.entries.size() == 1);
  CHECK(c.entries.at("A").empty());
}

TEST_CASE("unknown keys are dropped and counted", "[response_parser]") {
  std::size_t dropped = 0;
  const auto c = parse_connection_dict(R"({"A": ["r"], "B": ["s"], "C": []})", {"A"}, &dropped);
  CHECK(dropped == 2);
  CHECK(c.entries.size() == 1);
}

TEST_CASE("messy output corpus parses to its clean equivalents", "[response_parser][corpus]") {
  for (int i = 1; i <= 20; ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "%02d", i);
    const std::string base = std::string(FIXTURE_DIR) + "/messy/" + name;
    const auto messy = golden::read_file(base + ".txt");
    const auto clean = golden::read_file(base + ".clean.txt");
    REQUIRE(!messy.empty());
    INFO("fixture " << name);
    CHECK(parse_connection_dict(messy, kViciaEntities) == parse_connection_dict(clean, kViciaEntities));
  }
}

TEST_CASE("typed rejections", "[response_parser]") {
  CHECK(rejection("") == ErrorCode::NoDictFound);
  CHECK(rejection("I cannot help with that.") == ErrorCode::NoDictFound);
  CHECK(rejection(R"({"1097_Vicia": ["mass"])") == ErrorCode::UnbalancedBraces);
  CHECK(rejection(R"({"1097_Vicia" ["mass"]})") == ErrorCode::MalformedDict);
  CHECK(rejection(R"({"1097_Vicia": ["mass" "epoch"]})") == ErrorCode::MalformedDict);
}

TEST_CASE("connection dict parser is idempotent on its own output", "[response_parser][property]") {
  std::mt19937 rng(17);
  const std::set<std::string> entities = {"A", "B\"q", "C 'x'", "~D"};
  static const std::string pool[] = {"mass", "~mass", "it's", "say \"hi\"", "back\\slash", "line\nbreak", "#hash", "{x}"};
  for (int i = 0; i < 200; ++i) {
    CandidateConnections c;
    for (const auto& e : entities) {
      c.entity(e);
      const int n = static_cast<int>(rng() % 4);
      for (int k = 0; k < n; ++k) c.add(e, pool[rng() % std::size(pool)]);
    }
    const auto once = parse_connection_dict(to_dict_literal(c), entities);
    REQUIRE(once == c);
    REQUIRE(parse_connection_dict(to_dict_literal(once), entities) == once);
  }
}

TEST_CASE("parsers never crash on random input", "[response_parser][fuzz]") {
  std::mt19937 rng(123456);
  std::size_t values = 0, rejections = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto text = random_bytes(rng, 200, i % 2 == 0);
    try {
      const auto c = parse_connection_dict(text, kViciaEntities);
      REQUIRE(c.entries.size() == kViciaEntities.size());
      ++values;
    } catch (const ParseError&) {
      ++rejections;
    }
    try {
      const auto v = parse_verdict(text);
      REQUIRE(v.raw_text == text);
    } catch (const ParseError& e) {
      REQUIRE(e.code() == ErrorCode::NoVerdictToken);
    }
  }
  CHECK(values + rejections == 10000);
  CHECK(values > 0);
}

TEST_CASE("verdict examples", "[response_parser]") {
  const auto t = parse_verdict("True, The claim matches the evidence.");
  CHECK(t.label == Label::Supported);
  CHECK(t.explanation == "The claim matches the evidence.");
  CHECK(t.raw_text == "True, The claim matches the evidence.");

  const auto f = parse_verdict("false. No such relation exists.");
  CHECK(f.label == Label::Refuted);
  CHECK(f.explanation == "No such relation exists.");

  CHECK_THROWS_AS(parse_verdict("The answer is unclear."), ParseError);
  CHECK_THROWS_AS(parse_verdict("untrue, falsehood"), ParseError);

  // First token wins; later mentions cannot flip it.
  CHECK(parse_verdict("FALSE: it is not true that Vicia weighs 4.1kg.").label == Label::Refuted);
  CHECK(parse_verdict("**True**\nThe evidence lists this mass.").explanation == "The evidence lists this mass.");
  CHECK(parse_verdict("True").explanation.empty());
}

TEST_CASE("verdict round-trips through the answer template", "[response_parser][property]") {
  for (auto label : {Label::Supported, Label::Refuted}) {
    for (const std::string expl : {"", "Because the graph says so.", "It is true that nothing is false."}) {
      const Verdict v{label, expl, ""};
      const auto back = parse_verdict(to_answer_text(v));
      CHECK(back.label == label);
      CHECK(back.explanation == expl);
    }
  }
}
