#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "factgenius/relation_miner.hpp"
#include "oracles.hpp"

using namespace factgenius;

namespace {

KnowledgeGraph load_text(const std::string& text) {
  std::istringstream in(text);
  return load_kg(in);
}

KnowledgeGraph demo_kg() { return load_kg(std::string(FIXTURE_DIR) + "/demo_kg.jsonl"); }

CandidateConnections candidates(std::initializer_list<std::pair<std::string, std::vector<std::string>>> items) {
  CandidateConnections c;
  for (const auto& [e, list] : items) {
    c.entity(e);
    for (const auto& x : list) c.add(e, x);
  }
  return c;
}

bool subset_entrywise(const oracle::Sets& small, const oracle::Sets& big) {
  for (const auto& [e, set] : small) {
    auto it = big.find(e);
    if (it == big.end()) return false;
    if (!std::includes(it->second.begin(), it->second.end(), set.begin(), set.end())) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("stage one validates the Vicia mass relation", "[relation_miner]") {
  const auto g = demo_kg();
  const auto v = stage_one(g, candidates({{"1097_Vicia", {"mass"}}, {"4.1", {"~mass"}}}));
  CHECK(v.entries.at("1097_Vicia").contains("mass"));
  CHECK(v.entries.at("4.1").contains("~mass"));
}

TEST_CASE("stage one edge cases", "[relation_miner]") {
  const auto g = demo_kg();
  CHECK(stage_one(g, CandidateConnections{}).entries.empty());

  // One typo in a 5-char label scores 80, below the default threshold.
  const auto mass = load_text(R"({"entity":"X","links":{"mass":["1"]}})");
  const auto typo = stage_one(mass, candidates({{"X", {"masss"}}}));
  CHECK(typo.entries.at("X").empty());
  CHECK(stage_one(mass, candidates({{"X", {"masss"}}}), 75.0).entries.at("X").contains("mass"));

  // A long label tolerates one edit.
  const auto long_label = stage_one(g, candidates({{"Aarhus_Airport", {"runwayLenght"}}}));
  CHECK(long_label.entries.at("Aarhus_Airport").empty());  // transposition costs 2 edits
  const auto one_edit = stage_one(g, candidates({{"Aarhus_Airport", {"runwayLengh"}}}));
  CHECK(one_edit.entries.at("Aarhus_Airport").contains("runwayLength"));

  // Unknown entity keeps its key with an empty set.
  const auto unknown = stage_one(g, candidates({{"Nowhere", {"mass"}}}));
  REQUIRE(unknown.entries.count("Nowhere") == 1);
  CHECK(unknown.entries.at("Nowhere").empty());
}

TEST_CASE("stage two reaches reverse labels through the augmented pool", "[relation_miner]") {
  const auto g = load_text(
      R"({"entity":"X","links":{"spouse":["W"]}})" "\n"
      R"({"entity":"Z","links":{"spouse":["Y"]}})");
  ValidatedConnections v;
  v.entries["X"].insert(RelationLabel("spouse"), 100.0);
  v.entries["Y"];

  const auto augmented = stage_two(g, v);
  CHECK(augmented.entries.at("Y").contains("~spouse"));
  CHECK(augmented.entries.at("X").label_set() == std::set<std::string>{"spouse"});

  // Literal pool: "spouse" vs "~spouse" scores 100*(1-1/7) < 90.
  MiningOptions literal;
  literal.augment_reverse_pool = false;
  CHECK(stage_two(g, v, literal).entries.at("Y").empty());

  std::map<std::string, std::vector<std::string>> raw = {{"X", {"spouse"}}, {"Y", {}}};
  CHECK(augmented.label_sets() == oracle::mine(g, raw, true, 90.0, true));
  CHECK(stage_two(g, v, literal).label_sets() == oracle::mine(g, raw, true, 90.0, false));
}

TEST_CASE("stage two on trivial inputs", "[relation_miner]") {
  const auto g = demo_kg();
  ValidatedConnections empty_sets;
  empty_sets.entries["1097_Vicia"];
  empty_sets.entries["4.1"];
  CHECK(stage_two(g, empty_sets) == empty_sets);

  // Single entity: may add the reverse of its own labels.
  const auto self = load_text(
      R"({"entity":"P","links":{"knows":["Q"]}})" "\n"
      R"({"entity":"R","links":{"knows":["P"]}})");
  const auto a = candidates({{"P", {"knows"}}});
  const auto one = stage_one(self, a);
  const auto two = stage_two(self, one);
  CHECK(one.entries.at("P").label_set() == std::set<std::string>{"knows"});
  CHECK(two.entries.at("P").label_set() == std::set<std::string>{"knows", "~knows"});
  CHECK(two.label_sets() == oracle::mine(self, {{"P", {"knows"}}}, true, 90.0));
}

TEST_CASE("mine dispatches on mode", "[relation_miner]") {
  const auto g = demo_kg();
  const auto a = candidates({{"1097_Vicia", {"discoverer"}}, {"Karl_Reinmuth", {"birthPlace"}}});
  CHECK(mine(g, a, MiningMode::StageOneOnly) == stage_one(g, a));
  CHECK(mine(g, a, MiningMode::TwoStage) == stage_two(g, stage_one(g, a)));
  CHECK(mine(g, CandidateConnections{}, MiningMode::TwoStage).entries.empty());
}

TEST_CASE("validated order is score descending then lexicographic", "[relation_miner]") {
  const auto g = load_text(R"({"entity":"X","links":{"birthPlace":["a"],"birthDate":["b"],"birthPlaces":["c"]}})");
  const auto v = stage_one(g, candidates({{"X", {"birthPlace"}}}), 80.0);
  std::vector<std::string> order;
  for (const auto& r : v.entries.at("X").ordered()) order.push_back(r.str());
  // birthPlace 100; birthPlaces 100*(1-1/11); birthDate scores 70 and is filtered.
  CHECK(order == std::vector<std::string>{"birthPlace", "birthPlaces"});
}

TEST_CASE("mining matches the brute-force reference on random instances", "[relation_miner][oracle]") {
  std::mt19937 rng(31337);
  const double thresholds[] = {90.0, 80.0, 60.0};
  for (int trial = 0; trial < 150; ++trial) {
    const auto inst = oracle::random_instance(rng);
    const double t = thresholds[trial % 3];
    MiningOptions opts;
    opts.threshold = t;
    const auto s1 = mine(inst.graph, inst.candidates, MiningMode::StageOneOnly, opts);
    const auto s2 = mine(inst.graph, inst.candidates, MiningMode::TwoStage, opts);
    REQUIRE(s1.label_sets() == oracle::mine(inst.graph, inst.raw, false, t));
    REQUIRE(s2.label_sets() == oracle::mine(inst.graph, inst.raw, true, t));

    opts.augment_reverse_pool = false;
    REQUIRE(mine(inst.graph, inst.candidates, MiningMode::TwoStage, opts).label_sets() ==
            oracle::mine(inst.graph, inst.raw, true, t, false));
  }
}

TEST_CASE("mining invariants on random instances", "[relation_miner][property]") {
  std::mt19937 rng(4242);
  for (int trial = 0; trial < 150; ++trial) {
    const auto inst = oracle::random_instance(rng);
    const auto s1 = mine(inst.graph, inst.candidates, MiningMode::StageOneOnly);
    const auto s2 = mine(inst.graph, inst.candidates, MiningMode::TwoStage);

    // Monotone stages, graph validity, totality over candidate keys.
    REQUIRE(subset_entrywise(s1.label_sets(), s2.label_sets()));
    for (const auto& [e, set] : s2.entries) {
      const auto hops = oracle::one_hop(inst.graph, e);
      for (const auto& r : set.label_set()) REQUIRE(hops.contains(r));
    }
    for (const auto& [e, list] : inst.candidates.entries) REQUIRE(s1.entries.count(e) == 1);

    // Determinism, including order.
    REQUIRE(mine(inst.graph, inst.candidates, MiningMode::TwoStage) == s2);

    // Raising the threshold never adds relations.
    MiningOptions lo, hi;
    lo.threshold = 70.0;
    hi.threshold = 85.0;
    REQUIRE(subset_entrywise(mine(inst.graph, inst.candidates, MiningMode::TwoStage, hi).label_sets(),
                             mine(inst.graph, inst.candidates, MiningMode::TwoStage, lo).label_sets()));

    // Iterating to a fixpoint only adds, and a further pass changes nothing.
    MiningOptions fix;
    fix.iterate_to_fixpoint = true;
    const auto fp = mine(inst.graph, inst.candidates, MiningMode::TwoStage, fix);
    REQUIRE(subset_entrywise(s2.label_sets(), fp.label_sets()));
    REQUIRE(stage_two(inst.graph, fp).label_sets() == fp.label_sets());
  }
}
