#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "factgenius/fuzzy.hpp"
#include "factgenius/kg_store.hpp"

namespace factgenius {

/// LLM-proposed relation strings per entity. Free text: nothing here is
/// guaranteed to exist in the graph.
struct CandidateConnections {
  std::map<std::string, std::vector<std::string>, std::less<>> entries;

  /// Ensures the key exists.
  std::vector<std::string>& entity(const std::string& e) { return entries[e]; }

  /// Appends unless already present (first occurrence wins).
  void add(const std::string& e, const std::string& candidate) {
    auto& list = entries[e];
    if (std::find(list.begin(), list.end(), candidate) == list.end()) list.push_back(candidate);
  }

  friend bool operator==(const CandidateConnections&, const CandidateConnections&) = default;
};

/// Graph-validated labels for one entity. Each label keeps the score at which
/// it was first accepted; iteration order is descending score, then lexicographic.
class RelationSet {
 public:
  bool insert(const RelationLabel& label, fuzzy::SimilarityScore score) {
    return scores_.emplace(label, score).second;
  }

  bool contains(std::string_view label) const { return scores_.find(label) != scores_.end(); }
  std::size_t size() const noexcept { return scores_.size(); }
  bool empty() const noexcept { return scores_.empty(); }

  std::vector<RelationLabel> ordered() const {
    std::vector<std::pair<RelationLabel, fuzzy::SimilarityScore>> items(scores_.begin(), scores_.end());
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<RelationLabel> out;
    out.reserve(items.size());
    for (auto& [label, score] : items) out.push_back(std::move(label));
    return out;
  }

  /// Lexicographic view, handy for set comparisons.
  std::set<std::string> label_set() const {
    std::set<std::string> out;
    for (const auto& [label, score] : scores_) out.insert(label.str());
    return out;
  }

  const std::map<RelationLabel, fuzzy::SimilarityScore, std::less<>>& scores() const noexcept { return scores_; }

  friend bool operator==(const RelationSet&, const RelationSet&) = default;

 private:
  std::map<RelationLabel, fuzzy::SimilarityScore, std::less<>> scores_;
};

struct ValidatedConnections {
  std::map<std::string, RelationSet, std::less<>> entries;

  std::map<std::string, std::set<std::string>> label_sets() const {
    std::map<std::string, std::set<std::string>> out;
    for (const auto& [e, set] : entries) out[e] = set.label_set();
    return out;
  }

  friend bool operator==(const ValidatedConnections&, const ValidatedConnections&) = default;
};

enum class MiningMode { StageOneOnly, TwoStage };

struct MiningOptions {
  fuzzy::SimilarityScore threshold = fuzzy::kDefaultThreshold;
  /// Adds reverse_label(p) for every pooled label p in the second stage.
  bool augment_reverse_pool = true;
  /// Repeats the second stage until nothing changes instead of a single pass.
  bool iterate_to_fixpoint = false;
};

/// Stage-I: each candidate of entity e is fuzzily matched against e's one-hop
/// relations; every match above the threshold is kept. Entity keys survive
/// even when nothing matches.
inline ValidatedConnections stage_one(const KnowledgeGraph& g, const CandidateConnections& a,
                                      fuzzy::SimilarityScore threshold = fuzzy::kDefaultThreshold) {
  ValidatedConnections v;
  for (const auto& [entity, candidates] : a.entries) {
    auto& accepted = v.entries[entity];
    const auto one_hop = g.one_hop_relations(entity);
    for (const auto& candidate : candidates) {
      for (const auto& m : fuzzy::best_matches(candidate, one_hop, threshold)) accepted.insert(m.candidate, m.score);
    }
  }
  return v;
}

/// Labels pooled across all entities of `v` for the second stage.
inline std::set<std::string> stage_two_pool(const ValidatedConnections& v, bool augment_reverse) {
  std::set<std::string> pool;
  for (const auto& [entity, set] : v.entries) {
    for (const auto& [label, score] : set.scores()) {
      pool.insert(label.str());
      if (augment_reverse) pool.insert(reverse_label(label).str());
    }
  }
  return pool;
}

/// Stage-II: every label validated for any entity is re-matched against every
/// entity's one-hop relations. The result contains `v` entry-wise.
inline ValidatedConnections stage_two(const KnowledgeGraph& g, ValidatedConnections v, const MiningOptions& opts = {}) {
  for (;;) {
    const auto pool = stage_two_pool(v, opts.augment_reverse_pool);
    bool changed = false;
    for (auto& [entity, set] : v.entries) {
      const auto one_hop = g.one_hop_relations(entity);
      if (one_hop.empty()) continue;
      for (const auto& p : pool) {
        for (const auto& m : fuzzy::best_matches(p, one_hop, opts.threshold)) changed |= set.insert(m.candidate, m.score);
      }
    }
    if (!opts.iterate_to_fixpoint || !changed) return v;
  }
}

inline ValidatedConnections mine(const KnowledgeGraph& g, const CandidateConnections& a, MiningMode mode,
                                 const MiningOptions& opts = {}) {
  auto v = stage_one(g, a, opts.threshold);
  if (mode == MiningMode::StageOneOnly) return v;
  return stage_two(g, std::move(v), opts);
}

}  // namespace factgenius
