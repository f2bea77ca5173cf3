#pragma once

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "factgenius/kg_store.hpp"
#include "factgenius/relation_miner.hpp"

namespace factgenius {

inline constexpr std::size_t kDefaultPerRelationCap = 5;

/// A graph edge in forward direction: relation never carries `~`.
struct EvidenceTriple {
  EntityId head;
  RelationLabel relation;
  EntityId tail;

  friend auto operator<=>(const EvidenceTriple&, const EvidenceTriple&) = default;
  friend bool operator==(const EvidenceTriple&, const EvidenceTriple&) = default;
};

/// Up to `per_relation_cap` neighbors (canonical order) for every validated
/// (entity, relation). Reverse edges are flipped to forward form, duplicates
/// collapse and the result is sorted by (head, relation, tail).
inline std::vector<EvidenceTriple> collect_evidence(const KnowledgeGraph& g, const ValidatedConnections& v,
                                                    std::size_t per_relation_cap = kDefaultPerRelationCap) {
  std::set<EvidenceTriple> triples;
  for (const auto& [entity, relations] : v.entries) {
    for (const auto& [relation, score] : relations.scores()) {
      const auto tails = g.neighbors(entity, relation);
      const std::size_t n = std::min(per_relation_cap, tails.size());
      for (std::size_t i = 0; i < n; ++i) {
        if (relation.is_reverse()) {
          triples.insert({tails[i], reverse_label(relation), EntityId(entity)});
        } else {
          triples.insert({EntityId(entity), relation, tails[i]});
        }
      }
    }
  }
  return {triples.begin(), triples.end()};
}

namespace detail {

inline bool looks_numeric(std::string_view s) {
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  std::size_t digits = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) { ++i; ++digits; }
  if (i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) { ++i; ++digits; }
  }
  if (digits == 0) return false;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    std::size_t exp = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) { ++i; ++exp; }
    if (exp == 0) return false;
  }
  return i == s.size();
}

}  // namespace detail

/// Literal tails (numbers, or anything outside [A-Za-z0-9_()',.-]) get quoted.
inline bool is_literal_value(std::string_view tail) {
  if (detail::looks_numeric(tail)) return true;
  return std::any_of(tail.begin(), tail.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return !(std::isalnum(u) && u < 0x80) && std::string_view("_()',.-").find(c) == std::string_view::npos;
  });
}

/// Doubled reproduces the ""4.1"" form of the reference prompts.
enum class LiteralQuotes { Doubled, Single };

/// `<head> >- <relation> -> <tail>`, literal tails wrapped as ""value"".
inline std::string render_triple(const EvidenceTriple& t, LiteralQuotes quotes = LiteralQuotes::Doubled) {
  std::string line = t.head.str() + " >- " + t.relation.str() + " -> ";
  if (is_literal_value(t.tail.str())) {
    const std::string_view q = quotes == LiteralQuotes::Doubled ? "\"\"" : "\"";
    line.append(q).append(t.tail.str()).append(q);
  } else {
    line += t.tail.str();
  }
  return line;
}

inline std::vector<std::string> render_evidence(const std::vector<EvidenceTriple>& triples,
                                                LiteralQuotes quotes = LiteralQuotes::Doubled) {
  std::vector<std::string> lines;
  lines.reserve(triples.size());
  for (const auto& t : triples) lines.push_back(render_triple(t, quotes));
  return lines;
}

}  // namespace factgenius
