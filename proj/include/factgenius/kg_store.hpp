#pragma once

#include <algorithm>
#include <atomic>
#include <compare>
#include <cstddef>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "factgenius/error.hpp"

namespace factgenius {

/// DBpedia-style entity surface form (`1097_Vicia`, or a literal such as `4.1`).
/// Compared byte-exact.
class EntityId {
 public:
  EntityId() = default;
  explicit EntityId(std::string value) : value_(std::move(value)) {
    if (!valid(value_)) {
      throw Error(ErrorCode::InvalidArgument, "invalid entity id '" + value_ + "'");
    }
  }

  static bool valid(std::string_view s) {
    if (s.empty()) return false;
    auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
    return !space(s.front()) && !space(s.back());
  }

  const std::string& str() const noexcept { return value_; }
  operator std::string_view() const noexcept { return value_; }

  friend auto operator<=>(const EntityId&, const EntityId&) = default;
  friend bool operator==(const EntityId&, const EntityId&) = default;

 private:
  std::string value_;
};

/// Relation name; a leading `~` marks the reverse direction.
class RelationLabel {
 public:
  RelationLabel() = default;
  explicit RelationLabel(std::string name) : name_(std::move(name)) {
    if (!valid(name_)) {
      throw Error(ErrorCode::InvalidArgument, "invalid relation label '" + name_ + "'");
    }
  }

  static bool valid(std::string_view s) {
    if (!s.empty() && s.front() == '~') s.remove_prefix(1);
    return !s.empty() && s.find('~') == std::string_view::npos;
  }

  const std::string& str() const noexcept { return name_; }
  operator std::string_view() const noexcept { return name_; }

  bool is_reverse() const noexcept { return !name_.empty() && name_.front() == '~'; }
  std::string_view base() const noexcept {
    return is_reverse() ? std::string_view(name_).substr(1) : std::string_view(name_);
  }

  friend auto operator<=>(const RelationLabel&, const RelationLabel&) = default;
  friend bool operator==(const RelationLabel&, const RelationLabel&) = default;

 private:
  std::string name_;
};

/// Toggles the `~` prefix.
inline RelationLabel reverse_label(const RelationLabel& r) {
  if (r.is_reverse()) return RelationLabel(std::string(r.base()));
  return RelationLabel("~" + r.str());
}

/// Immutable entity/relation adjacency with reverse closure. Cheap to share
/// by const reference across threads; the only mutable state is an atomic
/// diagnostic counter for lookups of unknown entities.
class KnowledgeGraph {
 public:
  struct Node {
    std::vector<RelationLabel> relations;  // sorted, unique
    std::map<RelationLabel, std::vector<EntityId>, std::less<>> links;
  };

  KnowledgeGraph() = default;

  std::size_t entity_count() const noexcept { return nodes_.size(); }
  /// Directed edges, reverse edges included.
  std::size_t edge_count() const noexcept { return edge_count_; }
  /// Reverse edges that were absent from the input and synthesized at freeze.
  std::size_t repaired_edges() const noexcept { return repaired_edges_; }
  std::size_t unknown_lookups() const noexcept { return unknown_lookups_->load(std::memory_order_relaxed); }

  bool contains(std::string_view entity) const { return nodes_.find(entity) != nodes_.end(); }

  /// All labels incident to `entity`, lexicographic. Empty for unknown entities.
  std::span<const RelationLabel> one_hop_relations(std::string_view entity) const {
    auto it = nodes_.find(entity);
    if (it == nodes_.end()) {
      unknown_lookups_->fetch_add(1, std::memory_order_relaxed);
      return {};
    }
    return it->second.relations;
  }

  std::span<const EntityId> neighbors(std::string_view entity, std::string_view relation) const {
    auto it = nodes_.find(entity);
    if (it == nodes_.end()) return {};
    auto link = it->second.links.find(relation);
    if (link == it->second.links.end()) return {};
    return link->second;
  }

  bool has_edge(std::string_view head, std::string_view relation, std::string_view tail) const {
    auto tails = neighbors(head, relation);
    return std::binary_search(tails.begin(), tails.end(), tail,
                              [](const auto& a, const auto& b) { return std::string_view(a) < std::string_view(b); });
  }

  const std::map<std::string, Node, std::less<>>& nodes() const noexcept { return nodes_; }

 private:
  friend class KnowledgeGraphBuilder;

  std::map<std::string, Node, std::less<>> nodes_;
  std::size_t edge_count_ = 0;
  std::size_t repaired_edges_ = 0;
  std::shared_ptr<std::atomic<std::size_t>> unknown_lookups_ = std::make_shared<std::atomic<std::size_t>>(0);
};

/// Accumulates edges, then `freeze()` synthesizes missing reverse edges and
/// produces the canonical immutable graph.
class KnowledgeGraphBuilder {
 public:
  void add_entity(const EntityId& e) { adjacency_[e.str()]; }

  void add_edge(const EntityId& head, const RelationLabel& relation, const EntityId& tail) {
    adjacency_[head.str()][relation.str()].insert(tail.str());
    adjacency_[tail.str()];
  }

  KnowledgeGraph freeze() && {
    std::vector<std::tuple<std::string, std::string, std::string>> missing;
    for (const auto& [head, rels] : adjacency_) {
      for (const auto& [rel, tails] : rels) {
        const std::string back = reverse_label(RelationLabel(rel)).str();
        for (const auto& tail : tails) {
          const auto& tail_rels = adjacency_.at(tail);
          auto r = tail_rels.find(back);
          if (r == tail_rels.end() || !r->second.contains(head)) missing.emplace_back(tail, back, head);
        }
      }
    }
    for (auto& [h, r, t] : missing) adjacency_[h][r].insert(t);

    KnowledgeGraph g;
    g.repaired_edges_ = missing.size();
    for (auto& [entity, rels] : adjacency_) {
      KnowledgeGraph::Node node;
      node.relations.reserve(rels.size());
      for (auto& [rel, tails] : rels) {
        RelationLabel label(rel);
        node.relations.push_back(label);
        std::vector<EntityId> list;
        list.reserve(tails.size());
        for (const auto& t : tails) list.emplace_back(t);
        g.edge_count_ += list.size();
        node.links.emplace(std::move(label), std::move(list));
      }
      g.nodes_.emplace(entity, std::move(node));
    }
    adjacency_.clear();
    return g;
  }

 private:
  // std::map/std::set keep everything in canonical lexicographic order.
  std::map<std::string, std::map<std::string, std::set<std::string>>> adjacency_;
};

/// Reads the KG JSONL format:
///   {"entity": "<id>", "links": {"<relation>": ["<tail>", ...], ...}}
/// Blank lines are skipped. Missing reverse edges are synthesized.
inline KnowledgeGraph load_kg(std::istream& in) {
  KnowledgeGraphBuilder builder;
  std::set<std::string, std::less<>> seen;
  std::string line;
  std::size_t line_no = 0;
  std::size_t records = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FileError(ErrorCode::MalformedFile, line_no,
                      "invalid JSON at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    auto fail = [&](const std::string& why) { throw FileError(ErrorCode::MalformedFile, line_no, why); };
    if (!record.is_object()) fail("record is not an object");
    auto ent = record.find("entity");
    if (ent == record.end() || !ent->is_string()) fail("missing string field \"entity\"");
    const auto& name = ent->get_ref<const std::string&>();
    if (!EntityId::valid(name)) fail("invalid entity id '" + name + "'");
    if (!seen.insert(name).second) {
      throw FileError(ErrorCode::DuplicateEntityRecord, line_no, "entity '" + name + "' already defined");
    }
    EntityId head(name);
    builder.add_entity(head);
    ++records;

    auto links = record.find("links");
    if (links == record.end()) continue;
    if (!links->is_object()) fail("\"links\" must be an object");
    for (const auto& [rel, tails] : links->items()) {
      if (!RelationLabel::valid(rel)) fail("invalid relation label '" + rel + "'");
      if (!tails.is_array()) fail("tails of '" + rel + "' must be an array");
      RelationLabel label(rel);
      for (const auto& t : tails) {
        if (!t.is_string() || !EntityId::valid(t.get_ref<const std::string&>())) {
          fail("invalid tail under '" + rel + "'");
        }
        builder.add_edge(head, label, EntityId(t.get<std::string>()));
      }
    }
  }
  if (records == 0) throw Error(ErrorCode::EmptyGraph, "no entity records");
  return std::move(builder).freeze();
}

inline KnowledgeGraph load_kg(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return load_kg(in);
}

}  // namespace factgenius
