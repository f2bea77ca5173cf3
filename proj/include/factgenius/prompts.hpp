#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "factgenius/error.hpp"
#include "factgenius/kg_store.hpp"

namespace factgenius {

enum class ChatRole { System, User };

inline std::string_view to_string(ChatRole r) { return r == ChatRole::System ? "system" : "user"; }

struct ChatMessage {
  ChatRole role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

using ChatMessages = std::vector<ChatMessage>;

namespace prompt_text {

inline constexpr std::string_view kFilterSystem =
    "You are an intelligent graph connection finder. You are given a single claim and connection options for the "
    "entities present in the claim. Your task is to filter the Connections options that could be relevant to "
    "connect given entities to fact-check Claim1. ~ ( tilde ) in the beginning means the reverse connection.";

inline constexpr std::string_view kFilterTask =
    "## TASK:\n"
    "- For each of the given entities given in the DICT structure below:\n"
    "    Filter the connections strictly from the given options that would be relevant to connect given entities "
    "to fact-check Claim1.\n"
    "- Think clever, there could be multi-step hidden connections, if not direct, that could connect the entities "
    "somehow.\n"
    "- Prioritize connections among entities and arrange them based on their relevance. Be extra careful with ~ "
    "signs.\n"
    "- No code output. No explanation. Output only valid python DICT of structure:\n";

inline constexpr std::string_view kOptionsMarker = "# options (strictly choose from): ";
inline constexpr std::string_view kEntitySlot = R"(": ["...", "...", ... ],)";
inline constexpr std::string_view kEllipsis = "...";

inline constexpr std::string_view kClaimOnlySystem =
    "You are an intelligent fact checker trained on Wikipedia. You are given a single claim and your task is to "
    "decide whether all the facts in the given claim are supported by the given evidence using your knowledge.\n"
    "Choose one of {True, False}, and output the one-sentence explanation for the choice.";

inline constexpr std::string_view kEvidenceSystem =
    "You are an intelligent fact-checker. You are given a single claim and supporting evidence for the entities "
    "present in the claim, extracted from a knowledge graph.\n"
    "Your task is to decide whether all the facts in the given claim are supported by the given evidence.\n"
    "Choose one of {True, False}, and output the one-sentence explanation for the choice.";

inline constexpr std::string_view kVerifyTask =
    "## TASK:\n"
    "Now let’s verify the Claim based on the evidence.\n"
    "Claim:\n";

inline constexpr std::string_view kEvidenceHeader = "Evidences:\n";
inline constexpr std::string_view kNoEvidence = "(no evidence found)";

inline constexpr std::string_view kAnswerTemplate =
    "#Answer Template:\n"
    "\"True/False (single word answer),\n"
    "One-sentence evidence.\"";

}  // namespace prompt_text

/// Stage-I filter prompt. `options` maps each claim entity to its one-hop
/// labels; std::map keeps entities in canonical order. With `options_cap`,
/// each list is cut to its first `cap` labels followed by "...".
inline ChatMessages build_filter_prompt(std::string_view claim,
                                        const std::map<std::string, std::vector<RelationLabel>, std::less<>>& options,
                                        std::optional<std::size_t> options_cap = std::nullopt) {
  using namespace prompt_text;
  if (options.empty()) throw Error(ErrorCode::EmptyOptions, "filter prompt needs at least one entity");
  if (options_cap && *options_cap == 0) throw Error(ErrorCode::InvalidArgument, "options_cap must be positive");

  std::string user;
  user += "Claim1:\n";
  user += claim;
  user += "\n\n";
  user += kFilterTask;
  user += "\n{\n";
  bool first = true;
  for (const auto& [entity, labels] : options) {
    if (!first) user += "\n";
    first = false;
    user += '"';
    user += entity;
    user += kEntitySlot;
    user += '\n';
    user += kOptionsMarker;
    const std::size_t n = options_cap ? std::min(*options_cap, labels.size()) : labels.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (i) user += ", ";
      user += labels[i].str();
    }
    if (n < labels.size()) user += n ? std::string(", ").append(kEllipsis) : std::string(kEllipsis);
    user += '\n';
  }
  user += "}";
  return {{ChatRole::System, std::string(kFilterSystem)}, {ChatRole::User, std::move(user)}};
}

inline ChatMessages build_claim_only_prompt(std::string_view claim) {
  using namespace prompt_text;
  if (claim.empty()) throw Error(ErrorCode::EmptyClaim, "claim text is empty");
  std::string user(kVerifyTask);
  user += claim;
  user += "\n\n";
  user += kAnswerTemplate;
  return {{ChatRole::System, std::string(kClaimOnlySystem)}, {ChatRole::User, std::move(user)}};
}

inline ChatMessages build_evidence_prompt(std::string_view claim, const std::vector<std::string>& evidence_lines) {
  using namespace prompt_text;
  if (claim.empty()) throw Error(ErrorCode::EmptyClaim, "claim text is empty");
  std::string user(kVerifyTask);
  user += claim;
  user += "\n\n";
  user += kEvidenceHeader;
  if (evidence_lines.empty()) {
    user += kNoEvidence;
  } else {
    for (std::size_t i = 0; i < evidence_lines.size(); ++i) {
      if (i) user += '\n';
      user += evidence_lines[i];
    }
  }
  user += "\n\n";
  user += kAnswerTemplate;
  return {{ChatRole::System, std::string(kEvidenceSystem)}, {ChatRole::User, std::move(user)}};
}

}  // namespace factgenius
