#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "factgenius/error.hpp"
#include "factgenius/relation_miner.hpp"

namespace factgenius {

enum class Label { Supported, Refuted };

inline std::string_view to_string(Label l) { return l == Label::Supported ? "Supported" : "Refuted"; }

inline std::optional<Label> parse_label(std::string_view s) {
  if (s == "Supported") return Label::Supported;
  if (s == "Refuted") return Label::Refuted;
  return std::nullopt;
}

struct Verdict {
  Label label = Label::Refuted;
  std::string explanation;
  std::string raw_text;

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

namespace detail {

// Lexer over one brace literal: strings in either quote style, `#` comments,
// bare tokens (numbers, `...`, identifiers) and punctuation.
class DictLexer {
 public:
  enum class Kind { String, Bare, Punct, End };
  struct Token {
    Kind kind;
    std::string text;
  };

  explicit DictLexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_space_and_comments();
    if (pos_ >= src_.size()) return {Kind::End, {}};
    const char c = src_[pos_];
    if (c == '"' || c == '\'') return {Kind::String, read_string(c)};
    if (c == '{' || c == '}' || c == '[' || c == ']' || c == ':' || c == ',') {
      ++pos_;
      return {Kind::Punct, std::string(1, c)};
    }
    const auto start = pos_;
    while (pos_ < src_.size() && !is_delim(src_[pos_])) ++pos_;
    return {Kind::Bare, std::string(src_.substr(start, pos_ - start))};
  }

 private:
  static bool is_delim(char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '{' || c == '}' || c == '[' || c == ']' ||
           c == ':' || c == ',' || c == '"' || c == '\'' || c == '#';
  }

  void skip_space_and_comments() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string read_string(char quote) {
    std::string out;
    ++pos_;
    while (pos_ < src_.size() && src_[pos_] != quote) {
      char c = src_[pos_++];
      if (c == '\\' && pos_ < src_.size()) {
        c = src_[pos_++];
        if (c == 'n') c = '\n';
        else if (c == 't') c = '\t';
      }
      out.push_back(c);
    }
    if (pos_ >= src_.size()) throw ParseError(ErrorCode::MalformedDict, "unterminated string");
    ++pos_;
    return out;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

// Returns the index one past the brace closing the literal opened at `open`,
// or npos when the literal never closes.
inline std::size_t match_brace(std::string_view text, std::size_t open) {
  int depth = 0;
  char quote = 0;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (quote) {
      if (c == '\\') ++i;
      else if (c == quote) quote = 0;
      continue;
    }
    if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

struct RawEntry {
  std::string key;
  std::vector<std::string> values;
};

inline std::vector<RawEntry> parse_literal(std::string_view literal) {
  using Kind = DictLexer::Kind;
  DictLexer lex(literal);
  auto fail = [](const std::string& why) -> ParseError { return ParseError(ErrorCode::MalformedDict, why); };
  auto is = [](const DictLexer::Token& t, char p) { return t.kind == Kind::Punct && t.text[0] == p; };

  // Skips a nested [...] or {...} whose opener was just consumed.
  auto skip_nested = [&](char open) {
    std::vector<char> stack{open == '[' ? ']' : '}'};
    while (!stack.empty()) {
      auto t = lex.next();
      if (t.kind == Kind::End) throw fail("unterminated nested value");
      if (t.kind != Kind::Punct) continue;
      if (t.text[0] == '[') stack.push_back(']');
      else if (t.text[0] == '{') stack.push_back('}');
      else if (t.text[0] == ']' || t.text[0] == '}') {
        if (t.text[0] != stack.back()) throw fail("mismatched bracket");
        stack.pop_back();
      }
    }
  };

  if (!is(lex.next(), '{')) throw fail("literal must start with '{'");
  std::vector<RawEntry> entries;
  for (;;) {
    auto t = lex.next();
    if (is(t, '}')) break;
    if (t.kind != Kind::String && t.kind != Kind::Bare) throw fail("expected a key");
    RawEntry entry{t.text, {}};
    if (!is(lex.next(), ':')) throw fail("expected ':' after key '" + entry.key + "'");

    auto v = lex.next();
    if (v.kind == Kind::String) {
      entry.values.push_back(v.text);
    } else if (is(v, '[')) {
      for (;;) {
        auto item = lex.next();
        if (is(item, ']')) break;
        if (item.kind == Kind::String) entry.values.push_back(item.text);
        else if (is(item, '[') || is(item, '{')) skip_nested(item.text[0]);
        else if (item.kind != Kind::Bare) throw fail("unexpected token in list");
        auto sep = lex.next();
        if (is(sep, ']')) break;
        if (!is(sep, ',')) throw fail("expected ',' or ']' in list");
      }
    } else if (is(v, '{')) {
      skip_nested('{');
    } else if (v.kind != Kind::Bare) {
      throw fail("expected a value for key '" + entry.key + "'");
    }
    entries.push_back(std::move(entry));

    auto sep = lex.next();
    if (is(sep, '}')) break;
    if (!is(sep, ',')) throw fail("expected ',' or '}' after entry");
  }
  return entries;
}

inline void append_quoted(std::string& out, std::string_view s) {
  out += '"';
  for (char c : s) {
    if (c == '"' || c == '\\') { out += '\\'; out += c; }
    else if (c == '\n') out += "\\n";
    else if (c == '\t') out += "\\t";
    else out += c;
  }
  out += '"';
}

}  // namespace detail

/// Extracts the first brace literal of the shape {"entity": ["rel", ...], ...}
/// from free-form LLM output. Quotes may be single or double; `#` comments,
/// trailing commas, code fences and surrounding prose are tolerated. Keys not
/// in `claim_entities` are dropped and counted in `dropped_keys`; non-string
/// values are skipped; every claim entity is present in the result.
/// Throws ParseError (NoDictFound, UnbalancedBraces, MalformedDict).
inline CandidateConnections parse_connection_dict(std::string_view text, const std::set<std::string>& claim_entities,
                                                  std::size_t* dropped_keys = nullptr) {
  std::optional<ParseError> first_error;
  for (auto open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1)) {
    const auto close = detail::match_brace(text, open);
    if (close == std::string_view::npos) {
      if (!first_error) first_error = ParseError(ErrorCode::UnbalancedBraces, "no closing brace for literal");
      continue;
    }
    std::vector<detail::RawEntry> entries;
    try {
      entries = detail::parse_literal(text.substr(open, close - open));
    } catch (const ParseError& e) {
      if (!first_error) first_error = e;
      continue;
    }
    CandidateConnections out;
    std::size_t dropped = 0;
    for (const auto& e : claim_entities) out.entity(e);
    for (const auto& entry : entries) {
      if (!claim_entities.contains(entry.key)) {
        ++dropped;
        continue;
      }
      for (const auto& value : entry.values) out.add(entry.key, value);
    }
    if (dropped_keys) *dropped_keys = dropped;
    return out;
  }
  if (first_error) throw *first_error;
  throw ParseError(ErrorCode::NoDictFound, "no brace-delimited literal in output");
}

/// Canonical literal for a candidate map; parse_connection_dict reads it back unchanged.
inline std::string to_dict_literal(const CandidateConnections& c) {
  std::string out = "{";
  bool first_key = true;
  for (const auto& [entity, values] : c.entries) {
    if (!first_key) out += ", ";
    first_key = false;
    detail::append_quoted(out, entity);
    out += ": [";
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out += ", ";
      detail::append_quoted(out, values[i]);
    }
    out += "]";
  }
  out += "}";
  return out;
}

/// Finds the first standalone `true`/`false` token (any case). Whatever
/// follows it, minus leading separators, is the explanation.
/// Throws ParseError(NoVerdictToken).
inline Verdict parse_verdict(std::string_view text) {
  auto word_char = [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || std::isalnum(u) || c == '_';
  };
  auto iequals = [](std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
             return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
  };
  std::size_t i = 0;
  while (i < text.size()) {
    if (!word_char(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && word_char(text[j])) ++j;
    const auto token = text.substr(i, j - i);
    const bool is_true = iequals(token, "true");
    if (is_true || iequals(token, "false")) {
      auto rest = text.substr(j);
      const auto start = rest.find_first_not_of(" \t\r\n,.:;!-*\"')");
      rest = start == std::string_view::npos ? std::string_view{} : rest.substr(start);
      const auto end = rest.find_last_not_of(" \t\r\n");
      rest = end == std::string_view::npos ? std::string_view{} : rest.substr(0, end + 1);
      return {is_true ? Label::Supported : Label::Refuted, std::string(rest), std::string(text)};
    }
    i = j;
  }
  throw ParseError(ErrorCode::NoVerdictToken, "no standalone true/false token");
}

/// Answer-template form of a verdict, e.g. "True, <explanation>".
inline std::string to_answer_text(const Verdict& v) {
  std::string out = v.label == Label::Supported ? "True" : "False";
  if (!v.explanation.empty()) out += ", " + v.explanation;
  return out;
}

}  // namespace factgenius
