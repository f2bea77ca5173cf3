#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace factgenius::fuzzy {

/// Score on the 0..100 scale; 100 iff the strings are equal.
using SimilarityScore = double;

inline constexpr SimilarityScore kDefaultThreshold = 90.0;

namespace detail {

inline bool is_ascii(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

// Invalid UTF-8 bytes decode to U+DC80..U+DCFF so every byte string has a
// well-defined code point sequence.
inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int len = b0 < 0x80 ? 1 : (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xE ? 3 : (b0 >> 3) == 0x1E ? 4 : 0;
    char32_t cp = len == 1 ? b0 : len == 2 ? (b0 & 0x1F) : len == 3 ? (b0 & 0x0F) : (b0 & 0x07);
    bool ok = len > 0 && i + len <= s.size();
    for (int k = 1; ok && k < len; ++k) {
      const auto bk = static_cast<unsigned char>(s[i + k]);
      ok = (bk & 0xC0) == 0x80;
      cp = (cp << 6) | (bk & 0x3F);
    }
    if (ok && len > 1) {
      // Reject overlong forms, surrogates and out-of-range values.
      static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
      ok = cp >= kMin[len] && cp <= 0x10FFFF && !(cp >= 0xD800 && cp <= 0xDFFF);
    }
    if (!ok) {
      out.push_back(0xDC00 + b0);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

template <typename Char>
std::size_t edit_distance(std::basic_string_view<Char> a, std::basic_string_view<Char> b) {
  if (a.size() < b.size()) std::swap(a, b);
  // Trim the common prefix and suffix; they never contribute edits.
  while (!b.empty() && a.front() == b.front()) { a.remove_prefix(1); b.remove_prefix(1); }
  while (!b.empty() && a.back() == b.back()) { a.remove_suffix(1); b.remove_suffix(1); }
  if (b.empty()) return a.size();

  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t subst = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({up + 1, row[j - 1] + 1, subst});
      diag = up;
    }
  }
  return row[b.size()];
}

inline std::size_t code_point_length(std::string_view s) {
  return is_ascii(s) ? s.size() : decode_utf8(s).size();
}

}  // namespace detail

/// Minimum number of single code point insertions, deletions and
/// substitutions turning `a` into `b`.
inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a == b) return 0;
  if (detail::is_ascii(a) && detail::is_ascii(b)) return detail::edit_distance(a, b);
  const auto ua = detail::decode_utf8(a);
  const auto ub = detail::decode_utf8(b);
  return detail::edit_distance(std::u32string_view(ua), std::u32string_view(ub));
}

/// 100 * (1 - d / max(|a|, |b|)), lengths in code points; 100 for two empty strings.
inline SimilarityScore similarity(std::string_view a, std::string_view b) {
  if (a == b) return 100.0;
  const std::size_t longest = std::max(detail::code_point_length(a), detail::code_point_length(b));
  const std::size_t d = levenshtein(a, b);
  return 100.0 * (1.0 - static_cast<double>(d) / static_cast<double>(longest));
}

template <typename Candidate>
struct Match {
  Candidate candidate;
  SimilarityScore score;

  friend bool operator==(const Match&, const Match&) = default;
};

/// Every candidate scoring strictly above `threshold`, by descending score and
/// then lexicographically. Candidates whose length difference alone already
/// rules them out are skipped without running the DP; the result is the same
/// as scoring every candidate.
template <typename Candidate>
std::vector<Match<Candidate>> best_matches(std::string_view query, std::span<const Candidate> candidates,
                                           SimilarityScore threshold) {
  std::vector<Match<Candidate>> out;
  const std::size_t qlen = detail::code_point_length(query);
  for (const auto& c : candidates) {
    const std::string_view cs(c);
    const std::size_t clen = detail::code_point_length(cs);
    const std::size_t longest = std::max(qlen, clen);
    if (longest > 0) {
      const std::size_t gap = qlen > clen ? qlen - clen : clen - qlen;
      // levenshtein >= gap, so this is an upper bound on the score.
      const double bound = 100.0 * (1.0 - static_cast<double>(gap) / static_cast<double>(longest));
      if (!(bound > threshold)) continue;
    }
    const SimilarityScore s = similarity(query, cs);
    if (s > threshold) out.push_back({c, s});
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    if (x.score != y.score) return x.score > y.score;
    return std::string_view(x.candidate) < std::string_view(y.candidate);
  });
  return out;
}

template <typename Candidate>
std::vector<Match<Candidate>> best_matches(std::string_view query, const std::vector<Candidate>& candidates,
                                           SimilarityScore threshold) {
  return best_matches(query, std::span<const Candidate>(candidates), threshold);
}

}  // namespace factgenius::fuzzy
