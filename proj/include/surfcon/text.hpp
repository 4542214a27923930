#pragma once

// String-level term processing: normalization, word and character n-gram
// tokenization, Levenshtein similarity.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "surfcon/error.hpp"

namespace surfcon {

using TermId = std::int64_t;

/// Character n-gram orders; sorted, unique, each >= 1.
using NgramOrders = std::vector<int>;

inline NgramOrders default_ngram_orders() { return {2, 3, 4}; }

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

/// ASCII-lowercases and collapses runs of whitespace into single spaces.
inline std::string normalize_surface(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
  }
  return out;
}

inline std::vector<std::string> split_words(std::string_view surface) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < surface.size()) {
    while (i < surface.size() && is_space(surface[i])) ++i;
    std::size_t j = i;
    while (j < surface.size() && !is_space(surface[j])) ++j;
    if (j > i) words.emplace_back(surface.substr(i, j - i));
    i = j;
  }
  return words;
}

inline void validate_orders(const NgramOrders& orders) {
  if (orders.empty()) throw InputError("n-gram orders must be non-empty");
  for (int n : orders) {
    if (n < 1) throw InputError("n-gram order must be >= 1");
  }
}

/// Boundary-marked character n-grams: each word is wrapped as '#word#' and
/// every window of each order is emitted left to right. Duplicates are kept.
inline std::vector<std::string> char_ngrams(std::string_view surface, const NgramOrders& orders) {
  validate_orders(orders);
  std::vector<std::string> grams;
  for (const auto& word : split_words(surface)) {
    const std::string marked = "#" + word + "#";
    for (int n : orders) {
      const auto len = static_cast<std::size_t>(n);
      if (marked.size() < len) continue;
      for (std::size_t i = 0; i + len <= marked.size(); ++i) grams.push_back(marked.substr(i, len));
    }
  }
  return grams;
}

/// A vocabulary entry or a free query string.
struct Term {
  std::optional<TermId> id;
  std::string surface;
  std::vector<std::string> words;
  std::vector<std::string> ngrams;
};

inline Term make_term(std::string_view raw, const NgramOrders& orders, std::optional<TermId> id = std::nullopt) {
  Term t;
  t.id = id;
  t.surface = normalize_surface(raw);
  t.words = split_words(t.surface);
  t.ngrams = char_ngrams(t.surface, orders);
  return t;
}

/// Levenshtein distance over bytes, two-row dynamic program.
inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// 1 - lev(a, b) / max(|a|, |b|); 1 for two empty strings.
inline double normalized_edit_similarity(std::string_view a, std::string_view b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

}  // namespace surfcon
