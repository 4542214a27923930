#pragma once

// Desk-scale synthetic corpus: concept groups whose members share a set of
// context hubs, with typo/abbreviation variants and disjoint-surface aliases.

#include <algorithm>
#include <cstdio>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "surfcon/corpus.hpp"
#include "surfcon/error.hpp"
#include "surfcon/graph.hpp"
#include "surfcon/numerics.hpp"
#include "surfcon/text.hpp"

namespace surfcon {

struct SynthesisConfig {
  std::size_t concepts = 50;
  std::size_t terms_per_concept = 3;      // in-vocabulary members
  std::size_t oov_terms_per_concept = 1;  // label-only typo variants
  std::size_t base_words = 120;           // shared pool for canonical names
  double variant_rate = 0.3;              // share of surface variants that are abbreviations (rest are typos)
  double alias_rate = 0.3;                // share of non-canonical members with a disjoint surface
  std::size_t hub_count = 60;
  std::size_t hubs_per_concept = 4;
  double edge_noise_rate = 0.1;           // noise edges per signal edge
  int min_count = 5;
  int max_count = 30;
  double min_similarity = 0.8;            // floor between a concept's non-alias members
};

namespace detail {

inline std::string pseudo_word(Rng& rng, std::size_t syllables) {
  static constexpr const char* kOnsets[] = {"b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
                                            "br", "cl", "dr", "gr", "ph", "pr", "st", "th", "tr"};
  static constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ae", "io", "ou", "y"};
  static constexpr const char* kCodas[] = {"", "", "", "n", "r", "s", "l", "x", "m", "t"};
  std::string w;
  for (std::size_t i = 0; i < syllables; ++i) {
    w += kOnsets[rng.below(std::size(kOnsets))];
    w += kVowels[rng.below(std::size(kVowels))];
  }
  w += kCodas[rng.below(std::size(kCodas))];
  return w;
}

/// `count` distinct pseudo-words not present in `taken`; new words are added to `taken`.
inline std::vector<std::string> word_pool(Rng& rng, std::size_t count, std::unordered_set<std::string>& taken) {
  std::vector<std::string> out;
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > 100 * count + 1000) throw InputError("synthetic corpus: cannot generate enough distinct words");
    std::string w = pseudo_word(rng, 2 + rng.below(2));
    if (taken.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string s;
  for (const auto& w : words) {
    if (!s.empty()) s += ' ';
    s += w;
  }
  return s;
}

inline std::string typo(Rng& rng, const std::string& s) {
  std::string out = s;
  // Only edit letters, never the separating spaces.
  std::vector<std::size_t> letters;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] != ' ') letters.push_back(i);
  }
  const std::size_t pos = letters[rng.below(letters.size())];
  switch (rng.below(3)) {
    case 0:
      out.erase(pos, 1);
      break;
    case 1:
      if (pos + 1 < out.size() && out[pos + 1] != ' ') std::swap(out[pos], out[pos + 1]);
      else out.erase(pos, 1);
      break;
    default:
      out[pos] = static_cast<char>('a' + rng.below(26));
      break;
  }
  return out;
}

/// Truncates the last word by 1-2 letters and marks it with a period.
inline std::string abbreviate(Rng& rng, const std::string& s) {
  const auto space = s.rfind(' ');
  const std::size_t start = space == std::string::npos ? 0 : space + 1;
  const std::size_t word_len = s.size() - start;
  if (word_len < 4) return typo(rng, s);
  const std::size_t cut = 1 + rng.below(2);
  return s.substr(0, s.size() - cut) + ".";
}

}  // namespace detail

/// Builds a raw-count graph and concept labels. Concepts are named "S000000".."S<n>".
inline Corpus generate_synthetic_corpus(const SynthesisConfig& config, std::uint64_t seed) {
  if (config.concepts == 0 || config.terms_per_concept == 0) throw InputError("synthetic corpus: need at least one concept and term");
  if (config.hubs_per_concept == 0 || config.hubs_per_concept > config.hub_count) {
    throw InputError("synthetic corpus: hubs_per_concept must be in [1, hub_count]");
  }
  if (config.alias_rate < 0 || config.alias_rate > 1 || config.variant_rate < 0 || config.variant_rate > 1 ||
      config.edge_noise_rate < 0) {
    throw InputError("synthetic corpus: rates must be in [0, 1]");
  }
  if (config.min_count < 1 || config.max_count < config.min_count) throw InputError("synthetic corpus: bad count range");
  if (config.base_words < 2) throw InputError("synthetic corpus: need at least two base words");

  Rng root(seed);
  Rng word_rng = root.split(1);
  Rng name_rng = root.split(2);
  Rng edge_rng = root.split(3);
  Rng order_rng = root.split(4);

  std::unordered_set<std::string> taken_words;
  const auto base = detail::word_pool(word_rng, config.base_words, taken_words);
  const auto hub_words = detail::word_pool(word_rng, std::max<std::size_t>(config.hub_count, 8), taken_words);

  std::set<std::string> surfaces_taken;
  std::vector<std::string> hubs;
  for (std::size_t h = 0; h < config.hub_count; ++h) {
    std::string s;
    do {
      s = "finding " + hub_words[h] + " " + hub_words[name_rng.below(hub_words.size())];
    } while (surfaces_taken.count(s) != 0);
    surfaces_taken.insert(s);
    hubs.push_back(s);
  }

  struct ConceptTerms {
    std::vector<std::string> inv;
    std::vector<std::string> oov;
    std::vector<std::size_t> hubs;
  };
  std::vector<ConceptTerms> concepts(config.concepts);

  constexpr std::size_t kMaxAttempts = 200;
  auto fits_with = [&](const std::string& candidate, const std::vector<std::string>& similar_members) {
    if (surfaces_taken.count(candidate) != 0) return false;
    return std::all_of(similar_members.begin(), similar_members.end(), [&](const std::string& m) {
      return normalized_edit_similarity(candidate, m) >= config.min_similarity;
    });
  };

  for (std::size_t c = 0; c < config.concepts; ++c) {
    auto& ct = concepts[c];
    std::string canonical;
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt > kMaxAttempts) throw InputError("synthetic corpus: cannot generate distinct canonical names");
      std::vector<std::string> words;
      const std::size_t n_words = 2 + name_rng.below(2);
      while (words.size() < n_words) {
        const auto& w = base[name_rng.below(base.size())];
        if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
      }
      canonical = detail::join_words(words);
      if (canonical.size() >= 16 && surfaces_taken.count(canonical) == 0) break;
    }
    surfaces_taken.insert(canonical);
    ct.inv.push_back(canonical);
    std::vector<std::string> similar{canonical};

    auto make_variant = [&]() {
      for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
        std::string v = name_rng.uniform() < config.variant_rate ? detail::abbreviate(name_rng, canonical)
                                                                  : detail::typo(name_rng, canonical);
        if (fits_with(v, similar)) return v;
      }
      throw InputError("synthetic corpus: infeasible config, cannot generate enough distinct surface variants for '" +
                       canonical + "'");
    };

    for (std::size_t t = 1; t < config.terms_per_concept; ++t) {
      if (name_rng.uniform() < config.alias_rate) {
        std::string alias;
        for (std::size_t attempt = 0;; ++attempt) {
          if (attempt > kMaxAttempts) throw InputError("synthetic corpus: cannot generate distinct aliases");
          const auto fresh = detail::word_pool(word_rng, 2, taken_words);
          alias = detail::join_words(fresh);
          if (surfaces_taken.count(alias) == 0 && normalized_edit_similarity(alias, canonical) < config.min_similarity) break;
        }
        surfaces_taken.insert(alias);
        ct.inv.push_back(alias);
      } else {
        std::string v = make_variant();
        surfaces_taken.insert(v);
        similar.push_back(v);
        ct.inv.push_back(std::move(v));
      }
    }
    for (std::size_t t = 0; t < config.oov_terms_per_concept; ++t) {
      std::string v = make_variant();
      surfaces_taken.insert(v);
      similar.push_back(v);
      ct.oov.push_back(std::move(v));
    }

    std::vector<std::size_t> hub_ids(config.hub_count);
    for (std::size_t h = 0; h < hub_ids.size(); ++h) hub_ids[h] = h;
    name_rng.shuffle(hub_ids);
    hub_ids.resize(config.hubs_per_concept);
    std::sort(hub_ids.begin(), hub_ids.end());
    ct.hubs = std::move(hub_ids);
  }

  // Node order is shuffled so ids carry no concept structure.
  std::vector<std::string> nodes;
  for (const auto& ct : concepts) nodes.insert(nodes.end(), ct.inv.begin(), ct.inv.end());
  nodes.insert(nodes.end(), hubs.begin(), hubs.end());
  std::sort(nodes.begin(), nodes.end());
  order_rng.shuffle(nodes);

  Corpus corpus{CooccurrenceGraph(nodes), {}};
  auto& g = corpus.graph;
  auto count = [&] { return static_cast<Real>(config.min_count + static_cast<int>(edge_rng.below(config.max_count - config.min_count + 1))); };

  std::vector<TermId> term_ids;
  std::size_t signal_edges = 0;
  for (const auto& ct : concepts) {
    for (const auto& s : ct.inv) {
      const TermId t = *g.find(s);
      term_ids.push_back(t);
      for (std::size_t h : ct.hubs) {
        const TermId hub = *g.find(hubs[h]);
        g.add_edge(std::min(t, hub), std::max(t, hub), count());
        ++signal_edges;
      }
    }
  }

  const auto noise_edges = static_cast<std::size_t>(config.edge_noise_rate * static_cast<double>(signal_edges) + 0.5);
  std::size_t added = 0;
  for (std::size_t attempt = 0; added < noise_edges && attempt < 20 * noise_edges + 100; ++attempt) {
    const TermId a = term_ids[edge_rng.below(term_ids.size())];
    const TermId b = *g.find(hubs[edge_rng.below(hubs.size())]);
    if (g.weight(a, b) != 0) continue;
    g.add_edge(std::min(a, b), std::max(a, b), static_cast<Real>(1 + edge_rng.below(3)));
    ++added;
  }

  for (std::size_t c = 0; c < concepts.size(); ++c) {
    char id[32];
    std::snprintf(id, sizeof(id), "S%06zu", c);
    for (const auto& s : concepts[c].inv) corpus.labels.add(s, id);
    for (const auto& s : concepts[c].oov) corpus.labels.add(s, id);
  }
  return corpus;
}

}  // namespace surfcon
