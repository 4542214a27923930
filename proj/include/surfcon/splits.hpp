#pragma once

// Query splits (train / dev / InV test / OOV test) and their Dissim subsets.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "surfcon/corpus.hpp"
#include "surfcon/error.hpp"
#include "surfcon/graph.hpp"
#include "surfcon/numerics.hpp"
#include "surfcon/text.hpp"

namespace surfcon {

enum class SplitName { Train, Dev, InvTest, OovTest };

inline constexpr std::array<std::string_view, 4> kSplitNames = {"train", "dev", "inv-test", "oov-test"};

inline std::string_view to_string(SplitName s) { return kSplitNames[static_cast<std::size_t>(s)]; }

inline SplitName parse_split_name(std::string_view name) {
  for (std::size_t i = 0; i < kSplitNames.size(); ++i) {
    if (kSplitNames[i] == name) return static_cast<SplitName>(i);
  }
  throw InputError("unknown split '" + std::string(name) + "' (valid: train, dev, inv-test, oov-test)");
}

struct SplitConfig {
  double train_fraction = 0.7;
  double dev_fraction = 0.15;
  double test_fraction = 0.15;
  double dissim_threshold = 0.8;
  std::size_t oov_count = 0;  // 0 keeps every eligible OOV query
  std::uint64_t seed = 0;
};

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> dev;
  std::vector<std::string> inv_test;
  std::vector<std::string> oov_test;
  std::vector<std::string> inv_test_dissim;
  std::vector<std::string> oov_test_dissim;
  /// Query surface -> ascending InV synonym ids (never the query's own id).
  std::map<std::string, std::vector<TermId>> positives;
  double dissim_threshold = 0.8;

  const std::vector<std::string>& queries(SplitName s) const {
    switch (s) {
      case SplitName::Train: return train;
      case SplitName::Dev: return dev;
      case SplitName::InvTest: return inv_test;
      case SplitName::OovTest: return oov_test;
    }
    throw Error("invalid split");
  }

  const std::vector<TermId>& positives_of(const std::string& query) const {
    auto it = positives.find(query);
    if (it == positives.end()) throw InputError("no positives recorded for query '" + query + "'");
    return it->second;
  }
};

/// True iff some positive's surface has normalized edit similarity below `threshold`.
inline bool is_dissimilar_query(const std::string& query, const std::vector<TermId>& positives,
                                const std::vector<std::string>& vocab, double threshold) {
  return std::any_of(positives.begin(), positives.end(), [&](TermId id) {
    return normalized_edit_similarity(query, vocab.at(static_cast<std::size_t>(id))) < threshold;
  });
}

inline DatasetSplit build_splits(const CooccurrenceGraph& graph, const ConceptLabels& labels, const SplitConfig& config) {
  if (labels.empty()) throw InputError("build_splits: no concept labels");
  const double total = config.train_fraction + config.dev_fraction + config.test_fraction;
  if (config.train_fraction < 0 || config.dev_fraction < 0 || config.test_fraction < 0 || std::abs(total - 1.0) > 1e-9) {
    throw InputError("build_splits: split fractions must be non-negative and sum to 1");
  }

  DatasetSplit split;
  split.dissim_threshold = config.dissim_threshold;

  std::vector<std::string> inv_queries;
  std::vector<std::string> oov_queries;
  bool any_inv = false;
  for (const auto& [concept_id, members] : labels.groups()) {
    std::vector<TermId> inv_ids;
    for (const auto& s : members) {
      if (auto id = graph.find(s)) inv_ids.push_back(*id);
    }
    std::sort(inv_ids.begin(), inv_ids.end());
    any_inv = any_inv || !inv_ids.empty();
    for (const auto& s : members) {
      const auto self = graph.find(s);
      std::vector<TermId> pos;
      for (TermId id : inv_ids) {
        if (!self || *self != id) pos.push_back(id);
      }
      if (pos.empty()) continue;
      split.positives[s] = pos;
      (self ? inv_queries : oov_queries).push_back(s);
    }
  }
  if (!any_inv) throw InputError("build_splits: no labeled term is in the vocabulary");

  std::sort(inv_queries.begin(), inv_queries.end());
  std::sort(oov_queries.begin(), oov_queries.end());

  Rng rng(config.seed);
  Rng inv_rng = rng.split(1);
  inv_rng.shuffle(inv_queries);
  const auto n = inv_queries.size();
  const auto n_train = static_cast<std::size_t>(std::llround(config.train_fraction * static_cast<double>(n)));
  const auto n_dev = std::min(n - std::min(n, n_train),
                              static_cast<std::size_t>(std::llround(config.dev_fraction * static_cast<double>(n))));
  for (std::size_t i = 0; i < n; ++i) {
    auto& dest = i < n_train ? split.train : (i < n_train + n_dev ? split.dev : split.inv_test);
    dest.push_back(inv_queries[i]);
  }

  if (config.oov_count > 0 && oov_queries.size() > config.oov_count) {
    Rng oov_rng = rng.split(2);
    oov_rng.shuffle(oov_queries);
    oov_queries.resize(config.oov_count);
  }
  split.oov_test = std::move(oov_queries);

  for (auto* v : {&split.train, &split.dev, &split.inv_test, &split.oov_test}) std::sort(v->begin(), v->end());

  // Positives map only keeps queries that landed in some split.
  std::map<std::string, std::vector<TermId>> kept;
  for (const auto* v : {&split.train, &split.dev, &split.inv_test, &split.oov_test}) {
    for (const auto& q : *v) kept[q] = split.positives.at(q);
  }
  split.positives = std::move(kept);

  for (const auto& q : split.inv_test) {
    if (is_dissimilar_query(q, split.positives.at(q), graph.surfaces(), config.dissim_threshold)) split.inv_test_dissim.push_back(q);
  }
  for (const auto& q : split.oov_test) {
    if (is_dissimilar_query(q, split.positives.at(q), graph.surfaces(), config.dissim_threshold)) split.oov_test_dissim.push_back(q);
  }
  return split;
}

inline nlohmann::json to_json(const DatasetSplit& s) {
  nlohmann::json j;
  j["dissim_threshold"] = s.dissim_threshold;
  j["train"] = s.train;
  j["dev"] = s.dev;
  j["inv_test"] = s.inv_test;
  j["oov_test"] = s.oov_test;
  j["inv_test_dissim"] = s.inv_test_dissim;
  j["oov_test_dissim"] = s.oov_test_dissim;
  j["positives"] = s.positives;
  return j;
}

inline DatasetSplit split_from_json(const nlohmann::json& j) {
  DatasetSplit s;
  try {
    s.dissim_threshold = j.at("dissim_threshold").get<double>();
    s.train = j.at("train").get<std::vector<std::string>>();
    s.dev = j.at("dev").get<std::vector<std::string>>();
    s.inv_test = j.at("inv_test").get<std::vector<std::string>>();
    s.oov_test = j.at("oov_test").get<std::vector<std::string>>();
    s.inv_test_dissim = j.at("inv_test_dissim").get<std::vector<std::string>>();
    s.oov_test_dissim = j.at("oov_test_dissim").get<std::vector<std::string>>();
    s.positives = j.at("positives").get<std::map<std::string, std::vector<TermId>>>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed splits.json: ") + e.what());
  }
  return s;
}

inline void write_splits(const std::filesystem::path& path, const DatasetSplit& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << to_json(s).dump(2) << '\n';
}

inline DatasetSplit read_splits(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return split_from_json(j);
}

}  // namespace surfcon
