#pragma once

// MAP under the two candidate-selection protocols: random (synonyms mixed
// with sampled non-synonyms) and inference (the model's own candidate pool).

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surfcon/corpus.hpp"
#include "surfcon/metrics.hpp"
#include "surfcon/parallel.hpp"
#include "surfcon/ranking.hpp"
#include "surfcon/splits.hpp"

namespace surfcon {

enum class Protocol { Random, Inference };

inline std::string to_string(Protocol p) { return p == Protocol::Random ? "random" : "inference"; }

inline Protocol parse_protocol(const std::string& name) {
  if (name == "random") return Protocol::Random;
  if (name == "inference") return Protocol::Inference;
  throw InputError("unknown protocol '" + name + "' (valid: random, inference)");
}

inline constexpr const char* kMissedPositiveConvention =
    "positives absent from the candidate list count as unretrieved: they contribute 0 precision but still count in m";

struct EvalConfig {
  std::size_t negatives = 100;  // random protocol only
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct QueryResult {
  std::string query;
  double ap = 0;
  bool dissim = false;
  std::size_t positives = 0;
  std::size_t retrieved = 0;  // positives present in the candidate list
  std::size_t candidates = 0;
};

struct EvalReport {
  Protocol protocol = Protocol::Random;
  std::string split;
  std::uint64_t seed = 0;
  double dissim_threshold = 0.8;
  double map_all = 0;
  std::optional<double> map_dissim;  // absent when no query is dissimilar
  std::optional<double> map_sim;
  std::vector<QueryResult> queries;
  nlohmann::json config = nlohmann::json::object();
};

/// Unweighted mean of per-query APs, optionally restricted to the Dissim
/// subset (dissim = 1) or its complement (dissim = 0).
inline std::optional<double> subset_map(const std::vector<QueryResult>& rows, int dissim) {
  std::vector<double> aps;
  for (const auto& r : rows) {
    if (dissim < 0 || static_cast<int>(r.dissim) == dissim) aps.push_back(r.ap);
  }
  if (aps.empty()) return std::nullopt;
  return mean_of(aps);
}

inline EvalReport run_experiment(const SurfConModel& model, const DatasetSplit& splits, SplitName split, Protocol protocol,
                                 const EvalConfig& config) {
  model.validate();
  const auto& queries = splits.queries(split);
  if (queries.empty()) throw InputError("split '" + std::string(to_string(split)) + "' has no queries");

  const TermTable table = build_term_table(model, false, protocol == Protocol::Inference);
  const Rng root(config.seed);
  std::vector<QueryResult> rows(queries.size());
  parallel_for(queries.size(), config.threads, [&](std::size_t i) {
    const std::string& q = queries[i];
    const Term term = model.term(q);
    const auto& positives = splits.positives_of(q);
    CandidateList list;
    if (protocol == Protocol::Random) {
      Rng rng = root.split(i);
      list = sample_training_candidates(q, term.id, positives, model.vocab.size(), config.negatives, rng);
    } else {
      list = inference_candidates(model, term, table);
    }
    const RankedList ranked = rank(model, term, list, table);
    std::vector<int> relevance;
    std::size_t hits = 0;
    for (const auto& e : ranked.entries) {
      const bool rel = std::binary_search(positives.begin(), positives.end(), e.id);
      relevance.push_back(rel ? 1 : 0);
      hits += rel ? 1 : 0;
    }
    QueryResult& r = rows[i];
    r.query = q;
    r.positives = positives.size();
    r.retrieved = hits;
    r.candidates = list.candidates.size();
    r.ap = hits == 0 ? 0.0 : average_precision(relevance, positives.size());
    r.dissim = is_dissimilar_query(q, positives, model.vocab, splits.dissim_threshold);
  });

  EvalReport report;
  report.protocol = protocol;
  report.split = std::string(to_string(split));
  report.seed = config.seed;
  report.dissim_threshold = splits.dissim_threshold;
  report.queries = std::move(rows);
  report.map_all = *subset_map(report.queries, -1);
  report.map_dissim = subset_map(report.queries, 1);
  report.map_sim = subset_map(report.queries, 0);
  return report;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["protocol"] = to_string(r.protocol);
  j["split"] = r.split;
  j["seed"] = r.seed;
  j["dissim_rule"] = "query has >= 1 positive with normalized edit similarity < " + detail::format_real(r.dissim_threshold);
  j["missed_positive_convention"] = kMissedPositiveConvention;
  j["map"] = {{"all", r.map_all},
              {"dissim", r.map_dissim ? nlohmann::json(*r.map_dissim) : nlohmann::json(nullptr)},
              {"sim", r.map_sim ? nlohmann::json(*r.map_sim) : nlohmann::json(nullptr)}};
  j["query_count"] = r.queries.size();
  auto& qs = j["queries"] = nlohmann::json::array();
  for (const auto& q : r.queries) {
    qs.push_back({{"query", q.query},
                  {"ap", q.ap},
                  {"dissim", q.dissim},
                  {"positives", q.positives},
                  {"retrieved", q.retrieved},
                  {"candidates", q.candidates}});
  }
  j["config"] = r.config;
  return j;
}

inline void write_report(const std::filesystem::path& json_path, const std::filesystem::path& tsv_path, const EvalReport& r) {
  std::filesystem::create_directories(json_path.parent_path());
  std::ofstream(json_path) << to_json(r).dump(2) << '\n';
  std::ofstream tsv(tsv_path);
  tsv << "query\tap\tdissim\tpositives\tretrieved\n";
  for (const auto& q : r.queries) {
    tsv << q.query << '\t' << detail::format_real(q.ap) << '\t' << (q.dissim ? 1 : 0) << '\t' << q.positives << '\t' << q.retrieved
        << '\n';
  }
}

}  // namespace surfcon
