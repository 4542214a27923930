#pragma once

// Final score f(q,c) = (1 - gamma) f_s + gamma f_c, the ListNet objective and
// the two-step (candidate pool, then dynamic re-rank) inference path.

#include <algorithm>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "surfcon/context_matching.hpp"
#include "surfcon/context_model.hpp"
#include "surfcon/error.hpp"
#include "surfcon/numerics.hpp"
#include "surfcon/parallel.hpp"
#include "surfcon/surface_encoder.hpp"
#include "surfcon/text.hpp"

namespace surfcon {

enum class Matching { Dynamic, Static };

struct RankerConfig {
  Real gamma = 0.3;
  std::size_t K = 50;
  std::size_t list_negatives = 100;
  std::size_t topn_surface = 50;
  std::size_t topn_context = 50;
  bool fine_tune_encoder = true;
  Matching matching = Matching::Dynamic;
  Pooling pooling = Pooling::Mean;
  std::size_t epochs = 50;
  Real lr = 1e-3;
  std::size_t batch = 8;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const {
    if (!(gamma >= 0 && gamma <= 1)) throw InputError("gamma must be in [0, 1]");
    if (K < 1) throw InputError("K must be >= 1");
    if (topn_surface < 1 || topn_context < 1) throw InputError("candidate pool sizes must be >= 1");
    if (batch < 1) throw InputError("batch must be >= 1");
  }
};

/// Top-K predicted context ids per in-vocabulary term, frozen after phase 1.
struct ContextCache {
  std::size_t K = 0;
  std::vector<PredictedContexts> entries;
};

inline ContextCache materialize_contexts(const ContextPredictor& predictor, const std::vector<std::string>& vocab, std::size_t k,
                                         std::size_t threads = 1) {
  ContextCache cache;
  cache.K = std::min(k, vocab.size() - 1);
  cache.entries.resize(vocab.size());
  parallel_for(vocab.size(), threads, [&](std::size_t i) {
    cache.entries[i] = predict_top_k(predictor.encoder.term(vocab[i], static_cast<TermId>(i)), cache.K, predictor);
  });
  return cache;
}

/// Every trained component needed for scoring.
struct SurfConModel {
  std::vector<std::string> vocab;
  ContextPredictor predictor;    // phase-1 encoder snapshot + nu
  ContextFeatureTable features;  // frozen in phase 2
  SurfaceEncoder encoder;        // f_s encoder, optionally fine-tuned in phase 2
  MatcherParams matcher;
  RankerConfig config;
  ContextCache contexts;

  void build_index() {
    index_.clear();
    for (std::size_t i = 0; i < vocab.size(); ++i) index_.emplace(vocab[i], static_cast<TermId>(i));
  }

  std::optional<TermId> find(const std::string& surface) const {
    auto it = index_.find(normalize_surface(surface));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Query term with its vocabulary id when in-vocabulary.
  Term term(const std::string& surface) const {
    const std::string s = normalize_surface(surface);
    return encoder.term(s, find(s));
  }

  Term term(TermId id) const { return encoder.term(vocab.at(static_cast<std::size_t>(id)), id); }

  /// Throws naming the first missing or inconsistent component.
  void validate() const {
    const auto n = static_cast<Index>(vocab.size());
    if (n == 0) throw InputError("model: vocabulary is missing");
    if (index_.size() != vocab.size()) throw InputError("model: vocabulary index not built");
    if (predictor.nu.rows() != n || predictor.encoder.E_ch.size() == 0) throw InputError("model: context predictor is missing");
    if (features.features.rows() != n) throw InputError("model: context feature table is missing");
    if (encoder.E_ch.size() == 0) throw InputError("model: surface encoder is missing");
    if (matcher.W_m.rows() != features.features.cols() || matcher.W_b.rows() != features.features.cols()) {
      throw InputError("model: matcher parameters are missing");
    }
    config.validate();
  }

 private:
  std::unordered_map<std::string, TermId> index_;
};

/// Context ids of `term`: cached for in-vocabulary terms, predicted otherwise.
inline std::vector<TermId> context_ids(const SurfConModel& m, const Term& term) {
  const std::size_t k = m.config.K;
  if (term.id && m.contexts.K >= std::min(k, m.vocab.size() - 1) && !m.contexts.entries.empty()) {
    auto ids = m.contexts.entries.at(static_cast<std::size_t>(*term.id)).ids();
    if (ids.size() > k) ids.resize(k);
    return ids;
  }
  return predict_top_k(term, std::min(k, m.vocab.size() - (term.id ? 1 : 0)), m.predictor).ids();
}

inline Matrix gather_rows(const Matrix& table, const std::vector<TermId>& ids) {
  Matrix out(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Index>(i)) = table.row(ids[i]);
  return out;
}

inline ContextSet context_set(const SurfConModel& m, const Term& term) {
  return {term.surface, gather_rows(m.features.features, context_ids(m, term))};
}

struct ScoreBreakdown {
  Real final = 0;
  Real surface = 0;
  Real context = 0;
};

inline Real mix_scores(Real gamma, Real surface, Real context) { return (1 - gamma) * surface + gamma * context; }

inline MatchResult match_sets(const SurfConModel& m, const ContextSet& q, const ContextSet& c) {
  return m.config.matching == Matching::Dynamic ? dynamic_vectors(q, c, m.matcher, m.config.pooling) : static_match(q, c, m.matcher);
}

/// f(q, c) for an in-vocabulary candidate id.
inline ScoreBreakdown final_score(const SurfConModel& m, const Term& q, TermId c) {
  m.validate();
  const Term ct = m.term(c);
  ScoreBreakdown b;
  b.surface = surface_score(q, ct, m.encoder);
  b.context = match_sets(m, context_set(m, q), context_set(m, ct)).score;
  b.final = mix_scores(m.config.gamma, b.surface, b.context);
  return b;
}

struct CandidateList {
  std::string query;
  std::vector<TermId> candidates;
  std::vector<int> relevance;
};

struct RankedEntry {
  TermId id;
  Real final;
  Real surface;
  Real context;
};

struct RankedList {
  std::string query;
  std::vector<RankedEntry> entries;
};

// ---------------------------------------------------------------------------
// Batched list scoring shared by inference, ListNet and training.

/// Per-term quantities that depend only on the current parameters.
struct TermTable {
  std::vector<Vector> surface;       // ranker encoder output per in-vocabulary term
  std::vector<SurfaceTrace> traces;  // filled only when gradients are needed
  Matrix static_context;             // mean predicted-context feature per term
};

inline TermTable build_term_table(const SurfConModel& m, bool keep_traces, bool with_static = false) {
  TermTable t;
  const std::size_t n = m.vocab.size();
  t.surface.resize(n);
  if (keep_traces) t.traces.resize(n);
  parallel_for(n, m.config.threads, [&](std::size_t i) {
    t.surface[i] = encode_surface(m.term(static_cast<TermId>(i)), m.encoder, keep_traces ? &t.traces[i] : nullptr);
  });
  if (with_static) {
    t.static_context.resize(static_cast<Index>(n), m.features.features.cols());
    for (std::size_t i = 0; i < n; ++i) {
      t.static_context.row(static_cast<Index>(i)) =
          gather_rows(m.features.features, context_ids(m, m.term(static_cast<TermId>(i)))).colwise().mean();
    }
  }
  return t;
}

struct ListForward {
  Vector surface;
  Vector context;
  Vector final;
  std::vector<QueryMatcher::Forward> match;
};

/// Scores `candidates` for a query with surface vector s_q and context rows Q.
/// Context scores are skipped (left 0) when `with_context` is false.
inline ListForward forward_list(const SurfConModel& m, const Vector& s_q, const QueryMatcher* matcher, const TermTable& table,
                                const std::vector<TermId>& candidates, bool with_context) {
  const auto n = static_cast<Index>(candidates.size());
  ListForward f;
  f.surface.resize(n);
  f.context = Vector::Zero(n);
  if (with_context) f.match.resize(candidates.size());
  for (Index i = 0; i < n; ++i) {
    const TermId c = candidates[static_cast<std::size_t>(i)];
    f.surface[i] = cosine(s_q, table.surface[static_cast<std::size_t>(c)]);
    if (with_context) {
      const Matrix rows = gather_rows(m.features.features, context_ids(m, m.term(c)));
      f.match[static_cast<std::size_t>(i)] = matcher->forward(rows);
      f.context[i] = f.match[static_cast<std::size_t>(i)].result.score;
    }
  }
  f.final = (1 - m.config.gamma) * f.surface + m.config.gamma * f.context;
  return f;
}

struct ListGrads {
  Vector d_query;                       // dL/ds_q
  std::vector<std::pair<TermId, Vector>> d_candidates;  // dL/ds_c
  MatcherGrads matcher;
};

/// Backpropagates dL/d(final) through surface and context scores.
inline void backward_list(const SurfConModel& m, const Vector& s_q, QueryMatcher* matcher, const TermTable& table,
                          const std::vector<TermId>& candidates, const ListForward& f, const Vector& d_final, ListGrads& g) {
  const Real gamma = m.config.gamma;
  if (g.d_query.size() == 0) g.d_query = Vector::Zero(s_q.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const TermId c = candidates[i];
    const Real d = d_final[static_cast<Index>(i)];
    if (gamma < 1) {
      Vector d_c = Vector::Zero(s_q.size());
      cosine_backward(s_q, table.surface[static_cast<std::size_t>(c)], (1 - gamma) * d, g.d_query, d_c);
      g.d_candidates.emplace_back(c, std::move(d_c));
    }
    if (gamma > 0 && !f.match.empty()) {
      const Matrix rows = gather_rows(m.features.features, context_ids(m, m.term(c)));
      matcher->backward(rows, f.match[i], gamma * d, g.matcher);
    }
  }
  if (gamma > 0 && matcher != nullptr) matcher->finish(g.matcher);
}

/// ListNet cross entropy of softmax(final) against relevance / sum(relevance);
/// returns the loss and writes dL/d(final).
inline Real listnet_from_scores(const Vector& final, const std::vector<int>& relevance, Vector* d_final) {
  if (static_cast<std::size_t>(final.size()) != relevance.size()) throw InputError("listnet: relevance length mismatch");
  Real total = 0;
  for (int r : relevance) total += r;
  if (total <= 0) throw InputError("listnet: candidate list has no relevant entry");
  const Real lse = log_sum_exp(final);
  Real loss = 0;
  for (std::size_t i = 0; i < relevance.size(); ++i) {
    if (relevance[i] != 0) loss -= (relevance[i] / total) * (final[static_cast<Index>(i)] - lse);
  }
  if (d_final != nullptr) {
    *d_final = (final.array() - lse).exp().matrix();
    for (std::size_t i = 0; i < relevance.size(); ++i) (*d_final)[static_cast<Index>(i)] -= relevance[i] / total;
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Public single-query operations

inline Vector recommendation_distribution(const SurfConModel& m, const Term& q, const CandidateList& list) {
  if (list.candidates.empty()) throw InputError("recommendation_distribution: empty candidate list");
  Vector scores(static_cast<Index>(list.candidates.size()));
  for (std::size_t i = 0; i < list.candidates.size(); ++i) scores[static_cast<Index>(i)] = final_score(m, q, list.candidates[i]).final;
  return softmax(scores);
}

struct RankerGrads {
  SurfaceEncoderGrads encoder;
  MatcherGrads matcher;

  RankerGrads() = default;
  explicit RankerGrads(const SurfConModel& m) : encoder(m.encoder), matcher(m.matcher) {}
};

/// ListNet loss for one query; with `grads`, accumulates gradients for the
/// matcher and the ranker encoder.
inline Real listnet_loss(const SurfConModel& m, const Term& q, const CandidateList& list, RankerGrads* grads = nullptr) {
  m.validate();
  const TermTable table = build_term_table(m, grads != nullptr);
  SurfaceTrace q_trace;
  const Vector s_q = encode_surface(q, m.encoder, &q_trace);
  const Matrix q_rows = gather_rows(m.features.features, context_ids(m, q));
  QueryMatcher matcher(q_rows, m.matcher, m.config.pooling, m.config.matching == Matching::Dynamic);
  const bool with_context = m.config.gamma > 0;
  const ListForward f = forward_list(m, s_q, &matcher, table, list.candidates, with_context);
  Vector d_final;
  const Real loss = listnet_from_scores(f.final, list.relevance, grads != nullptr ? &d_final : nullptr);
  if (grads != nullptr) {
    ListGrads g{Vector(), {}, MatcherGrads(m.matcher)};
    backward_list(m, s_q, &matcher, table, list.candidates, f, d_final, g);
    grads->matcher.W_m += g.matcher.W_m;
    grads->matcher.W_b += g.matcher.W_b;
    backprop_surface(q_trace, g.d_query, m.encoder, grads->encoder);
    for (const auto& [c, d] : g.d_candidates) backprop_surface(table.traces[static_cast<std::size_t>(c)], d, m.encoder, grads->encoder);
  }
  return loss;
}

/// All in-vocabulary synonyms plus `n_negatives` uniformly drawn non-synonyms,
/// shuffled.
inline CandidateList sample_training_candidates(const std::string& query, std::optional<TermId> query_id,
                                                const std::vector<TermId>& positives, std::size_t vocab_size, std::size_t n_negatives,
                                                Rng& rng) {
  if (positives.empty()) throw InputError("query '" + query + "' has no in-vocabulary synonym");
  std::unordered_set<TermId> excluded(positives.begin(), positives.end());
  if (query_id) excluded.insert(*query_id);
  std::vector<TermId> pool;
  pool.reserve(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    if (excluded.count(static_cast<TermId>(i)) == 0) pool.push_back(static_cast<TermId>(i));
  }
  if (pool.size() < n_negatives) {
    throw InputError("only " + std::to_string(pool.size()) + " non-synonyms available for '" + query + "', need " +
                     std::to_string(n_negatives));
  }
  for (std::size_t i = 0; i < n_negatives; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);

  std::vector<std::pair<TermId, int>> items;
  for (TermId p : positives) items.emplace_back(p, 1);
  for (std::size_t i = 0; i < n_negatives; ++i) items.emplace_back(pool[i], 0);
  rng.shuffle(items);

  CandidateList list{query, {}, {}};
  for (const auto& [id, r] : items) {
    list.candidates.push_back(id);
    list.relevance.push_back(r);
  }
  return list;
}

/// Union of the top surface-cosine and top static-context-cosine neighbors.
inline CandidateList inference_candidates(const SurfConModel& m, const Term& q, const TermTable& table) {
  const Vector s_q = encode_surface(q, m.encoder);
  const Vector v_q = gather_rows(m.features.features, context_ids(m, q)).colwise().mean().transpose();
  const auto n = static_cast<Index>(m.vocab.size());
  Vector by_surface(n);
  Vector by_context(n);
  for (Index i = 0; i < n; ++i) {
    by_surface[i] = cosine(s_q, table.surface[static_cast<std::size_t>(i)]);
    by_context[i] = cosine(v_q, table.static_context.row(i).transpose());
  }
  CandidateList list{q.surface, {}, {}};
  std::unordered_set<TermId> seen;
  for (const auto* pool : {&by_surface, &by_context}) {
    const std::size_t k = pool == &by_surface ? m.config.topn_surface : m.config.topn_context;
    for (TermId id : top_k_indices(*pool, k, q.id)) {
      if (seen.insert(id).second) list.candidates.push_back(id);
    }
  }
  list.relevance.assign(list.candidates.size(), 0);
  return list;
}

inline CandidateList inference_candidates(const SurfConModel& m, const Term& q) {
  m.validate();
  return inference_candidates(m, q, build_term_table(m, false, true));
}

/// Re-ranks `list` by final score (descending, ties by ascending id).
inline RankedList rank(const SurfConModel& m, const Term& q, const CandidateList& list, const TermTable& table) {
  RankedList out{q.surface, {}};
  if (list.candidates.empty()) return out;
  const Vector s_q = encode_surface(q, m.encoder);
  const Matrix q_rows = gather_rows(m.features.features, context_ids(m, q));
  const QueryMatcher matcher(q_rows, m.matcher, m.config.pooling, m.config.matching == Matching::Dynamic);
  const ListForward f = forward_list(m, s_q, &matcher, table, list.candidates, true);
  for (std::size_t i = 0; i < list.candidates.size(); ++i) {
    const auto k = static_cast<Index>(i);
    out.entries.push_back({list.candidates[i], f.final[k], f.surface[k], f.context[k]});
  }
  std::sort(out.entries.begin(), out.entries.end(),
            [](const RankedEntry& a, const RankedEntry& b) { return a.final > b.final || (a.final == b.final && a.id < b.id); });
  return out;
}

inline RankedList rank(const SurfConModel& m, const Term& q, const CandidateList& list) {
  m.validate();
  return rank(m, q, list, build_term_table(m, false));
}

}  // namespace surfcon
