#pragma once

// Phase 2: ListNet over random candidate lists, Adam on the matcher (and the
// surface encoder when fine-tuning), early stopping on dev MAP.

#include <cmath>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "surfcon/evaluation.hpp"
#include "surfcon/ranking.hpp"

namespace surfcon {

struct RankerEpoch {
  std::size_t epoch = 0;  // 1-based
  Real loss = 0;          // mean ListNet loss over training queries
  std::optional<double> dev_map;
};

struct RankerTrainResult {
  std::vector<RankerEpoch> trace;
  std::size_t best_epoch = 0;  // 0 = initial parameters
  std::optional<double> best_dev_map;
  bool early_stopped = false;
};

namespace detail {

struct QueryGrad {
  Real loss = 0;
  Vector d_query;
  std::vector<std::pair<TermId, Vector>> d_candidates;
  MatcherGrads matcher;
};

inline QueryGrad query_gradient(const SurfConModel& m, const TermTable& table, TermId query, const CandidateList& list) {
  const auto q = static_cast<std::size_t>(query);
  const Vector& s_q = table.surface[q];
  const bool with_context = m.config.gamma > 0;
  std::optional<Matrix> q_rows;
  std::optional<QueryMatcher> matcher;
  if (with_context) {
    q_rows.emplace(gather_rows(m.features.features, context_ids(m, m.term(query))));
    matcher.emplace(*q_rows, m.matcher, m.config.pooling, m.config.matching == Matching::Dynamic);
  }
  QueryMatcher* mp = matcher ? &*matcher : nullptr;
  const ListForward f = forward_list(m, s_q, mp, table, list.candidates, with_context);
  Vector d_final;
  QueryGrad g;
  g.loss = listnet_from_scores(f.final, list.relevance, &d_final);
  ListGrads lg{Vector(), {}, MatcherGrads(m.matcher)};
  backward_list(m, s_q, mp, table, list.candidates, f, d_final, lg);
  g.d_query = std::move(lg.d_query);
  g.d_candidates = std::move(lg.d_candidates);
  g.matcher = std::move(lg.matcher);
  return g;
}

}  // namespace detail

/// Trains `model` in place. Returns with the best-dev parameters when a dev
/// split is present, otherwise with the final parameters.
inline RankerTrainResult train_ranker(SurfConModel& model, const DatasetSplit& splits, const std::string& log_prefix = "") {
  model.validate();
  const RankerConfig& cfg = model.config;
  if (splits.train.empty()) throw InputError("train_ranker: empty training split");
  if (model.contexts.entries.size() != model.vocab.size() || model.contexts.K < std::min(cfg.K, model.vocab.size() - 1)) {
    throw InputError("train_ranker: top-K contexts are not materialized for the vocabulary");
  }

  std::vector<TermId> train_ids;
  for (const auto& q : splits.train) {
    auto id = model.find(q);
    if (!id) throw InputError("train_ranker: training query '" + q + "' is not in the vocabulary");
    train_ids.push_back(*id);
  }

  std::vector<BlockRef> matcher_blocks = model.matcher.blocks();
  Adam matcher_adam(AdamConfig{cfg.lr}, matcher_blocks);
  std::vector<BlockRef> encoder_blocks = model.encoder.blocks("surf.");
  Adam encoder_adam(AdamConfig{cfg.lr}, encoder_blocks);

  const bool use_dev = !splits.dev.empty();
  const EvalConfig dev_eval{cfg.list_negatives, cfg.seed ^ 0xdee5ULL, cfg.threads};
  RankerTrainResult result;
  SurfaceEncoder best_encoder = model.encoder;
  MatcherParams best_matcher = model.matcher;
  if (use_dev) result.best_dev_map = run_experiment(model, splits, SplitName::Dev, Protocol::Random, dev_eval).map_all;
  std::size_t stale = 0;

  const Rng root(cfg.seed);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng order_rng = root.split(epoch);
    std::vector<std::size_t> order(train_ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(order);

    Real epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      const TermTable table = build_term_table(model, cfg.fine_tune_encoder);
      std::vector<detail::QueryGrad> grads(end - start);
      parallel_for(end - start, cfg.threads, [&](std::size_t k) {
        const std::size_t qi = order[start + k];
        const std::string& q = splits.train[qi];
        Rng rng = root.split(epoch * 1000003ULL + qi + 1);
        const CandidateList list =
            sample_training_candidates(q, train_ids[qi], splits.positives_of(q), model.vocab.size(), cfg.list_negatives, rng);
        grads[k] = detail::query_gradient(model, table, train_ids[qi], list);
      });

      // Fixed-order reduction keeps results independent of the thread count.
      const Real scale = 1.0 / static_cast<Real>(end - start);
      MatcherGrads mg(model.matcher);
      Matrix d_surface = Matrix::Zero(static_cast<Index>(model.vocab.size()), model.encoder.surface_dim());
      std::vector<bool> touched(model.vocab.size(), false);
      Real batch_loss = 0;
      for (std::size_t k = 0; k < grads.size(); ++k) {
        const auto& g = grads[k];
        batch_loss += g.loss;
        mg.W_m += g.matcher.W_m;
        mg.W_b += g.matcher.W_b;
        const auto qi = static_cast<std::size_t>(train_ids[order[start + k]]);
        d_surface.row(static_cast<Index>(qi)) += g.d_query.transpose();
        touched[qi] = true;
        for (const auto& [c, d] : g.d_candidates) {
          d_surface.row(static_cast<Index>(c)) += d.transpose();
          touched[static_cast<std::size_t>(c)] = true;
        }
      }
      if (!std::isfinite(batch_loss)) throw Error("train_ranker: non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += batch_loss;

      mg.W_m *= scale;
      mg.W_b *= scale;
      matcher_adam.step(matcher_blocks, {&mg.W_m, &mg.W_b});
      if (cfg.fine_tune_encoder) {
        SurfaceEncoderGrads eg(model.encoder);
        for (std::size_t i = 0; i < touched.size(); ++i) {
          if (touched[i]) backprop_surface(table.traces[i], d_surface.row(static_cast<Index>(i)).transpose() * scale, model.encoder, eg);
        }
        encoder_adam.step(encoder_blocks, eg.list());
      }
    }

    RankerEpoch row{epoch, epoch_loss / static_cast<Real>(train_ids.size()), std::nullopt};
    if (use_dev) {
      row.dev_map = run_experiment(model, splits, SplitName::Dev, Protocol::Random, dev_eval).map_all;
      if (*row.dev_map > *result.best_dev_map) {
        result.best_dev_map = row.dev_map;
        result.best_epoch = epoch;
        best_encoder = model.encoder;
        best_matcher = model.matcher;
        stale = 0;
      } else {
        ++stale;
      }
    } else {
      result.best_epoch = epoch;
    }
    result.trace.push_back(row);
    if (!log_prefix.empty()) {
      std::clog << log_prefix << "epoch " << epoch << " loss " << row.loss;
      if (row.dev_map) std::clog << " dev-map " << *row.dev_map;
      std::clog << '\n';
    }
    if (use_dev && stale >= cfg.patience) {
      result.early_stopped = true;
      break;
    }
  }
  if (use_dev) {
    model.encoder = std::move(best_encoder);
    model.matcher = std::move(best_matcher);
  }
  return result;
}

}  // namespace surfcon
