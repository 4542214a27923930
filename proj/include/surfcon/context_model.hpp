#pragma once

// Inductive context prediction: p(u_j | t) = softmax_j(nu_j . h(t)), trained
// against the graph's empirical neighbor distribution, plus second-order
// proximity feature vectors for the matcher.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "surfcon/error.hpp"
#include "surfcon/graph.hpp"
#include "surfcon/numerics.hpp"
#include "surfcon/surface_encoder.hpp"
#include "surfcon/text.hpp"

namespace surfcon {

struct ContextPredictor {
  SurfaceEncoder encoder;  // h(.) used for inputs
  Matrix nu;               // |V| x surface_dim context embeddings

  std::size_t vocab_size() const { return static_cast<std::size_t>(nu.rows()); }
};

inline ContextPredictor init_context_predictor(SurfaceEncoder encoder, std::size_t vocab_size, std::uint64_t seed) {
  Rng rng(seed);
  const Index dim = encoder.surface_dim();
  Matrix nu = uniform_matrix(static_cast<Index>(vocab_size), dim, 0.5 / static_cast<Real>(dim), rng);
  return {std::move(encoder), std::move(nu)};
}

struct ContextGrads {
  SurfaceEncoderGrads encoder;
  Matrix nu;

  ContextGrads() = default;
  explicit ContextGrads(const ContextPredictor& p) : encoder(p.encoder), nu(Matrix::Zero(p.nu.rows(), p.nu.cols())) {}

  void set_zero() {
    encoder.set_zero();
    nu.setZero();
  }
};

/// p_hat(u_j | u_i) = w_ij / sum_k w_ik over the neighbors of u_i.
inline std::vector<std::pair<TermId, Real>> empirical_distribution(const CooccurrenceGraph& graph, TermId node) {
  const auto& adj = graph.neighbors(node);
  if (adj.empty()) throw InputError("empirical distribution undefined for isolated node " + std::to_string(node));
  Real total = 0;
  for (const auto& n : adj) total += n.weight;
  std::vector<std::pair<TermId, Real>> out;
  out.reserve(adj.size());
  for (const auto& n : adj) out.emplace_back(n.id, n.weight / total);
  return out;
}

inline Vector context_logits(const Vector& surface, const ContextPredictor& p) { return p.nu * surface; }

/// Distribution over all in-vocabulary terms as contexts of `term` (any string).
inline Vector context_distribution(const Term& term, const ContextPredictor& p) {
  return softmax(context_logits(encode_surface(term, p.encoder), p));
}

/// Cross entropy of one node's empirical distribution against the model.
inline Real node_softmax_loss(const CooccurrenceGraph& graph, const Term& term, const ContextPredictor& p, ContextGrads* grads) {
  SurfaceTrace trace;
  const Vector s = encode_surface(term, p.encoder, &trace);
  const Vector logits = context_logits(s, p);
  const Real lse = log_sum_exp(logits);
  const auto target = empirical_distribution(graph, *term.id);
  Real loss = 0;
  for (const auto& [j, pj] : target) loss -= pj * (logits[j] - lse);
  if (grads != nullptr) {
    Vector d_logits = (logits.array() - lse).exp().matrix();
    for (const auto& [j, pj] : target) d_logits[j] -= pj;
    grads->nu.noalias() += d_logits * s.transpose();
    const Vector d_s = p.nu.transpose() * d_logits;
    backprop_surface(trace, d_s, p.encoder, grads->encoder);
  }
  return loss;
}

/// L_n = -sum_i sum_j p_hat(u_j|u_i) log p(u_j|u_i) over all non-isolated nodes.
inline Real full_softmax_loss(const CooccurrenceGraph& graph, const std::vector<Term>& terms, const ContextPredictor& p,
                              ContextGrads* grads = nullptr) {
  if (graph.edge_count() == 0) throw InputError("full_softmax_loss: graph has no edges");
  Real loss = 0;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    if (graph.degree(static_cast<TermId>(i)) == 0) continue;
    loss += node_softmax_loss(graph, terms[i], p, grads);
  }
  return loss;
}

/// -[log sigma(nu_j . s_i) + sum_n log sigma(-nu_n . s_i)].
inline Real negative_sampling_loss(const Term& input, TermId positive, const std::vector<TermId>& negatives, const ContextPredictor& p,
                                   ContextGrads* grads = nullptr) {
  if (negatives.empty()) throw InputError("negative_sampling_loss: empty negatives list");
  SurfaceTrace trace;
  const Vector s = encode_surface(input, p.encoder, &trace);
  const Real pos = p.nu.row(positive).dot(s);
  Real loss = -log_sigmoid(pos);
  Vector d_s = Vector::Zero(s.size());
  if (grads != nullptr) {
    const Real g = sigmoid(pos) - 1;
    grads->nu.row(positive) += g * s.transpose();
    d_s += g * p.nu.row(positive).transpose();
  }
  for (TermId n : negatives) {
    const Real neg = p.nu.row(n).dot(s);
    loss -= log_sigmoid(-neg);
    if (grads != nullptr) {
      const Real g = sigmoid(neg);
      grads->nu.row(n) += g * s.transpose();
      d_s += g * p.nu.row(n).transpose();
    }
  }
  if (grads != nullptr) backprop_surface(trace, d_s, p.encoder, grads->encoder);
  return loss;
}

enum class ContextTrainMode { FullSoftmax, NegativeSampling };

struct ContextTrainConfig {
  ContextTrainMode mode = ContextTrainMode::FullSoftmax;
  std::size_t negatives = 5;
  std::size_t epochs = 200;
  Real lr = 1e-2;
  std::size_t batch = 16;  // nodes (full softmax) or pairs (negative sampling) per Adam step
  Real noise_power = 0.75;
  std::uint64_t seed = 0;
};

struct ContextTrainResult {
  ContextPredictor predictor;
  std::vector<Real> loss_trace;  // mean loss per sample, per epoch
};

/// Trains nu and every encoder table reachable from the loss.
inline ContextTrainResult train_context_predictor(const CooccurrenceGraph& graph, const ContextTrainConfig& config, SurfaceEncoder encoder) {
  if (graph.size() == 0 || graph.edge_count() == 0) throw InputError("train_context_predictor: graph has no edges");
  if (config.batch == 0) throw InputError("train_context_predictor: batch must be positive");

  Rng root(config.seed);
  ContextTrainResult result{init_context_predictor(std::move(encoder), graph.size(), root.split(0).next()), {}};
  ContextPredictor& p = result.predictor;
  const auto terms = graph.terms(p.encoder.vocab.orders);

  std::vector<TermId> active;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    if (graph.degree(static_cast<TermId>(i)) > 0) active.push_back(static_cast<TermId>(i));
  }

  std::vector<BlockRef> blocks = p.encoder.blocks("surf.");
  blocks.push_back({"ctx.nu", &p.nu});
  Adam adam(AdamConfig{config.lr}, blocks);
  ContextGrads grads(p);
  auto grad_list = [&] {
    auto l = grads.encoder.list();
    l.push_back(&grads.nu);
    return l;
  }();

  // Negative-sampling machinery.
  std::vector<AliasSampler> neighbor_samplers;
  AliasSampler noise;
  if (config.mode == ContextTrainMode::NegativeSampling) {
    if (config.negatives == 0) throw InputError("train_context_predictor: negatives must be positive");
    noise = unigram_pow_sampler(graph.degrees(), config.noise_power, 0);
    neighbor_samplers.resize(graph.size());
    for (TermId i : active) {
      std::vector<Real> w;
      for (const auto& n : graph.neighbors(i)) w.push_back(n.weight);
      neighbor_samplers[static_cast<std::size_t>(i)] = AliasSampler(w, 0);
    }
  }

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = root.split(1000 + epoch);
    Real epoch_loss = 0;
    std::size_t samples = 0;

    if (config.mode == ContextTrainMode::FullSoftmax) {
      std::vector<TermId> order = active;
      rng.shuffle(order);
      for (std::size_t start = 0; start < order.size(); start += config.batch) {
        const std::size_t end = std::min(order.size(), start + config.batch);
        grads.set_zero();
        Real batch_loss = 0;
        for (std::size_t k = start; k < end; ++k) batch_loss += node_softmax_loss(graph, terms[static_cast<std::size_t>(order[k])], p, &grads);
        const Real scale = 1.0 / static_cast<Real>(end - start);
        grads.encoder *= scale;
        grads.nu *= scale;
        if (!std::isfinite(batch_loss)) throw Error("context predictor diverged at epoch " + std::to_string(epoch));
        adam.step(blocks, grad_list);
        epoch_loss += batch_loss;
        samples += end - start;
      }
    } else {
      const std::size_t pairs = 2 * graph.edge_count();
      for (std::size_t start = 0; start < pairs; start += config.batch) {
        const std::size_t end = std::min(pairs, start + config.batch);
        grads.set_zero();
        Real batch_loss = 0;
        for (std::size_t k = start; k < end; ++k) {
          const TermId u = active[rng.below(active.size())];
          const auto& adj = graph.neighbors(u);
          const TermId v = adj[neighbor_samplers[static_cast<std::size_t>(u)].sample(rng)].id;
          std::vector<TermId> negs;
          while (negs.size() < config.negatives) {
            const auto n = static_cast<TermId>(noise.sample(rng));
            if (n != v) negs.push_back(n);
          }
          batch_loss += negative_sampling_loss(terms[static_cast<std::size_t>(u)], v, negs, p, &grads);
        }
        const Real scale = 1.0 / static_cast<Real>(end - start);
        grads.encoder *= scale;
        grads.nu *= scale;
        if (!std::isfinite(batch_loss)) throw Error("context predictor diverged at epoch " + std::to_string(epoch));
        adam.step(blocks, grad_list);
        epoch_loss += batch_loss;
        samples += end - start;
      }
    }
    result.loss_trace.push_back(epoch_loss / static_cast<Real>(std::max<std::size_t>(samples, 1)));
  }
  return result;
}

/// Top-K predicted contexts, probability descending, ties by ascending id.
struct PredictedContexts {
  std::string term;
  std::vector<std::pair<TermId, Real>> entries;

  std::vector<TermId> ids() const {
    std::vector<TermId> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.first);
    return out;
  }
};

/// Indices of the k largest values (descending, ties by ascending index), skipping `exclude`.
inline std::vector<TermId> top_k_indices(const Vector& scores, std::size_t k, std::optional<TermId> exclude = std::nullopt) {
  std::vector<TermId> idx;
  idx.reserve(static_cast<std::size_t>(scores.size()));
  for (Index i = 0; i < scores.size(); ++i) {
    if (!exclude || *exclude != i) idx.push_back(i);
  }
  k = std::min(k, idx.size());
  auto better = [&](TermId a, TermId b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
  idx.resize(k);
  return idx;
}

inline PredictedContexts predict_top_k(const Term& term, std::size_t k, const ContextPredictor& p) {
  if (k < 1) throw InputError("predict_top_k: K must be >= 1");
  const std::size_t available = p.vocab_size() - (term.id ? 1 : 0);
  if (k > available) {
    warn("predict_top_k: K=" + std::to_string(k) + " exceeds " + std::to_string(available) + " candidate contexts; truncating");
  }
  const Vector probs = context_distribution(term, p);
  PredictedContexts out{term.surface, {}};
  for (TermId id : top_k_indices(probs, k, term.id)) out.entries.emplace_back(id, probs[id]);
  return out;
}

// ---------------------------------------------------------------------------
// Context features (second-order proximity)

struct ContextFeatureTable {
  Matrix features;  // |V| x feature_dim, rows L2-normalized
};

struct FeatureTrainConfig {
  Index dim = 128;
  std::size_t negatives = 5;
  std::size_t epochs = 200;  // one epoch = 2|E| sampled directed edges
  Real lr = 0.025;           // decays linearly to lr * 1e-4
  Real noise_power = 0.75;
  std::uint64_t seed = 0;
};

/// Second-order proximity embeddings: each node has a vertex vector and a
/// context vector; directed edges are sampled proportional to weight and
/// log sigma(c_j . u_i) + sum_n log sigma(-c_n . u_i) is maximized by SGD.
/// Returns the vertex vectors, L2-normalized per row.
inline ContextFeatureTable train_context_features(const CooccurrenceGraph& graph, const FeatureTrainConfig& config,
                                                  std::vector<Real>* loss_trace = nullptr) {
  if (graph.size() == 0 || graph.edge_count() == 0) throw InputError("train_context_features: graph has no edges");
  if (config.dim < 1 || config.negatives == 0) throw InputError("train_context_features: bad dimension or negative count");

  Rng root(config.seed);
  Rng init_rng = root.split(0);
  Matrix vertex = uniform_matrix(static_cast<Index>(graph.size()), config.dim, 0.5 / static_cast<Real>(config.dim), init_rng);
  Matrix context = Matrix::Zero(static_cast<Index>(graph.size()), config.dim);

  const auto edges = graph.edges();
  std::vector<Real> edge_weights;
  edge_weights.reserve(edges.size() * 2);
  for (const auto& e : edges) {
    edge_weights.push_back(e.weight);
    edge_weights.push_back(e.weight);
  }
  const AliasSampler edge_sampler(edge_weights, 0);
  const AliasSampler noise = unigram_pow_sampler(graph.degrees(), config.noise_power, 0);

  const std::size_t per_epoch = edge_weights.size();
  const std::size_t total = per_epoch * config.epochs;
  Vector err(config.dim);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = root.split(1000 + epoch);
    Real epoch_loss = 0;
    for (std::size_t k = 0; k < per_epoch; ++k, ++step) {
      const Real lr = std::max(config.lr * 1e-4, config.lr * (1 - static_cast<Real>(step) / static_cast<Real>(total)));
      const std::size_t slot = edge_sampler.sample(rng);
      const Edge& e = edges[slot / 2];
      const TermId src = (slot % 2 == 0) ? e.a : e.b;
      const TermId dst = (slot % 2 == 0) ? e.b : e.a;
      err.setZero();
      for (std::size_t d = 0; d <= config.negatives; ++d) {
        TermId target = dst;
        Real label = 1;
        if (d > 0) {
          target = static_cast<TermId>(noise.sample(rng));
          if (target == dst) continue;
          label = 0;
        }
        const Real score = vertex.row(src).dot(context.row(target));
        epoch_loss -= label > 0 ? log_sigmoid(score) : log_sigmoid(-score);
        const Real g = (label - sigmoid(score)) * lr;
        err += g * context.row(target).transpose();
        context.row(target) += g * vertex.row(src);
      }
      vertex.row(src) += err.transpose();
    }
    if (!std::isfinite(epoch_loss)) throw Error("context features diverged at epoch " + std::to_string(epoch));
    if (loss_trace != nullptr) loss_trace->push_back(epoch_loss / static_cast<Real>(per_epoch));
  }

  for (Index i = 0; i < vertex.rows(); ++i) {
    const Real n = vertex.row(i).norm();
    if (n > 0) vertex.row(i) /= n;
  }
  return {std::move(vertex)};
}

}  // namespace surfcon
