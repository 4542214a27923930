#pragma once

// Weighted undirected term-term co-occurrence graph plus the count
// transforms applied before training (subsampling, PPMI).

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "surfcon/error.hpp"
#include "surfcon/numerics.hpp"
#include "surfcon/text.hpp"

namespace surfcon {

enum class WeightMode { RawCount, Ppmi };

inline const char* to_string(WeightMode mode) { return mode == WeightMode::Ppmi ? "ppmi" : "raw-count"; }

struct Neighbor {
  TermId id;
  Real weight;
};

struct Edge {
  TermId a;
  TermId b;
  Real weight;
};

class CooccurrenceGraph {
 public:
  CooccurrenceGraph() = default;

  /// `surfaces` are normalized on entry; duplicates are rejected.
  explicit CooccurrenceGraph(const std::vector<std::string>& surfaces, WeightMode mode = WeightMode::RawCount)
      : mode_(mode) {
    surfaces_.reserve(surfaces.size());
    for (const auto& raw : surfaces) {
      std::string s = normalize_surface(raw);
      if (s.empty()) throw InputError("empty term surface at id " + std::to_string(surfaces_.size()));
      if (!index_.emplace(s, static_cast<TermId>(surfaces_.size())).second) {
        throw InputError("duplicate term surface '" + s + "'");
      }
      surfaces_.push_back(std::move(s));
    }
    adjacency_.resize(surfaces_.size());
    strengths_.assign(surfaces_.size(), 0);
  }

  /// Inserts an undirected edge. Zero weights are not stored.
  void add_edge(TermId a, TermId b, Real weight) {
    if (!contains(a) || !contains(b)) {
      throw InputError("edge references unknown term id (" + std::to_string(a) + ", " + std::to_string(b) + ")");
    }
    if (a == b) throw InputError("self-loop on term id " + std::to_string(a));
    if (!std::isfinite(weight) || weight < 0) throw InputError("edge weight must be finite and non-negative");
    if (weight == 0) return;
    insert_half(a, b, weight);
    insert_half(b, a, weight);
    strengths_[static_cast<std::size_t>(a)] += weight;
    strengths_[static_cast<std::size_t>(b)] += weight;
    ++edge_count_;
  }

  std::size_t size() const { return surfaces_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  WeightMode mode() const { return mode_; }
  bool contains(TermId id) const { return id >= 0 && static_cast<std::size_t>(id) < surfaces_.size(); }

  const std::string& surface(TermId id) const { return surfaces_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& surfaces() const { return surfaces_; }

  std::optional<TermId> find(const std::string& surface) const {
    auto it = index_.find(normalize_surface(surface));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Neighbors sorted by ascending id.
  const std::vector<Neighbor>& neighbors(TermId id) const { return adjacency_.at(static_cast<std::size_t>(id)); }

  std::size_t degree(TermId id) const { return neighbors(id).size(); }
  Real strength(TermId id) const { return strengths_.at(static_cast<std::size_t>(id)); }

  Real weight(TermId a, TermId b) const {
    const auto& adj = neighbors(a);
    auto it = std::lower_bound(adj.begin(), adj.end(), b, [](const Neighbor& n, TermId v) { return n.id < v; });
    return (it != adj.end() && it->id == b) ? it->weight : 0;
  }

  std::vector<Real> degrees() const {
    std::vector<Real> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = static_cast<Real>(adjacency_[i].size());
    return out;
  }

  /// Each undirected edge once, as (a < b), in lexicographic order.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(edge_count_);
    for (std::size_t a = 0; a < size(); ++a) {
      for (const auto& n : adjacency_[a]) {
        if (static_cast<TermId>(a) < n.id) out.push_back({static_cast<TermId>(a), n.id, n.weight});
      }
    }
    return out;
  }

  std::vector<Term> terms(const NgramOrders& orders) const {
    std::vector<Term> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(make_term(surfaces_[i], orders, static_cast<TermId>(i)));
    return out;
  }

  /// Recomputes degrees/strengths from adjacency and checks symmetry.
  bool consistent() const {
    std::size_t half_edges = 0;
    for (std::size_t a = 0; a < size(); ++a) {
      Real total = 0;
      for (const auto& n : adjacency_[a]) {
        if (n.id == static_cast<TermId>(a) || n.weight <= 0) return false;
        if (weight(n.id, static_cast<TermId>(a)) != n.weight) return false;
        total += n.weight;
      }
      if (total != strengths_[a]) {
        // Strength is accumulated in edge insertion order; allow for rounding.
        if (std::abs(total - strengths_[a]) > 1e-9 * std::max<Real>(1, std::abs(total))) return false;
      }
      half_edges += adjacency_[a].size();
    }
    return half_edges == 2 * edge_count_;
  }

 private:
  void insert_half(TermId from, TermId to, Real weight) {
    auto& adj = adjacency_[static_cast<std::size_t>(from)];
    auto it = std::lower_bound(adj.begin(), adj.end(), to, [](const Neighbor& n, TermId v) { return n.id < v; });
    if (it != adj.end() && it->id == to) {
      throw InputError("duplicate edge (" + std::to_string(from) + ", " + std::to_string(to) + ")");
    }
    adj.insert(it, Neighbor{to, weight});
  }

  WeightMode mode_ = WeightMode::RawCount;
  std::vector<std::string> surfaces_;
  std::unordered_map<std::string, TermId> index_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::vector<Real> strengths_;
  std::size_t edge_count_ = 0;
};

/// PPMI(i,j) = max(0, ln(p(i,j) / (p(i) p(j)))) with marginals over ordered
/// pairs: D = 2 * sum of edge weights, p(i,j) = w_ij / D, p(i) = strength_i / D.
/// Non-positive values are dropped.
inline CooccurrenceGraph ppmi_transform(const CooccurrenceGraph& graph) {
  if (graph.mode() != WeightMode::RawCount) throw InputError("ppmi_transform: graph is already in ppmi mode");
  if (graph.edge_count() == 0) throw InputError("ppmi_transform: graph has no edges");

  Real total = 0;
  for (std::size_t i = 0; i < graph.size(); ++i) total += graph.strength(static_cast<TermId>(i));

  CooccurrenceGraph out(graph.surfaces(), WeightMode::Ppmi);
  for (const auto& e : graph.edges()) {
    const Real pmi = std::log(e.weight * total / (graph.strength(e.a) * graph.strength(e.b)));
    if (pmi > 0) out.add_edge(e.a, e.b, pmi);
  }
  if (out.edge_count() == 0) warn("ppmi_transform produced an empty graph");
  return out;
}

/// Removal probability used by subsample_common_terms for relative frequency f.
inline Real subsample_drop_probability(Real relative_frequency, Real threshold) {
  if (relative_frequency <= 0) return 0;
  return std::max<Real>(0, 1 - std::sqrt(threshold / relative_frequency));
}

/// Drops node u with probability max(0, 1 - sqrt(t / f_u)), f_u = strength_u / sum of
/// strengths. Survivors keep their relative order and are re-indexed densely.
inline CooccurrenceGraph subsample_common_terms(const CooccurrenceGraph& graph, Real threshold, std::uint64_t seed) {
  if (!(threshold > 0)) throw InputError("subsample threshold must be positive");
  if (graph.mode() != WeightMode::RawCount) throw InputError("subsampling requires a raw-count graph");

  Real total = 0;
  for (std::size_t i = 0; i < graph.size(); ++i) total += graph.strength(static_cast<TermId>(i));

  Rng rng(seed);
  std::vector<TermId> remap(graph.size(), -1);
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const Real f = total > 0 ? graph.strength(static_cast<TermId>(i)) / total : 0;
    const Real drop = subsample_drop_probability(f, threshold);
    // One draw per node keeps the stream aligned regardless of earlier outcomes.
    const Real u = rng.uniform();
    if (u < drop) continue;
    remap[i] = static_cast<TermId>(kept.size());
    kept.push_back(graph.surface(static_cast<TermId>(i)));
  }

  CooccurrenceGraph out(kept, WeightMode::RawCount);
  for (const auto& e : graph.edges()) {
    const TermId a = remap[static_cast<std::size_t>(e.a)];
    const TermId b = remap[static_cast<std::size_t>(e.b)];
    if (a >= 0 && b >= 0) out.add_edge(a, b, e.weight);
  }
  return out;
}

}  // namespace surfcon
