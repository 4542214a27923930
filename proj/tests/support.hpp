#pragma once

// Independent reference implementations and tiny-instance builders shared by
// the unit tests and the acceptance gate. The oracles are deliberately naive
// and share no code with the library.

#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "surfcon/surfcon.hpp"

namespace oracle {

/// Dense PPMI straight from the count definitions.
inline std::vector<std::vector<double>> dense_ppmi(const std::vector<std::vector<double>>& w) {
  const std::size_t n = w.size();
  double total = 0;
  std::vector<double> row(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      total += w[i][j];
      row[i] += w[i][j];
    }
  }
  std::vector<std::vector<double>> out(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (w[i][j] <= 0) continue;
      const double pij = w[i][j] / total;
      const double pi = row[i] / total;
      const double pj = row[j] / total;
      out[i][j] = std::max(0.0, std::log(pij / (pi * pj)));
    }
  }
  return out;
}

/// Full-matrix Levenshtein distance.
inline std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, sub});
    }
  }
  return d[a.size()][b.size()];
}

inline double edit_similarity(const std::string& a, const std::string& b) {
  const std::size_t m = std::max(a.size(), b.size());
  return m == 0 ? 1.0 : 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(m);
}

/// Textbook AP: precision@k recounted from scratch at every relevant rank k.
inline double average_precision(const std::vector<int>& rel) {
  double sum = 0;
  int m = 0;
  for (std::size_t k = 0; k < rel.size(); ++k) {
    if (!rel[k]) continue;
    ++m;
    int hits = 0;
    for (std::size_t j = 0; j <= k; ++j) hits += rel[j] ? 1 : 0;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return sum / m;
}

inline double kl(const std::vector<std::pair<surfcon::TermId, double>>& target, const surfcon::Vector& p) {
  double out = 0;
  for (const auto& [j, q] : target) out += q * std::log(q / p[j]);
  return out;
}

}  // namespace oracle

namespace testing_support {

using namespace surfcon;

/// Distinct lowercase surfaces of one or two short words.
inline std::vector<std::string> random_surfaces(Rng& rng, std::size_t n) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  while (out.size() < n) {
    std::string s;
    const std::size_t words = 1 + rng.below(2);
    for (std::size_t w = 0; w < words; ++w) {
      if (w) s += ' ';
      const std::size_t len = 2 + rng.below(4);
      for (std::size_t i = 0; i < len; ++i) s += static_cast<char>('a' + rng.below(6));
    }
    if (seen.insert(s).second) out.push_back(s);
  }
  return out;
}

/// Random raw-count graph; every node gets at least one edge.
inline CooccurrenceGraph random_graph(Rng& rng, std::size_t n, double density = 0.4) {
  CooccurrenceGraph g(random_surfaces(rng, n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng.uniform() < density) g.add_edge(static_cast<TermId>(i), static_cast<TermId>(j), static_cast<Real>(1 + rng.below(9)));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (g.degree(static_cast<TermId>(i)) == 0) {
      const auto j = static_cast<TermId>((i + 1 + rng.below(n - 1)) % n);
      g.add_edge(static_cast<TermId>(i), j, static_cast<Real>(1 + rng.below(9)));
    }
  }
  return g;
}

inline void randomize(Matrix& m, Rng& rng, Real scale) {
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
}

/// Small encoder with O(1) weights so gradients are not vanishingly small.
inline SurfaceEncoder tiny_encoder(const std::vector<std::string>& surfaces, Rng& rng, EncoderDims dims = {4, 3, 5}) {
  SurfaceEncoder enc = init_surface_encoder(build_token_vocabs(surfaces, {2, 3}, 1), dims, rng.next());
  randomize(enc.E_ch, rng, 1.0);
  randomize(enc.E_wd, rng, 1.0);
  randomize(enc.W_s, rng, 0.7);
  randomize(enc.b_s, rng, 0.3);
  return enc;
}

/// Complete tiny model over `vocab` with random (untrained) parameters.
inline SurfConModel tiny_model(const std::vector<std::string>& vocab, Rng& rng, std::size_t K, Index feature_dim = 4) {
  SurfConModel m;
  m.vocab = vocab;
  m.build_index();
  m.predictor = init_context_predictor(tiny_encoder(vocab, rng), vocab.size(), rng.next());
  randomize(m.predictor.nu, rng, 1.0);
  m.features.features = Matrix(static_cast<Index>(vocab.size()), feature_dim);
  randomize(m.features.features, rng, 1.0);
  m.encoder = tiny_encoder(vocab, rng);
  m.matcher = MatcherParams::initial(feature_dim);
  randomize(m.matcher.W_m, rng, 0.8);
  randomize(m.matcher.W_b, rng, 0.8);
  m.config.K = K;
  m.config.topn_surface = 3;
  m.config.topn_context = 3;
  m.contexts = materialize_contexts(m.predictor, m.vocab, K);
  return m;
}

/// Central-difference step. Much smaller steps are dominated by rounding on
/// coordinates whose true gradient is near zero.
inline constexpr Real kGradStep = 1e-5;

/// Max grad_check error over all blocks; `loss` must read the blocks live.
inline Real check_blocks(const std::vector<BlockRef>& params, const std::vector<const Matrix*>& grads, const std::function<Real()>& loss,
                         std::size_t max_coords = 0, std::uint64_t seed = 0, Real h = kGradStep) {
  Real worst = 0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    Matrix& p = *params[b].value;
    const Matrix original = p;
    const Vector flat = Eigen::Map<const Vector>(original.data(), original.size());
    const Vector analytic = Eigen::Map<const Vector>(grads[b]->data(), grads[b]->size());
    auto f = [&](const Vector& x) {
      Eigen::Map<Vector>(p.data(), p.size()) = x;
      return loss();
    };
    worst = std::max(worst, grad_check(f, flat, analytic, h, max_coords, seed + b));
    p = original;
  }
  return worst;
}

}  // namespace testing_support
