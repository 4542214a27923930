#pragma once

// Dense vectors/matrices, stable nonlinearities, seeded sampling, Adam and a
// finite-difference gradient checker. Storage is backed by Eigen.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "surfcon/error.hpp"

namespace surfcon {

using Real = double;
using Index = Eigen::Index;
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().array().isFinite().all();
}

template <typename Derived>
void require_finite(const std::string& name, const Eigen::DenseBase<Derived>& m) {
  if (!all_finite(m)) throw Error("non-finite values in " + name);
}

// ---------------------------------------------------------------------------
// Random numbers

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded generator. Derived streams come from split(), never from a global.
/// Only the raw 64-bit engine output is used so draws are identical across
/// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(splitmix64(seed)) {}

  /// Independent stream keyed by (seed, stream).
  Rng split(std::uint64_t stream) const { return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x632be59bd9b4e019ULL))); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw Error("Rng::below(0)");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Nonlinearities and similarity kernels

inline Real log_sum_exp(const Vector& logits) {
  if (logits.size() == 0) throw Error("log_sum_exp of empty vector");
  const Real top = logits.maxCoeff();
  return top + std::log((logits.array() - top).exp().sum());
}

inline Vector softmax(const Vector& logits) {
  if (logits.size() == 0) throw Error("softmax of empty vector");
  if (logits.hasNaN()) throw Error("softmax input contains NaN");
  const Real top = logits.maxCoeff();
  Vector out = (logits.array() - top).exp().matrix();
  out /= out.sum();
  return out;
}

/// Vector-Jacobian product of softmax: given p = softmax(z) and dL/dp, returns dL/dz.
inline Vector softmax_backward(const Vector& probs, const Vector& d_probs) {
  return (probs.array() * (d_probs.array() - probs.dot(d_probs))).matrix();
}

inline Real sigmoid(Real x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const Real e = std::exp(x);
  return e / (1.0 + e);
}

/// log(sigmoid(x)) without overflow for large |x|.
inline Real log_sigmoid(Real x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

/// Cosine similarity; 0 when either vector has zero norm.
inline Real cosine(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw Error("cosine: dimension mismatch");
  const Real nx = x.norm();
  const Real ny = y.norm();
  if (nx == 0 || ny == 0) return 0;
  return x.dot(y) / (nx * ny);
}

/// Accumulates g * d cos(x,y)/dx into dx and g * d cos/dy into dy.
inline void cosine_backward(const Vector& x, const Vector& y, Real g, Vector& dx, Vector& dy) {
  const Real nx = x.norm();
  const Real ny = y.norm();
  if (nx == 0 || ny == 0) return;
  const Real c = x.dot(y) / (nx * ny);
  dx += g * (y / (nx * ny) - c * x / (nx * nx));
  dy += g * (x / (nx * ny) - c * y / (ny * ny));
}

/// x W y^T for row vectors x, y (no nonlinearity).
inline Real bilinear(const Vector& x, const Matrix& w, const Vector& y) {
  if (w.rows() != x.size() || w.cols() != y.size()) throw Error("bilinear: dimension mismatch");
  return x.dot(w * y);
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  Real lr = 1e-3;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
};

/// Moments for one parameter block.
struct AdamState {
  AdamConfig config;
  std::string name;
  std::int64_t step = 0;
  Matrix m;
  Matrix v;

  AdamState() = default;
  AdamState(AdamConfig cfg, std::string block_name, Index rows, Index cols)
      : config(cfg), name(std::move(block_name)), m(Matrix::Zero(rows, cols)), v(Matrix::Zero(rows, cols)) {}
};

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(Matrix& params, const Matrix& grads, AdamState& state) {
  if (params.rows() != grads.rows() || params.cols() != grads.cols() || state.m.rows() != params.rows() ||
      state.m.cols() != params.cols()) {
    throw Error("adam_step: shape mismatch for block " + state.name);
  }
  if (!all_finite(grads)) throw Error("adam_step: non-finite gradient in block " + state.name);
  const AdamConfig& c = state.config;
  ++state.step;
  state.m = c.beta1 * state.m + (1 - c.beta1) * grads;
  state.v = c.beta2 * state.v + (1 - c.beta2) * grads.cwiseProduct(grads);
  const Real bc1 = 1 - std::pow(c.beta1, static_cast<Real>(state.step));
  const Real bc2 = 1 - std::pow(c.beta2, static_cast<Real>(state.step));
  params.array() -= c.lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + c.eps);
}

/// Named block view used by optimizers and checkpoints.
struct BlockRef {
  std::string name;
  Matrix* value;
};

struct ConstBlockRef {
  std::string name;
  const Matrix* value;
};

/// Adam over a fixed list of named blocks.
class Adam {
 public:
  Adam(AdamConfig config, const std::vector<BlockRef>& blocks) {
    for (const auto& b : blocks) states_.emplace_back(config, b.name, b.value->rows(), b.value->cols());
  }

  void step(const std::vector<BlockRef>& params, const std::vector<const Matrix*>& grads) {
    if (params.size() != states_.size() || grads.size() != states_.size()) throw Error("Adam::step: block count mismatch");
    for (std::size_t i = 0; i < states_.size(); ++i) adam_step(*params[i].value, *grads[i], states_[i]);
  }

 private:
  std::vector<AdamState> states_;
};

// ---------------------------------------------------------------------------
// Gradient checking

/// Max relative error between `analytic` and central differences of `loss`
/// around `params`. Relative error uses max(|a|, |n|, 1e-8) as denominator.
/// With max_coords > 0 only a seeded random subset of coordinates is probed.
inline Real grad_check(const std::function<Real(const Vector&)>& loss, const Vector& params, const Vector& analytic, Real h,
                       std::size_t max_coords = 0, std::uint64_t seed = 0) {
  if (h <= 0) throw Error("grad_check: step must be positive");
  if (params.size() != analytic.size()) throw Error("grad_check: analytic gradient size mismatch");
  if (loss(params) != loss(params)) throw Error("grad_check: loss function is not deterministic");

  std::vector<Index> coords(static_cast<std::size_t>(params.size()));
  for (Index i = 0; i < params.size(); ++i) coords[static_cast<std::size_t>(i)] = i;
  if (max_coords > 0 && coords.size() > max_coords) {
    Rng rng(seed);
    rng.shuffle(coords);
    coords.resize(max_coords);
  }

  Real worst = 0;
  Vector probe = params;
  for (Index i : coords) {
    const Real saved = probe[i];
    probe[i] = saved + h;
    const Real up = loss(probe);
    probe[i] = saved - h;
    const Real down = loss(probe);
    probe[i] = saved;
    const Real numeric = (up - down) / (2 * h);
    const Real a = analytic[i];
    const Real denom = std::max({std::abs(a), std::abs(numeric), Real(1e-8)});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Alias sampling

/// Walker/Vose alias table: O(1) draws from a fixed discrete distribution.
class AliasSampler {
 public:
  AliasSampler() = default;

  AliasSampler(const std::vector<Real>& weights, std::uint64_t seed) : rng_(seed) {
    const std::size_t n = weights.size();
    if (n == 0) throw Error("AliasSampler: empty support");
    Real total = 0;
    for (Real w : weights) {
      if (!(w >= 0) || !std::isfinite(w)) throw Error("AliasSampler: weights must be finite and non-negative");
      total += w;
    }
    if (total <= 0) throw Error("AliasSampler: weights sum to zero");

    probs_.resize(n);
    for (std::size_t i = 0; i < n; ++i) probs_[i] = weights[i] / total;
    accept_.assign(n, 0);
    alias_.assign(n, 0);

    std::vector<Real> scaled(n);
    std::vector<std::size_t> small;
    std::vector<std::size_t> large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = probs_[i] * static_cast<Real>(n);
      (scaled[i] < 1 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const std::size_t s = small.back();
      small.pop_back();
      const std::size_t l = large.back();
      accept_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1;
      if (scaled[l] < 1) {
        large.pop_back();
        small.push_back(l);
      }
    }
    // Leftovers are 1 up to rounding.
    for (std::size_t i : large) { accept_[i] = 1; alias_[i] = i; }
    for (std::size_t i : small) { accept_[i] = 1; alias_[i] = i; }
  }

  std::size_t sample(Rng& rng) const {
    const std::size_t column = static_cast<std::size_t>(rng.below(accept_.size()));
    return rng.uniform() < accept_[column] ? column : alias_[column];
  }

  std::size_t sample() { return sample(rng_); }

  std::size_t size() const { return probs_.size(); }
  const std::vector<Real>& probabilities() const { return probs_; }

 private:
  std::vector<Real> probs_;
  std::vector<Real> accept_;
  std::vector<std::size_t> alias_;
  Rng rng_;
};

/// Noise distribution P(u) proportional to degree(u)^power.
inline AliasSampler unigram_pow_sampler(const std::vector<Real>& degrees, Real power, std::uint64_t seed) {
  std::vector<Real> weights(degrees.size());
  bool any = false;
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    if (degrees[i] < 0) throw Error("unigram_pow_sampler: negative degree");
    weights[i] = degrees[i] > 0 ? std::pow(degrees[i], power) : 0;
    any = any || degrees[i] > 0;
  }
  if (!any) throw Error("unigram_pow_sampler: all degrees are zero");
  return AliasSampler(weights, seed);
}

}  // namespace surfcon
