#pragma once

// Context semantic vectors from predicted contexts. Dynamic matching weighs
// each of q's contexts by how well it matches c's context set (and vice
// versa); the context score is the bilinear form v_q W_b v_c^T.

#include <string>
#include <utility>
#include <vector>

#include "surfcon/error.hpp"
#include "surfcon/numerics.hpp"

namespace surfcon {

enum class Pooling { Mean, Max };

struct MatcherParams {
  Matrix W_m;  // matching kernel
  Matrix W_b;  // context score

  /// W_m = 0.1 I, W_b = I.
  static MatcherParams initial(Index dim) {
    return {Matrix::Identity(dim, dim) * 0.1, Matrix::Identity(dim, dim)};
  }

  Index dim() const { return W_m.rows(); }

  std::vector<BlockRef> blocks() { return {{"match.W_m", &W_m}, {"match.W_b", &W_b}}; }
  std::vector<ConstBlockRef> blocks() const { return {{"match.W_m", &W_m}, {"match.W_b", &W_b}}; }
};

struct MatcherGrads {
  Matrix W_m;
  Matrix W_b;

  MatcherGrads() = default;
  explicit MatcherGrads(const MatcherParams& p) : W_m(Matrix::Zero(p.dim(), p.dim())), W_b(Matrix::Zero(p.dim(), p.dim())) {}

  void set_zero() {
    W_m.setZero();
    W_b.setZero();
  }
};

/// Feature vectors of a term's predicted contexts, one row each.
struct ContextSet {
  std::string owner;
  Matrix vectors;

  Index size() const { return vectors.rows(); }
};

struct MatchResult {
  Vector alpha_q;
  Vector alpha_c;
  Vector v_q;
  Vector v_c;
  Real score = 0;
};

inline void require_non_empty(const ContextSet& phi, const char* what) {
  if (phi.size() == 0) throw InputError(std::string(what) + ": empty context set");
}

inline Vector static_vector(const ContextSet& phi) {
  require_non_empty(phi, "static_vector");
  return phi.vectors.colwise().mean().transpose();
}

/// g(x, y) = tanh(x W_m y^T).
inline Real pair_kernel(const Vector& x, const Vector& y, const MatcherParams& params) {
  return std::tanh(bilinear(x, params.W_m, y));
}

inline Real pool(const Eigen::Ref<const Vector>& values, Pooling pooling) {
  return pooling == Pooling::Mean ? values.mean() : values.maxCoeff();
}

/// Pooled kernel of `v` against every vector of `other`.
inline Real match_weight(const Vector& v, const ContextSet& other, const MatcherParams& params, Pooling pooling = Pooling::Mean) {
  require_non_empty(other, "match_weight");
  if (v.size() != params.dim() || other.vectors.cols() != params.dim()) throw InputError("match_weight: dimension mismatch");
  const Vector kernel = (other.vectors * (params.W_m.transpose() * v)).array().tanh().matrix();
  return pool(kernel, pooling);
}

inline Vector attention_weights(const ContextSet& phi, const ContextSet& other, const MatcherParams& params,
                                Pooling pooling = Pooling::Mean) {
  require_non_empty(phi, "attention_weights");
  require_non_empty(other, "attention_weights");
  Vector match(phi.size());
  for (Index i = 0; i < phi.size(); ++i) match[i] = match_weight(phi.vectors.row(i).transpose(), other, params, pooling);
  return softmax(match);
}

inline Real context_score(const Vector& v_q, const Vector& v_c, const MatcherParams& params) { return bilinear(v_q, params.W_b, v_c); }

inline MatchResult dynamic_vectors(const ContextSet& phi_q, const ContextSet& phi_c, const MatcherParams& params,
                                   Pooling pooling = Pooling::Mean) {
  require_non_empty(phi_q, "dynamic_vectors");
  require_non_empty(phi_c, "dynamic_vectors");
  MatchResult r;
  r.alpha_q = attention_weights(phi_q, phi_c, params, pooling);
  r.alpha_c = attention_weights(phi_c, phi_q, params, pooling);
  r.v_q = phi_q.vectors.transpose() * r.alpha_q;
  r.v_c = phi_c.vectors.transpose() * r.alpha_c;
  r.score = context_score(r.v_q, r.v_c, params);
  return r;
}

inline MatchResult static_match(const ContextSet& phi_q, const ContextSet& phi_c, const MatcherParams& params) {
  MatchResult r;
  r.alpha_q = Vector::Constant(phi_q.size(), 1.0 / static_cast<Real>(phi_q.size()));
  r.alpha_c = Vector::Constant(phi_c.size(), 1.0 / static_cast<Real>(phi_c.size()));
  r.v_q = static_vector(phi_q);
  r.v_c = static_vector(phi_c);
  r.score = context_score(r.v_q, r.v_c, params);
  return r;
}

/// Matches one query context set against many candidates, caching Q W_m and
/// Q W_m^T, and accumulating W_m gradients so the d x d products happen once
/// per query instead of once per candidate.
class QueryMatcher {
 public:
  struct Forward {
    Matrix kernel_q;  // Kq x Kc, tanh(q_i W c_j)
    Matrix kernel_c;  // Kc x Kq, tanh(c_j W q_i)
    MatchResult result;
  };

  QueryMatcher(const Matrix& query_contexts, const MatcherParams& params, Pooling pooling, bool dynamic = true)
      : q_(query_contexts), params_(params), pooling_(pooling), dynamic_(dynamic) {
    if (q_.rows() == 0) throw InputError("QueryMatcher: empty query context set");
    if (q_.cols() != params.dim()) throw InputError("QueryMatcher: dimension mismatch");
    if (dynamic_) {
      qw_ = q_ * params.W_m;
      qwt_ = q_ * params.W_m.transpose();
    }
  }

  Forward forward(const Matrix& c) const {
    if (c.rows() == 0) throw InputError("QueryMatcher: empty candidate context set");
    Forward f;
    MatchResult& r = f.result;
    if (!dynamic_) {
      r.alpha_q = Vector::Constant(q_.rows(), 1.0 / static_cast<Real>(q_.rows()));
      r.alpha_c = Vector::Constant(c.rows(), 1.0 / static_cast<Real>(c.rows()));
    } else {
      f.kernel_q = (qw_ * c.transpose()).array().tanh().matrix();
      f.kernel_c = (c * qwt_.transpose()).array().tanh().matrix();
      r.alpha_q = softmax(pooled(f.kernel_q));
      r.alpha_c = softmax(pooled(f.kernel_c));
    }
    r.v_q = q_.transpose() * r.alpha_q;
    r.v_c = c.transpose() * r.alpha_c;
    r.score = context_score(r.v_q, r.v_c, params_);
    return f;
  }

  /// Accumulates d_score * d(score)/d(W_m, W_b). Call finish() once afterwards.
  void backward(const Matrix& c, const Forward& f, Real d_score, MatcherGrads& grads) {
    const MatchResult& r = f.result;
    grads.W_b.noalias() += d_score * r.v_q * r.v_c.transpose();
    if (!dynamic_) return;
    const Vector d_vq = d_score * (params_.W_b * r.v_c);
    const Vector d_vc = d_score * (params_.W_b.transpose() * r.v_q);
    const Vector d_match_q = softmax_backward(r.alpha_q, q_ * d_vq);
    const Vector d_match_c = softmax_backward(r.alpha_c, c * d_vc);
    const Matrix d_pre_q = pooled_backward(f.kernel_q, d_match_q);  // Kq x Kc
    const Matrix d_pre_c = pooled_backward(f.kernel_c, d_match_c);  // Kc x Kq
    if (acc_q_.size() == 0) {
      acc_q_ = Matrix::Zero(q_.rows(), q_.cols());
      acc_c_ = Matrix::Zero(q_.cols(), q_.rows());
    }
    // dS = d_pre_q: dW += Q^T dS C. dT = d_pre_c: dW += C^T dT Q.
    acc_q_.noalias() += d_pre_q * c;
    acc_c_.noalias() += c.transpose() * d_pre_c;
  }

  void finish(MatcherGrads& grads) {
    if (acc_q_.size() == 0) return;
    grads.W_m.noalias() += q_.transpose() * acc_q_;
    grads.W_m.noalias() += acc_c_ * q_;
    acc_q_.resize(0, 0);
    acc_c_.resize(0, 0);
  }

 private:
  Vector pooled(const Matrix& kernel) const {
    Vector m(kernel.rows());
    for (Index i = 0; i < kernel.rows(); ++i) m[i] = pool(kernel.row(i).transpose(), pooling_);
    return m;
  }

  /// dL/d(pre-activation) given dL/d(pooled match) per row.
  Matrix pooled_backward(const Matrix& kernel, const Vector& d_match) const {
    Matrix d = Matrix::Zero(kernel.rows(), kernel.cols());
    for (Index i = 0; i < kernel.rows(); ++i) {
      if (pooling_ == Pooling::Mean) {
        d.row(i).setConstant(d_match[i] / static_cast<Real>(kernel.cols()));
      } else {
        Index arg = 0;
        kernel.row(i).maxCoeff(&arg);
        d(i, arg) = d_match[i];
      }
    }
    return (d.array() * (1 - kernel.array().square())).matrix();
  }

  const Matrix& q_;
  const MatcherParams& params_;
  Pooling pooling_;
  bool dynamic_;
  Matrix qw_;
  Matrix qwt_;
  Matrix acc_q_;
  Matrix acc_c_;
};

}  // namespace surfcon
