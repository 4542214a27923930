#pragma once

// Bi-level surface encoder: mean of unique character n-gram embeddings and
// mean of word embeddings, concatenated (char first), projected, tanh.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "surfcon/error.hpp"
#include "surfcon/numerics.hpp"
#include "surfcon/text.hpp"

namespace surfcon {

/// Frozen token -> row mapping.
class TokenVocab {
 public:
  TokenVocab() = default;
  explicit TokenVocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], static_cast<Index>(i)).second) throw InputError("duplicate token '" + tokens_[i] + "'");
    }
  }

  std::optional<Index> find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const TokenVocab& a, const TokenVocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, Index> index_;
};

struct TokenVocabs {
  TokenVocab ngrams;
  TokenVocab words;
  NgramOrders orders;
};

namespace detail {

inline TokenVocab frequency_vocab(const std::map<std::string, std::size_t>& counts, std::size_t min_count) {
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, n] : counts) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(std::move(tok));
  return TokenVocab(std::move(tokens));
}

}  // namespace detail

/// N-gram and word vocabularies over `surfaces`, ordered by frequency
/// (descending) then lexicographically.
inline TokenVocabs build_token_vocabs(const std::vector<std::string>& surfaces, const NgramOrders& orders, std::size_t min_count) {
  if (surfaces.empty()) throw InputError("build_token_vocabs: empty corpus");
  validate_orders(orders);
  std::map<std::string, std::size_t> ngram_counts;
  std::map<std::string, std::size_t> word_counts;
  for (const auto& s : surfaces) {
    for (const auto& g : char_ngrams(s, orders)) ++ngram_counts[g];
    for (const auto& w : split_words(s)) ++word_counts[w];
  }
  TokenVocabs v{detail::frequency_vocab(ngram_counts, min_count), detail::frequency_vocab(word_counts, min_count), orders};
  if (v.ngrams.size() == 0 || v.words.size() == 0) {
    throw InputError("build_token_vocabs: min_count " + std::to_string(min_count) + " leaves an empty vocabulary");
  }
  return v;
}

struct EncoderDims {
  Index char_dim = 100;
  Index word_dim = 100;
  Index surface_dim = 128;
};

/// Tables and projection of the surface encoder h(.).
struct SurfaceEncoder {
  TokenVocabs vocab;
  Matrix E_ch;  // |ngrams| x char_dim
  Matrix E_wd;  // |words| x word_dim
  Matrix W_s;   // (char_dim + word_dim) x surface_dim
  Matrix b_s;   // 1 x surface_dim

  Index char_dim() const { return E_ch.cols(); }
  Index word_dim() const { return E_wd.cols(); }
  Index surface_dim() const { return W_s.cols(); }

  Term term(const std::string& surface, std::optional<TermId> id = std::nullopt) const {
    return make_term(surface, vocab.orders, id);
  }

  std::vector<BlockRef> blocks(const std::string& prefix) {
    return {{prefix + "E_ch", &E_ch}, {prefix + "E_wd", &E_wd}, {prefix + "W_s", &W_s}, {prefix + "b_s", &b_s}};
  }
  std::vector<ConstBlockRef> blocks(const std::string& prefix) const {
    return {{prefix + "E_ch", &E_ch}, {prefix + "E_wd", &E_wd}, {prefix + "W_s", &W_s}, {prefix + "b_s", &b_s}};
  }
};

inline Matrix uniform_matrix(Index rows, Index cols, Real bound, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

/// Embeddings ~ U(-0.5/dim, 0.5/dim), W_s Xavier-uniform, b_s = 0.
inline SurfaceEncoder init_surface_encoder(TokenVocabs vocab, const EncoderDims& dims, std::uint64_t seed) {
  if (dims.char_dim < 1 || dims.word_dim < 1 || dims.surface_dim < 1) throw InputError("encoder dimensions must be positive");
  Rng rng(seed);
  SurfaceEncoder enc;
  enc.vocab = std::move(vocab);
  enc.E_ch = uniform_matrix(static_cast<Index>(enc.vocab.ngrams.size()), dims.char_dim, 0.5 / static_cast<Real>(dims.char_dim), rng);
  enc.E_wd = uniform_matrix(static_cast<Index>(enc.vocab.words.size()), dims.word_dim, 0.5 / static_cast<Real>(dims.word_dim), rng);
  const Index fan_in = dims.char_dim + dims.word_dim;
  const Real xavier = std::sqrt(6.0 / static_cast<Real>(fan_in + dims.surface_dim));
  enc.W_s = uniform_matrix(fan_in, dims.surface_dim, xavier, rng);
  enc.b_s = Matrix::Zero(1, dims.surface_dim);
  return enc;
}

/// Rows of the unique known n-grams of `term`, ascending.
inline std::vector<Index> known_ngram_rows(const Term& term, const SurfaceEncoder& enc) {
  std::vector<Index> rows;
  for (const auto& g : term.ngrams) {
    if (auto r = enc.vocab.ngrams.find(g)) rows.push_back(*r);
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  return rows;
}

/// Rows of known words in order (repeats kept).
inline std::vector<Index> known_word_rows(const Term& term, const SurfaceEncoder& enc) {
  std::vector<Index> rows;
  for (const auto& w : term.words) {
    if (auto r = enc.vocab.words.find(w)) rows.push_back(*r);
  }
  return rows;
}

inline Vector mean_rows(const Matrix& table, const std::vector<Index>& rows) {
  Vector out = Vector::Zero(table.cols());
  if (rows.empty()) return out;
  for (Index r : rows) out += table.row(r).transpose();
  return out / static_cast<Real>(rows.size());
}

inline Vector encode_char(const Term& term, const SurfaceEncoder& enc) { return mean_rows(enc.E_ch, known_ngram_rows(term, enc)); }

inline Vector encode_word(const Term& term, const SurfaceEncoder& enc) { return mean_rows(enc.E_wd, known_word_rows(term, enc)); }

/// Intermediates kept for backprop through h(.).
struct SurfaceTrace {
  std::vector<Index> ngram_rows;
  std::vector<Index> word_rows;
  Vector input;   // [s_ch, s_wd]
  Vector output;  // s
};

inline Vector encode_surface(const Term& term, const SurfaceEncoder& enc, SurfaceTrace* trace = nullptr) {
  SurfaceTrace local;
  SurfaceTrace& t = trace != nullptr ? *trace : local;
  t.ngram_rows = known_ngram_rows(term, enc);
  t.word_rows = known_word_rows(term, enc);
  t.input.resize(enc.char_dim() + enc.word_dim());
  t.input.head(enc.char_dim()) = mean_rows(enc.E_ch, t.ngram_rows);
  t.input.tail(enc.word_dim()) = mean_rows(enc.E_wd, t.word_rows);
  t.output = (enc.W_s.transpose() * t.input + enc.b_s.row(0).transpose()).array().tanh().matrix();
  return t.output;
}

/// f_s: cosine of the two surface vectors.
inline Real surface_score(const Term& q, const Term& c, const SurfaceEncoder& enc) {
  return cosine(encode_surface(q, enc), encode_surface(c, enc));
}

struct SurfaceEncoderGrads {
  Matrix E_ch;
  Matrix E_wd;
  Matrix W_s;
  Matrix b_s;

  SurfaceEncoderGrads() = default;
  explicit SurfaceEncoderGrads(const SurfaceEncoder& enc)
      : E_ch(Matrix::Zero(enc.E_ch.rows(), enc.E_ch.cols())),
        E_wd(Matrix::Zero(enc.E_wd.rows(), enc.E_wd.cols())),
        W_s(Matrix::Zero(enc.W_s.rows(), enc.W_s.cols())),
        b_s(Matrix::Zero(1, enc.b_s.cols())) {}

  void set_zero() {
    E_ch.setZero();
    E_wd.setZero();
    W_s.setZero();
    b_s.setZero();
  }

  SurfaceEncoderGrads& operator+=(const SurfaceEncoderGrads& o) {
    E_ch += o.E_ch;
    E_wd += o.E_wd;
    W_s += o.W_s;
    b_s += o.b_s;
    return *this;
  }

  SurfaceEncoderGrads& operator*=(Real s) {
    E_ch *= s;
    E_wd *= s;
    W_s *= s;
    b_s *= s;
    return *this;
  }

  std::vector<const Matrix*> list() const { return {&E_ch, &E_wd, &W_s, &b_s}; }
};

/// Accumulates dL/d(params) given dL/ds for one encoded term.
inline void backprop_surface(const SurfaceTrace& trace, const Vector& d_output, const SurfaceEncoder& enc, SurfaceEncoderGrads& grads) {
  const Vector d_pre = (d_output.array() * (1 - trace.output.array().square())).matrix();
  grads.W_s.noalias() += trace.input * d_pre.transpose();
  grads.b_s.row(0) += d_pre.transpose();
  const Vector d_input = enc.W_s * d_pre;
  if (!trace.ngram_rows.empty()) {
    const Vector d_ch = d_input.head(enc.char_dim()) / static_cast<Real>(trace.ngram_rows.size());
    for (Index r : trace.ngram_rows) grads.E_ch.row(r) += d_ch.transpose();
  }
  if (!trace.word_rows.empty()) {
    const Vector d_wd = d_input.tail(enc.word_dim()) / static_cast<Real>(trace.word_rows.size());
    for (Index r : trace.word_rows) grads.E_wd.row(r) += d_wd.transpose();
  }
}

}  // namespace surfcon
