#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace surfcon;
using testing_support::check_blocks;

namespace {

std::vector<BlockRef> predictor_blocks(ContextPredictor& p) {
  auto b = p.encoder.blocks("surf.");
  b.push_back({"ctx.nu", &p.nu});
  return b;
}

std::vector<const Matrix*> grad_list(const ContextGrads& g) {
  auto l = g.encoder.list();
  l.push_back(&g.nu);
  return l;
}

Real mean_kl(const CooccurrenceGraph& g, const ContextPredictor& p) {
  const auto terms = g.terms(p.encoder.vocab.orders);
  Real total = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.degree(static_cast<TermId>(i)) == 0) continue;
    total += oracle::kl(empirical_distribution(g, static_cast<TermId>(i)), context_distribution(terms[i], p));
    ++n;
  }
  return total / static_cast<Real>(n);
}

}  // namespace

// --- surface encoder --------------------------------------------------------

TEST(TokenVocabs, Enumeration) {
  const TokenVocabs v = build_token_vocabs({"ab"}, {2}, 1);
  EXPECT_EQ(v.ngrams.tokens(), (std::vector<std::string>{"#a", "ab", "b#"}));
  EXPECT_EQ(v.words.tokens(), std::vector<std::string>{"ab"});
  EXPECT_THROW(build_token_vocabs({"ab"}, {2}, 5), InputError);
  const std::vector<std::string> s{"vitamin c", "vit c", "ascorbic acid", "c"};
  const TokenVocabs a = build_token_vocabs(s, {2, 3, 4}, 1), b = build_token_vocabs(s, {2, 3, 4}, 1);
  EXPECT_EQ(a.ngrams, b.ngrams);
  EXPECT_EQ(a.words.tokens().front(), "c");  // most frequent first
}

TEST(SurfaceEncoder, MeansOverUniqueKnownTokens) {
  Rng rng(1);
  SurfaceEncoder enc = testing_support::tiny_encoder({"aaa", "vitamin c"}, rng);
  const Term aaa = enc.term("aaa");  // bigrams #a aa aa a#
  Vector want = Vector::Zero(enc.char_dim());
  for (const char* g : {"#a", "aa", "a#"}) want += enc.E_ch.row(*enc.vocab.ngrams.find(g)).transpose();
  for (const char* g : {"#aa", "aaa", "aa#"}) want += enc.E_ch.row(*enc.vocab.ngrams.find(g)).transpose();
  EXPECT_TRUE(encode_char(aaa, enc).isApprox(want / 6.0, 1e-14));

  const Term vc = enc.term("vitamin c");
  const Vector w = (enc.E_wd.row(*enc.vocab.words.find("vitamin")) + enc.E_wd.row(*enc.vocab.words.find("c"))).transpose() / 2.0;
  EXPECT_TRUE(encode_word(vc, enc).isApprox(w, 1e-14));
  EXPECT_EQ(encode_word(enc.term("zzz"), enc), Vector::Zero(enc.word_dim()));
  EXPECT_EQ(encode_char(enc.term("qqq"), enc), Vector::Zero(enc.char_dim()));

  Term shuffled = aaa;
  std::reverse(shuffled.ngrams.begin(), shuffled.ngrams.end());
  EXPECT_EQ(encode_char(shuffled, enc), encode_char(aaa, enc));
}

TEST(SurfaceEncoder, SingletonAndBiasPaths) {
  Rng rng(2);
  SurfaceEncoder enc = testing_support::tiny_encoder({"ab"}, rng);
  Term one = enc.term("ab");
  one.ngrams = {"ab", "zz"};
  EXPECT_EQ(encode_char(one, enc), enc.E_ch.row(*enc.vocab.ngrams.find("ab")).transpose());

  SurfaceEncoder zero = enc;
  zero.E_ch.setZero();
  zero.E_wd.setZero();
  zero.W_s.setZero();
  zero.b_s.setZero();
  EXPECT_EQ(encode_surface(enc.term("ab"), zero), Vector::Zero(enc.surface_dim()));
  EXPECT_EQ(surface_score(enc.term("ab"), enc.term("ab"), zero), 0.0);
  zero.b_s = enc.b_s;
  EXPECT_TRUE(encode_surface(enc.term("ab"), zero).isApprox(enc.b_s.row(0).transpose().array().tanh().matrix()));
}

TEST(SurfaceEncoder, OovScoresAreFiniteAndSymmetric) {
  Rng rng(3);
  const auto surfaces = testing_support::random_surfaces(rng, 20);
  SurfaceEncoder enc = testing_support::tiny_encoder(surfaces, rng);
  const Vector s = encode_surface(enc.term("viatmin c"), enc);
  EXPECT_TRUE(s.allFinite());
  EXPECT_LT(s.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_NEAR(surface_score(enc.term(surfaces[0]), enc.term(surfaces[0]), enc), 1.0, 1e-12);
  for (std::size_t i = 0; i + 1 < surfaces.size(); ++i) {
    EXPECT_EQ(surface_score(enc.term(surfaces[i]), enc.term(surfaces[i + 1]), enc),
              surface_score(enc.term(surfaces[i + 1]), enc.term(surfaces[i]), enc));
  }
}

TEST(SurfaceEncoder, GradientOfCosineScore) {
  Rng rng(4);
  const auto surfaces = testing_support::random_surfaces(rng, 6);
  SurfaceEncoder enc = testing_support::tiny_encoder(surfaces, rng);
  const Term q = enc.term(surfaces[0]), c = enc.term(surfaces[1]);
  auto loss = [&] { return surface_score(q, c, enc); };
  SurfaceTrace tq, tc;
  const Vector sq = encode_surface(q, enc, &tq), sc = encode_surface(c, enc, &tc);
  Vector dq = Vector::Zero(sq.size()), dc = Vector::Zero(sc.size());
  cosine_backward(sq, sc, 1.0, dq, dc);
  SurfaceEncoderGrads g(enc);
  backprop_surface(tq, dq, enc, g);
  backprop_surface(tc, dc, enc, g);
  EXPECT_LT(check_blocks(enc.blocks(""), g.list(), loss), 1e-4);
}

// --- context predictor ------------------------------------------------------

TEST(Context, EmpiricalDistribution) {
  CooccurrenceGraph g({"a", "b", "c", "d"});
  g.add_edge(0, 1, 3);
  g.add_edge(0, 2, 1);
  const auto p = empirical_distribution(g, 0);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0], (std::pair<TermId, Real>{1, 0.75}));
  EXPECT_EQ(p[1], (std::pair<TermId, Real>{2, 0.25}));
  EXPECT_EQ(empirical_distribution(g, 1).front().second, 1.0);
  EXPECT_THROW(empirical_distribution(g, 3), InputError);
}

TEST(Context, DistributionIsValidForAnyString) {
  Rng rng(5);
  const auto vocab = testing_support::random_surfaces(rng, 7);
  ContextPredictor p = init_context_predictor(testing_support::tiny_encoder(vocab, rng), vocab.size(), 3);
  for (const char* s : {"viatmin c", "", "zzzz", "a"}) {
    const Vector d = context_distribution(p.encoder.term(s), p);
    EXPECT_NEAR(d.sum(), 1.0, 1e-9);
    EXPECT_GE(d.minCoeff(), 0.0);
  }
  p.nu.setZero();
  EXPECT_TRUE(context_distribution(p.encoder.term(vocab[0]), p).isApprox(Vector::Constant(7, 1.0 / 7)));
}

TEST(Context, FullSoftmaxTwoNodes) {
  CooccurrenceGraph g({"a", "b"});
  g.add_edge(0, 1, 4);
  Rng rng(6);
  ContextPredictor p = init_context_predictor(testing_support::tiny_encoder(g.surfaces(), rng), 2, 1);
  p.nu.setZero();
  EXPECT_NEAR(full_softmax_loss(g, g.terms({2, 3}), p), 2 * std::log(2.0), 1e-12);
}

TEST(Context, NegativeSamplingAtZero) {
  Rng rng(7);
  const auto vocab = testing_support::random_surfaces(rng, 8);
  ContextPredictor p = init_context_predictor(testing_support::tiny_encoder(vocab, rng), 8, 1);
  p.nu.setZero();
  const Term t = p.encoder.term(vocab[0], 0);
  EXPECT_NEAR(negative_sampling_loss(t, 1, {2, 3, 4, 5, 6}, p), 6 * std::log(2.0), 1e-12);
  EXPECT_THROW(negative_sampling_loss(t, 1, {}, p), InputError);
  // Near-perfect separation drives the loss toward zero.
  const Vector s = encode_surface(t, p.encoder);
  p.nu.row(1) = 1e3 * s.transpose();
  for (TermId n : {2, 3}) p.nu.row(n) = -1e3 * s.transpose();
  EXPECT_LT(negative_sampling_loss(t, 1, {2, 3}, p), 1e-6);
}

TEST(Context, LossGradientsPassGradCheck) {
  Rng rng(8);
  for (int trial = 0; trial < 3; ++trial) {
    const auto g = testing_support::random_graph(rng, 6, 0.5);
    ContextPredictor p = init_context_predictor(testing_support::tiny_encoder(g.surfaces(), rng), g.size(), rng.next());
    testing_support::randomize(p.nu, rng, 1.0);
    const auto terms = g.terms(p.encoder.vocab.orders);

    ContextGrads full(p);
    full_softmax_loss(g, terms, p, &full);
    EXPECT_LT(check_blocks(predictor_blocks(p), grad_list(full), [&] { return full_softmax_loss(g, terms, p); }), 1e-4);

    ContextGrads ns(p);
    const std::vector<TermId> negs{2, 3, 3, 5};
    negative_sampling_loss(terms[0], 1, negs, p, &ns);
    EXPECT_LT(check_blocks(predictor_blocks(p), grad_list(ns), [&] { return negative_sampling_loss(terms[0], 1, negs, p); }), 1e-4);
  }
}

TEST(Context, FullSoftmaxAttainsEntropyBound) {
  Rng rng(9);
  const auto g = testing_support::random_graph(rng, 6, 0.5);
  ContextPredictor p = init_context_predictor(testing_support::tiny_encoder(g.surfaces(), rng), g.size(), 1);
  const auto terms = g.terms(p.encoder.vocab.orders);
  Real entropy = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (const auto& [j, q] : empirical_distribution(g, static_cast<TermId>(i))) entropy -= q * std::log(q);
  }
  EXPECT_GE(full_softmax_loss(g, terms, p), entropy);
}

TEST(Context, TrainingFitsTinyGraph) {
  Rng rng(10);
  const auto g = testing_support::random_graph(rng, 5, 0.6);
  const SurfaceEncoder enc = init_surface_encoder(build_token_vocabs(g.surfaces(), {2, 3}, 1), {16, 16, 16}, 2);
  ContextTrainConfig cfg;
  cfg.epochs = 500;
  cfg.lr = 0.05;
  cfg.seed = 3;
  const auto r = train_context_predictor(g, cfg, enc);
  EXPECT_LT(mean_kl(g, r.predictor), 0.05);
  EXPECT_EQ(r.loss_trace.size(), 500u);
  const auto again = train_context_predictor(g, cfg, enc);
  EXPECT_EQ(again.predictor.nu, r.predictor.nu);
}

TEST(Context, NegativeSamplingRecoversTopContext) {
  Rng rng(11);
  const auto g = testing_support::random_graph(rng, 12, 0.35);
  const SurfaceEncoder enc = init_surface_encoder(build_token_vocabs(g.surfaces(), {2, 3}, 1), {16, 16, 16}, 2);
  const auto terms = g.terms({2, 3});
  ContextTrainConfig cfg;
  cfg.mode = ContextTrainMode::NegativeSampling;
  cfg.epochs = 300;
  cfg.lr = 0.02;
  cfg.seed = 4;
  const auto init = init_context_predictor(enc, g.size(), Rng(cfg.seed).split(0).next());
  const auto r = train_context_predictor(g, cfg, enc);
  EXPECT_LT(full_softmax_loss(g, terms, r.predictor), full_softmax_loss(g, terms, init));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto emp = empirical_distribution(g, static_cast<TermId>(i));
    Real best = 0;
    for (const auto& e : emp) best = std::max(best, e.second);
    const TermId top = predict_top_k(terms[i], 1, r.predictor).entries.front().first;
    for (const auto& e : emp) hits += (e.first == top && e.second == best) ? 1 : 0;
  }
  EXPECT_GE(static_cast<double>(hits), 0.8 * static_cast<double>(g.size()));
}

TEST(Context, TopKTieBreakAndSelfExclusion) {
  Rng rng(12);
  const auto vocab = testing_support::random_surfaces(rng, 6);
  ContextPredictor p = init_context_predictor(testing_support::tiny_encoder(vocab, rng), 6, 1);
  p.nu.setZero();
  EXPECT_EQ(predict_top_k(p.encoder.term("qq"), 3, p).ids(), (std::vector<TermId>{0, 1, 2}));
  EXPECT_EQ(predict_top_k(p.encoder.term(vocab[2], 2), 5, p).ids(), (std::vector<TermId>{0, 1, 3, 4, 5}));
  EXPECT_EQ(predict_top_k(p.encoder.term(vocab[2], 2), 50, p).ids().size(), 5u);
  EXPECT_THROW(predict_top_k(p.encoder.term("qq"), 0, p), InputError);

  // Consistent with the full distribution.
  testing_support::randomize(p.nu, rng, 1.0);
  const Term t = p.encoder.term(vocab[1], 1);
  const Vector d = context_distribution(t, p);
  const auto top = predict_top_k(t, 3, p);
  for (const auto& [id, prob] : top.entries) {
    EXPECT_EQ(prob, d[id]);
    std::size_t larger = 0;
    for (Index j = 0; j < d.size(); ++j) larger += (j != 1 && d[j] > prob) ? 1 : 0;
    EXPECT_LT(larger, 3u);
  }
}

TEST(Context, OovMisspellingSharesPredictedContexts) {
  SynthesisConfig sc;
  sc.concepts = 15;
  sc.hub_count = 24;
  const Corpus c = generate_synthetic_corpus(sc, 2);
  const auto g = ppmi_transform(c.graph);
  const SurfaceEncoder enc = init_surface_encoder(build_token_vocabs(g.surfaces(), {2, 3, 4}, 1), {32, 32, 32}, 3);
  ContextTrainConfig cfg;
  cfg.seed = 5;
  const auto p = train_context_predictor(g, cfg, enc).predictor;

  std::size_t checked = 0;
  for (const auto& [concept_id, members] : c.labels.groups()) {
    for (const auto& oov : members) {
      if (g.find(oov)) continue;
      // Compare against the closest in-vocabulary spelling.
      std::string nearest;
      double best = -1;
      for (const auto& m : members) {
        if (g.find(m) && normalized_edit_similarity(oov, m) > best) {
          best = normalized_edit_similarity(oov, m);
          nearest = m;
        }
      }
      const TermId id = *g.find(nearest);
      std::set<TermId> a, b;
      for (TermId x : predict_top_k(p.encoder.term(oov), 5, p).ids()) {
        if (x != id) a.insert(x);
      }
      for (TermId x : predict_top_k(p.encoder.term(nearest, id), 5, p).ids()) b.insert(x);
      std::size_t shared = 0;
      for (TermId x : a) shared += b.count(x);
      const double jaccard = static_cast<double>(shared) / static_cast<double>(a.size() + b.size() - shared);
      EXPECT_GT(jaccard, 0.5) << oov << " vs " << nearest;
      ++checked;
    }
  }
  EXPECT_EQ(checked, 15u);
}

// --- context features -------------------------------------------------------

TEST(Features, StructurallyEquivalentNodesAlign) {
  // "twin a" and "twin b" share exactly the same neighbours.
  CooccurrenceGraph g({"twin a", "twin b", "h1", "h2", "h3", "x1", "x2", "x3", "x4"});
  for (TermId t : {0, 1}) {
    g.add_edge(t, 2, 5);
    g.add_edge(t, 3, 3);
    g.add_edge(t, 4, 4);
  }
  g.add_edge(5, 6, 5);
  g.add_edge(6, 7, 5);
  g.add_edge(7, 8, 5);
  g.add_edge(5, 8, 2);
  g.add_edge(4, 5, 1);
  FeatureTrainConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 400;
  cfg.seed = 7;
  const auto f = train_context_features(g, cfg);
  EXPECT_EQ(f.features.rows(), 9);
  EXPECT_EQ(f.features.cols(), 16);
  EXPECT_GT(cosine(f.features.row(0).transpose(), f.features.row(1).transpose()), 0.9);
  EXPECT_EQ(train_context_features(g, cfg).features, f.features);
  cfg.dim = 0;
  EXPECT_THROW(train_context_features(g, cfg), InputError);
}
