#pragma once

// Subcommand implementations. Every artifact directory carries a manifest with
// the resolved config, the seed and content hashes of the files it was built
// from. Layout under out_dir:
//   graph/     vocab.tsv edges.tsv labels.tsv splits.json stats.tsv
//   context/   tensors.bin ngram_vocab.json word_vocab.json contexts.tsv trace.tsv
//   features/  tensors.bin trace.tsv
//   ranker/    self-contained inference bundle (no edges needed)
//   eval/      report-<protocol>-<split>.json / .tsv
//   sweep/     sweep-<param>.tsv

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surfcon/bundle.hpp"
#include "surfcon/config.hpp"
#include "surfcon/corpus.hpp"
#include "surfcon/evaluation.hpp"
#include "surfcon/graph.hpp"
#include "surfcon/ranker_training.hpp"
#include "surfcon/splits.hpp"
#include "surfcon/synthetic.hpp"

namespace surfcon {

namespace pipeline {

inline fs::path out_dir(const RunConfig& c) { return c.str("out_dir"); }

/// Per-phase seed derived from the master seed.
inline std::uint64_t phase_seed(const RunConfig& c, std::uint64_t phase) { return Rng(c.u64("seed")).split(phase).next(); }

inline nlohmann::json base_manifest(const RunConfig& c, const std::string& phase) {
  return {{"phase", phase}, {"seed", c.u64("seed")}, {"config", c.echo()}, {"inputs", nlohmann::json::object()}};
}

inline void record_input(nlohmann::json& manifest, const fs::path& root, const fs::path& file) {
  manifest["inputs"][fs::relative(file, root).generic_string()] = file_hash(file);
}

/// Throws naming the phase whose artifacts are missing.
inline void require_phase(const fs::path& dir, const std::string& phase, const std::string& command) {
  if (!fs::exists(dir / "manifest.json")) {
    throw InputError("missing " + phase + " artifacts in '" + dir.string() + "'; run '" + command + "' first");
  }
}

inline std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// Typed views of the config

inline SynthesisConfig synthesis_config(const RunConfig& c) {
  SynthesisConfig s;
  s.concepts = c.size("concepts");
  s.terms_per_concept = c.size("terms_per_concept");
  s.oov_terms_per_concept = c.size("oov_terms_per_concept");
  s.base_words = c.size("base_words");
  s.variant_rate = c.real("variant_rate");
  s.alias_rate = c.real("alias_rate");
  s.hub_count = c.size("hub_count");
  s.hubs_per_concept = c.size("hubs_per_concept");
  s.edge_noise_rate = c.real("edge_noise_rate");
  s.min_count = static_cast<int>(c.size("min_count"));
  s.max_count = static_cast<int>(c.size("max_count"));
  return s;
}

inline ContextTrainConfig context_config(const RunConfig& c) {
  ContextTrainConfig t;
  const std::string& mode = c.str("context_mode");
  if (mode == "full-softmax") {
    t.mode = ContextTrainMode::FullSoftmax;
  } else if (mode == "negative-sampling") {
    t.mode = ContextTrainMode::NegativeSampling;
  } else {
    throw InputError("context_mode must be full-softmax or negative-sampling, got '" + mode + "'");
  }
  t.negatives = c.size("context_negatives");
  t.epochs = c.size("context_epochs");
  t.lr = c.real("context_lr");
  t.batch = c.size("context_batch");
  t.noise_power = c.real("noise_power");
  t.seed = phase_seed(c, 2);
  return t;
}

inline FeatureTrainConfig feature_config(const RunConfig& c) {
  FeatureTrainConfig f;
  f.dim = static_cast<Index>(c.size("feature_dim"));
  f.negatives = c.size("feature_negatives");
  f.epochs = c.size("feature_epochs");
  f.lr = c.real("feature_lr");
  f.noise_power = c.real("noise_power");
  f.seed = phase_seed(c, 3);
  return f;
}

inline RankerConfig ranker_config(const RunConfig& c) {
  RankerConfig r;
  r.gamma = c.real("gamma");
  r.K = c.size("K");
  r.list_negatives = c.size("list_negatives");
  r.topn_surface = c.size("topn_surface");
  r.topn_context = c.size("topn_context");
  r.fine_tune_encoder = c.flag("fine_tune_encoder");
  const std::string& matching = c.str("matching");
  if (matching != "dynamic" && matching != "static") throw InputError("matching must be dynamic or static");
  r.matching = matching == "dynamic" ? Matching::Dynamic : Matching::Static;
  const std::string& pooling = c.str("pooling");
  if (pooling != "mean" && pooling != "max") throw InputError("pooling must be mean or max");
  r.pooling = pooling == "mean" ? Pooling::Mean : Pooling::Max;
  r.epochs = c.size("ranker_epochs");
  r.lr = c.real("ranker_lr");
  r.batch = c.size("ranker_batch");
  r.patience = c.size("patience");
  r.seed = phase_seed(c, 4);
  r.threads = std::max<std::size_t>(1, c.size("threads"));
  r.validate();
  return r;
}

inline nlohmann::json to_json(const RankerConfig& r) {
  return {{"gamma", r.gamma},
          {"K", r.K},
          {"list_negatives", r.list_negatives},
          {"topn_surface", r.topn_surface},
          {"topn_context", r.topn_context},
          {"fine_tune_encoder", r.fine_tune_encoder},
          {"matching", r.matching == Matching::Dynamic ? "dynamic" : "static"},
          {"pooling", r.pooling == Pooling::Mean ? "mean" : "max"},
          {"epochs", r.epochs},
          {"lr", r.lr},
          {"batch", r.batch},
          {"patience", r.patience},
          {"seed", r.seed}};
}

inline RankerConfig ranker_config_from_json(const nlohmann::json& j) {
  RankerConfig r;
  r.gamma = j.at("gamma");
  r.K = j.at("K");
  r.list_negatives = j.at("list_negatives");
  r.topn_surface = j.at("topn_surface");
  r.topn_context = j.at("topn_context");
  r.fine_tune_encoder = j.at("fine_tune_encoder");
  r.matching = j.at("matching") == "dynamic" ? Matching::Dynamic : Matching::Static;
  r.pooling = j.at("pooling") == "mean" ? Pooling::Mean : Pooling::Max;
  r.epochs = j.at("epochs");
  r.lr = j.at("lr");
  r.batch = j.at("batch");
  r.patience = j.at("patience");
  r.seed = j.at("seed");
  return r;
}

// ---------------------------------------------------------------------------
// Artifact loading

struct PreparedGraph {
  CooccurrenceGraph graph;
  DatasetSplit splits;
};

inline PreparedGraph load_prepared(const fs::path& root) {
  const fs::path dir = root / "graph";
  require_phase(dir, "prepare", "prepare");
  CooccurrenceGraph g(read_vocab(dir / "vocab.tsv"));
  read_edges(dir / "edges.tsv", g);
  return {std::move(g), read_splits(dir / "splits.json")};
}

inline ContextPredictor load_predictor(const fs::path& dir, TensorMap& t, TokenVocabs vocabs) {
  SurfaceEncoder enc;
  enc.vocab = std::move(vocabs);
  enc.E_ch = take_block(t, "ctx.surf.E_ch", dir);
  enc.E_wd = take_block(t, "ctx.surf.E_wd", dir);
  enc.W_s = take_block(t, "ctx.surf.W_s", dir);
  enc.b_s = take_block(t, "ctx.surf.b_s", dir);
  return {std::move(enc), take_block(t, "ctx.nu", dir)};
}

/// Loads the inference bundle written by train-ranker.
inline SurfConModel load_model(const fs::path& root) {
  const fs::path dir = root / "ranker";
  require_phase(dir, "ranker", "train-ranker");
  const auto manifest = read_manifest(dir);
  SurfConModel m;
  m.vocab = read_vocab(dir / "vocab.tsv");
  m.build_index();
  TokenVocabs vocabs = read_token_vocabs(dir);
  TensorMap t = read_tensors(dir / "tensors.bin");
  m.predictor = load_predictor(dir, t, vocabs);
  m.features.features = take_block(t, "feat.table", dir);
  m.encoder.vocab = vocabs;
  m.encoder.E_ch = take_block(t, "surf.E_ch", dir);
  m.encoder.E_wd = take_block(t, "surf.E_wd", dir);
  m.encoder.W_s = take_block(t, "surf.W_s", dir);
  m.encoder.b_s = take_block(t, "surf.b_s", dir);
  m.matcher.W_m = take_block(t, "match.W_m", dir);
  m.matcher.W_b = take_block(t, "match.W_b", dir);
  m.config = ranker_config_from_json(manifest.at("ranker"));
  m.contexts = read_contexts(dir / "contexts.tsv", m.vocab);
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Commands

inline void cmd_gen_synthetic(const RunConfig& c, std::ostream& out) {
  const fs::path dir = out_dir(c);
  const Corpus corpus = generate_synthetic_corpus(synthesis_config(c), c.u64("seed"));
  write_corpus(dir, corpus.graph, corpus.labels);
  nlohmann::json manifest = base_manifest(c, "gen-synthetic");
  for (const char* f : {"vocab.tsv", "edges.tsv", "labels.tsv"}) manifest["outputs"][f] = file_hash(dir / f);
  write_manifest(dir, manifest);
  out << "wrote " << corpus.graph.size() << " terms, " << corpus.graph.edge_count() << " edges, " << corpus.labels.groups().size()
      << " concepts to " << dir.string() << '\n';
}

inline void cmd_prepare(const RunConfig& c, std::ostream& out) {
  for (const char* key : {"vocab_path", "edges_path", "labels_path"}) {
    if (c.str(key).empty()) throw InputError("--" + kebab(key) + " is required");
  }
  const fs::path vocab = c.str("vocab_path"), edges = c.str("edges_path"), labels = c.str("labels_path");
  Corpus corpus = load_corpus(vocab, edges, labels);
  const std::size_t raw_nodes = corpus.graph.size(), raw_edges = corpus.graph.edge_count();

  CooccurrenceGraph g = std::move(corpus.graph);
  if (c.flag("subsample")) g = subsample_common_terms(g, c.real("subsample_t"), phase_seed(c, 1));
  if (c.flag("ppmi")) g = ppmi_transform(g);

  SplitConfig sc;
  sc.train_fraction = c.real("train_fraction");
  sc.dev_fraction = c.real("dev_fraction");
  sc.test_fraction = c.real("test_fraction");
  sc.dissim_threshold = c.real("dissim_threshold");
  sc.oov_count = c.size("oov_count");
  sc.seed = phase_seed(c, 0);
  const DatasetSplit splits = build_splits(g, corpus.labels, sc);

  const fs::path dir = out_dir(c) / "graph";
  fs::create_directories(dir);
  write_corpus(dir, g, corpus.labels);
  write_splits(dir / "splits.json", splits);

  std::vector<std::vector<std::string>> stats = {
      {"input_nodes", std::to_string(raw_nodes)},
      {"input_edges", std::to_string(raw_edges)},
      {"nodes", std::to_string(g.size())},
      {"edges", std::to_string(g.edge_count())},
      {"weights", to_string(g.mode())},
      {"concepts", std::to_string(corpus.labels.groups().size())},
      {"train", std::to_string(splits.train.size())},
      {"dev", std::to_string(splits.dev.size())},
      {"inv-test", std::to_string(splits.inv_test.size())},
      {"inv-test-dissim", std::to_string(splits.inv_test_dissim.size())},
      {"oov-test", std::to_string(splits.oov_test.size())},
      {"oov-test-dissim", std::to_string(splits.oov_test_dissim.size())},
  };
  write_trace(dir / "stats.tsv", {"statistic", "value"}, stats);

  nlohmann::json manifest = base_manifest(c, "prepare");
  manifest["inputs"] = {{"vocab", file_hash(vocab)}, {"edges", file_hash(edges)}, {"labels", file_hash(labels)}};
  manifest["weights"] = to_string(g.mode());
  write_manifest(dir, manifest);

  for (const auto& row : stats) out << std::left << std::setw(18) << row[0] << row[1] << '\n';
}

inline void cmd_train_context(const RunConfig& c, std::ostream& out) {
  const fs::path root = out_dir(c);
  const PreparedGraph pg = load_prepared(root);
  const NgramOrders orders = c.ints("ngram_orders");
  validate_orders(orders);
  TokenVocabs vocabs = build_token_vocabs(pg.graph.surfaces(), orders, c.size("min_token_count"));
  const EncoderDims dims{static_cast<Index>(c.size("char_dim")), static_cast<Index>(c.size("word_dim")),
                         static_cast<Index>(c.size("surface_dim"))};
  SurfaceEncoder enc = init_surface_encoder(vocabs, dims, phase_seed(c, 5));
  const ContextTrainConfig tc = context_config(c);
  const ContextTrainResult r = train_context_predictor(pg.graph, tc, std::move(enc));

  const fs::path dir = root / "context";
  fs::create_directories(dir);
  write_tensors(dir / "tensors.bin", [&] {
    auto b = r.predictor.encoder.blocks("ctx.surf.");
    b.push_back({"ctx.nu", &r.predictor.nu});
    return b;
  }());
  write_token_vocabs(dir, vocabs);
  write_contexts(dir / "contexts.tsv", materialize_contexts(r.predictor, pg.graph.surfaces(), c.size("K"), c.size("threads")));
  std::vector<std::vector<std::string>> rows;
  for (std::size_t e = 0; e < r.loss_trace.size(); ++e) rows.push_back({std::to_string(e + 1), detail::format_real(r.loss_trace[e])});
  write_trace(dir / "trace.tsv", {"epoch", "loss"}, rows);

  nlohmann::json manifest = base_manifest(c, "context");
  record_input(manifest, root, root / "graph" / "vocab.tsv");
  record_input(manifest, root, root / "graph" / "edges.tsv");
  manifest["dims"] = {{"char", dims.char_dim}, {"word", dims.word_dim}, {"surface", dims.surface_dim}};
  manifest["ngram_vocab"] = vocabs.ngrams.size();
  manifest["word_vocab"] = vocabs.words.size();
  write_manifest(dir, manifest);
  out << "context predictor: " << r.loss_trace.size() << " epochs, final loss " << fmt(r.loss_trace.back()) << '\n';
}

inline void cmd_train_features(const RunConfig& c, std::ostream& out) {
  const fs::path root = out_dir(c);
  const PreparedGraph pg = load_prepared(root);
  std::vector<Real> trace;
  const ContextFeatureTable table = train_context_features(pg.graph, feature_config(c), &trace);

  const fs::path dir = root / "features";
  fs::create_directories(dir);
  write_tensors(dir / "tensors.bin", {{"feat.table", &table.features}});
  std::vector<std::vector<std::string>> rows;
  for (std::size_t e = 0; e < trace.size(); ++e) rows.push_back({std::to_string(e + 1), detail::format_real(trace[e])});
  write_trace(dir / "trace.tsv", {"epoch", "loss"}, rows);
  nlohmann::json manifest = base_manifest(c, "features");
  record_input(manifest, root, root / "graph" / "vocab.tsv");
  record_input(manifest, root, root / "graph" / "edges.tsv");
  manifest["dims"] = {{"feature", table.features.cols()}};
  write_manifest(dir, manifest);
  out << "context features: " << table.features.rows() << " x " << table.features.cols() << '\n';
}

/// Phase-2 starting point assembled from the phase-1 artifacts.
inline SurfConModel initial_ranker_model(const RunConfig& c, const fs::path& root, const PreparedGraph& pg) {
  require_phase(root / "context", "context", "train-context");
  require_phase(root / "features", "features", "train-features");
  SurfConModel m;
  m.vocab = pg.graph.surfaces();
  m.build_index();
  TensorMap ct = read_tensors(root / "context" / "tensors.bin");
  m.predictor = load_predictor(root / "context", ct, read_token_vocabs(root / "context"));
  TensorMap ft = read_tensors(root / "features" / "tensors.bin");
  m.features.features = take_block(ft, "feat.table", root / "features");
  if (m.features.features.rows() != static_cast<Index>(m.vocab.size()) || m.predictor.nu.rows() != m.features.features.rows()) {
    throw InputError("phase-1 artifacts do not match the prepared vocabulary; rerun train-context and train-features");
  }
  const std::string init = c.str("surface_init");
  if (init == "context") {
    m.encoder = m.predictor.encoder;
  } else if (init == "fresh") {
    // Same starting point phase 1 used, before any graph signal reached it.
    m.encoder = init_surface_encoder(m.predictor.encoder.vocab,
                                     {m.predictor.encoder.char_dim(), m.predictor.encoder.word_dim(), m.predictor.encoder.surface_dim()},
                                     phase_seed(c, 5));
  } else {
    throw InputError("surface_init must be context or fresh, got '" + init + "'");
  }
  m.matcher = MatcherParams::initial(m.features.features.cols());
  m.config = ranker_config(c);
  m.contexts = materialize_contexts(m.predictor, m.vocab, m.config.K, m.config.threads);
  return m;
}

inline void write_model(const RunConfig& c, const fs::path& root, const SurfConModel& m, const RankerTrainResult& r) {
  const fs::path dir = root / "ranker";
  fs::create_directories(dir);
  write_vocab(dir / "vocab.tsv", m.vocab);
  write_token_vocabs(dir, m.encoder.vocab);
  std::vector<ConstBlockRef> blocks = m.predictor.encoder.blocks("ctx.surf.");
  blocks.push_back({"ctx.nu", &m.predictor.nu});
  blocks.push_back({"feat.table", &m.features.features});
  for (const auto& b : m.encoder.blocks("surf.")) blocks.push_back(b);
  for (const auto& b : m.matcher.blocks()) blocks.push_back(b);
  write_tensors(dir / "tensors.bin", blocks);
  write_contexts(dir / "contexts.tsv", m.contexts);

  std::vector<std::vector<std::string>> rows;
  for (const auto& e : r.trace) {
    rows.push_back({std::to_string(e.epoch), detail::format_real(e.loss), e.dev_map ? detail::format_real(*e.dev_map) : "NA"});
  }
  write_trace(dir / "trace.tsv", {"epoch", "loss", "dev_map"}, rows);

  nlohmann::json manifest = base_manifest(c, "ranker");
  for (const char* f : {"graph/vocab.tsv", "graph/splits.json", "context/tensors.bin", "features/tensors.bin"}) {
    record_input(manifest, root, root / f);
  }
  manifest["ranker"] = to_json(m.config);
  manifest["dims"] = {{"char", m.encoder.char_dim()},
                      {"word", m.encoder.word_dim()},
                      {"surface", m.encoder.surface_dim()},
                      {"feature", m.features.features.cols()}};
  manifest["vocab_hash"] = file_hash(dir / "vocab.tsv");
  manifest["best_epoch"] = r.best_epoch;
  manifest["best_dev_map"] = r.best_dev_map ? nlohmann::json(*r.best_dev_map) : nlohmann::json(nullptr);
  manifest["early_stopped"] = r.early_stopped;
  write_manifest(dir, manifest);
}

inline void cmd_train_ranker(const RunConfig& c, std::ostream& out) {
  const fs::path root = out_dir(c);
  const PreparedGraph pg = load_prepared(root);
  SurfConModel m = initial_ranker_model(c, root, pg);
  const RankerTrainResult r = train_ranker(m, pg.splits, "ranker: ");
  write_model(c, root, m, r);
  out << "ranker: best epoch " << r.best_epoch;
  if (r.best_dev_map) out << ", dev MAP " << fmt(*r.best_dev_map);
  out << '\n';
}

inline std::vector<SplitName> selected_splits(const std::string& name) {
  if (name == "all") return {SplitName::Train, SplitName::Dev, SplitName::InvTest, SplitName::OovTest};
  try {
    return {parse_split_name(name)};
  } catch (const InputError& e) {
    throw InputError(std::string(e.what()) + " (or 'all')");
  }
}

inline void cmd_eval(const RunConfig& c, std::ostream& out) {
  const fs::path root = out_dir(c);
  std::vector<Protocol> protocols;
  if (c.str("protocol") == "all") {
    protocols = {Protocol::Random, Protocol::Inference};
  } else {
    protocols = {parse_protocol(c.str("protocol"))};
  }
  const auto splits_to_run = selected_splits(c.str("split"));
  const fs::path splits_path = root / "graph" / "splits.json";
  if (!fs::exists(splits_path)) throw InputError("missing " + splits_path.string() + "; run 'prepare' first");
  const DatasetSplit splits = read_splits(splits_path);
  SurfConModel m = load_model(root);
  m.config.threads = std::max<std::size_t>(1, c.size("threads"));

  const EvalConfig ec{c.size("eval_negatives"), phase_seed(c, 6), m.config.threads};
  out << std::left << std::setw(10) << "protocol" << std::setw(10) << "split" << std::setw(9) << "queries" << std::setw(9) << "all"
      << std::setw(9) << "dissim" << "sim" << '\n';
  for (Protocol p : protocols) {
    for (SplitName s : splits_to_run) {
      if (splits.queries(s).empty()) {
        warn("split '" + std::string(to_string(s)) + "' has no queries; skipped");
        continue;
      }
      EvalReport r = run_experiment(m, splits, s, p, ec);
      r.config = c.echo();
      r.config["ranker"] = to_json(m.config);
      r.config["inputs"] = {{"ranker/manifest.json", file_hash(root / "ranker" / "manifest.json")}, {"graph/splits.json", file_hash(splits_path)}};
      const std::string stem = "report-" + to_string(p) + "-" + r.split;
      write_report(root / "eval" / (stem + ".json"), root / "eval" / (stem + ".tsv"), r);
      auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("-"); };
      out << std::setw(10) << to_string(p) << std::setw(10) << r.split << std::setw(9) << r.queries.size() << std::setw(9) << fmt(r.map_all)
          << std::setw(9) << opt(r.map_dissim) << opt(r.map_sim) << '\n';
    }
  }
}

inline void cmd_query(const RunConfig& c, const std::string& query, std::size_t top, bool tsv, std::ostream& out) {
  if (top == 0) throw InputError("--top must be >= 1");
  if (normalize_surface(query).empty()) throw InputError("query is empty");
  SurfConModel m = load_model(out_dir(c));
  m.config.threads = std::max<std::size_t>(1, c.size("threads"));
  const Term q = m.term(query);
  const TermTable table = build_term_table(m, false, true);
  const RankedList ranked = rank(m, q, inference_candidates(m, q, table), table);
  const std::size_t n = std::min(top, ranked.entries.size());
  if (!tsv) {
    out << "query: " << q.surface << (q.id ? " (in vocabulary)" : " (out of vocabulary)") << '\n';
    out << std::left << std::setw(6) << "rank" << std::setw(40) << "term" << std::setw(10) << "final" << std::setw(10) << "surface"
        << "context" << '\n';
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = ranked.entries[i];
    const std::string& surface = m.vocab[static_cast<std::size_t>(e.id)];
    if (tsv) {
      out << q.surface << '\t' << i + 1 << '\t' << surface << '\t' << detail::format_real(e.final) << '\t' << detail::format_real(e.surface)
          << '\t' << detail::format_real(e.context) << '\n';
    } else {
      out << std::setw(6) << i + 1 << std::setw(40) << surface << std::setw(10) << fmt(e.final) << std::setw(10) << fmt(e.surface)
          << fmt(e.context) << '\n';
    }
  }
}

/// Parses a comma-separated grid, dropping duplicates with a warning.
inline std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::set<double> seen;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (end == item.c_str() || *end != '\0' || !std::isfinite(v)) throw InputError("bad grid value '" + item + "'");
    if (!seen.insert(v).second) {
      warn("duplicate grid value " + item + " dropped");
      continue;
    }
    grid.push_back(v);
  }
  if (grid.empty()) throw InputError("sweep grid is empty");
  return grid;
}

inline void cmd_sweep(const RunConfig& c, const std::string& param, const std::string& grid_text, std::ostream& out) {
  if (param != "gamma" && param != "K") throw InputError("sweep parameter must be gamma or K, got '" + param + "'");
  const std::vector<double> grid = parse_grid(grid_text);
  for (double v : grid) {
    if (param == "gamma" && (v < 0 || v > 1)) throw InputError("gamma grid values must lie in [0, 1]");
    if (param == "K" && (v < 1 || v != std::floor(v))) throw InputError("K grid values must be positive integers");
  }
  const fs::path root = out_dir(c);
  const PreparedGraph pg = load_prepared(root);
  if (pg.splits.dev.empty()) throw InputError("sweep needs a non-empty dev split");

  std::vector<std::vector<std::string>> rows;
  for (double v : grid) {
    RunConfig vc = c;
    vc.set(param, param == "K" ? std::to_string(static_cast<std::size_t>(v)) : detail::format_real(v));
    SurfConModel m = initial_ranker_model(vc, root, pg);
    const RankerTrainResult r = train_ranker(m, pg.splits);
    rows.push_back({param, param == "K" ? std::to_string(static_cast<std::size_t>(v)) : detail::format_real(v),
                    detail::format_real(*r.best_dev_map), std::to_string(r.best_epoch)});
    out << param << '=' << rows.back()[1] << "\tdev MAP " << fmt(*r.best_dev_map) << '\n';
  }
  fs::create_directories(root / "sweep");
  write_trace(root / "sweep" / ("sweep-" + param + ".tsv"), {"param", "value", "dev_map", "best_epoch"}, rows);
}

}  // namespace pipeline

}  // namespace surfcon
