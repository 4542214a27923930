// Acceptance gate: one PASS/FAIL line per criterion; exit status 1 if any fails.
// Criteria 1-5 run in-process against the library; 6-10 drive the CLI over
// the shipped synthetic benchmark.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <nlohmann/json.hpp>

#include "support.hpp"

using namespace surfcon;
using testing_support::check_blocks;
using testing_support::randomize;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& name, const std::string& detail, double seconds) {
  char secs[32];
  std::snprintf(secs, sizeof secs, "%.1f s", seconds);
  std::cout << (ok ? "PASS" : "FAIL") << "  " << id << "  " << name << ": " << detail << " (" << secs << ")" << std::endl;
  if (!ok) ++failures;
}

std::string num(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

const fs::path kScratch = fs::temp_directory_path() / ("surfcon_acceptance_" + std::to_string(::getpid()));
const fs::path kData = SURFCON_DATA;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Runs the CLI; stdout goes to `out_file` (or scratch/last.out). Returns exit status.
int cli(const std::string& args, const fs::path& out_file = {}) {
  const fs::path out = out_file.empty() ? kScratch / "last.out" : out_file;
  const std::string cmd = std::string(SURFCON_CLI) + " " + args + " > '" + out.string() + "' 2> '" + (kScratch / "last.err").string() + "'";
  const int raw = std::system(cmd.c_str());
  const int status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  if (status != 0) std::cerr << "command failed (" << status << "): " << args << '\n' << slurp(kScratch / "last.err");
  return status;
}

nlohmann::json report_json(const fs::path& root, const std::string& protocol, const std::string& split) {
  return nlohmann::json::parse(slurp(root / "eval" / ("report-" + protocol + "-" + split + ".json")));
}

double map_of(const nlohmann::json& r, const char* subset) { return r["map"][subset].is_null() ? NAN : r["map"][subset].get<double>(); }

// --- 1: gradients -------------------------------------------------------------

std::vector<BlockRef> predictor_blocks(ContextPredictor& p) {
  auto b = p.encoder.blocks("surf.");
  b.push_back({"ctx.nu", &p.nu});
  return b;
}

std::vector<const Matrix*> predictor_grads(const ContextGrads& g) {
  auto l = g.encoder.list();
  l.push_back(&g.nu);
  return l;
}

void gradients() {
  const Stopwatch clock;
  constexpr int kInstances = 20;
  Rng rng(101);
  Real worst_n = 0, worst_ns = 0, worst_r = 0;
  for (int t = 0; t < kInstances; ++t) {
    const auto g = testing_support::random_graph(rng, 3 + rng.below(8), rng.uniform(0.3, 0.8));
    ContextPredictor p = init_context_predictor(testing_support::tiny_encoder(g.surfaces(), rng), g.size(), rng.next());
    randomize(p.nu, rng, 1.0);
    const auto terms = g.terms(p.encoder.vocab.orders);

    ContextGrads full(p);
    full_softmax_loss(g, terms, p, &full);
    worst_n = std::max(worst_n, check_blocks(predictor_blocks(p), predictor_grads(full), [&] { return full_softmax_loss(g, terms, p); }));

    const auto input = static_cast<std::size_t>(rng.below(g.size()));
    const auto positive = static_cast<TermId>(rng.below(g.size()));
    std::vector<TermId> negatives(1 + rng.below(6));
    for (auto& n : negatives) n = static_cast<TermId>(rng.below(g.size()));
    ContextGrads ns(p);
    negative_sampling_loss(terms[input], positive, negatives, p, &ns);
    worst_ns = std::max(worst_ns, check_blocks(predictor_blocks(p), predictor_grads(ns),
                                               [&] { return negative_sampling_loss(terms[input], positive, negatives, p); }));
  }
  for (int t = 0; t < kInstances; ++t) {
    const auto vocab = testing_support::random_surfaces(rng, 4 + rng.below(7));
    SurfConModel m = testing_support::tiny_model(vocab, rng, 1 + rng.below(4));
    m.config.matching = rng.below(4) == 0 ? Matching::Static : Matching::Dynamic;
    m.config.pooling = rng.below(2) == 0 ? Pooling::Mean : Pooling::Max;
    m.config.gamma = rng.uniform(0, 1);
    const std::string query = t % 2 ? vocab[rng.below(vocab.size())] : std::string("unseen ab");
    const Term q = m.term(query);
    CandidateList list{query, {}, {}};
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      if (vocab[i] == query) continue;
      list.candidates.push_back(static_cast<TermId>(i));
      list.relevance.push_back(rng.below(3) == 0 ? 1 : 0);
    }
    list.relevance[rng.below(list.relevance.size())] = 1;
    RankerGrads grads(m);
    listnet_loss(m, q, list, &grads);
    auto blocks = m.matcher.blocks();
    for (auto& b : m.encoder.blocks("surf.")) blocks.push_back(b);
    std::vector<const Matrix*> gl{&grads.matcher.W_m, &grads.matcher.W_b};
    for (auto* e : grads.encoder.list()) gl.push_back(e);
    worst_r = std::max(worst_r, check_blocks(blocks, gl, [&] { return listnet_loss(m, q, list); }));
  }
  const double secs = clock.seconds();
  const bool ok = worst_n < 1e-4 && worst_ns < 1e-4 && worst_r < 1e-4 && secs < 60;
  report(1, ok, "gradient correctness",
         "max rel err L_n " + num(worst_n, 2) + ", NS " + num(worst_ns, 2) + ", L_r " + num(worst_r, 2) + " over " +
             std::to_string(kInstances) + " instances each, h = 1e-5 (< 1e-4, < 60 s)",
         secs);
}

// --- 2: PPMI ------------------------------------------------------------------

void ppmi_oracle() {
  const Stopwatch clock;
  Rng rng(202);
  double worst = 0;
  bool symmetric = true;
  for (int t = 0; t < 100; ++t) {
    const auto g = testing_support::random_graph(rng, 2 + rng.below(11), rng.uniform(0.1, 0.9));
    std::vector<std::vector<double>> counts(g.size(), std::vector<double>(g.size(), 0.0));
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t j = 0; j < g.size(); ++j) counts[i][j] = i == j ? 0.0 : g.weight(i, j);
    }
    const auto want = oracle::dense_ppmi(counts);
    const auto got = ppmi_transform(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (i == j) continue;
        worst = std::max(worst, std::abs(got.weight(i, j) - want[i][j]));
        symmetric = symmetric && got.weight(i, j) == got.weight(j, i);
      }
    }
  }
  const double secs = clock.seconds();
  report(2, worst <= 1e-12 && symmetric && secs < 5, "PPMI oracle",
         "max |diff| " + num(worst, 2) + " on 100 graphs with |V| <= 12 (<= 1e-12, < 5 s)", secs);
}

// --- 3: AP --------------------------------------------------------------------

void ap_oracle() {
  const Stopwatch clock;
  Rng rng(303);
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<int> rel(1 + rng.below(200));
    const double density = rng.uniform(0.01, 0.6);
    for (auto& r : rel) r = rng.uniform() < density ? 1 : 0;
    rel[rng.below(rel.size())] = 1;
    if (average_precision(rel) != oracle::average_precision(rel)) ++mismatches;
  }
  const double ap = average_precision({0, 1, 1});
  const double ln4 = listnet_from_scores(Vector::Zero(4), {0, 1, 0, 0}, nullptr);
  const double secs = clock.seconds();
  const bool ok = mismatches == 0 && std::abs(ap - 7.0 / 12.0) < 1e-15 && std::abs(ln4 - std::log(4.0)) < 1e-15 && secs < 5;
  report(3, ok, "MAP oracle",
         std::to_string(mismatches) + " mismatches on 1000 lists; AP[0,1,1] = " + num(ap, 17) + "; ListNet uniform N=4 = " + num(ln4, 17) +
             " (exact, < 5 s)",
         secs);
}

// --- 4: W_m = 0 ---------------------------------------------------------------

void reduction_identity() {
  const Stopwatch clock;
  Rng rng(404);
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const Index d = 1 + static_cast<Index>(rng.below(8));
    MatcherParams p = MatcherParams::initial(d);
    randomize(p.W_b, rng, 1.0);
    p.W_m.setZero();
    ContextSet q{"q", Matrix(1 + rng.below(8), d)}, c{"c", Matrix(1 + rng.below(8), d)};
    randomize(q.vectors, rng, 2.0);
    randomize(c.vectors, rng, 2.0);
    const MatchResult r = dynamic_vectors(q, c, p, t % 2 ? Pooling::Max : Pooling::Mean);
    worst = std::max({worst, (r.v_q - static_vector(q)).cwiseAbs().maxCoeff(), (r.v_c - static_vector(c)).cwiseAbs().maxCoeff()});
  }
  const double secs = clock.seconds();
  report(4, worst <= 1e-12, "W_m = 0 reduction", "max |dynamic - static| " + num(worst, 2) + " on 200 pairs (<= 1e-12)", secs);
}

// --- 5: context predictor -----------------------------------------------------

void context_convergence() {
  const Stopwatch clock;
  Rng rng(505);
  const auto g = testing_support::random_graph(rng, 20, 0.25);
  const SurfaceEncoder enc = init_surface_encoder(build_token_vocabs(g.surfaces(), {2, 3, 4}, 1), {32, 32, 32}, 7);
  const auto terms = g.terms({2, 3, 4});

  ContextTrainConfig full;
  full.epochs = 500;
  full.lr = 0.05;
  full.seed = 11;
  const auto fr = train_context_predictor(g, full, enc);
  double kl = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.degree(static_cast<TermId>(i)) == 0) continue;
    kl += oracle::kl(empirical_distribution(g, static_cast<TermId>(i)), context_distribution(terms[i], fr.predictor));
    ++n;
  }
  kl /= static_cast<double>(n);

  ContextTrainConfig ns = full;
  ns.mode = ContextTrainMode::NegativeSampling;
  ns.negatives = 5;
  ns.lr = 0.02;
  const auto nr = train_context_predictor(g, ns, enc);
  // The negative-sampling optimum scores contexts by log(p(j|i) / (N0 P_n(j))), so
  // its argmax can differ from the empirical top-1; count where it still agrees.
  const auto degrees = g.degrees();
  std::size_t hits = 0, attainable = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto emp = empirical_distribution(g, static_cast<TermId>(i));
    Real best = 0, best_ratio = -1;
    TermId optimum = -1;
    for (const auto& [j, q] : emp) {
      best = std::max(best, q);
      const Real ratio = q / std::pow(degrees[static_cast<std::size_t>(j)], 0.75);
      if (ratio > best_ratio) {
        best_ratio = ratio;
        optimum = j;
      }
    }
    const TermId top = predict_top_k(terms[i], 1, nr.predictor).entries.front().first;
    for (const auto& e : emp) {
      hits += (e.first == top && e.second == best) ? 1 : 0;
      attainable += (e.first == optimum && e.second == best) ? 1 : 0;
    }
  }
  const double top1 = static_cast<double>(hits) / static_cast<double>(g.size());
  const double ceiling = static_cast<double>(attainable) / static_cast<double>(g.size());
  const double secs = clock.seconds();
  report(5, kl < 0.05 && top1 >= 0.8 && secs < 120, "context predictor convergence",
         "20 nodes: full-softmax mean KL " + num(kl, 3) + " after 500 epochs (< 0.05); negative sampling top-1 " + num(top1, 3) +
             " (>= 0.8; exact NS optimum would reach " + num(ceiling, 3) + ", < 120 s)",
         secs);
}

// --- 6-8, 10: benchmark -------------------------------------------------------

const std::string kBench = "--config '" + (kData / "benchmark.conf").string() + "'";

std::string at(const fs::path& root) { return kBench + " --out-dir '" + root.string() + "'"; }

bool train_benchmark(const fs::path& root) {
  const fs::path corpus = kData / "synthetic";
  return cli("prepare " + at(root) + " --vocab-path '" + (corpus / "vocab.tsv").string() + "' --edges-path '" + (corpus / "edges.tsv").string() +
             "' --labels-path '" + (corpus / "labels.tsv").string() + "'") == 0 &&
         cli("train-context " + at(root)) == 0 && cli("train-features " + at(root)) == 0 && cli("train-ranker " + at(root)) == 0;
}

void copy_phase1(const fs::path& from, const fs::path& to) {
  for (const char* d : {"graph", "context", "features"}) fs::copy(from / d, to / d, fs::copy_options::recursive);
}

void benchmark(const fs::path& full) {
  const Stopwatch clock;
  const fs::path surf = kScratch / "surf-only";
  fs::create_directories(surf);
  bool ran = train_benchmark(full) && cli("eval " + at(full) + " --protocol all --split all") == 0;
  if (ran) {
    copy_phase1(full, surf);
    ran = cli("train-ranker " + at(surf) + " --gamma 0") == 0 && cli("eval " + at(surf) + " --protocol random --split inv-test") == 0;
  }
  const double secs = clock.seconds();
  if (!ran) {
    report(6, false, "synthetic benchmark", "pipeline failed", secs);
    return;
  }
  const auto f = report_json(full, "random", "inv-test");
  const auto s = report_json(surf, "random", "inv-test");
  const double a = map_of(f, "all"), fd = map_of(f, "dissim"), sd = map_of(s, "dissim"), ss = map_of(s, "sim");
  const bool ok_a = a >= 0.85, ok_b = fd > sd, ok_c = ss >= 0.9;
  report(6, ok_a && ok_b && ok_c && secs < 300, "synthetic benchmark",
         std::string("(a) InV-test MAP ") + num(a) + (ok_a ? " >= " : " < ") + "0.85; (b) Dissim full " + num(fd) + (ok_b ? " > " : " <= ") +
             "Surf-Only " + num(sd) + "; (c) Surf-Only Sim " + num(ss) + (ok_c ? " >= " : " < ") + "0.9 (< 300 s)",
         secs);
}

void oov_inductivity(const fs::path& full) {
  const Stopwatch clock;
  // Ship only the ranker bundle and the split file: no edges, no phase-1 dirs.
  const fs::path bundle = kScratch / "bundle";
  fs::create_directories(bundle / "graph");
  fs::copy(full / "ranker", bundle / "ranker", fs::copy_options::recursive);
  fs::copy_file(full / "graph" / "splits.json", bundle / "graph" / "splits.json");
  bool ok = !fs::exists(bundle / "graph" / "edges.tsv");
  ok = ok && cli("eval " + at(bundle) + " --protocol all --split oov-test") == 0;
  if (!ok) {
    report(7, false, "OOV inductivity", "eval against edge-free bundle failed", clock.seconds());
    return;
  }
  const auto random = report_json(bundle, "random", "oov-test");
  const auto inference = report_json(bundle, "inference", "oov-test");
  std::size_t queries = 0, valid = 0;
  for (const auto& q : inference["queries"]) {
    ++queries;
    const fs::path out = kScratch / "query.tsv";
    if (cli("query " + at(bundle) + " --tsv --top 10 '" + q["query"].get<std::string>() + "'", out) != 0) continue;
    std::istringstream lines(slurp(out));
    std::string line;
    std::size_t rows = 0;
    bool finite = true;
    while (std::getline(lines, line)) {
      ++rows;
      std::istringstream fields(line);
      std::string field;
      for (int i = 0; std::getline(fields, field, '\t'); ++i) {
        if (i >= 3) finite = finite && std::isfinite(std::strtod(field.c_str(), nullptr));
      }
    }
    valid += (rows > 0 && finite) ? 1 : 0;
  }
  // The edge-free bundle must score exactly like the full run.
  const bool same = random["map"] == report_json(full, "random", "oov-test")["map"];
  const double m = map_of(random, "all");
  const double secs = clock.seconds();
  report(7, queries > 0 && valid == queries && same && m >= 0.7, "OOV inductivity",
         std::to_string(valid) + "/" + std::to_string(queries) + " OOV queries ranked without edges; OOV MAP " + num(m) +
             " (>= 0.7); matches full run: " + (same ? "yes" : "no"),
         secs);
}

void protocol_ordering(const fs::path& full) {
  const Stopwatch clock;
  bool ok = true;
  std::string detail;
  for (const char* split : {"inv-test", "oov-test"}) {
    const double r = map_of(report_json(full, "random", split), "all");
    const double i = map_of(report_json(full, "inference", split), "all");
    ok = ok && i <= r + 0.02;
    detail += std::string(detail.empty() ? "" : "; ") + split + " inference " + num(i) + " vs random " + num(r);
  }
  report(8, ok, "protocol ordering", detail + " (inference <= random + 0.02)", clock.seconds());
}

void gamma_sweep(const fs::path& full) {
  const Stopwatch clock;
  if (cli("sweep gamma --grid 0,0.3,0.5,1 " + at(full)) != 0) {
    report(10, false, "gamma sweep", "sweep failed", clock.seconds());
    return;
  }
  std::istringstream rows(slurp(full / "sweep" / "sweep-gamma.tsv"));
  std::string line;
  std::getline(rows, line);
  std::vector<std::pair<double, double>> points;
  while (std::getline(rows, line)) {
    std::istringstream fields(line);
    std::string param, value, map;
    std::getline(fields, param, '\t');
    std::getline(fields, value, '\t');
    std::getline(fields, map, '\t');
    points.emplace_back(std::stod(value), std::stod(map));
  }
  double lo = NAN, hi = NAN, best_interior = -1, best_gamma = NAN;
  std::string detail;
  for (const auto& [g, m] : points) {
    if (g == 0) lo = m;
    if (g == 1) hi = m;
    if (g > 0 && g < 1 && m > best_interior) {
      best_interior = m;
      best_gamma = g;
    }
    detail += (detail.empty() ? "" : ", ") + num(g, 2) + ":" + num(m);
  }
  const bool ok = best_interior >= lo && best_interior >= hi;
  report(10, ok, "gamma sweep", "dev MAP {" + detail + "}; best interior gamma " + num(best_gamma, 2) + " >= both endpoints",
         clock.seconds());
}

// --- 9: determinism -----------------------------------------------------------

constexpr const char* kSmall = R"(seed = 5
concepts = 12
hub_count = 24
subsample = false
char_dim = 8
word_dim = 8
surface_dim = 8
context_epochs = 30
feature_dim = 8
feature_epochs = 30
K = 3
list_negatives = 10
topn_surface = 6
topn_context = 6
ranker_epochs = 4
eval_negatives = 10
)";

bool small_run(const fs::path& root, const fs::path& conf, int threads) {
  const std::string base = "--config '" + conf.string() + "' --threads " + std::to_string(threads) + " --out-dir '" + root.string() + "'";
  const fs::path corpus = root / "corpus";
  return cli("gen-synthetic --config '" + conf.string() + "' --out-dir '" + corpus.string() + "'") == 0 &&
         cli("prepare " + base + " --vocab-path '" + (corpus / "vocab.tsv").string() + "' --edges-path '" + (corpus / "edges.tsv").string() +
             "' --labels-path '" + (corpus / "labels.tsv").string() + "'") == 0 &&
         cli("train-context " + base) == 0 && cli("train-features " + base) == 0 && cli("train-ranker " + base) == 0 &&
         cli("eval " + base + " --protocol all --split all") == 0 && cli("query " + base + " --tsv --top 20 'zzqy vex'", root / "query.tsv") == 0;
}

void determinism() {
  const Stopwatch clock;
  const fs::path conf = kScratch / "small.conf";
  std::ofstream(conf) << kSmall;
  const fs::path a = kScratch / "det-a", b = kScratch / "det-b";
  if (!small_run(a, conf, 1) || !small_run(b, conf, 3)) {
    report(9, false, "determinism", "pipeline failed", clock.seconds());
    return;
  }
  std::size_t files = 0;
  std::vector<std::string> differing;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const fs::path rel = fs::relative(e.path(), a);
    if (!fs::exists(b / rel) || slurp(e.path()) != slurp(b / rel)) differing.push_back(rel.string());
  }
  std::size_t files_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) files_b += e.is_regular_file() ? 1 : 0;
  const bool ok = files > 0 && differing.empty() && files == files_b;
  std::string detail = std::to_string(files) + " artifacts byte-identical across two runs (threads 1 vs 3)";
  if (!ok) detail = std::to_string(differing.size()) + " of " + std::to_string(files) + " artifacts differ" +
                    (differing.empty() ? "" : ", first: " + differing.front());
  report(9, ok, "determinism", detail, clock.seconds());
}

}  // namespace

int main() {
  fs::remove_all(kScratch);
  fs::create_directories(kScratch);
  const fs::path full = kScratch / "benchmark";
  fs::create_directories(full);

  gradients();
  ppmi_oracle();
  ap_oracle();
  reduction_identity();
  context_convergence();
  benchmark(full);
  if (fs::exists(full / "ranker" / "manifest.json")) {
    oov_inductivity(full);
    protocol_ordering(full);
  } else {
    report(7, false, "OOV inductivity", "no trained benchmark model", 0);
    report(8, false, "protocol ordering", "no trained benchmark model", 0);
  }
  determinism();
  if (fs::exists(full / "ranker" / "manifest.json")) {
    gamma_sweep(full);
  } else {
    report(10, false, "gamma sweep", "no trained benchmark model", 0);
  }

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion(s) failed") << std::endl;
  fs::remove_all(kScratch);
  return failures == 0 ? 0 : 1;
}
