// surfcon: synonym discovery over co-occurrence graphs.
// Exit status: 0 success, 1 internal error, 2 usage or validation error.

#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "surfcon/pipeline.hpp"

namespace {

using surfcon::RunConfig;

struct Overrides {
  std::map<std::string, std::string> values;

  void add_group(CLI::App* app, const std::string& group) {
    for (const auto& k : surfcon::config_keys()) {
      if (k.group == group) app->add_option("--" + surfcon::kebab(k.name), values[k.name], k.help + " [" + k.default_value + "]");
    }
  }

  RunConfig resolve() const {
    RunConfig cfg;
    auto it = values.find("config");
    if (it != values.end() && !it->second.empty()) cfg.load_file(it->second);
    for (const auto& [key, value] : values) {
      if (!value.empty()) cfg.set(key, value);
    }
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SurfCon synonym discovery"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides ov;
  ov.add_group(&app, "global");

  auto* gen = app.add_subcommand("gen-synthetic", "write a seeded synthetic corpus");
  ov.add_group(gen, "gen-synthetic");
  auto* prepare = app.add_subcommand("prepare", "subsample, convert to PPMI and split queries");
  ov.add_group(prepare, "prepare");
  auto* context = app.add_subcommand("train-context", "phase 1: train the inductive context predictor");
  ov.add_group(context, "train-context");
  ov.add_group(context, "train-ranker");
  auto* features = app.add_subcommand("train-features", "phase 1: train context feature vectors");
  ov.add_group(features, "train-features");
  ov.add_group(features, "train-context");
  auto* ranker = app.add_subcommand("train-ranker", "phase 2: train the ranker with ListNet");
  ov.add_group(ranker, "train-ranker");
  auto* eval = app.add_subcommand("eval", "MAP under the random or inference protocol");
  ov.add_group(eval, "eval");

  auto* query = app.add_subcommand("query", "rank synonyms for a term");
  std::string query_text;
  std::size_t top = 10;
  bool tsv = false;
  query->add_option("term", query_text, "query term (in or out of vocabulary)")->required();
  query->add_option("--top", top, "rows to print");
  query->add_flag("--tsv", tsv, "tab-separated output");

  auto* sweep = app.add_subcommand("sweep", "retrain the ranker over a gamma or K grid and report dev MAP");
  std::string sweep_param;
  std::string grid;
  sweep->add_option("param", sweep_param, "gamma or K")->required();
  sweep->add_option("--grid", grid, "comma-separated values")->required();
  ov.add_group(sweep, "train-ranker");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const RunConfig cfg = ov.resolve();
    namespace p = surfcon::pipeline;
    if (*gen) p::cmd_gen_synthetic(cfg, std::cout);
    if (*prepare) p::cmd_prepare(cfg, std::cout);
    if (*context) p::cmd_train_context(cfg, std::cout);
    if (*features) p::cmd_train_features(cfg, std::cout);
    if (*ranker) p::cmd_train_ranker(cfg, std::cout);
    if (*eval) p::cmd_eval(cfg, std::cout);
    if (*query) p::cmd_query(cfg, query_text, top, tsv, std::cout);
    if (*sweep) p::cmd_sweep(cfg, sweep_param, grid, std::cout);
  } catch (const surfcon::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
