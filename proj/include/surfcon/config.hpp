#pragma once

// Flat key=value run configuration: built-in defaults, then a config file,
// then command-line overrides. Unknown keys are rejected.

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surfcon/corpus.hpp"
#include "surfcon/error.hpp"

namespace surfcon {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string group;  // which subcommands expose it as a flag
  std::string help;
  bool echoed = true;  // paths and thread counts stay out of artifacts
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"seed", "0", "global", "master seed"},
      {"threads", "1", "global", "worker threads", false},
      {"out_dir", "out", "global", "artifact root directory", false},
      {"config", "", "global", "config file", false},
      // corpus
      {"vocab_path", "", "prepare", "input vocab.tsv", false},
      {"edges_path", "", "prepare", "input edges.tsv", false},
      {"labels_path", "", "prepare", "input labels.tsv", false},
      {"subsample", "true", "prepare", "drop very common terms before PPMI"},
      {"subsample_t", "0.001", "prepare", "subsampling threshold t"},
      {"ppmi", "true", "prepare", "convert counts to PPMI"},
      {"train_fraction", "0.7", "prepare", "share of InV queries for training"},
      {"dev_fraction", "0.15", "prepare", "share of InV queries for dev"},
      {"test_fraction", "0.15", "prepare", "share of InV queries for test"},
      {"dissim_threshold", "0.8", "prepare", "normalized edit similarity threshold"},
      {"oov_count", "0", "prepare", "OOV test queries to sample (0 = all)"},
      // synthetic
      {"concepts", "50", "gen-synthetic", "concept groups"},
      {"terms_per_concept", "3", "gen-synthetic", "in-vocabulary terms per concept"},
      {"oov_terms_per_concept", "1", "gen-synthetic", "label-only variants per concept"},
      {"base_words", "120", "gen-synthetic", "shared word pool size"},
      {"variant_rate", "0.3", "gen-synthetic", "abbreviation share among surface variants"},
      {"alias_rate", "0.3", "gen-synthetic", "disjoint-surface alias rate"},
      {"hub_count", "60", "gen-synthetic", "context hub nodes"},
      {"hubs_per_concept", "4", "gen-synthetic", "hubs shared by a concept"},
      {"edge_noise_rate", "0.1", "gen-synthetic", "noise edges per signal edge"},
      {"min_count", "5", "gen-synthetic", "minimum signal co-occurrence count"},
      {"max_count", "30", "gen-synthetic", "maximum signal co-occurrence count"},
      // phase 1
      {"ngram_orders", "2,3,4", "train-context", "character n-gram orders"},
      {"min_token_count", "1", "train-context", "minimum token frequency"},
      {"char_dim", "100", "train-context", "character n-gram embedding size"},
      {"word_dim", "100", "train-context", "word embedding size"},
      {"surface_dim", "128", "train-context", "surface vector size"},
      {"context_mode", "negative-sampling", "train-context", "full-softmax | negative-sampling"},
      {"context_negatives", "5", "train-context", "noise samples per pair"},
      {"context_epochs", "200", "train-context", "context predictor epochs"},
      {"context_lr", "0.01", "train-context", "context predictor Adam rate"},
      {"context_batch", "16", "train-context", "nodes per full-softmax batch"},
      {"noise_power", "0.75", "train-context", "noise distribution exponent"},
      {"feature_dim", "128", "train-features", "context feature size"},
      {"feature_negatives", "5", "train-features", "noise samples per edge"},
      {"feature_epochs", "200", "train-features", "feature epochs (2|E| edges each)"},
      {"feature_lr", "0.025", "train-features", "initial SGD rate"},
      // phase 2
      {"gamma", "0.3", "train-ranker", "context score weight"},
      {"K", "50", "train-ranker", "predicted contexts per term"},
      {"list_negatives", "100", "train-ranker", "non-synonyms per training list"},
      {"topn_surface", "50", "train-ranker", "inference pool size by surface"},
      {"topn_context", "50", "train-ranker", "inference pool size by context"},
      {"surface_init", "fresh", "train-ranker", "ranker surface encoder start: fresh | context (phase-1 snapshot)"},
      {"fine_tune_encoder", "true", "train-ranker", "train the surface encoder in phase 2"},
      {"matching", "dynamic", "train-ranker", "dynamic | static"},
      {"pooling", "mean", "train-ranker", "mean | max"},
      {"ranker_epochs", "50", "train-ranker", "maximum ranker epochs"},
      {"ranker_lr", "0.001", "train-ranker", "ranker Adam rate"},
      {"ranker_batch", "8", "train-ranker", "queries per Adam step"},
      {"patience", "10", "train-ranker", "epochs without dev improvement"},
      // evaluation
      {"protocol", "random", "eval", "random | inference"},
      {"split", "inv-test", "eval", "train | dev | inv-test | oov-test | all"},
      {"eval_negatives", "100", "eval", "non-synonyms per random list"},
  };
  return keys;
}

inline const ConfigKey* find_config_key(const std::string& name) {
  for (const auto& k : config_keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

inline std::string kebab(std::string s) {
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : config_keys()) values_[k.name] = k.default_value;
  }

  void set(const std::string& raw_key, const std::string& value) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '-', '_');
    if (find_config_key(key) == nullptr) throw InputError("unknown config key '" + raw_key + "'");
    values_[key] = value;
  }

  /// `key = value` lines; '#' starts a comment.
  void load_file(const std::filesystem::path& path) {
    detail::for_each_line(path, [&](std::size_t line_no, std::string_view raw) {
      std::string line(raw.substr(0, raw.find('#')));
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        if (b == std::string::npos) return std::string();
        return s.substr(b, s.find_last_not_of(" \t") - b + 1);
      };
      line = trim(line);
      if (line.empty()) return;
      const auto eq = line.find('=');
      if (eq == std::string::npos) detail::malformed(path, line_no, "expected key = value");
      try {
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
      } catch (const InputError& e) {
        detail::malformed(path, line_no, e.what());
      }
    });
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw Error("config key '" + key + "' is not defined");
    return it->second;
  }

  double real(const std::string& key) const {
    const std::string& s = str(key);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) bad(key, "a number");
    return v;
  }

  std::uint64_t u64(const std::string& key) const {
    const std::string& s = str(key);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) bad(key, "a non-negative integer");
    return v;
  }

  std::size_t size(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

  bool flag(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    bad(key, "true or false");
  }

  std::vector<int> ints(const std::string& key) const {
    std::vector<int> out;
    const std::string& s = str(key);
    std::size_t start = 0;
    while (start <= s.size()) {
      const auto comma = std::min(s.find(',', start), s.size());
      int v = 0;
      auto [ptr, ec] = std::from_chars(s.data() + start, s.data() + comma, v);
      if (ec != std::errc() || ptr != s.data() + comma) bad(key, "a comma-separated integer list");
      out.push_back(v);
      start = comma + 1;
    }
    return out;
  }

  /// Resolved configuration without paths or thread counts, so artifacts do
  /// not depend on where they were written.
  nlohmann::json echo() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& k : config_keys()) {
      if (k.echoed) j[k.name] = values_.at(k.name);
    }
    return j;
  }

 private:
  [[noreturn]] void bad(const std::string& key, const std::string& expected) const {
    throw InputError("config key '" + key + "' must be " + expected + ", got '" + values_.at(key) + "'");
  }

  std::map<std::string, std::string> values_;
};

}  // namespace surfcon
