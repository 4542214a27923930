#pragma once

// Corpus files: vocab.tsv, edges.tsv, labels.tsv.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "surfcon/error.hpp"
#include "surfcon/graph.hpp"
#include "surfcon/text.hpp"

namespace surfcon {

/// Concept groups: concept id -> member surfaces, plus the inverse map.
class ConceptLabels {
 public:
  /// Surfaces are normalized; a surface may belong to a single concept.
  void add(const std::string& raw_surface, const std::string& concept_id) {
    const std::string surface = normalize_surface(raw_surface);
    if (surface.empty()) throw InputError("empty label surface");
    if (concept_id.empty()) throw InputError("empty concept id for '" + surface + "'");
    auto [it, inserted] = term_to_concept_.emplace(surface, concept_id);
    if (!inserted) {
      if (it->second == concept_id) return;
      throw InputError("term '" + surface + "' mapped to two concepts (" + it->second + ", " + concept_id + ")");
    }
    groups_[concept_id].insert(surface);
  }

  const std::map<std::string, std::set<std::string>>& groups() const { return groups_; }
  const std::map<std::string, std::string>& term_to_concept() const { return term_to_concept_; }
  bool empty() const { return groups_.empty(); }

  const std::string* concept_of(const std::string& surface) const {
    auto it = term_to_concept_.find(normalize_surface(surface));
    return it == term_to_concept_.end() ? nullptr : &it->second;
  }

  bool synonyms(const std::string& a, const std::string& b) const {
    const auto* ca = concept_of(a);
    const auto* cb = concept_of(b);
    return ca != nullptr && cb != nullptr && *ca == *cb;
  }

 private:
  std::map<std::string, std::set<std::string>> groups_;
  std::map<std::string, std::string> term_to_concept_;
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

[[noreturn]] inline void malformed(const std::filesystem::path& path, std::size_t line_no, const std::string& what) {
  throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + what);
}

inline long long parse_int(std::string_view text, const std::filesystem::path& path, std::size_t line_no) {
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) malformed(path, line_no, "expected integer, got '" + std::string(text) + "'");
  return value;
}

inline double parse_real(std::string_view text, const std::filesystem::path& path, std::size_t line_no) {
  // from_chars for double is not available in every libstdc++ we target.
  std::string buf(text);
  char* end = nullptr;
  const double value = std::strtod(buf.c_str(), &end);
  if (buf.empty() || end != buf.c_str() + buf.size()) malformed(path, line_no, "expected number, got '" + buf + "'");
  return value;
}

/// Yields (line number, content) for non-empty lines, stripping a trailing '\r'.
template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(line_no, std::string_view(line));
  }
}

/// Shortest decimal that round-trips a double.
inline std::string format_real(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("format_real failed");
  return std::string(buf, ptr);
}

}  // namespace detail

inline std::vector<std::string> read_vocab(const std::filesystem::path& path) {
  std::vector<std::string> surfaces;
  std::vector<bool> seen;
  detail::for_each_line(path, [&](std::size_t line_no, std::string_view line) {
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 2) detail::malformed(path, line_no, "expected 'id<TAB>surface'");
    const long long id = detail::parse_int(fields[0], path, line_no);
    if (id < 0) detail::malformed(path, line_no, "negative id");
    const auto idx = static_cast<std::size_t>(id);
    if (idx >= surfaces.size()) {
      surfaces.resize(idx + 1);
      seen.resize(idx + 1, false);
    }
    if (seen[idx]) detail::malformed(path, line_no, "duplicate vocab id " + std::to_string(id));
    seen[idx] = true;
    surfaces[idx] = normalize_surface(fields[1]);
    if (surfaces[idx].empty()) detail::malformed(path, line_no, "empty surface");
  });
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw InputError(path.string() + ": vocab ids are not dense, missing id " + std::to_string(i));
  }
  return surfaces;
}

inline void read_edges(const std::filesystem::path& path, CooccurrenceGraph& graph) {
  detail::for_each_line(path, [&](std::size_t line_no, std::string_view line) {
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 3) detail::malformed(path, line_no, "expected 'id_i<TAB>id_j<TAB>weight'");
    const long long a = detail::parse_int(fields[0], path, line_no);
    const long long b = detail::parse_int(fields[1], path, line_no);
    const double w = detail::parse_real(fields[2], path, line_no);
    if (a == b) detail::malformed(path, line_no, "self-loop on id " + std::to_string(a));
    if (!graph.contains(a) || !graph.contains(b)) detail::malformed(path, line_no, "edge references unknown id");
    try {
      graph.add_edge(std::min(a, b), std::max(a, b), w);
    } catch (const InputError& e) {
      detail::malformed(path, line_no, e.what());
    }
  });
}

inline ConceptLabels read_labels(const std::filesystem::path& path) {
  ConceptLabels labels;
  detail::for_each_line(path, [&](std::size_t line_no, std::string_view line) {
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 2) detail::malformed(path, line_no, "expected 'surface<TAB>concept_id'");
    try {
      labels.add(std::string(fields[0]), std::string(fields[1]));
    } catch (const InputError& e) {
      detail::malformed(path, line_no, e.what());
    }
  });
  return labels;
}

struct Corpus {
  CooccurrenceGraph graph;
  ConceptLabels labels;
};

/// Reads the three corpus files; the graph comes back in raw-count mode.
inline Corpus load_corpus(const std::filesystem::path& vocab_path, const std::filesystem::path& edges_path,
                          const std::filesystem::path& labels_path) {
  for (const auto& p : {vocab_path, edges_path, labels_path}) {
    if (!std::filesystem::exists(p)) throw InputError("missing input file " + p.string());
  }
  Corpus corpus{CooccurrenceGraph(read_vocab(vocab_path)), {}};
  read_edges(edges_path, corpus.graph);
  corpus.labels = read_labels(labels_path);
  return corpus;
}

inline void write_vocab(const std::filesystem::path& path, const std::vector<std::string>& surfaces) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  for (std::size_t i = 0; i < surfaces.size(); ++i) out << i << '\t' << surfaces[i] << '\n';
}

inline void write_edges(const std::filesystem::path& path, const CooccurrenceGraph& graph) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& e : graph.edges()) out << e.a << '\t' << e.b << '\t' << detail::format_real(e.weight) << '\n';
}

/// Sorted by (concept id, surface).
inline void write_labels(const std::filesystem::path& path, const ConceptLabels& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& [concept_id, members] : labels.groups()) {
    for (const auto& s : members) out << s << '\t' << concept_id << '\n';
  }
}

inline void write_corpus(const std::filesystem::path& dir, const CooccurrenceGraph& graph, const ConceptLabels& labels) {
  std::filesystem::create_directories(dir);
  write_vocab(dir / "vocab.tsv", graph.surfaces());
  write_edges(dir / "edges.tsv", graph);
  write_labels(dir / "labels.tsv", labels);
}

}  // namespace surfcon
