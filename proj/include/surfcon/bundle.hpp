#pragma once

// On-disk artifacts. tensors.bin = u64 little-endian header length, a JSON
// header listing {name, rows, cols, dtype, offset}, then little-endian
// float64 data, row-major.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surfcon/context_model.hpp"
#include "surfcon/corpus.hpp"
#include "surfcon/error.hpp"
#include "surfcon/numerics.hpp"
#include "surfcon/ranking.hpp"
#include "surfcon/surface_encoder.hpp"

namespace surfcon {

namespace fs = std::filesystem;

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string file_hash(const fs::path& path) { return hex64(fnv1a(read_file(path))); }

// ---------------------------------------------------------------------------
// Tensor blocks

using TensorMap = std::map<std::string, Matrix>;

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

}  // namespace detail

inline void write_tensors(const fs::path& path, const std::vector<ConstBlockRef>& blocks) {
  nlohmann::json header = nlohmann::json::array();
  std::string data;
  for (const auto& b : blocks) {
    header.push_back({{"name", b.name}, {"rows", b.value->rows()}, {"cols", b.value->cols()}, {"dtype", "float64"}, {"offset", data.size()}});
    for (Index i = 0; i < b.value->size(); ++i) detail::put_u64(data, std::bit_cast<std::uint64_t>(b.value->data()[i]));
  }
  const std::string h = header.dump();
  std::string out;
  detail::put_u64(out, h.size());
  out += h;
  out += data;
  std::ofstream(path, std::ios::binary) << out;
}

inline TensorMap read_tensors(const fs::path& path) {
  const std::string bytes = read_file(path);
  auto corrupt = [&](const std::string& why) { return InputError("corrupt tensor file '" + path.string() + "': " + why); };
  if (bytes.size() < 8) throw corrupt("truncated header");
  const std::uint64_t hlen = detail::get_u64(bytes.data());
  if (bytes.size() < 8 + hlen) throw corrupt("truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(8, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw corrupt(e.what());
  }
  const std::size_t base = 8 + hlen;
  TensorMap out;
  for (const auto& b : header) {
    if (b.at("dtype") != "float64") throw corrupt("unsupported dtype");
    const auto rows = b.at("rows").get<Index>();
    const auto cols = b.at("cols").get<Index>();
    const auto offset = b.at("offset").get<std::size_t>();
    if (base + offset + static_cast<std::size_t>(rows * cols) * 8 > bytes.size()) throw corrupt("block out of range");
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) {
      m.data()[i] = std::bit_cast<double>(detail::get_u64(bytes.data() + base + offset + 8 * static_cast<std::size_t>(i)));
    }
    out.emplace(b.at("name").get<std::string>(), std::move(m));
  }
  return out;
}

inline Matrix take_block(TensorMap& tensors, const std::string& name, const fs::path& where) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw InputError("missing tensor block '" + name + "' in '" + where.string() + "'");
  return std::move(it->second);
}

// ---------------------------------------------------------------------------
// Token vocabularies and materialized contexts

inline void write_token_vocabs(const fs::path& dir, const TokenVocabs& v) {
  std::ofstream(dir / "ngram_vocab.json") << nlohmann::json{{"orders", v.orders}, {"tokens", v.ngrams.tokens()}}.dump() << '\n';
  std::ofstream(dir / "word_vocab.json") << nlohmann::json{{"tokens", v.words.tokens()}}.dump() << '\n';
}

inline TokenVocabs read_token_vocabs(const fs::path& dir) {
  try {
    const auto ng = nlohmann::json::parse(read_file(dir / "ngram_vocab.json"));
    const auto wd = nlohmann::json::parse(read_file(dir / "word_vocab.json"));
    TokenVocabs v{TokenVocab(ng.at("tokens").get<std::vector<std::string>>()), TokenVocab(wd.at("tokens").get<std::vector<std::string>>()),
                  ng.at("orders").get<NgramOrders>()};
    validate_orders(v.orders);
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("corrupt token vocabulary in '" + dir.string() + "': " + e.what());
  }
}

/// `surface<TAB>id:prob,id:prob,...` per in-vocabulary term, in id order.
inline void write_contexts(const fs::path& path, const ContextCache& cache) {
  std::ofstream out(path);
  for (const auto& e : cache.entries) {
    out << e.term << '\t';
    for (std::size_t i = 0; i < e.entries.size(); ++i) {
      out << (i ? "," : "") << e.entries[i].first << ':' << detail::format_real(e.entries[i].second);
    }
    out << '\n';
  }
}

inline ContextCache read_contexts(const fs::path& path, const std::vector<std::string>& vocab) {
  ContextCache cache;
  cache.K = std::numeric_limits<std::size_t>::max();
  detail::for_each_line(path, [&](std::size_t line_no, std::string_view line) {
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 2) detail::malformed(path, line_no, "expected surface<TAB>contexts");
    PredictedContexts pc{std::string(fields[0]), {}};
    std::string_view rest = fields[1];
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string_view item = rest.substr(0, comma);
      const auto colon = item.find(':');
      if (colon == std::string_view::npos) detail::malformed(path, line_no, "expected id:prob");
      const auto id = detail::parse_int(item.substr(0, colon), path, line_no);
      if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) detail::malformed(path, line_no, "context id out of range");
      pc.entries.emplace_back(id, detail::parse_real(item.substr(colon + 1), path, line_no));
      rest = comma == std::string_view::npos ? std::string_view() : rest.substr(comma + 1);
    }
    cache.K = std::min(cache.K, pc.entries.size());
    cache.entries.push_back(std::move(pc));
  });
  if (cache.entries.size() != vocab.size()) throw InputError("'" + path.string() + "' does not cover the vocabulary");
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (cache.entries[i].term != vocab[i]) throw InputError("'" + path.string() + "' is out of sync with the vocabulary");
  }
  return cache;
}

inline void write_trace(const fs::path& path, const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "\t" : "") << header[i];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "\t" : "") << r[i];
    out << '\n';
  }
}

inline void write_manifest(const fs::path& dir, const nlohmann::json& manifest) {
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

inline nlohmann::json read_manifest(const fs::path& dir) {
  try {
    return nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw InputError("corrupt manifest in '" + dir.string() + "': " + e.what());
  }
}

}  // namespace surfcon
