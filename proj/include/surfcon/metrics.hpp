#pragma once

#include <numeric>
#include <vector>

#include "surfcon/error.hpp"

namespace surfcon {

/// Mean over relevant positions p of (#relevant in 1..p) / p. `total_relevant`
/// overrides the divisor when some relevant items never appear in the list
/// (they then contribute 0).
inline double average_precision(const std::vector<int>& relevance, std::size_t total_relevant = 0) {
  std::size_t hits = 0;
  double sum = 0;
  for (std::size_t i = 0; i < relevance.size(); ++i) {
    if (relevance[i] != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  const std::size_t m = total_relevant > 0 ? total_relevant : hits;
  if (m == 0) throw InputError("average_precision: no relevant entry");
  if (hits > m) throw InputError("average_precision: more hits than relevant items");
  return sum / static_cast<double>(m);
}

inline double mean_of(const std::vector<double>& values) {
  if (values.empty()) throw InputError("mean average precision over an empty query set");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

}  // namespace surfcon
