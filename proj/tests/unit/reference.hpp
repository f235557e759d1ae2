#pragma once

// Straightforward re-implementations used as test oracles. They share no
// code with the library beyond the data types.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "evsel/corpus.hpp"
#include "evsel/embedding.hpp"

namespace evsel::reference {

struct Elbow {
  std::size_t k_star = 1;
  std::string method = "degenerate";
};

/// Direct recomputation: first z above tau + 1e-9, else the largest
/// absolute curvature (first among those within 1e-9 of the score range of
/// the maximum), else 1. Spread below 1e-9 of the score range counts as none.
inline Elbow elbow(const std::vector<double>& s, double tau) {
  const std::size_t n = s.size();
  if (n < 3) return {};
  std::vector<double> d;
  for (std::size_t i = 0; i + 1 < n; ++i) d.push_back(s[i] - s[i + 1]);
  double mu = 0.0;
  for (double x : d) mu += x;
  mu /= static_cast<double>(d.size());
  double ss = 0.0;
  for (double x : d) ss += (x - mu) * (x - mu);
  const double sigma = std::sqrt(ss / static_cast<double>(d.size()));
  const double eps = 1e-9 * (s.front() - s.back());
  if (sigma > eps) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      if ((d[i] - mu) / sigma > tau + 1e-9) return {i + 1, "z-score"};
    }
  }
  std::vector<double> c;
  for (std::size_t i = 1; i < d.size(); ++i) c.push_back(std::fabs(d[i] - d[i - 1]));
  const double best = c.empty() ? 0.0 : *std::max_element(c.begin(), c.end());
  std::size_t arg = 0;
  while (arg < c.size() && c[arg] < best - eps) ++arg;
  // c[arg] is the slope change after element arg + 2 (1-based).
  if (best > eps) return {arg + 2, "curvature"};
  return {};
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::max(-1.0, std::min(1.0, dot / (std::sqrt(na) * std::sqrt(nb))));
}

/// Exhaustive argmax per rationale with the (doc_id, chunk_index) tie-break,
/// grouped by chunk: key -> ordinals.
inline std::map<ChunkKey, std::vector<std::size_t>> pairing(const std::vector<Embedding>& rationales,
                                                            const std::vector<EvidenceChunk>& chunks,
                                                            const std::vector<Embedding>& chunk_vectors) {
  std::map<ChunkKey, std::vector<std::size_t>> out;
  for (std::size_t r = 0; r < rationales.size(); ++r) {
    std::vector<std::pair<double, ChunkKey>> all;
    for (std::size_t j = 0; j < chunks.size(); ++j) {
      all.emplace_back(cosine(rationales[r].values(), chunk_vectors[j].values()), chunks[j].key());
    }
    double top = all[0].first;
    for (const auto& [s, k] : all) top = std::max(top, s);
    std::set<ChunkKey> tied;
    for (const auto& [s, k] : all) {
      if (s == top) tied.insert(k);
    }
    out[*tied.begin()].push_back(r + 1);
  }
  return out;
}

}  // namespace evsel::reference
