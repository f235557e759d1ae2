#include "evsel/ecse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "evsel/errors.hpp"

namespace evsel {

std::string to_string(ElbowMethod method) {
  switch (method) {
    case ElbowMethod::ZScore:
      return "z-score";
    case ElbowMethod::Curvature:
      return "curvature";
    case ElbowMethod::Degenerate:
      return "degenerate";
  }
  return "unknown";
}

std::string to_string(Source source) {
  switch (source) {
    case Source::Paired:
      return "paired";
    case Source::Pooled:
      return "pooled";
    case Source::Expanded:
      return "expanded";
  }
  return "unknown";
}

ElbowResult detect_elbow(std::span<const double> scores, double tau) {
  if (scores.empty()) throw Error("detect_elbow: empty score list");
  if (std::isnan(tau)) throw Error("detect_elbow: tau is NaN");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw Error("detect_elbow: NaN score at position " + std::to_string(i));
    if (i > 0 && scores[i] > scores[i - 1]) {
      throw Error("detect_elbow: scores must be sorted non-increasing (position " + std::to_string(i) + ")");
    }
  }

  ElbowResult result;
  result.k_star = 1;
  result.method = ElbowMethod::Degenerate;
  const std::size_t n = scores.size();
  for (std::size_t i = 0; i + 1 < n; ++i) result.deltas.push_back(scores[i] - scores[i + 1]);
  if (n < 3) return result;

  const auto& d = result.deltas;
  const double m = static_cast<double>(d.size());
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / m;
  double var = 0.0;
  for (double x : d) var += (x - mean) * (x - mean);
  const double sigma = std::sqrt(var / m);
  const double flat = kElbowFlatTolerance * (scores.front() - scores.back());

  result.z_scores.assign(d.size(), 0.0);
  if (sigma > flat) {
    for (std::size_t i = 0; i < d.size(); ++i) result.z_scores[i] = (d[i] - mean) / sigma;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (result.z_scores[i] > tau + kElbowZTolerance) {
        result.k_star = i + 1;
        result.method = ElbowMethod::ZScore;
        return result;
      }
    }
  }

  // No significant drop: fall back to the sharpest change of slope. Values
  // within `flat` of the maximum count as ties and the first one wins.
  double best_abs = 0.0;
  for (std::size_t i = 0; i + 1 < d.size(); ++i) {
    result.curvatures.push_back(d[i + 1] - d[i]);
    best_abs = std::max(best_abs, std::abs(result.curvatures.back()));
  }
  std::size_t best = 0;
  while (std::abs(result.curvatures[best]) < best_abs - flat) ++best;
  if (best_abs > flat) {
    // Curvature i (1-based) is the slope change after element i + 1.
    result.k_star = best + 2;
    result.method = ElbowMethod::Curvature;
  }
  return result;
}

double PairedEntry::best_score() const { return scores.empty() ? 0.0 : *std::max_element(scores.begin(), scores.end()); }

EmbeddedChunks EmbeddedChunks::embed(const std::vector<EvidenceChunk>& chunks, const EmbeddingProvider& provider) {
  EmbeddedChunks out;
  out.chunks = chunks;
  if (chunks.empty()) return out;
  std::vector<std::string> texts;
  texts.reserve(chunks.size());
  for (const auto& c : chunks) texts.push_back(c.text);
  out.embeddings = provider.embed_batch(texts);
  return out;
}

std::vector<Embedding> embed_rationales(const std::vector<Rationale>& rationales, const EmbeddingProvider& provider) {
  if (rationales.empty()) throw Error("no rationales to embed");
  std::vector<std::string> texts;
  texts.reserve(rationales.size());
  for (const auto& r : rationales) texts.push_back(r.text());
  return provider.embed_batch(texts);
}

std::size_t argmax_chunk(const Embedding& probe, const EmbeddedChunks& chunks) {
  if (chunks.chunks.empty()) throw Error("argmax_chunk: no chunks");
  std::size_t best = 0;
  double best_score = cosine_similarity(probe, chunks.embeddings[0]);
  for (std::size_t j = 1; j < chunks.chunks.size(); ++j) {
    const double s = cosine_similarity(probe, chunks.embeddings[j]);
    if (s > best_score || (s == best_score && chunks.chunks[j].key() < chunks.chunks[best].key())) {
      best = j;
      best_score = s;
    }
  }
  return best;
}

std::vector<PairedEntry> pair_rationales(const std::vector<Rationale>& rationales,
                                         std::span<const Embedding> rationale_embeddings,
                                         const EmbeddedChunks& chunks) {
  if (rationales.empty()) throw Error("pair_rationales: no rationales");
  if (chunks.chunks.empty()) throw Error("pair_rationales: no chunks");
  if (rationale_embeddings.size() != rationales.size()) throw Error("pair_rationales: embedding count mismatch");

  std::map<ChunkKey, PairedEntry> by_key;
  for (std::size_t i = 0; i < rationales.size(); ++i) {
    const std::size_t j = argmax_chunk(rationale_embeddings[i], chunks);
    const ChunkKey key = chunks.chunks[j].key();
    auto& entry = by_key[key];
    entry.key = key;
    entry.ordinals.push_back(rationales[i].ordinal);
    entry.scores.push_back(cosine_similarity(rationale_embeddings[i], chunks.embeddings[j]));
  }

  std::vector<PairedEntry> out;
  out.reserve(by_key.size());
  for (auto& [key, entry] : by_key) {
    // Keep ordinals ascending with their scores.
    std::vector<std::size_t> order(entry.ordinals.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return entry.ordinals[a] < entry.ordinals[b]; });
    PairedEntry sorted{entry.key, {}, {}};
    for (std::size_t o : order) {
      sorted.ordinals.push_back(entry.ordinals[o]);
      sorted.scores.push_back(entry.scores[o]);
    }
    out.push_back(std::move(sorted));
  }
  return out;
}

std::vector<PairedEntry> pair_rationales(const std::vector<Rationale>& rationales,
                                         const std::vector<EvidenceChunk>& chunks, const EmbeddingProvider& provider) {
  if (chunks.empty()) throw Error("pair_rationales: no chunks");
  const auto embedded = EmbeddedChunks::embed(chunks, provider);
  const auto rat = embed_rationales(rationales, provider);
  return pair_rationales(rationales, rat, embedded);
}

PooledSelection pooled_select(std::span<const Embedding> rationale_embeddings, const EmbeddedChunks& chunks,
                              double tau) {
  if (chunks.chunks.empty()) throw Error("pooled_select: no chunks");
  const Embedding pooled = pool_mean(rationale_embeddings);

  std::vector<PooledEntry> ranked;
  ranked.reserve(chunks.chunks.size());
  for (std::size_t j = 0; j < chunks.chunks.size(); ++j) {
    ranked.push_back({chunks.chunks[j].key(), cosine_similarity(pooled, chunks.embeddings[j])});
  }
  std::sort(ranked.begin(), ranked.end(), [](const PooledEntry& a, const PooledEntry& b) {
    return a.score != b.score ? a.score > b.score : a.key < b.key;
  });

  std::vector<double> scores;
  scores.reserve(ranked.size());
  for (const auto& e : ranked) scores.push_back(e.score);

  PooledSelection out;
  out.elbow = detect_elbow(scores, tau);
  ranked.resize(out.elbow.k_star);
  out.selected = std::move(ranked);
  return out;
}

PooledSelection pooled_select(const std::vector<Rationale>& rationales, const std::vector<EvidenceChunk>& chunks,
                              const EmbeddingProvider& provider, double tau) {
  if (chunks.empty()) throw Error("pooled_select: no chunks");
  const auto embedded = EmbeddedChunks::embed(chunks, provider);
  const auto rat = embed_rationales(rationales, provider);
  return pooled_select(rat, embedded, tau);
}

std::vector<ExpandedEntry> expand_context(const ChunkKeySet& selected, const ChunkIndex& index) {
  std::map<ChunkKey, std::set<ChunkKey>> parents;
  for (const auto& key : selected) {
    std::vector<ChunkKey> neighbours;
    if (key.chunk_index > 0) neighbours.push_back({key.doc_id, key.chunk_index - 1});
    neighbours.push_back({key.doc_id, key.chunk_index + 1});
    for (auto& n : neighbours) {
      if (selected.contains(n) || !index.contains(n)) continue;
      parents[n].insert(key);
    }
  }
  std::vector<ExpandedEntry> out;
  out.reserve(parents.size());
  for (auto& [key, ps] : parents) out.push_back({key, {ps.begin(), ps.end()}});
  return out;
}

SelectionResult select_evidence(const std::vector<Rationale>& rationales, const EmbeddedChunks& chunks,
                                std::span<const Embedding> rationale_embeddings, const EcseConfig& config) {
  if (rationales.empty()) throw Error("select: empty rationale list");
  if (chunks.chunks.empty()) throw Error("select: no candidate chunks");

  SelectionResult result;
  result.paired = pair_rationales(rationales, rationale_embeddings, chunks);
  auto pooled = pooled_select(rationale_embeddings, chunks, config.tau);
  result.pooled = std::move(pooled.selected);
  result.elbow = std::move(pooled.elbow);

  ChunkKeySet core;
  for (const auto& p : result.paired) {
    core.insert(p.key);
    result.provenance[p.key].insert(Source::Paired);
  }
  for (const auto& p : result.pooled) {
    core.insert(p.key);
    result.provenance[p.key].insert(Source::Pooled);
  }

  ChunkKeySet all = core;
  if (config.expansion) {
    const ChunkIndex index(chunks.chunks);
    result.expanded = expand_context(core, index);
    for (const auto& e : result.expanded) {
      all.insert(e.key);
      result.provenance[e.key].insert(Source::Expanded);
    }
  }
  result.final_set.assign(all.begin(), all.end());
  return result;
}

SelectionResult select_evidence(const std::vector<Rationale>& rationales, const std::vector<EvidenceChunk>& chunks,
                                const EmbeddingProvider& provider, const EcseConfig& config) {
  if (rationales.empty()) throw Error("select: empty rationale list");
  if (chunks.empty()) throw Error("select: no candidate chunks");
  const auto embedded = EmbeddedChunks::embed(chunks, provider);
  const auto rat = embed_rationales(rationales, provider);
  return select_evidence(rationales, embedded, rat, config);
}

}  // namespace evsel
