#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "evsel/corpus.hpp"
#include "evsel/embedding.hpp"
#include "evsel/llm.hpp"

namespace evsel {

enum class ElbowMethod { ZScore, Curvature, Degenerate };

std::string to_string(ElbowMethod method);

/// Adaptive cutoff over a descending similarity curve.
struct ElbowResult {
  std::size_t k_star = 0;
  ElbowMethod method = ElbowMethod::Degenerate;
  std::vector<double> deltas;      // s_i - s_{i+1}
  std::vector<double> z_scores;    // empty when n < 3
  std::vector<double> curvatures;  // populated only when the fallback ran
};

/// Relative scale below which the spread of first differences (and each
/// second difference) counts as zero: the threshold is this factor times
/// (s_1 - s_n). Absorbs binary64 rounding in exactly linear curves.
inline constexpr double kElbowFlatTolerance = 1e-9;

/// A z-score must exceed tau by more than this to count, so that values
/// equal to tau in exact arithmetic do not depend on rounding.
inline constexpr double kElbowZTolerance = 1e-9;

/// First index whose z-scored drop exceeds `tau`; falls back to the point
/// of maximum |second difference| (near-ties within the flat tolerance go
/// to the earliest), and to k* = 1 when the curve has no
/// structure. Throws on unsorted input, NaN, or an empty list.
ElbowResult detect_elbow(std::span<const double> scores, double tau);

/// One member of E_v: the chunk and every rationale that picked it.
struct PairedEntry {
  ChunkKey key;
  std::vector<std::size_t> ordinals;  // ascending
  std::vector<double> scores;         // cosine per ordinal, same order
  double best_score() const;
};

struct PooledEntry {
  ChunkKey key;
  double score = 0.0;
};

struct ExpandedEntry {
  ChunkKey key;
  std::vector<ChunkKey> parents;  // ascending
};

enum class Source { Paired, Pooled, Expanded };
std::string to_string(Source source);

struct SelectionResult {
  std::vector<PairedEntry> paired;    // ascending by key
  std::vector<PooledEntry> pooled;    // descending score, tie-break by key
  ElbowResult elbow;
  std::vector<ExpandedEntry> expanded;  // ascending by key
  std::vector<ChunkKey> final_set;      // ascending by key
  std::map<ChunkKey, std::set<Source>> provenance;

  ChunkKeySet final_keys() const { return {final_set.begin(), final_set.end()}; }
};

struct EcseConfig {
  double tau = 1.0;
  bool expansion = true;
};

/// Pre-computed embeddings for one query's candidate chunks; lets callers
/// embed once and run several configurations.
struct EmbeddedChunks {
  std::vector<EvidenceChunk> chunks;
  std::vector<Embedding> embeddings;

  static EmbeddedChunks embed(const std::vector<EvidenceChunk>& chunks, const EmbeddingProvider& provider);
};

std::vector<Embedding> embed_rationales(const std::vector<Rationale>& rationales, const EmbeddingProvider& provider);

/// Index of the chunk with the highest cosine to `probe`; ties go to the
/// smaller key.
std::size_t argmax_chunk(const Embedding& probe, const EmbeddedChunks& chunks);

std::vector<PairedEntry> pair_rationales(const std::vector<Rationale>& rationales,
                                         std::span<const Embedding> rationale_embeddings,
                                         const EmbeddedChunks& chunks);
std::vector<PairedEntry> pair_rationales(const std::vector<Rationale>& rationales,
                                         const std::vector<EvidenceChunk>& chunks, const EmbeddingProvider& provider);

struct PooledSelection {
  std::vector<PooledEntry> selected;  // the top k* chunks
  ElbowResult elbow;
};

PooledSelection pooled_select(std::span<const Embedding> rationale_embeddings, const EmbeddedChunks& chunks,
                              double tau);
PooledSelection pooled_select(const std::vector<Rationale>& rationales, const std::vector<EvidenceChunk>& chunks,
                              const EmbeddingProvider& provider, double tau);

/// Neighbours (index +/- 1, same document) of the selected keys that exist
/// in `index` and are not themselves selected.
std::vector<ExpandedEntry> expand_context(const ChunkKeySet& selected, const ChunkIndex& index);

SelectionResult select_evidence(const std::vector<Rationale>& rationales, const EmbeddedChunks& chunks,
                                std::span<const Embedding> rationale_embeddings, const EcseConfig& config);
SelectionResult select_evidence(const std::vector<Rationale>& rationales, const std::vector<EvidenceChunk>& chunks,
                                const EmbeddingProvider& provider, const EcseConfig& config);

}  // namespace evsel
