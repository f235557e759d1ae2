#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "evsel/corpus.hpp"
#include "evsel/ecse.hpp"
#include "evsel/embedding.hpp"

namespace evsel {

struct RankedEntry {
  ChunkKey key;
  double score = 0.0;
  bool operator==(const RankedEntry&) const = default;
};

struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;  // descending score, unique keys
  bool operator==(const RankedList&) const = default;

  /// Keys of the first min(k, size) entries.
  std::vector<ChunkKey> top(std::size_t k) const;
};

/// Scores every chunk by cosine to the query embedding and sorts descending
/// (ties by key).
RankedList rank_by_query(const std::string& query_id, const std::string& query, const EmbeddedChunks& chunks,
                         const EmbeddingProvider& provider);

/// Top-k bi-encoder re-ranking; k larger than the pool returns everything.
std::vector<ChunkKey> rerank_topk(const std::string& query, const std::vector<EvidenceChunk>& chunks,
                                  const EmbeddingProvider& provider, std::size_t k);

/// Mean |final| across queries, rounded half-up, at least 1.
std::size_t matched_k(const std::vector<std::size_t>& selection_sizes);
std::size_t matched_k(const std::vector<SelectionResult>& selections);

/// External re-ranker outputs: {"query_id", "ranked": [{"doc_id","chunk_index","score"}]}.
/// Entries are re-sorted descending and checked for duplicate keys.
std::vector<RankedList> load_ranked_lists(const std::filesystem::path& path);
std::vector<RankedList> parse_ranked_lists(std::string_view jsonl, const std::string& source = "<memory>");
void save_ranked_lists(const std::vector<RankedList>& lists, const std::filesystem::path& path);

}  // namespace evsel
