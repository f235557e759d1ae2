#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evsel/corpus.hpp"
#include "evsel/embedding.hpp"
#include "evsel/llm.hpp"

namespace evsel {

struct PreferencePair {
  std::string query_id;
  std::string query_text;
  ChunkKey gold_chunk_key;
  std::string evidence_text;  // text of gold_chunk_key
  std::string chosen;
  std::string rejected;
  bool operator==(const PreferencePair&) const = default;
};

struct PrefOptions {
  std::size_t samples_per_query = 4;
  double temperature = 0.8;
  std::size_t pair_cap = 16;
  std::size_t workers = 1;
  const PromptTemplates* templates = nullptr;
};

struct PrefStats {
  std::size_t instances = 0;
  std::size_t with_pairs = 0;
  std::size_t no_gold = 0;
  std::size_t no_positives = 0;
  std::size_t no_negatives = 0;
  std::size_t generation_failures = 0;
};

struct PrefBuildResult {
  std::vector<PreferencePair> pairs;
  PrefStats stats;
};

/// Samples candidate rationales per instance and labels each by whether
/// its Stage-1 argmax over the instance's candidate chunks is a gold
/// chunk. Emits chosen x rejected pairs in ordinal order up to the cap.
PrefBuildResult build_preference_pairs(const ChatProvider& chat, const EmbeddingProvider& embedder,
                                       const std::vector<QaInstance>& qa, const std::vector<EvidenceChunk>& chunks,
                                       const PrefOptions& options = {});

/// "### Query\n{query}\n\n### Evidence\n{evidence}\n\n### Rationales\n"
std::string dpo_prompt(const std::string& query, const std::string& evidence);

struct DpoExportOptions {
  bool split = false;  // 80/10/10 train/val/test with a seeded shuffle
  std::uint64_t seed = 13;
};

/// Writes JSON Lines {"prompt", "chosen", "rejected", "query_id",
/// "query_text", "gold", "evidence"}. With split on, writes
/// <stem>.train.jsonl, <stem>.val.jsonl and <stem>.test.jsonl next to
/// `path`. Returns the files written.
std::vector<std::filesystem::path> export_dpo_file(const std::vector<PreferencePair>& pairs,
                                                   const std::filesystem::path& path,
                                                   const DpoExportOptions& options = {});

std::vector<PreferencePair> load_dpo_file(const std::filesystem::path& path);

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};
/// val = test = floor(n / 10); train takes the rest.
SplitSizes split_sizes(std::size_t n);

}  // namespace evsel
