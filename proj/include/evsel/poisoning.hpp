#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "evsel/corpus.hpp"
#include "evsel/llm.hpp"
#include "evsel/verifier.hpp"

namespace evsel {

enum class PoisonSource { LlmGenerated, FileSupplied };

std::string to_string(PoisonSource source);
PoisonSource parse_poison_source(std::string_view text);

struct PoisonRecord {
  std::string query_id;
  std::string doc_id;
  ChunkKey injected_chunk_key;
  std::string poison_text;
  PoisonSource source = PoisonSource::FileSupplied;
  bool operator==(const PoisonRecord&) const = default;
};

struct PoisonOptions {
  double fraction = 0.30;
  std::uint64_t seed = 42;
  PoisonSource source = PoisonSource::FileSupplied;
  std::size_t per_instance = 1;                  // injected chunks per instance
  std::map<std::string, std::vector<std::string>> poison_texts;  // file source: query_id -> texts
  const ChatProvider* provider = nullptr;        // llm source
  double temperature = 0.0;
  const PromptTemplates* templates = nullptr;
};

struct PoisonedCorpus {
  std::vector<EvidenceChunk> chunks;
  std::vector<QaInstance> qa;  // gold keys remapped
  std::vector<PoisonRecord> records;
};

/// ceil(fraction * n) without being fooled by binary rounding.
std::size_t poison_sample_size(double fraction, std::size_t n);

/// Injects poison chunks right after the first gold chunk of a seeded
/// sample of QA instances, re-indexing later chunks of that document and
/// remapping every gold key and earlier record accordingly. All chunks of
/// the result carry a poison label. Instances without gold are never
/// sampled.
PoisonedCorpus poison_corpus(const std::vector<EvidenceChunk>& chunks, const std::vector<QaInstance>& qa,
                             const PoisonOptions& options, const Tokenizer& tokenizer);

/// Poison file: JSON Lines {"query_id", "poison_text"}; a query may appear
/// several times when more than one chunk is injected per instance.
std::map<std::string, std::vector<std::string>> load_poison_texts(const std::filesystem::path& path);

std::vector<PoisonRecord> load_poison_records(const std::filesystem::path& path);
void save_poison_records(const std::vector<PoisonRecord>& records, const std::filesystem::path& path);

ChatRequest build_poison_request(const std::string& query, const std::string& context, const std::string& answer,
                                 const PromptTemplates& templates = PromptTemplates::defaults());
/// Extracts the poisoned passage from a JSON reply {"poisoned_corpus": ...}
/// or from the text following a "Poisoned Corpus:" heading.
std::string parse_poison_response(const std::string& response);

// ---------------------------------------------------------------------------
// Detection metrics

/// One query's selected set and the verifier decisions over it. Selected
/// chunks without a decision count as kept.
struct QueryVerification {
  std::string query_id;
  std::vector<ChunkKey> selected;
  std::vector<VerifierDecision> decisions;
};

struct DetectionMetrics {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Micro-averaged over all queries; 0/0 is 0.
DetectionMetrics detection_metrics(const std::vector<QueryVerification>& queries, const ChunkKeySet& poisoned);

struct FlagBreakdown {
  std::size_t poisoned_selected = 0;
  std::map<FlagType, double> percent;  // all three types present
  double total_percent = 0.0;
};

/// Percentage of selected poisoned chunks flagged, bucketed by each
/// decision's primary flag type so that the buckets add up to the total.
FlagBreakdown flag_type_breakdown(const std::vector<QueryVerification>& queries, const ChunkKeySet& poisoned);

}  // namespace evsel
