#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "evsel/corpus.hpp"
#include "evsel/ecse.hpp"
#include "evsel/llm.hpp"

namespace evsel {

enum class FlagType { Instruction, Contradiction, Factual };

std::string to_string(FlagType type);
/// Case-insensitive match against the closed vocabulary.
std::optional<FlagType> parse_flag_type(std::string_view text);

struct VerifierDecision {
  ChunkKey chunk_key;
  bool flagged = false;
  std::vector<FlagType> flag_types;  // model order, deduplicated
  std::string chunk_summary;

  /// First reported type; used to bucket flags without double counting.
  std::optional<FlagType> primary_type() const;
};

struct VerifierOptions {
  std::size_t max_chunk_chars = 0;  // 0 sends the chunk verbatim
  int max_tokens = 512;
  const PromptTemplates* templates = nullptr;
};

inline constexpr const char* kUnverifiableSummary = "unverifiable response";

ChatRequest build_verifier_request(const std::string& query, const std::vector<Rationale>& rationales,
                                   const std::vector<std::string>& prior_summaries, const EvidenceChunk& chunk,
                                   const VerifierOptions& options = {});

/// Parses the structured decision. Unparseable responses keep the chunk.
VerifierDecision parse_verifier_response(const ChunkKey& key, const std::string& response);

VerifierDecision verify_chunk(const ChatProvider& provider, const std::string& query,
                              const std::vector<Rationale>& rationales,
                              const std::vector<std::string>& prior_summaries, const EvidenceChunk& chunk,
                              const VerifierOptions& options = {});

struct VerificationResult {
  std::vector<VerifierDecision> decisions;  // in verification order
  std::vector<ChunkKey> kept;               // ascending
  bool incomplete = false;
  std::string error;                        // set when incomplete
};

/// Verifies `chunks` in order, chaining each summary into later prompts.
/// A provider failure stops the pass; chunks left unverified are kept.
VerificationResult verify_all(const ChatProvider& provider, const std::string& query,
                              const std::vector<Rationale>& rationales, const std::vector<EvidenceChunk>& chunks,
                              const VerifierOptions& options = {});

/// Verifies selection.final_set in document order.
VerificationResult verify_selection(const ChatProvider& provider, const std::string& query,
                                    const std::vector<Rationale>& rationales, const SelectionResult& selection,
                                    const ChunkIndex& index, const VerifierOptions& options = {});

}  // namespace evsel
