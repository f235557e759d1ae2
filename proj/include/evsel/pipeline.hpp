#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "json.hpp"

#include "evsel/config.hpp"
#include "evsel/ecse.hpp"
#include "evsel/verifier.hpp"

namespace evsel {

/// Output layout shared by every command.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path chunks() const { return root / "chunks.jsonl"; }
  std::filesystem::path qa() const { return root / "qa.jsonl"; }
  std::filesystem::path poisoned_chunks() const { return root / "poisoned" / "chunks.jsonl"; }
  std::filesystem::path poisoned_qa() const { return root / "poisoned" / "qa.jsonl"; }
  std::filesystem::path poison_records() const { return root / "poisoned" / "records.jsonl"; }
  std::filesystem::path selection_dir() const { return root / "select"; }
  std::filesystem::path selection_report(const std::string& query_id) const;
  std::filesystem::path verification_report(const std::string& query_id) const;
  std::filesystem::path eval_report() const { return root / "eval" / "report.json"; }
  std::filesystem::path eval_table() const { return root / "eval" / "table.csv"; }
  std::filesystem::path prefs() const { return root / "prefs" / "prefs.jsonl"; }
};

/// Providers can be injected (tests); otherwise they come from the config.
struct Providers {
  std::shared_ptr<const EmbeddingProvider> embedder;
  std::shared_ptr<const ChatProvider> chat;

  static Providers from_config(const RunConfig& config);
};

nlohmann::json selection_report_json(const std::string& query_id, const std::string& config_digest,
                                     const std::vector<Rationale>& rationales, const SelectionResult& selection);
nlohmann::json verification_report_json(const std::string& query_id, const std::string& config_digest,
                                        const VerificationResult& verification);

struct LoadedSelection {
  std::vector<Rationale> rationales;
  std::vector<ChunkKey> final_set;
};
LoadedSelection parse_selection_report(const nlohmann::json& report);
VerificationResult parse_verification_report(const nlohmann::json& report);

// Commands. Each reads its inputs from the config and upstream artifacts in
// the output directory and writes only below that directory.
void cmd_chunk(const RunConfig& config);
void cmd_poison(const RunConfig& config, const Providers& providers);
void cmd_select(const RunConfig& config, const Providers& providers);
void cmd_eval(const RunConfig& config, const Providers& providers);
void cmd_build_prefs(const RunConfig& config, const Providers& providers);

/// Writes `doc` pretty-printed with a trailing newline, creating parents.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace evsel
