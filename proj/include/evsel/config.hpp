#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "evsel/corpus.hpp"
#include "evsel/embedding.hpp"
#include "evsel/llm.hpp"

namespace evsel {

struct EmbedderConfig {
  std::string kind = "mock";  // mock | http
  std::string url;
  std::string model;
  std::string api_key_env;
  std::size_t dim = 0;  // 0: mock uses 64, http accepts the service's dimension
  std::size_t ngram = 3;
  std::string pins;       // mock only: JSON {"text": [..]}
  std::string cache_dir;  // empty disables the on-disk cache
  std::size_t batch_size = 64;
  double requests_per_second = 0.0;
  int max_retries = 3;
  int backoff_ms = 500;
};

struct ChatConfig {
  std::string kind = "scripted";  // scripted | http
  std::string url;
  std::string model;
  std::string api_key_env;
  double temperature = 0.0;
  int max_tokens = 2048;
  std::string script;          // scripted only
  std::string record_missing;  // scripted only
  double requests_per_second = 0.0;
  int max_retries = 3;
  int backoff_ms = 500;
};

struct EcseSettings {
  double tau = 1.0;
  bool expansion = true;
  std::size_t n_rationales = 10;
};

struct VerifierSettings {
  bool enabled = true;
  std::size_t max_chunk_chars = 0;
};

struct PoisonSettings {
  bool enabled = false;  // select/eval run on the poisoned corpus
  double fraction = 0.30;
  std::uint64_t seed = 42;
  std::string source = "file";  // file | llm
  std::string poison_file;
  std::size_t per_instance = 1;
};

struct PrefSettings {
  std::size_t samples_per_query = 4;
  double temperature = 0.8;
  std::size_t pair_cap = 16;
  bool split = true;
  std::uint64_t seed = 13;
};

struct ExternalBaseline {
  std::string name;
  std::string path;
};

struct EvalSettings {
  bool judge = false;
  std::vector<ExternalBaseline> external_baselines;
};

/// Everything a run needs. Relative paths resolve against the directory
/// containing the config file.
struct RunConfig {
  std::string documents;
  std::string qa;
  std::size_t chunk_size = 512;
  bool merge_short_tail = false;
  EmbedderConfig embedder;
  ChatConfig chat;
  EcseSettings ecse;
  VerifierSettings verifier;
  PoisonSettings poisoning;
  PrefSettings prefs;
  EvalSettings eval;
  std::map<std::string, std::string> prompts;  // PromptTemplates overrides by field name

  // Not part of the digest.
  std::string output_dir = "out";
  std::size_t workers = 1;
  std::filesystem::path base_dir = ".";

  std::filesystem::path resolve(const std::string& path) const;
  std::filesystem::path output() const { return resolve(output_dir); }
};

/// Parses a config document. Unknown keys and wrongly typed values throw
/// ConfigError naming the dotted field path.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// Field-level checks: value ranges, provider kinds, and that every
/// referenced input file exists.
void validate_config(const RunConfig& config);

/// Canonical JSON of every digest-relevant field, keys sorted. Operational
/// settings that cannot change results (output_dir, workers, base_dir,
/// embedder.cache_dir, chat.record_missing) are excluded.
nlohmann::json canonical_json(const RunConfig& config);
std::string config_digest(const RunConfig& config);

PromptTemplates effective_templates(const RunConfig& config);

std::shared_ptr<const EmbeddingProvider> make_embedder(const RunConfig& config);
std::shared_ptr<const ChatProvider> make_chat_provider(const RunConfig& config);

}  // namespace evsel
