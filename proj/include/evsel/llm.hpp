#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "evsel/errors.hpp"
#include "evsel/http.hpp"

namespace evsel {

struct ChatRequest {
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.0;
  int max_tokens = 1024;

  /// SHA-256 over system_prompt, a 0x1E separator byte, and user_prompt.
  /// Keys the scripted provider.
  std::string digest() const;
};

/// Chat-completion contract. Implementations must be thread-safe.
class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual std::string name() const = 0;

  /// Validates the request and returns the model's text.
  std::string complete(const ChatRequest& request) const;

 protected:
  virtual std::string do_complete(const ChatRequest& request) const = 0;
};

/// Replays stored responses keyed by ChatRequest::digest(). Every request
/// is captured in call order so tests can inspect the prompts.
class ScriptedChatProvider final : public ChatProvider {
 public:
  ScriptedChatProvider() = default;

  /// Loads a JSON-Lines script of {"prompt_digest", "response"} records.
  static std::unique_ptr<ScriptedChatProvider> from_file(const std::filesystem::path& path);

  void add(std::string digest, std::string response);
  void add(const ChatRequest& request, std::string response) { add(request.digest(), std::move(response)); }

  /// When set, unmatched requests are appended to this file as
  /// {"prompt_digest", "system_prompt", "user_prompt", "response": null}
  /// before the error is raised, which is how new scripts are authored.
  void record_missing_to(std::filesystem::path path) { record_path_ = std::move(path); }

  std::vector<ChatRequest> captured() const;
  std::size_t size() const { return responses_.size(); }
  std::string name() const override { return "scripted"; }

 protected:
  std::string do_complete(const ChatRequest& request) const override;

 private:
  std::map<std::string, std::string> responses_;
  std::optional<std::filesystem::path> record_path_;
  mutable std::mutex mutex_;
  mutable std::vector<ChatRequest> captured_;
};

/// OpenAI-compatible chat endpoint: {"model", "messages", "temperature",
/// "max_tokens"} -> choices[0].message.content.
class HttpChatProvider final : public ChatProvider {
 public:
  struct Options {
    HttpEndpoint endpoint;
    std::string model;
    RetryPolicy retry;
    std::shared_ptr<RateLimiter> limiter;
  };

  explicit HttpChatProvider(Options options) : options_(std::move(options)) {}
  std::string name() const override { return "http:" + options_.model; }

 protected:
  std::string do_complete(const ChatRequest& request) const override;

 private:
  Options options_;
};

// ---------------------------------------------------------------------------
// Prompt templates. Placeholders are written as {name} and substituted
// verbatim; every template can be replaced from the run configuration.

struct PromptTemplates {
  std::string rationale_system;
  std::string rationale_user;  // {query}, {n}
  std::string verifier_system;
  std::string verifier_user;   // {query}, {rationales}, {chunk_summaries}, {chunk_text}
  std::string poison_system;
  std::string poison_user;     // {query}, {context}, {answer}
  std::string judge_system;
  std::string judge_user;      // {query}, {reference}, {generated}
  std::string answer_system;
  std::string answer_user;     // {query}, {evidence}

  static const PromptTemplates& defaults();
};

/// Replaces each {key} occurrence with its value; unknown keys are left.
std::string fill_template(const std::string& tmpl, const std::map<std::string, std::string>& values);

// ---------------------------------------------------------------------------
// Rationales

struct Rationale {
  std::size_t ordinal = 0;  // 1-based
  std::string tag;
  std::string body;

  /// "[tag] body" (or just body when untagged); this is the text embedded.
  std::string text() const;
  bool operator==(const Rationale&) const = default;
};

/// Serializes rationales as <rationale_i>[tag] body</rationale_i> lines.
std::string format_rationales(const std::vector<Rationale>& rationales);

/// Parses every <rationale_i>...</rationale_i> block. Malformed blocks are
/// skipped with a warning, ordinals are renumbered 1..m in the order of the
/// source ordinals, and at most `max_count` are kept (0 = unlimited).
/// Throws when nothing parses.
std::vector<Rationale> parse_rationales(const std::string& response, std::size_t max_count = 0);

struct RationaleOptions {
  std::size_t n_rationales = 10;
  double temperature = 0.0;
  int max_tokens = 2048;
  const PromptTemplates* templates = nullptr;  // defaults() when null
};

ChatRequest build_rationale_request(const std::string& query, const RationaleOptions& options);

std::vector<Rationale> generate_rationales(const ChatProvider& provider, const std::string& query,
                                           const RationaleOptions& options = {});

// ---------------------------------------------------------------------------
// Answer generation and judging

/// The judge's reply was not exactly "0" or "1".
class VerdictParseError : public Error {
 public:
  using Error::Error;
};

ChatRequest build_answer_request(const std::string& query, const std::vector<std::string>& evidence,
                                 const PromptTemplates& templates = PromptTemplates::defaults());
std::string generate_answer(const ChatProvider& provider, const std::string& query,
                            const std::vector<std::string>& evidence,
                            const PromptTemplates& templates = PromptTemplates::defaults());

ChatRequest build_judge_request(const std::string& query, const std::string& reference,
                                const std::string& generated,
                                const PromptTemplates& templates = PromptTemplates::defaults());
/// Strict verdict parse: surrounding whitespace is ignored, anything other
/// than "0" or "1" is rejected.
std::optional<int> parse_verdict(const std::string& response);
int judge_answer(const ChatProvider& provider, const std::string& query, const std::string& reference,
                 const std::string& generated, const PromptTemplates& templates = PromptTemplates::defaults());

}  // namespace evsel
