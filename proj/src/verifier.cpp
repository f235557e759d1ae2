#include "evsel/verifier.hpp"

#include <algorithm>
#include <cctype>

#include "evsel/errors.hpp"
#include "evsel/log.hpp"
#include "jsonl.hpp"

namespace evsel {

using detail::json;

std::string to_string(FlagType type) {
  switch (type) {
    case FlagType::Instruction:
      return "Instruction";
    case FlagType::Contradiction:
      return "Contradiction";
    case FlagType::Factual:
      return "Factual";
  }
  return "Instruction";
}

std::optional<FlagType> parse_flag_type(std::string_view text) {
  std::string lower;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c)) == 0) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (lower == "instruction") return FlagType::Instruction;
  if (lower == "contradiction") return FlagType::Contradiction;
  if (lower == "factual") return FlagType::Factual;
  return std::nullopt;
}

std::optional<FlagType> VerifierDecision::primary_type() const {
  if (!flagged || flag_types.empty()) return std::nullopt;
  return flag_types.front();
}

ChatRequest build_verifier_request(const std::string& query, const std::vector<Rationale>& rationales,
                                   const std::vector<std::string>& prior_summaries, const EvidenceChunk& chunk,
                                   const VerifierOptions& options) {
  if (rationales.empty()) throw Error("verifier: rationales are required as flagging instructions");
  const PromptTemplates& t = options.templates != nullptr ? *options.templates : PromptTemplates::defaults();

  std::string instructions;
  for (const auto& r : rationales) instructions += "  " + std::to_string(r.ordinal) + ". " + r.body + "\n";
  std::string summaries;
  for (std::size_t i = 0; i < prior_summaries.size(); ++i) {
    summaries += "  " + std::to_string(i + 1) + ". " + prior_summaries[i] + "\n";
  }
  if (summaries.empty()) summaries = "  (none)\n";
  std::string text = chunk.text;
  if (options.max_chunk_chars > 0 && text.size() > options.max_chunk_chars) text.resize(options.max_chunk_chars);

  ChatRequest req;
  req.system_prompt = t.verifier_system;
  req.user_prompt = fill_template(t.verifier_user, {{"query", query},
                                                    {"rationales", instructions},
                                                    {"chunk_summaries", summaries},
                                                    {"chunk_text", text}});
  req.temperature = 0.0;
  req.max_tokens = options.max_tokens;
  return req;
}

namespace {

VerifierDecision unverifiable(const ChunkKey& key, const std::string& why) {
  warn("verifier: " + key.str() + ": " + why + "; chunk kept");
  return {key, false, {}, kUnverifiableSummary};
}

}  // namespace

VerifierDecision parse_verifier_response(const ChunkKey& key, const std::string& response) {
  const auto open = response.find('{');
  const auto close = response.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    return unverifiable(key, "response contains no JSON object");
  }
  json doc;
  try {
    doc = json::parse(response.substr(open, close - open + 1));
  } catch (const json::parse_error&) {
    return unverifiable(key, "response is not valid JSON");
  }
  if (!doc.is_object() || !doc.contains("flagged") || !doc.at("flagged").is_boolean()) {
    return unverifiable(key, "response lacks a boolean 'flagged'");
  }

  VerifierDecision d;
  d.chunk_key = key;
  d.flagged = doc.at("flagged").get<bool>();
  if (doc.contains("chunk_summary") && doc.at("chunk_summary").is_string()) {
    d.chunk_summary = doc.at("chunk_summary").get<std::string>();
  }
  if (d.chunk_summary.empty()) d.chunk_summary = "(no summary)";

  if (doc.contains("flag_types") && doc.at("flag_types").is_array()) {
    for (const auto& item : doc.at("flag_types")) {
      const std::string raw = item.is_string() ? item.get<std::string>() : item.dump();
      auto type = parse_flag_type(raw);
      if (!type) {
        warn("verifier: " + key.str() + ": unknown flag type '" + raw + "' counted as Instruction");
        type = FlagType::Instruction;
      }
      if (std::find(d.flag_types.begin(), d.flag_types.end(), *type) == d.flag_types.end()) {
        d.flag_types.push_back(*type);
      }
    }
  }
  if (d.flagged && d.flag_types.empty()) {
    warn("verifier: " + key.str() + ": flagged without a flag type; counted as Instruction");
    d.flag_types.push_back(FlagType::Instruction);
  }
  if (!d.flagged && !d.flag_types.empty()) {
    warn("verifier: " + key.str() + ": flag types given for an unflagged chunk were dropped");
    d.flag_types.clear();
  }
  return d;
}

VerifierDecision verify_chunk(const ChatProvider& provider, const std::string& query,
                              const std::vector<Rationale>& rationales,
                              const std::vector<std::string>& prior_summaries, const EvidenceChunk& chunk,
                              const VerifierOptions& options) {
  const auto request = build_verifier_request(query, rationales, prior_summaries, chunk, options);
  return parse_verifier_response(chunk.key(), provider.complete(request));
}

VerificationResult verify_all(const ChatProvider& provider, const std::string& query,
                              const std::vector<Rationale>& rationales, const std::vector<EvidenceChunk>& chunks,
                              const VerifierOptions& options) {
  if (chunks.empty()) throw Error("verify_all: nothing to verify");
  VerificationResult result;
  std::vector<std::string> summaries;
  ChunkKeySet flagged;
  for (const auto& chunk : chunks) {
    VerifierDecision d;
    try {
      d = verify_chunk(provider, query, rationales, summaries, chunk, options);
    } catch (const Error& e) {
      result.incomplete = true;
      result.error = e.what();
      warn("verifier: pass aborted at " + chunk.key().str() + ": " + e.what());
      break;
    }
    summaries.push_back(d.chunk_summary);
    if (d.flagged) flagged.insert(d.chunk_key);
    result.decisions.push_back(std::move(d));
  }
  ChunkKeySet kept;
  for (const auto& c : chunks) {
    if (!flagged.contains(c.key())) kept.insert(c.key());
  }
  result.kept.assign(kept.begin(), kept.end());
  return result;
}

VerificationResult verify_selection(const ChatProvider& provider, const std::string& query,
                                    const std::vector<Rationale>& rationales, const SelectionResult& selection,
                                    const ChunkIndex& index, const VerifierOptions& options) {
  std::vector<EvidenceChunk> ordered;
  ordered.reserve(selection.final_set.size());
  for (const auto& key : selection.final_keys()) {
    const EvidenceChunk* c = index.find(key);
    if (c == nullptr) throw Error("verify_selection: unknown chunk " + key.str());
    ordered.push_back(*c);
  }
  return verify_all(provider, query, rationales, ordered, options);
}

}  // namespace evsel
