#include "evsel/config.hpp"

#include <cmath>
#include <set>

#include "evsel/digest.hpp"
#include "evsel/embedding_http.hpp"
#include "evsel/errors.hpp"
#include "jsonl.hpp"

namespace evsel {

using nlohmann::json;

namespace {

/// Reads one JSON object, checking types and rejecting unknown keys.
class Section {
 public:
  Section(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected an object");
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return;
    const json& v = *it;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path(key), "expected a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path(key), "expected a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path(key), "expected a number");
      out = v.get<T>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(path(key), "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
          throw ConfigError(path(key), "must be non-negative");
        }
      }
      out = v.get<T>();
    }
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.contains(key)) throw ConfigError(path(key), "unknown key");
    }
  }

 private:
  const json& obj_;
  std::string prefix_;
  std::set<std::string> seen_;
};

const std::vector<std::pair<std::string, std::string PromptTemplates::*>>& template_fields() {
  static const std::vector<std::pair<std::string, std::string PromptTemplates::*>> fields{
      {"rationale_system", &PromptTemplates::rationale_system},
      {"rationale_user", &PromptTemplates::rationale_user},
      {"verifier_system", &PromptTemplates::verifier_system},
      {"verifier_user", &PromptTemplates::verifier_user},
      {"poison_system", &PromptTemplates::poison_system},
      {"poison_user", &PromptTemplates::poison_user},
      {"judge_system", &PromptTemplates::judge_system},
      {"judge_user", &PromptTemplates::judge_user},
      {"answer_system", &PromptTemplates::answer_system},
      {"answer_user", &PromptTemplates::answer_user},
  };
  return fields;
}

}  // namespace

std::filesystem::path RunConfig::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  Section root(doc, "");
  root.read("documents", c.documents);
  root.read("qa", c.qa);
  root.read("chunk_size", c.chunk_size);
  root.read("merge_short_tail", c.merge_short_tail);
  root.read("output_dir", c.output_dir);
  root.read("workers", c.workers);

  if (const json* e = root.child("embedder")) {
    Section s(*e, "embedder");
    auto& x = c.embedder;
    s.read("kind", x.kind);
    s.read("url", x.url);
    s.read("model", x.model);
    s.read("api_key_env", x.api_key_env);
    s.read("dim", x.dim);
    s.read("ngram", x.ngram);
    s.read("pins", x.pins);
    s.read("cache_dir", x.cache_dir);
    s.read("batch_size", x.batch_size);
    s.read("requests_per_second", x.requests_per_second);
    s.read("max_retries", x.max_retries);
    s.read("backoff_ms", x.backoff_ms);
    s.finish();
  }
  if (const json* e = root.child("chat")) {
    Section s(*e, "chat");
    auto& x = c.chat;
    s.read("kind", x.kind);
    s.read("url", x.url);
    s.read("model", x.model);
    s.read("api_key_env", x.api_key_env);
    s.read("temperature", x.temperature);
    s.read("max_tokens", x.max_tokens);
    s.read("script", x.script);
    s.read("record_missing", x.record_missing);
    s.read("requests_per_second", x.requests_per_second);
    s.read("max_retries", x.max_retries);
    s.read("backoff_ms", x.backoff_ms);
    s.finish();
  }
  if (const json* e = root.child("ecse")) {
    Section s(*e, "ecse");
    s.read("tau", c.ecse.tau);
    s.read("expansion", c.ecse.expansion);
    s.read("n_rationales", c.ecse.n_rationales);
    s.finish();
  }
  if (const json* e = root.child("verifier")) {
    Section s(*e, "verifier");
    s.read("enabled", c.verifier.enabled);
    s.read("max_chunk_chars", c.verifier.max_chunk_chars);
    s.finish();
  }
  if (const json* e = root.child("poisoning")) {
    Section s(*e, "poisoning");
    auto& x = c.poisoning;
    s.read("enabled", x.enabled);
    s.read("fraction", x.fraction);
    s.read("seed", x.seed);
    s.read("source", x.source);
    s.read("poison_file", x.poison_file);
    s.read("per_instance", x.per_instance);
    s.finish();
  }
  if (const json* e = root.child("prefs")) {
    Section s(*e, "prefs");
    auto& x = c.prefs;
    s.read("samples_per_query", x.samples_per_query);
    s.read("temperature", x.temperature);
    s.read("pair_cap", x.pair_cap);
    s.read("split", x.split);
    s.read("seed", x.seed);
    s.finish();
  }
  if (const json* e = root.child("eval")) {
    Section s(*e, "eval");
    s.read("judge", c.eval.judge);
    if (const json* list = s.child("external_baselines")) {
      if (!list->is_array()) throw ConfigError("eval.external_baselines", "expected an array");
      for (std::size_t i = 0; i < list->size(); ++i) {
        Section b((*list)[i], "eval.external_baselines[" + std::to_string(i) + "]");
        ExternalBaseline eb;
        b.read("name", eb.name);
        b.read("path", eb.path);
        b.finish();
        c.eval.external_baselines.push_back(std::move(eb));
      }
    }
    s.finish();
  }
  if (const json* e = root.child("prompts")) {
    Section s(*e, "prompts");
    for (const auto& [name, member] : template_fields()) {
      std::string value;
      s.read(name, value);
      if (!value.empty()) c.prompts[name] = value;
    }
    s.finish();
  }
  root.finish();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(detail::read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", path.string() + ": invalid JSON: " + e.what());
  }
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return parse_config(doc, base);
}

void validate_config(const RunConfig& c) {
  const auto need_file = [&](const std::string& field, const std::string& value) {
    if (value.empty()) throw ConfigError(field, "required");
    if (!std::filesystem::exists(c.resolve(value))) {
      throw ConfigError(field, "file not found: " + c.resolve(value).string());
    }
  };
  const auto optional_file = [&](const std::string& field, const std::string& value) {
    if (!value.empty()) need_file(field, value);
  };

  need_file("documents", c.documents);
  need_file("qa", c.qa);
  if (c.chunk_size == 0) throw ConfigError("chunk_size", "must be at least 1");
  if (c.workers == 0) throw ConfigError("workers", "must be at least 1");

  if (c.embedder.kind == "mock") {
    if (c.embedder.ngram == 0) throw ConfigError("embedder.ngram", "must be positive");
    optional_file("embedder.pins", c.embedder.pins);
  } else if (c.embedder.kind == "http") {
    if (c.embedder.url.empty()) throw ConfigError("embedder.url", "required for http");
    if (c.embedder.model.empty()) throw ConfigError("embedder.model", "required for http");
  } else {
    throw ConfigError("embedder.kind", "must be 'mock' or 'http'");
  }

  if (c.chat.kind == "scripted") {
    need_file("chat.script", c.chat.script);
  } else if (c.chat.kind == "http") {
    if (c.chat.url.empty()) throw ConfigError("chat.url", "required for http");
    if (c.chat.model.empty()) throw ConfigError("chat.model", "required for http");
  } else {
    throw ConfigError("chat.kind", "must be 'scripted' or 'http'");
  }
  if (!(c.chat.temperature >= 0.0)) throw ConfigError("chat.temperature", "must be >= 0");
  if (c.chat.max_tokens <= 0) throw ConfigError("chat.max_tokens", "must be positive");

  if (!std::isfinite(c.ecse.tau)) throw ConfigError("ecse.tau", "must be finite");
  if (c.ecse.n_rationales == 0) throw ConfigError("ecse.n_rationales", "must be at least 1");

  if (!(c.poisoning.fraction > 0.0 && c.poisoning.fraction <= 1.0)) {
    throw ConfigError("poisoning.fraction", "must be in (0, 1]");
  }
  if (c.poisoning.source != "file" && c.poisoning.source != "llm") {
    throw ConfigError("poisoning.source", "must be 'file' or 'llm'");
  }
  if (c.poisoning.per_instance == 0) throw ConfigError("poisoning.per_instance", "must be at least 1");
  optional_file("poisoning.poison_file", c.poisoning.poison_file);

  if (c.prefs.samples_per_query < 2) throw ConfigError("prefs.samples_per_query", "must be at least 2");
  if (c.prefs.pair_cap == 0) throw ConfigError("prefs.pair_cap", "must be at least 1");
  if (!(c.prefs.temperature >= 0.0)) throw ConfigError("prefs.temperature", "must be >= 0");

  for (std::size_t i = 0; i < c.eval.external_baselines.size(); ++i) {
    const auto& b = c.eval.external_baselines[i];
    const std::string f = "eval.external_baselines[" + std::to_string(i) + "]";
    if (b.name.empty()) throw ConfigError(f + ".name", "required");
    need_file(f + ".path", b.path);
  }
}

json canonical_json(const RunConfig& c) {
  json ext = json::array();
  for (const auto& b : c.eval.external_baselines) ext.push_back({{"name", b.name}, {"path", b.path}});
  return {
      {"documents", c.documents},
      {"qa", c.qa},
      {"chunk_size", c.chunk_size},
      {"merge_short_tail", c.merge_short_tail},
      {"embedder",
       {{"kind", c.embedder.kind},
        {"url", c.embedder.url},
        {"model", c.embedder.model},
        {"api_key_env", c.embedder.api_key_env},
        {"dim", c.embedder.dim},
        {"ngram", c.embedder.ngram},
        {"pins", c.embedder.pins},
        {"batch_size", c.embedder.batch_size},
        {"requests_per_second", c.embedder.requests_per_second},
        {"max_retries", c.embedder.max_retries},
        {"backoff_ms", c.embedder.backoff_ms}}},
      {"chat",
       {{"kind", c.chat.kind},
        {"url", c.chat.url},
        {"model", c.chat.model},
        {"api_key_env", c.chat.api_key_env},
        {"temperature", c.chat.temperature},
        {"max_tokens", c.chat.max_tokens},
        {"script", c.chat.script},
        {"requests_per_second", c.chat.requests_per_second},
        {"max_retries", c.chat.max_retries},
        {"backoff_ms", c.chat.backoff_ms}}},
      {"ecse", {{"tau", c.ecse.tau}, {"expansion", c.ecse.expansion}, {"n_rationales", c.ecse.n_rationales}}},
      {"verifier", {{"enabled", c.verifier.enabled}, {"max_chunk_chars", c.verifier.max_chunk_chars}}},
      {"poisoning",
       {{"enabled", c.poisoning.enabled},
        {"fraction", c.poisoning.fraction},
        {"seed", c.poisoning.seed},
        {"source", c.poisoning.source},
        {"poison_file", c.poisoning.poison_file},
        {"per_instance", c.poisoning.per_instance}}},
      {"prefs",
       {{"samples_per_query", c.prefs.samples_per_query},
        {"temperature", c.prefs.temperature},
        {"pair_cap", c.prefs.pair_cap},
        {"split", c.prefs.split},
        {"seed", c.prefs.seed}}},
      {"eval", {{"judge", c.eval.judge}, {"external_baselines", std::move(ext)}}},
      {"prompts", c.prompts},
  };
}

std::string config_digest(const RunConfig& config) { return sha256_hex(canonical_json(config).dump()); }

PromptTemplates effective_templates(const RunConfig& config) {
  PromptTemplates t = PromptTemplates::defaults();
  for (const auto& [name, member] : template_fields()) {
    auto it = config.prompts.find(name);
    if (it != config.prompts.end()) t.*member = it->second;
  }
  return t;
}

std::shared_ptr<const EmbeddingProvider> make_embedder(const RunConfig& config) {
  const auto& e = config.embedder;
  std::shared_ptr<const EmbeddingProvider> provider;
  if (e.kind == "mock") {
    auto mock = std::make_shared<MockEmbeddingProvider>(MockEmbeddingProvider::Options{e.dim == 0 ? 64 : e.dim, e.ngram});
    if (!e.pins.empty()) mock->load_pins(config.resolve(e.pins));
    provider = std::move(mock);
  } else if (e.kind == "http") {
    HttpEmbeddingProvider::Options o;
    o.endpoint = {e.url, e.api_key_env};
    o.model = e.model;
    o.dim = e.dim;
    o.batch_size = e.batch_size;
    o.retry = {e.max_retries, std::chrono::milliseconds(e.backoff_ms), 2.0};
    o.limiter = std::make_shared<RateLimiter>(e.requests_per_second);
    provider = std::make_shared<HttpEmbeddingProvider>(std::move(o));
  } else {
    throw ConfigError("embedder.kind", "must be 'mock' or 'http'");
  }
  if (!e.cache_dir.empty()) {
    provider = std::make_shared<CachedEmbeddingProvider>(std::move(provider), config.resolve(e.cache_dir));
  }
  return provider;
}

std::shared_ptr<const ChatProvider> make_chat_provider(const RunConfig& config) {
  const auto& c = config.chat;
  if (c.kind == "scripted") {
    if (c.script.empty()) throw ConfigError("chat.script", "required for scripted");
    std::shared_ptr<ScriptedChatProvider> p = ScriptedChatProvider::from_file(config.resolve(c.script));
    if (!c.record_missing.empty()) p->record_missing_to(config.resolve(c.record_missing));
    return p;
  }
  if (c.kind == "http") {
    HttpChatProvider::Options o;
    o.endpoint = {c.url, c.api_key_env};
    o.model = c.model;
    o.retry = {c.max_retries, std::chrono::milliseconds(c.backoff_ms), 2.0};
    o.limiter = std::make_shared<RateLimiter>(c.requests_per_second);
    return std::make_shared<HttpChatProvider>(std::move(o));
  }
  throw ConfigError("chat.kind", "must be 'scripted' or 'http'");
}

}  // namespace evsel
