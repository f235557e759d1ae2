#include "evsel/poisoning.hpp"

#include <algorithm>
#include <cmath>

#include "evsel/errors.hpp"
#include "evsel/random.hpp"
#include "jsonl.hpp"

namespace evsel {

using detail::json;

std::string to_string(PoisonSource source) {
  return source == PoisonSource::LlmGenerated ? "llm-generated" : "file-supplied";
}

PoisonSource parse_poison_source(std::string_view text) {
  if (text == "llm" || text == "llm-generated") return PoisonSource::LlmGenerated;
  if (text == "file" || text == "file-supplied") return PoisonSource::FileSupplied;
  throw Error("unknown poison source '" + std::string(text) + "'");
}

std::size_t poison_sample_size(double fraction, std::size_t n) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("poisoning fraction must be in (0, 1]");
  const double raw = fraction * static_cast<double>(n);
  return std::min(n, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
}

namespace {

void shift_key(ChunkKey& key, const std::string& doc_id, std::size_t from) {
  if (key.doc_id == doc_id && key.chunk_index >= from) ++key.chunk_index;
}

}  // namespace

PoisonedCorpus poison_corpus(const std::vector<EvidenceChunk>& chunks, const std::vector<QaInstance>& qa,
                             const PoisonOptions& options, const Tokenizer& tokenizer) {
  if (options.per_instance == 0) throw Error("poisoning: per_instance must be at least 1");
  if (options.source == PoisonSource::LlmGenerated && options.provider == nullptr) {
    throw Error("poisoning: llm source requires a chat provider");
  }

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < qa.size(); ++i) {
    if (!qa[i].gold_chunk_keys.empty()) eligible.push_back(i);
  }
  const std::size_t count = poison_sample_size(options.fraction, eligible.size());
  std::vector<std::size_t> sampled;
  for (std::size_t s : sample_indices(eligible.size(), count, options.seed)) sampled.push_back(eligible[s]);

  if (options.source == PoisonSource::FileSupplied) {
    std::string missing;
    for (std::size_t i : sampled) {
      auto it = options.poison_texts.find(qa[i].query_id);
      if (it == options.poison_texts.end() || it->second.size() < options.per_instance) {
        missing += (missing.empty() ? "" : ", ") + qa[i].query_id;
      }
    }
    if (!missing.empty()) throw Error("poison file has no (or too few) poison texts for: " + missing);
  }

  // Working copy grouped by document, preserving corpus document order.
  std::vector<std::string> doc_order;
  std::map<std::string, std::vector<EvidenceChunk>> docs;
  for (const auto& c : chunks) {
    auto [it, inserted] = docs.try_emplace(c.doc_id);
    if (inserted) doc_order.push_back(c.doc_id);
    it->second.push_back(c);
    it->second.back().poison_label = c.poisoned();
  }
  for (auto& [id, list] : docs) {
    std::sort(list.begin(), list.end(),
              [](const EvidenceChunk& a, const EvidenceChunk& b) { return a.chunk_index < b.chunk_index; });
  }

  PoisonedCorpus out;
  out.qa = qa;
  const PromptTemplates& templates = options.templates != nullptr ? *options.templates : PromptTemplates::defaults();

  for (std::size_t qi : sampled) {
    const QaInstance& instance = out.qa[qi];
    const ChunkKey anchor = *instance.gold_chunk_keys.begin();
    auto doc_it = docs.find(anchor.doc_id);
    if (doc_it == docs.end()) {
      throw Error("poisoning: query '" + instance.query_id + "' has gold in unknown document '" + anchor.doc_id + "'");
    }
    auto& list = doc_it->second;
    auto anchor_chunk = std::find_if(list.begin(), list.end(),
                                     [&](const EvidenceChunk& c) { return c.chunk_index == anchor.chunk_index; });
    if (anchor_chunk == list.end()) {
      throw Error("poisoning: gold chunk " + anchor.str() + " of query '" + instance.query_id + "' not in corpus");
    }
    const std::string context = anchor_chunk->text;

    for (std::size_t j = 0; j < options.per_instance; ++j) {
      std::string text;
      if (options.source == PoisonSource::FileSupplied) {
        text = options.poison_texts.at(instance.query_id)[j];
      } else {
        auto req = build_poison_request(instance.query_text, context, instance.gold_answer.value_or("(not provided)"),
                                        templates);
        req.temperature = options.temperature;
        text = parse_poison_response(options.provider->complete(req));
      }
      if (text.empty()) throw Error("poisoning: empty poison text for query '" + instance.query_id + "'");

      const std::size_t at = anchor.chunk_index + 1 + j;
      for (auto& c : list) {
        if (c.chunk_index >= at) ++c.chunk_index;
      }
      for (auto& q : out.qa) {
        ChunkKeySet remapped;
        for (ChunkKey k : q.gold_chunk_keys) {
          shift_key(k, anchor.doc_id, at);
          remapped.insert(std::move(k));
        }
        q.gold_chunk_keys = std::move(remapped);
      }
      for (auto& r : out.records) shift_key(r.injected_chunk_key, anchor.doc_id, at);

      EvidenceChunk poison;
      poison.doc_id = anchor.doc_id;
      poison.chunk_index = at;
      poison.text = text;
      poison.token_count = tokenizer.count(text);
      poison.poison_label = true;
      list.push_back(poison);
      std::sort(list.begin(), list.end(),
                [](const EvidenceChunk& a, const EvidenceChunk& b) { return a.chunk_index < b.chunk_index; });

      out.records.push_back({instance.query_id, anchor.doc_id, {anchor.doc_id, at}, text, options.source});
    }
  }

  for (const auto& id : doc_order) {
    auto& list = docs.at(id);
    std::move(list.begin(), list.end(), std::back_inserter(out.chunks));
  }
  return out;
}

std::map<std::string, std::vector<std::string>> load_poison_texts(const std::filesystem::path& path) {
  std::map<std::string, std::vector<std::string>> out;
  detail::for_each_record(detail::read_file(path), path.string(), [&](const json& rec, std::size_t line) {
    detail::RecordReader r{rec, path.string(), line};
    out[r.string("query_id")].push_back(r.string("poison_text"));
  });
  return out;
}

std::vector<PoisonRecord> load_poison_records(const std::filesystem::path& path) {
  std::vector<PoisonRecord> out;
  detail::for_each_record(detail::read_file(path), path.string(), [&](const json& rec, std::size_t line) {
    detail::RecordReader r{rec, path.string(), line};
    PoisonRecord p;
    p.query_id = r.string("query_id");
    p.doc_id = r.string("doc_id");
    p.injected_chunk_key = {p.doc_id, r.index("chunk_index")};
    p.poison_text = r.string("poison_text");
    try {
      p.source = parse_poison_source(r.string("source"));
    } catch (const SchemaError&) {
      throw;
    } catch (const Error& e) {
      r.fail("source", e.what());
    }
    out.push_back(std::move(p));
  });
  return out;
}

void save_poison_records(const std::vector<PoisonRecord>& records, const std::filesystem::path& path) {
  std::vector<json> out;
  for (const auto& r : records) {
    out.push_back({{"query_id", r.query_id},
                   {"doc_id", r.doc_id},
                   {"chunk_index", r.injected_chunk_key.chunk_index},
                   {"poison_text", r.poison_text},
                   {"source", to_string(r.source)}});
  }
  detail::write_file(path, detail::write_records(out));
}

ChatRequest build_poison_request(const std::string& query, const std::string& context, const std::string& answer,
                                 const PromptTemplates& templates) {
  return {templates.poison_system,
          fill_template(templates.poison_user, {{"query", query}, {"context", context}, {"answer", answer}}), 0.0,
          512};
}

std::string parse_poison_response(const std::string& response) {
  const auto open = response.find('{');
  const auto close = response.rfind('}');
  if (open != std::string::npos && close != std::string::npos && close > open) {
    try {
      const json doc = json::parse(response.substr(open, close - open + 1));
      if (doc.is_object() && doc.contains("poisoned_corpus") && doc.at("poisoned_corpus").is_string()) {
        return doc.at("poisoned_corpus").get<std::string>();
      }
    } catch (const json::parse_error&) {
    }
  }
  static const std::string kHeading = "Poisoned Corpus:";
  const auto h = response.find(kHeading);
  if (h != std::string::npos) {
    std::string rest = response.substr(h + kHeading.size());
    const auto b = rest.find_first_not_of(" \t\r\n");
    const auto e = rest.find_last_not_of(" \t\r\n");
    if (b != std::string::npos) return rest.substr(b, e - b + 1);
  }
  throw Error("poisoning: could not find a poisoned passage in the model response");
}

// ---------------------------------------------------------------------------

DetectionMetrics detection_metrics(const std::vector<QueryVerification>& queries, const ChunkKeySet& poisoned) {
  DetectionMetrics m;
  for (const auto& q : queries) {
    ChunkKeySet flagged;
    for (const auto& d : q.decisions) {
      if (d.flagged) flagged.insert(d.chunk_key);
    }
    for (const auto& key : ChunkKeySet(q.selected.begin(), q.selected.end())) {
      const bool is_poison = poisoned.contains(key);
      if (flagged.contains(key)) {
        (is_poison ? m.true_positives : m.false_positives)++;
      } else if (is_poison) {
        ++m.false_negatives;
      }
    }
  }
  const auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  m.precision = ratio(m.true_positives, m.true_positives + m.false_positives);
  m.recall = ratio(m.true_positives, m.true_positives + m.false_negatives);
  m.f1 = (m.precision + m.recall) == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

FlagBreakdown flag_type_breakdown(const std::vector<QueryVerification>& queries, const ChunkKeySet& poisoned) {
  FlagBreakdown b;
  std::map<FlagType, std::size_t> counts{
      {FlagType::Instruction, 0}, {FlagType::Contradiction, 0}, {FlagType::Factual, 0}};
  std::size_t flagged_total = 0;
  for (const auto& q : queries) {
    std::map<ChunkKey, const VerifierDecision*> by_key;
    for (const auto& d : q.decisions) by_key[d.chunk_key] = &d;
    for (const auto& key : ChunkKeySet(q.selected.begin(), q.selected.end())) {
      if (!poisoned.contains(key)) continue;
      ++b.poisoned_selected;
      auto it = by_key.find(key);
      if (it == by_key.end()) continue;
      if (auto type = it->second->primary_type()) {
        ++counts[*type];
        ++flagged_total;
      }
    }
  }
  const double n = static_cast<double>(b.poisoned_selected);
  for (const auto& [type, c] : counts) b.percent[type] = n == 0.0 ? 0.0 : 100.0 * static_cast<double>(c) / n;
  b.total_percent = n == 0.0 ? 0.0 : 100.0 * static_cast<double>(flagged_total) / n;
  return b;
}

}  // namespace evsel
