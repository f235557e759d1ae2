#include "evsel/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "evsel/errors.hpp"
#include "evsel/log.hpp"
#include "jsonl.hpp"

namespace evsel {

using detail::json;
using detail::RecordReader;

std::string ChunkKey::str() const { return doc_id + "#" + std::to_string(chunk_index); }

std::vector<TokenSpan> WhitespaceTokenizer::tokenize(std::string_view text) const {
  std::vector<TokenSpan> spans;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])) != 0) ++i;
    if (i >= text.size()) break;
    const std::size_t start = i;
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])) == 0) ++i;
    spans.push_back({start, i});
  }
  return spans;
}

std::vector<EvidenceChunk> chunk_document(const Document& doc, const Tokenizer& tokenizer,
                                          const ChunkOptions& options) {
  if (options.chunk_size == 0) throw Error("chunk_size must be at least 1");
  const auto tokens = tokenizer.tokenize(doc.text);
  if (tokens.empty()) throw Error("document '" + doc.doc_id + "' is empty");

  // Window boundaries as token offsets.
  std::vector<std::pair<std::size_t, std::size_t>> windows;
  for (std::size_t start = 0; start < tokens.size(); start += options.chunk_size) {
    windows.emplace_back(start, std::min(tokens.size(), start + options.chunk_size));
  }
  if (options.merge_short_tail && windows.size() > 1) {
    const auto [tail_begin, tail_end] = windows.back();
    if (2 * (tail_end - tail_begin) < options.chunk_size) {
      windows.pop_back();
      windows.back().second = tail_end;
    }
  }

  std::vector<EvidenceChunk> chunks;
  chunks.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto [first, last] = windows[i];
    const std::size_t begin = tokens[first].begin;
    const std::size_t end = tokens[last - 1].end;
    EvidenceChunk c;
    c.doc_id = doc.doc_id;
    c.chunk_index = i;
    c.text = doc.text.substr(begin, end - begin);
    c.token_count = last - first;
    c.char_start = begin;
    c.char_end = end;
    chunks.push_back(std::move(c));
  }
  return chunks;
}

std::vector<EvidenceChunk> chunk_corpus(const std::vector<Document>& docs, const Tokenizer& tokenizer,
                                        const ChunkOptions& options) {
  std::set<std::string> seen;
  std::vector<EvidenceChunk> all;
  for (const auto& doc : docs) {
    if (!seen.insert(doc.doc_id).second) throw Error("duplicate doc_id '" + doc.doc_id + "'");
    auto chunks = chunk_document(doc, tokenizer, options);
    std::move(chunks.begin(), chunks.end(), std::back_inserter(all));
  }
  return all;
}

void resolve_gold_spans(std::vector<QaInstance>& qa, const std::vector<EvidenceChunk>& chunks) {
  std::map<std::string, std::vector<const EvidenceChunk*>> by_doc;
  for (const auto& c : chunks) by_doc[c.doc_id].push_back(&c);

  for (auto& instance : qa) {
    for (const auto& span : instance.gold_spans) {
      auto it = by_doc.find(span.doc_id);
      if (it == by_doc.end()) {
        throw Error("query '" + instance.query_id + "': gold span names unknown document '" + span.doc_id + "'");
      }
      bool hit = false;
      for (const EvidenceChunk* c : it->second) {
        if (!c->char_start || !c->char_end) continue;
        if (*c->char_start < span.char_end && span.char_start < *c->char_end) {
          instance.gold_chunk_keys.insert(c->key());
          hit = true;
        }
      }
      if (!hit) {
        warn("query '" + instance.query_id + "': gold span [" + std::to_string(span.char_start) + ", " +
             std::to_string(span.char_end) + ") in '" + span.doc_id + "' overlaps no chunk");
      }
    }
    instance.gold_spans.clear();
  }
}

std::vector<EvidenceChunk> candidate_chunks(const QaInstance& qa, const std::vector<EvidenceChunk>& chunks) {
  if (qa.doc_ids.empty()) return chunks;
  const std::set<std::string> wanted(qa.doc_ids.begin(), qa.doc_ids.end());
  std::vector<EvidenceChunk> out;
  std::copy_if(chunks.begin(), chunks.end(), std::back_inserter(out),
               [&](const EvidenceChunk& c) { return wanted.contains(c.doc_id); });
  return out;
}

ChunkIndex::ChunkIndex(const std::vector<EvidenceChunk>& chunks) {
  for (const auto& c : chunks) {
    if (!by_key_.emplace(c.key(), &c).second) throw Error("duplicate chunk key " + c.key().str());
    ++counts_[c.doc_id];
  }
}

const EvidenceChunk* ChunkIndex::find(const ChunkKey& key) const {
  auto it = by_key_.find(key);
  return it == by_key_.end() ? nullptr : it->second;
}

std::size_t ChunkIndex::doc_chunk_count(const std::string& doc_id) const {
  auto it = counts_.find(doc_id);
  return it == counts_.end() ? 0 : it->second;
}

// ---------------------------------------------------------------------------
// Persistence

std::vector<Document> parse_documents(std::string_view jsonl, const std::string& source) {
  std::vector<Document> docs;
  std::set<std::string> seen;
  detail::for_each_record(jsonl, source, [&](const json& rec, std::size_t line) {
    RecordReader r{rec, source, line};
    Document d;
    d.doc_id = r.string("doc_id");
    d.text = r.string("text");
    if (d.text.find_first_not_of(" \t\r\n") == std::string::npos) r.fail("text", "must not be blank");
    if (r.has("metadata")) {
      const json& m = rec.at("metadata");
      if (!m.is_object()) r.fail("metadata", "expected an object");
      for (const auto& [k, v] : m.items()) {
        if (!v.is_string()) r.fail("metadata." + k, "expected a string");
        d.metadata.emplace(k, v.get<std::string>());
      }
    }
    if (!seen.insert(d.doc_id).second) r.fail("doc_id", "duplicate '" + d.doc_id + "'");
    docs.push_back(std::move(d));
  });
  return docs;
}

std::vector<QaInstance> parse_qa(std::string_view jsonl, const std::string& source) {
  std::vector<QaInstance> qa;
  detail::for_each_record(jsonl, source, [&](const json& rec, std::size_t line) {
    RecordReader r{rec, source, line};
    QaInstance q;
    q.query_id = r.string("query_id");
    q.query_text = r.string("query_text");
    const json& gold = r.require("gold");
    if (!gold.is_array()) r.fail("gold", "expected an array");
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const std::string field = "gold[" + std::to_string(i) + "]";
      const json& g = gold[i];
      if (!g.is_object()) r.fail(field, "expected an object");
      RecordReader gr{g, source, line};
      try {
        const std::string doc_id = gr.string("doc_id");
        if (gr.has("chunk_index")) {
          q.gold_chunk_keys.insert({doc_id, gr.index("chunk_index")});
        } else {
          GoldSpan span{doc_id, gr.index("char_start"), gr.index("char_end")};
          if (span.char_end <= span.char_start) gr.fail("char_end", "must exceed char_start");
          q.gold_spans.push_back(std::move(span));
        }
      } catch (const SchemaError& e) {
        r.fail(field + "." + e.field(), "invalid gold entry");
      }
    }
    if (r.has("gold_answer")) q.gold_answer = r.string("gold_answer", true);
    if (r.has("doc_ids")) {
      const json& ids = rec.at("doc_ids");
      if (!ids.is_array()) r.fail("doc_ids", "expected an array");
      for (const auto& id : ids) {
        if (!id.is_string()) r.fail("doc_ids", "expected strings");
        q.doc_ids.push_back(id.get<std::string>());
      }
    }
    qa.push_back(std::move(q));
  });
  return qa;
}

std::vector<EvidenceChunk> parse_chunks(std::string_view jsonl, const std::string& source) {
  std::vector<EvidenceChunk> chunks;
  std::set<ChunkKey> seen;
  detail::for_each_record(jsonl, source, [&](const json& rec, std::size_t line) {
    RecordReader r{rec, source, line};
    EvidenceChunk c;
    c.doc_id = r.string("doc_id");
    c.chunk_index = r.index("chunk_index");
    c.text = r.string("text");
    c.token_count = r.index("token_count");
    if (r.has("poison_label")) c.poison_label = r.boolean("poison_label");
    if (r.has("char_start")) c.char_start = r.index("char_start");
    if (r.has("char_end")) c.char_end = r.index("char_end");
    if (!seen.insert(c.key()).second) r.fail("chunk_index", "duplicate key " + c.key().str());
    chunks.push_back(std::move(c));
  });
  return chunks;
}

std::vector<Document> load_documents(const std::filesystem::path& path) {
  return parse_documents(detail::read_file(path), path.string());
}

std::vector<QaInstance> load_qa(const std::filesystem::path& path) {
  return parse_qa(detail::read_file(path), path.string());
}

std::vector<EvidenceChunk> load_chunks(const std::filesystem::path& path) {
  return parse_chunks(detail::read_file(path), path.string());
}

void save_documents(const std::vector<Document>& docs, const std::filesystem::path& path) {
  std::vector<json> records;
  for (const auto& d : docs) {
    json rec{{"doc_id", d.doc_id}, {"text", d.text}};
    if (!d.metadata.empty()) rec["metadata"] = d.metadata;
    records.push_back(std::move(rec));
  }
  detail::write_file(path, detail::write_records(records));
}

void save_qa(const std::vector<QaInstance>& qa, const std::filesystem::path& path) {
  std::vector<json> records;
  for (const auto& q : qa) {
    json gold = json::array();
    for (const auto& k : q.gold_chunk_keys) gold.push_back({{"doc_id", k.doc_id}, {"chunk_index", k.chunk_index}});
    for (const auto& s : q.gold_spans) {
      gold.push_back({{"doc_id", s.doc_id}, {"char_start", s.char_start}, {"char_end", s.char_end}});
    }
    json rec{{"query_id", q.query_id}, {"query_text", q.query_text}, {"gold", std::move(gold)}};
    if (q.gold_answer) rec["gold_answer"] = *q.gold_answer;
    if (!q.doc_ids.empty()) rec["doc_ids"] = q.doc_ids;
    records.push_back(std::move(rec));
  }
  detail::write_file(path, detail::write_records(records));
}

void save_chunks(const std::vector<EvidenceChunk>& chunks, const std::filesystem::path& path) {
  std::vector<json> records;
  for (const auto& c : chunks) {
    json rec{{"doc_id", c.doc_id}, {"chunk_index", c.chunk_index}, {"text", c.text}, {"token_count", c.token_count}};
    if (c.poison_label) rec["poison_label"] = *c.poison_label;
    if (c.char_start) rec["char_start"] = *c.char_start;
    if (c.char_end) rec["char_end"] = *c.char_end;
    records.push_back(std::move(rec));
  }
  detail::write_file(path, detail::write_records(records));
}

}  // namespace evsel
