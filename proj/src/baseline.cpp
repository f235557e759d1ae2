#include "evsel/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "evsel/errors.hpp"
#include "jsonl.hpp"

namespace evsel {

using detail::json;

std::vector<ChunkKey> RankedList::top(std::size_t k) const {
  std::vector<ChunkKey> out;
  const std::size_t n = std::min(k, entries.size());
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(entries[i].key);
  return out;
}

namespace {

void sort_ranked(std::vector<RankedEntry>& entries) {
  std::sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
    return a.score != b.score ? a.score > b.score : a.key < b.key;
  });
}

}  // namespace

RankedList rank_by_query(const std::string& query_id, const std::string& query, const EmbeddedChunks& chunks,
                         const EmbeddingProvider& provider) {
  const Embedding q = provider.embed(query);
  RankedList list{query_id, {}};
  list.entries.reserve(chunks.chunks.size());
  for (std::size_t j = 0; j < chunks.chunks.size(); ++j) {
    list.entries.push_back({chunks.chunks[j].key(), cosine_similarity(q, chunks.embeddings[j])});
  }
  sort_ranked(list.entries);
  return list;
}

std::vector<ChunkKey> rerank_topk(const std::string& query, const std::vector<EvidenceChunk>& chunks,
                                  const EmbeddingProvider& provider, std::size_t k) {
  if (k == 0) throw Error("rerank_topk: k must be at least 1");
  if (chunks.empty()) return {};
  const auto embedded = EmbeddedChunks::embed(chunks, provider);
  return rank_by_query("", query, embedded, provider).top(k);
}

std::size_t matched_k(const std::vector<std::size_t>& selection_sizes) {
  if (selection_sizes.empty()) throw Error("matched_k: no selections");
  // Integer half-up rounding of sum / n avoids floating-point ties.
  const std::size_t sum = std::accumulate(selection_sizes.begin(), selection_sizes.end(), std::size_t{0});
  const std::size_t n = selection_sizes.size();
  const std::size_t k = (2 * sum + n) / (2 * n);
  return std::max<std::size_t>(k, 1);
}

std::size_t matched_k(const std::vector<SelectionResult>& selections) {
  std::vector<std::size_t> sizes;
  sizes.reserve(selections.size());
  for (const auto& s : selections) sizes.push_back(s.final_set.size());
  return matched_k(sizes);
}

std::vector<RankedList> parse_ranked_lists(std::string_view jsonl, const std::string& source) {
  std::vector<RankedList> lists;
  detail::for_each_record(jsonl, source, [&](const json& rec, std::size_t line) {
    detail::RecordReader r{rec, source, line};
    RankedList list;
    list.query_id = r.string("query_id");
    const json& ranked = r.require("ranked");
    if (!ranked.is_array()) r.fail("ranked", "expected an array");
    std::set<ChunkKey> seen;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      const std::string field = "ranked[" + std::to_string(i) + "]";
      if (!ranked[i].is_object()) r.fail(field, "expected an object");
      detail::RecordReader er{ranked[i], source, line};
      RankedEntry e;
      try {
        e.key = {er.string("doc_id"), er.index("chunk_index")};
        e.score = er.number("score");
      } catch (const SchemaError& err) {
        r.fail(field + "." + err.field(), "invalid entry");
      }
      if (!std::isfinite(e.score)) r.fail(field + ".score", "must be finite");
      if (!seen.insert(e.key).second) r.fail(field, "duplicate chunk " + e.key.str());
      list.entries.push_back(std::move(e));
    }
    sort_ranked(list.entries);
    lists.push_back(std::move(list));
  });
  return lists;
}

std::vector<RankedList> load_ranked_lists(const std::filesystem::path& path) {
  return parse_ranked_lists(detail::read_file(path), path.string());
}

void save_ranked_lists(const std::vector<RankedList>& lists, const std::filesystem::path& path) {
  std::vector<json> records;
  for (const auto& l : lists) {
    json ranked = json::array();
    for (const auto& e : l.entries) {
      ranked.push_back({{"doc_id", e.key.doc_id}, {"chunk_index", e.key.chunk_index}, {"score", e.score}});
    }
    records.push_back({{"query_id", l.query_id}, {"ranked", std::move(ranked)}});
  }
  detail::write_file(path, detail::write_records(records));
}

}  // namespace evsel
