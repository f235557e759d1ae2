#include "evsel/prefdata.hpp"

#include <set>

#include "evsel/ecse.hpp"
#include "evsel/errors.hpp"
#include "evsel/log.hpp"
#include "evsel/parallel.hpp"
#include "evsel/random.hpp"
#include "jsonl.hpp"

namespace evsel {

using detail::json;

namespace {

enum class Outcome { Pairs, NoGold, NoPositives, NoNegatives, GenerationFailure };

struct InstanceResult {
  Outcome outcome = Outcome::Pairs;
  std::vector<PreferencePair> pairs;
};

InstanceResult build_for_instance(const ChatProvider& chat, const EmbeddingProvider& embedder, const QaInstance& q,
                                  const std::vector<EvidenceChunk>& chunks, const PrefOptions& options) {
  if (q.gold_chunk_keys.empty()) return {Outcome::NoGold, {}};

  std::set<std::string> docs(q.doc_ids.begin(), q.doc_ids.end());
  if (docs.empty()) {
    for (const auto& k : q.gold_chunk_keys) docs.insert(k.doc_id);
  }
  std::vector<EvidenceChunk> pool;
  for (const auto& c : chunks) {
    if (docs.contains(c.doc_id)) pool.push_back(c);
  }
  if (pool.empty()) return {Outcome::NoGold, {}};

  std::vector<Rationale> candidates;
  try {
    RationaleOptions ro;
    ro.n_rationales = options.samples_per_query;
    ro.temperature = options.temperature;
    ro.templates = options.templates;
    candidates = generate_rationales(chat, q.query_text, ro);
  } catch (const Error& e) {
    warn("prefs: query '" + q.query_id + "' skipped: " + e.what());
    return {Outcome::GenerationFailure, {}};
  }

  const auto embedded = EmbeddedChunks::embed(pool, embedder);
  const auto rat = embed_rationales(candidates, embedder);
  std::vector<std::pair<std::string, ChunkKey>> chosen;  // text, gold hit
  std::vector<std::string> rejected;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const ChunkKey hit = embedded.chunks[argmax_chunk(rat[i], embedded)].key();
    if (q.gold_chunk_keys.contains(hit)) {
      chosen.emplace_back(candidates[i].text(), hit);
    } else {
      rejected.push_back(candidates[i].text());
    }
  }
  if (chosen.empty()) return {Outcome::NoPositives, {}};
  if (rejected.empty()) return {Outcome::NoNegatives, {}};

  const ChunkIndex index(pool);
  InstanceResult result;
  for (const auto& [text, gold] : chosen) {
    for (const auto& bad : rejected) {
      if (result.pairs.size() >= options.pair_cap) return result;
      if (text == bad) continue;
      result.pairs.push_back({q.query_id, q.query_text, gold, index.find(gold)->text, text, bad});
    }
  }
  return result;
}

}  // namespace

PrefBuildResult build_preference_pairs(const ChatProvider& chat, const EmbeddingProvider& embedder,
                                       const std::vector<QaInstance>& qa, const std::vector<EvidenceChunk>& chunks,
                                       const PrefOptions& options) {
  if (options.samples_per_query < 2) throw Error("prefs: samples_per_query must be at least 2");
  std::vector<InstanceResult> results(qa.size());
  parallel_for(qa.size(), options.workers,
               [&](std::size_t i) { results[i] = build_for_instance(chat, embedder, qa[i], chunks, options); });

  PrefBuildResult out;
  out.stats.instances = qa.size();
  for (auto& r : results) {
    switch (r.outcome) {
      case Outcome::NoGold:
        ++out.stats.no_gold;
        break;
      case Outcome::NoPositives:
        ++out.stats.no_positives;
        break;
      case Outcome::NoNegatives:
        ++out.stats.no_negatives;
        break;
      case Outcome::GenerationFailure:
        ++out.stats.generation_failures;
        break;
      case Outcome::Pairs:
        if (!r.pairs.empty()) ++out.stats.with_pairs;
        std::move(r.pairs.begin(), r.pairs.end(), std::back_inserter(out.pairs));
        break;
    }
  }
  return out;
}

std::string dpo_prompt(const std::string& query, const std::string& evidence) {
  return "### Query\n" + query + "\n\n### Evidence\n" + evidence + "\n\n### Rationales\n";
}

SplitSizes split_sizes(std::size_t n) {
  SplitSizes s;
  s.val = n / 10;
  s.test = n / 10;
  s.train = n - s.val - s.test;
  return s;
}

namespace {

json pair_record(const PreferencePair& p) {
  return {{"prompt", dpo_prompt(p.query_text, p.evidence_text)},
          {"chosen", p.chosen},
          {"rejected", p.rejected},
          {"query_id", p.query_id},
          {"query_text", p.query_text},
          {"gold", {{"doc_id", p.gold_chunk_key.doc_id}, {"chunk_index", p.gold_chunk_key.chunk_index}}},
          {"evidence", p.evidence_text}};
}

void write_pairs(const std::vector<PreferencePair>& pairs, const std::filesystem::path& path) {
  std::vector<json> records;
  records.reserve(pairs.size());
  for (const auto& p : pairs) records.push_back(pair_record(p));
  detail::write_file(path, detail::write_records(records));
}

}  // namespace

std::vector<std::filesystem::path> export_dpo_file(const std::vector<PreferencePair>& pairs,
                                                   const std::filesystem::path& path,
                                                   const DpoExportOptions& options) {
  if (pairs.empty()) throw Error("export_dpo_file: no preference pairs");
  if (!options.split) {
    write_pairs(pairs, path);
    return {path};
  }
  std::vector<PreferencePair> shuffled = pairs;
  DeterministicRng rng(options.seed);
  rng.shuffle(shuffled);
  const SplitSizes sizes = split_sizes(shuffled.size());

  const auto dir = path.parent_path();
  const std::string stem = path.stem().string();
  const std::vector<std::pair<std::string, std::size_t>> parts{
      {"train", sizes.train}, {"val", sizes.val}, {"test", sizes.test}};
  std::vector<std::filesystem::path> written;
  std::size_t offset = 0;
  for (const auto& [name, count] : parts) {
    const auto file = dir / (stem + "." + name + ".jsonl");
    write_pairs({shuffled.begin() + static_cast<std::ptrdiff_t>(offset),
                 shuffled.begin() + static_cast<std::ptrdiff_t>(offset + count)},
                file);
    offset += count;
    written.push_back(file);
  }
  return written;
}

std::vector<PreferencePair> load_dpo_file(const std::filesystem::path& path) {
  std::vector<PreferencePair> out;
  detail::for_each_record(detail::read_file(path), path.string(), [&](const json& rec, std::size_t line) {
    detail::RecordReader r{rec, path.string(), line};
    PreferencePair p;
    p.query_id = r.string("query_id");
    p.query_text = r.string("query_text");
    const json& gold = r.require("gold");
    if (!gold.is_object()) r.fail("gold", "expected an object");
    detail::RecordReader g{gold, path.string(), line};
    p.gold_chunk_key = {g.string("doc_id"), g.index("chunk_index")};
    p.evidence_text = r.string("evidence");
    p.chosen = r.string("chosen");
    p.rejected = r.string("rejected");
    out.push_back(std::move(p));
  });
  return out;
}

}  // namespace evsel
