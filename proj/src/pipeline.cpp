#include "evsel/pipeline.hpp"

#include <cctype>
#include <functional>
#include <map>
#include <optional>

#include "evsel/baseline.hpp"
#include "evsel/errors.hpp"
#include "evsel/eval.hpp"
#include "evsel/log.hpp"
#include "evsel/parallel.hpp"
#include "evsel/poisoning.hpp"
#include "evsel/prefdata.hpp"
#include "jsonl.hpp"

namespace evsel {

using nlohmann::json;

namespace {

std::string file_safe(const std::string& id) {
  std::string out;
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out;
}

json key_json(const ChunkKey& k) { return {{"doc_id", k.doc_id}, {"chunk_index", k.chunk_index}}; }

ChunkKey key_from(const json& j) { return {j.at("doc_id").get<std::string>(), j.at("chunk_index").get<std::size_t>()}; }

void write_meta(const std::filesystem::path& artifact, const std::string& digest, const std::string& command,
                json extra = json::object()) {
  auto meta = artifact;
  meta += ".meta.json";
  extra["config_digest"] = digest;
  extra["command"] = command;
  extra["artifact"] = artifact.filename().string();
  write_json_file(meta, extra);
}

void require(const std::filesystem::path& path, const std::string& producer) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError(path.string(), producer);
}

struct Corpus {
  std::vector<EvidenceChunk> chunks;
  std::vector<QaInstance> qa;
};

Corpus load_run_corpus(const RunConfig& config) {
  const RunPaths paths{config.output()};
  if (config.poisoning.enabled) {
    require(paths.poisoned_chunks(), "poison");
    require(paths.poisoned_qa(), "poison");
    return {load_chunks(paths.poisoned_chunks()), load_qa(paths.poisoned_qa())};
  }
  require(paths.chunks(), "chunk");
  require(paths.qa(), "chunk");
  return {load_chunks(paths.chunks()), load_qa(paths.qa())};
}

}  // namespace

std::filesystem::path RunPaths::selection_report(const std::string& query_id) const {
  return selection_dir() / (file_safe(query_id) + ".selection.json");
}

std::filesystem::path RunPaths::verification_report(const std::string& query_id) const {
  return selection_dir() / (file_safe(query_id) + ".verification.json");
}

Providers Providers::from_config(const RunConfig& config) {
  return {make_embedder(config), make_chat_provider(config)};
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
  detail::write_file(path, doc.dump(2) + "\n");
}

json read_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(detail::read_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string(), 1, "<document>", e.what());
  }
}

// ---------------------------------------------------------------------------
// Reports

json selection_report_json(const std::string& query_id, const std::string& config_digest,
                           const std::vector<Rationale>& rationales, const SelectionResult& s) {
  json rats = json::array();
  for (const auto& r : rationales) rats.push_back({{"ordinal", r.ordinal}, {"tag", r.tag}, {"body", r.body}});

  json paired = json::array();
  for (const auto& p : s.paired) {
    json e = key_json(p.key);
    e["ordinals"] = p.ordinals;
    e["scores"] = p.scores;
    paired.push_back(std::move(e));
  }
  json pooled = json::array();
  for (const auto& p : s.pooled) {
    json e = key_json(p.key);
    e["score"] = p.score;
    pooled.push_back(std::move(e));
  }
  json expanded = json::array();
  for (const auto& x : s.expanded) {
    json e = key_json(x.key);
    json parents = json::array();
    for (const auto& p : x.parents) parents.push_back(key_json(p));
    e["parents"] = std::move(parents);
    expanded.push_back(std::move(e));
  }
  json final_set = json::array();
  for (const auto& k : s.final_set) final_set.push_back(key_json(k));
  json provenance = json::object();
  for (const auto& [key, sources] : s.provenance) {
    json list = json::array();
    for (Source src : sources) list.push_back(to_string(src));
    provenance[key.str()] = std::move(list);
  }

  return {{"query_id", query_id},
          {"config_digest", config_digest},
          {"rationales", std::move(rats)},
          {"k_star", s.elbow.k_star},
          {"elbow_method", to_string(s.elbow.method)},
          {"elbow", {{"deltas", s.elbow.deltas}, {"z_scores", s.elbow.z_scores}, {"curvatures", s.elbow.curvatures}}},
          {"paired", std::move(paired)},
          {"pooled", std::move(pooled)},
          {"expanded", std::move(expanded)},
          {"final", std::move(final_set)},
          {"provenance", std::move(provenance)}};
}

json verification_report_json(const std::string& query_id, const std::string& config_digest,
                              const VerificationResult& v) {
  json decisions = json::array();
  for (const auto& d : v.decisions) {
    json e = key_json(d.chunk_key);
    e["flagged"] = d.flagged;
    json types = json::array();
    for (FlagType t : d.flag_types) types.push_back(to_string(t));
    e["flag_types"] = std::move(types);
    e["chunk_summary"] = d.chunk_summary;
    decisions.push_back(std::move(e));
  }
  json kept = json::array();
  for (const auto& k : v.kept) kept.push_back(key_json(k));
  json out{{"query_id", query_id},
           {"config_digest", config_digest},
           {"decisions", std::move(decisions)},
           {"kept", std::move(kept)}};
  if (v.incomplete) {
    out["incomplete"] = true;
    out["error"] = v.error;
  }
  return out;
}

LoadedSelection parse_selection_report(const json& report) {
  LoadedSelection out;
  try {
    for (const auto& r : report.at("rationales")) {
      out.rationales.push_back(
          {r.at("ordinal").get<std::size_t>(), r.at("tag").get<std::string>(), r.at("body").get<std::string>()});
    }
    for (const auto& k : report.at("final")) out.final_set.push_back(key_from(k));
  } catch (const json::exception& e) {
    throw Error(std::string("malformed selection report: ") + e.what());
  }
  return out;
}

VerificationResult parse_verification_report(const json& report) {
  VerificationResult v;
  try {
    for (const auto& d : report.at("decisions")) {
      VerifierDecision dec;
      dec.chunk_key = key_from(d);
      dec.flagged = d.at("flagged").get<bool>();
      for (const auto& t : d.at("flag_types")) {
        auto type = parse_flag_type(t.get<std::string>());
        if (!type) throw Error("unknown flag type " + t.get<std::string>());
        dec.flag_types.push_back(*type);
      }
      dec.chunk_summary = d.at("chunk_summary").get<std::string>();
      v.decisions.push_back(std::move(dec));
    }
    for (const auto& k : report.at("kept")) v.kept.push_back(key_from(k));
    v.incomplete = report.value("incomplete", false);
    v.error = report.value("error", std::string());
  } catch (const json::exception& e) {
    throw Error(std::string("malformed verification report: ") + e.what());
  }
  return v;
}

// ---------------------------------------------------------------------------
// Commands

void cmd_chunk(const RunConfig& config) {
  const std::string digest = config_digest(config);
  const RunPaths paths{config.output()};
  const auto docs = load_documents(config.resolve(config.documents));
  auto qa = load_qa(config.resolve(config.qa));
  const WhitespaceTokenizer tokenizer;
  const auto chunks = chunk_corpus(docs, tokenizer, {config.chunk_size, config.merge_short_tail});
  resolve_gold_spans(qa, chunks);

  const ChunkIndex index(chunks);
  for (const auto& q : qa) {
    for (const auto& k : q.gold_chunk_keys) {
      if (!index.contains(k)) warn("query '" + q.query_id + "': gold chunk " + k.str() + " does not exist");
    }
    if (q.gold_chunk_keys.empty()) warn("query '" + q.query_id + "' has no gold evidence; excluded from CP metrics");
  }

  save_chunks(chunks, paths.chunks());
  save_qa(qa, paths.qa());
  write_meta(paths.chunks(), digest, "chunk",
             {{"documents", docs.size()},
              {"chunks", chunks.size()},
              {"chunk_size", config.chunk_size},
              {"tokenizer", tokenizer.name()}});
  write_meta(paths.qa(), digest, "chunk", {{"instances", qa.size()}});
}

void cmd_poison(const RunConfig& config, const Providers& providers) {
  const std::string digest = config_digest(config);
  const RunPaths paths{config.output()};
  require(paths.chunks(), "chunk");
  require(paths.qa(), "chunk");
  const auto chunks = load_chunks(paths.chunks());
  const auto qa = load_qa(paths.qa());

  const PromptTemplates templates = effective_templates(config);
  PoisonOptions opts;
  opts.fraction = config.poisoning.fraction;
  opts.seed = config.poisoning.seed;
  opts.per_instance = config.poisoning.per_instance;
  opts.source = parse_poison_source(config.poisoning.source);
  opts.templates = &templates;
  opts.temperature = config.chat.temperature;
  if (opts.source == PoisonSource::FileSupplied) {
    if (config.poisoning.poison_file.empty()) throw ConfigError("poisoning.poison_file", "required for file source");
    opts.poison_texts = load_poison_texts(config.resolve(config.poisoning.poison_file));
  } else {
    opts.provider = providers.chat.get();
  }

  const auto poisoned = poison_corpus(chunks, qa, opts, WhitespaceTokenizer{});
  save_chunks(poisoned.chunks, paths.poisoned_chunks());
  save_qa(poisoned.qa, paths.poisoned_qa());
  save_poison_records(poisoned.records, paths.poison_records());
  for (const auto& p : {paths.poisoned_chunks(), paths.poisoned_qa(), paths.poison_records()}) {
    write_meta(p, digest, "poison",
               {{"fraction", config.poisoning.fraction},
                {"seed", config.poisoning.seed},
                {"poisoned_instances", poisoned.records.size() / config.poisoning.per_instance}});
  }
}

void cmd_select(const RunConfig& config, const Providers& providers) {
  const std::string digest = config_digest(config);
  const RunPaths paths{config.output()};
  const Corpus corpus = load_run_corpus(config);
  const PromptTemplates templates = effective_templates(config);

  RationaleOptions ro;
  ro.n_rationales = config.ecse.n_rationales;
  ro.temperature = config.chat.temperature;
  ro.max_tokens = config.chat.max_tokens;
  ro.templates = &templates;
  VerifierOptions vo;
  vo.max_chunk_chars = config.verifier.max_chunk_chars;
  vo.templates = &templates;
  const EcseConfig ecse{config.ecse.tau, config.ecse.expansion};

  parallel_for(corpus.qa.size(), config.workers, [&](std::size_t i) {
    const QaInstance& q = corpus.qa[i];
    const auto candidates = candidate_chunks(q, corpus.chunks);
    if (candidates.empty()) throw Error("query '" + q.query_id + "' has no candidate chunks");
    const auto rationales = generate_rationales(*providers.chat, q.query_text, ro);
    const auto selection = select_evidence(rationales, candidates, *providers.embedder, ecse);
    write_json_file(paths.selection_report(q.query_id), selection_report_json(q.query_id, digest, rationales, selection));

    const auto vpath = paths.verification_report(q.query_id);
    if (config.verifier.enabled) {
      const ChunkIndex index(candidates);
      const auto verification = verify_selection(*providers.chat, q.query_text, rationales, selection, index, vo);
      write_json_file(vpath, verification_report_json(q.query_id, digest, verification));
    } else {
      std::filesystem::remove(vpath);
    }
  });
}

void cmd_eval(const RunConfig& config, const Providers& providers) {
  const std::string digest = config_digest(config);
  const RunPaths paths{config.output()};
  const Corpus corpus = load_run_corpus(config);
  const PromptTemplates templates = effective_templates(config);

  std::map<std::string, ChunkKeySet> gold;
  std::map<std::string, ChunkKeySet> selected;
  std::map<std::string, ChunkKeySet> kept;
  std::vector<QueryVerification> verified;
  std::vector<QueryVerification> undefended;
  bool any_verification = false;

  for (const auto& q : corpus.qa) {
    const auto spath = paths.selection_report(q.query_id);
    require(spath, "select");
    const auto sel = parse_selection_report(read_json_file(spath));
    selected[q.query_id] = ChunkKeySet(sel.final_set.begin(), sel.final_set.end());
    gold[q.query_id] = q.gold_chunk_keys;

    QueryVerification qv{q.query_id, sel.final_set, {}};
    undefended.push_back(qv);
    const auto vpath = paths.verification_report(q.query_id);
    if (std::filesystem::exists(vpath)) {
      any_verification = true;
      auto v = parse_verification_report(read_json_file(vpath));
      kept[q.query_id] = ChunkKeySet(v.kept.begin(), v.kept.end());
      qv.decisions = std::move(v.decisions);
    } else {
      kept[q.query_id] = selected[q.query_id];
    }
    verified.push_back(std::move(qv));
  }

  EvalReport report;
  report.config_digest = digest;
  const SystemScores ecse_scores = score_system("ecse", selected, gold);
  report.systems.push_back(ecse_scores);
  if (any_verification) report.systems.push_back(score_system("ecse+verifier", kept, gold));

  // Baselines at the matched k over queries that carry gold.
  std::vector<std::size_t> sizes;
  for (const auto& s : ecse_scores.per_query) sizes.push_back(s.n_selected);
  std::vector<const QaInstance*> scored;
  for (const auto& q : corpus.qa) {
    if (!q.gold_chunk_keys.empty()) scored.push_back(&q);
  }

  std::vector<RankedList> bi_encoder(scored.size());
  std::optional<std::size_t> k;
  if (!sizes.empty()) {
    k = matched_k(sizes);
    parallel_for(scored.size(), config.workers, [&](std::size_t i) {
      const auto embedded = EmbeddedChunks::embed(candidate_chunks(*scored[i], corpus.chunks), *providers.embedder);
      bi_encoder[i] = rank_by_query(scored[i]->query_id, scored[i]->query_text, embedded, *providers.embedder);
    });
    report.systems.push_back(score_ranked("bi-encoder", bi_encoder, *k, gold));
    report.efficiency.push_back(sweep_efficiency("bi-encoder", bi_encoder, gold, ecse_scores));

    for (const auto& ext : config.eval.external_baselines) {
      const auto lists = load_ranked_lists(config.resolve(ext.path));
      report.systems.push_back(score_ranked(ext.name, lists, *k, gold));
      report.efficiency.push_back(sweep_efficiency(ext.name, lists, gold, ecse_scores));
    }
  }

  if (config.poisoning.enabled) {
    ChunkKeySet poisoned;
    for (const auto& c : corpus.chunks) {
      if (c.poisoned()) poisoned.insert(c.key());
    }
    report.detection.push_back(
        {"no-defense", detection_metrics(undefended, poisoned), flag_type_breakdown(undefended, poisoned)});
    if (any_verification) {
      report.detection.push_back(
          {"verifier", detection_metrics(verified, poisoned), flag_type_breakdown(verified, poisoned)});
    }
  }

  if (config.eval.judge) {
    const ChunkIndex index(corpus.chunks);
    const auto judge_system = [&](const std::string& name, const std::function<std::vector<ChunkKey>(const QaInstance&, std::size_t)>& evidence_for) {
      GenerationAccuracy g{name, 0, 0, std::nullopt};
      std::vector<int> verdicts;
      for (std::size_t i = 0; i < scored.size(); ++i) {
        const QaInstance& q = *scored[i];
        if (!q.gold_answer || q.gold_answer->empty()) continue;
        std::vector<std::string> texts;
        for (const auto& key : evidence_for(q, i)) {
          if (const auto* c = index.find(key)) texts.push_back(c->text);
        }
        try {
          const std::string answer = generate_answer(*providers.chat, q.query_text, texts, templates);
          verdicts.push_back(judge_answer(*providers.chat, q.query_text, *q.gold_answer,
                                          answer.empty() ? "(empty)" : answer, templates));
        } catch (const Error& e) {
          warn("judge: query '" + q.query_id + "' unjudged: " + e.what());
          ++g.unjudged;
        }
      }
      g.judged = verdicts.size();
      if (!verdicts.empty()) g.accuracy = generation_accuracy(verdicts);
      report.generation.push_back(g);
    };
    judge_system(any_verification ? "ecse+verifier" : "ecse", [&](const QaInstance& q, std::size_t) {
      const auto& s = kept.at(q.query_id);
      return std::vector<ChunkKey>(s.begin(), s.end());
    });
    if (k) {
      judge_system("bi-encoder", [&](const QaInstance&, std::size_t i) { return bi_encoder[i].top(*k); });
    }
  }

  write_json_file(paths.eval_report(), to_json(report));
  detail::write_file(paths.eval_table(), to_csv(report));
  write_meta(paths.eval_table(), digest, "eval");
}

void cmd_build_prefs(const RunConfig& config, const Providers& providers) {
  const std::string digest = config_digest(config);
  const RunPaths paths{config.output()};
  require(paths.chunks(), "chunk");
  require(paths.qa(), "chunk");
  const auto chunks = load_chunks(paths.chunks());
  const auto qa = load_qa(paths.qa());
  const PromptTemplates templates = effective_templates(config);

  PrefOptions opts;
  opts.samples_per_query = config.prefs.samples_per_query;
  opts.temperature = config.prefs.temperature;
  opts.pair_cap = config.prefs.pair_cap;
  opts.workers = config.workers;
  opts.templates = &templates;
  const auto built = build_preference_pairs(*providers.chat, *providers.embedder, qa, chunks, opts);
  const auto files = export_dpo_file(built.pairs, paths.prefs(), {config.prefs.split, config.prefs.seed});
  const json stats{{"instances", built.stats.instances},
                   {"with_pairs", built.stats.with_pairs},
                   {"no_gold", built.stats.no_gold},
                   {"no_positives", built.stats.no_positives},
                   {"no_negatives", built.stats.no_negatives},
                   {"generation_failures", built.stats.generation_failures},
                   {"pairs", built.pairs.size()}};
  for (const auto& f : files) write_meta(f, digest, "build-prefs", {{"stats", stats}});
}

}  // namespace evsel
