// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "evsel/config.hpp"
#include "evsel/corpus.hpp"
#include "evsel/ecse.hpp"
#include "evsel/errors.hpp"
#include "evsel/pipeline.hpp"
#include "evsel/poisoning.hpp"
#include "evsel/prefdata.hpp"
#include "reference.hpp"
#include "scenario.hpp"

using namespace evsel;
using evsel::testing::PoisonScenario;
using evsel::testing::TempDir;
using nlohmann::json;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

// Collects the first failure message; later checks still run.
class Check {
 public:
  void operator()(bool cond, const std::string& what) {
    ++count_;
    if (!cond && out_.ok) {
      out_.ok = false;
      out_.detail = what;
    }
  }
  Outcome done(const std::string& detail) {
    if (out_.ok) out_.detail = detail;
    return out_;
  }

 private:
  Outcome out_;
  std::size_t count_ = 0;
};

std::vector<double> random_descending(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> s(n);
  for (auto& x : s) x = u(rng);
  if (rng() % 4 == 0) {
    for (auto& x : s) x = std::round(x * 10.0) / 10.0;
  }
  std::sort(s.begin(), s.end(), std::greater<>());
  return s;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

const json* row(const json& rows, const std::string& system) {
  for (const auto& r : rows) {
    if (r.at("system") == system) return &r;
  }
  return nullptr;
}

// A random corpus of up to 20 chunks over three documents embedded by the
// mock provider with a small vocabulary, so that ties and duplicates occur.
struct RandomCorpus {
  std::vector<EvidenceChunk> chunks;
  std::vector<Rationale> rationales;
};

RandomCorpus random_corpus(std::mt19937_64& rng, std::size_t max_chunks, std::size_t max_rationales) {
  RandomCorpus c;
  const std::size_t n = 1 + rng() % max_chunks;
  std::map<std::string, std::size_t> next;
  for (std::size_t j = 0; j < n; ++j) {
    const std::string doc(1, static_cast<char>('a' + rng() % 3));
    EvidenceChunk ch;
    ch.doc_id = doc;
    ch.chunk_index = next[doc]++;
    ch.text = "x" + std::to_string(rng() % 8);
    ch.token_count = 1;
    c.chunks.push_back(ch);
  }
  const std::size_t m = 1 + rng() % max_rationales;
  for (std::size_t i = 1; i <= m; ++i) c.rationales.push_back({i, "", "r" + std::to_string(rng() % 12)});
  return c;
}

Outcome elbow_oracle() {
  Check check;
  std::mt19937_64 rng(20240501);
  std::vector<std::vector<double>> lists;
  std::vector<double> taus;
  for (int i = 0; i < 10000; ++i) {
    lists.push_back(random_descending(rng, 1 + rng() % 64));
    taus.push_back(std::uniform_real_distribution<double>(-0.5, 3.0)(rng));
  }
  std::size_t matches = 0;
  const auto start = std::chrono::steady_clock::now();
  std::vector<ElbowResult> got;
  got.reserve(lists.size());
  for (std::size_t i = 0; i < lists.size(); ++i) got.push_back(detect_elbow(lists[i], taus[i]));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (std::size_t i = 0; i < lists.size(); ++i) {
    const auto want = reference::elbow(lists[i], taus[i]);
    const bool same = got[i].k_star == want.k_star && to_string(got[i].method) == want.method;
    matches += same;
    check(same, "list " + std::to_string(i) + ": k*=" + std::to_string(got[i].k_star) + " want " +
                    std::to_string(want.k_star));
  }
  check(secs < 5.0, "runtime " + fmt(secs) + " s");
  return check.done(std::to_string(matches) + "/10000 match, " + fmt(secs) + " s");
}

Outcome affine_invariance() {
  Check check;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> a_dist(0.01, 100.0), b_dist(-10.0, 10.0);
  std::size_t exceptions = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto s = random_descending(rng, 1 + rng() % 64);
    const double a = a_dist(rng), b = b_dist(rng);
    std::vector<double> t;
    for (double x : s) t.push_back(a * x + b);
    try {
      const auto x = detect_elbow(s, 1.0);
      const auto y = detect_elbow(t, 1.0);
      check(x.k_star == y.k_star && x.method == y.method, "triple " + std::to_string(i) + " differs");
    } catch (const std::exception& e) {
      ++exceptions;
      check(false, std::string("exception: ") + e.what());
    }
  }
  return check.done("1000 triples, " + std::to_string(exceptions) + " exceptions");
}

Outcome worked_example() {
  Check check;
  const std::vector<double> s{0.9, 0.85, 0.8, 0.5, 0.45};
  const auto r = detect_elbow(s, 1.0);
  check(r.k_star == 3, "k*=" + std::to_string(r.k_star));
  check(r.method == ElbowMethod::ZScore, "method " + to_string(r.method));
  check(r.z_scores.size() == 4 && std::abs(r.z_scores[2] - 1.732) <= 1e-3, "z3 off");
  return check.done("k*=" + std::to_string(r.k_star) + " via " + to_string(r.method) +
                    (r.z_scores.size() > 2 ? ", z3=" + fmt(r.z_scores[2]) : ""));
}

Outcome pairing_brute_force() {
  Check check;
  std::mt19937_64 rng(31337);
  const MockEmbeddingProvider provider({8, 2});
  for (int trial = 0; trial < 500; ++trial) {
    const auto c = random_corpus(rng, 20, 8);
    const auto emb = EmbeddedChunks::embed(c.chunks, provider);
    const auto rv = embed_rationales(c.rationales, provider);
    std::map<ChunkKey, std::vector<std::size_t>> got;
    for (const auto& e : pair_rationales(c.rationales, rv, emb)) got[e.key] = e.ordinals;
    check(got == reference::pairing(rv, c.chunks, emb.embeddings), "corpus " + std::to_string(trial));
  }
  return check.done("500 corpora");
}

Outcome golden_scenario() {
  Check check;
  TempDir dir;
  RunConfig c = load_config(std::filesystem::path(EVSEL_TEST_DATA) / "golden" / "config.json");
  c.output_dir = (dir.path() / "out").string();
  validate_config(c);
  const auto providers = Providers::from_config(c);
  cmd_chunk(c);
  cmd_select(c, providers);
  cmd_eval(c, providers);
  const RunPaths paths{c.output()};
  const auto expected = std::filesystem::path(EVSEL_TEST_DATA) / "golden" / "expected";
  const std::vector<std::pair<std::filesystem::path, std::string>> files{
      {paths.selection_report("q1"), "q1.selection.json"},
      {paths.verification_report("q1"), "q1.verification.json"},
      {paths.eval_report(), "report.json"},
      {paths.eval_table(), "table.csv"}};
  for (const auto& [got, want] : files) {
    check(read_bytes(got) == read_bytes(expected / want), want + " differs");
  }
  const auto report = read_json_file(paths.eval_report());
  const json* ecse = row(report.at("systems"), "ecse");
  const json* eff = row(report.at("efficiency"), "bi-encoder");
  double recall = -1, n_sel = -1, ratio = -1;
  long k_needed = -1;
  if (ecse) {
    recall = ecse->at("aggregate").at("recall");
    n_sel = ecse->at("aggregate").at("n_selected");
  }
  if (eff && eff->at("ratio").is_number()) {
    ratio = eff->at("ratio");
    k_needed = eff->at("k_needed");
  }
  check(recall == 1.0 && n_sel == 3.0, "ecse recall " + fmt(recall) + " at " + fmt(n_sel) + " chunks");
  check(k_needed == 6, "baseline k " + std::to_string(k_needed));
  check(ratio == 2.0, "ratio " + fmt(ratio));
  return check.done("4 artifacts byte-equal; recall " + fmt(recall) + " at " + fmt(n_sel) + " chunks, baseline k=" +
                    std::to_string(k_needed) + ", ratio " + fmt(ratio));
}

// Runs the poisoning scenario through the pipeline with a scripted verifier
// that flags two of the three poisons and one clean gold chunk.
struct PoisonRun {
  PoisonScenario scenario;
  std::size_t records = 0;
  json detection;

  PoisonRun() {
    const auto c = scenario.config();
    const RunPaths paths{c.output()};
    const auto providers = scenario.providers();
    cmd_chunk(c);
    cmd_poison(c, providers);
    const auto recs = load_poison_records(paths.poison_records());
    records = recs.size();
    if (recs.size() == 3) {
      scenario.flag[recs[0].poison_text] = "Factual";
      scenario.flag[recs[1].poison_text] = "Contradiction";
      scenario.flag["gold" + recs[2].query_id.substr(1) + " alpha beta gamma"] = "Instruction";
    }
    cmd_select(c, providers);
    cmd_eval(c, providers);
    detection = read_json_file(paths.eval_report()).at("detection");
  }
};

Outcome poisoning(const PoisonRun& run) {
  Check check;
  check(poison_sample_size(0.30, 10) == 3, "sample size");
  check(run.records == 3, std::to_string(run.records) + " poisoned instances");
  const json* ver = row(run.detection, "verifier");
  const json* none = row(run.detection, "no-defense");
  check(ver && none, "detection rows missing");
  if (!ver || !none) return check.done("");
  const double third = 2.0 / 3.0;
  check(ver->at("precision") == third && ver->at("recall") == third && ver->at("f1") == third,
        "verifier P/R/F1 " + ver->at("precision").dump() + "/" + ver->at("recall").dump() + "/" + ver->at("f1").dump());
  check(none->at("f1") == 0.0, "no-defense f1 " + none->at("f1").dump());
  return check.done(std::to_string(run.records) + " of 10 poisoned; verifier P=R=F1=" + fmt(third) +
                    "; no-defense F1=" + none->at("f1").dump());
}

Outcome flag_sums(const PoisonRun& run) {
  Check check;
  for (const auto& r : run.detection) {
    double sum = 0;
    for (const auto& [type, pct] : r.at("flagged_percent_by_type").items()) sum += pct.get<double>();
    check(std::abs(sum - r.at("flagged_percent_total").get<double>()) <= 1e-12, r.at("system").get<std::string>());
  }
  std::mt19937_64 rng(99);
  const std::vector<FlagType> types{FlagType::Instruction, FlagType::Contradiction, FlagType::Factual};
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<QueryVerification> queries;
    ChunkKeySet poisoned;
    for (std::size_t q = 0; q < 1 + rng() % 6; ++q) {
      QueryVerification qv;
      qv.query_id = "q" + std::to_string(q);
      for (std::size_t j = 0; j < 1 + rng() % 8; ++j) {
        const ChunkKey key{qv.query_id, j};
        qv.selected.push_back(key);
        if (rng() % 3 == 0) poisoned.insert(key);
        if (rng() % 4 == 0) continue;  // no decision
        VerifierDecision d;
        d.chunk_key = key;
        d.flagged = rng() % 2 == 0;
        if (d.flagged) {
          for (std::size_t t = 0; t < rng() % 4; ++t) {
            const FlagType ft = types[rng() % 3];
            if (std::find(d.flag_types.begin(), d.flag_types.end(), ft) == d.flag_types.end()) d.flag_types.push_back(ft);
          }
        }
        qv.decisions.push_back(d);
      }
      queries.push_back(qv);
    }
    const auto b = flag_type_breakdown(queries, poisoned);
    double sum = 0;
    for (const auto& [t, pct] : b.percent) sum += pct;
    check(std::abs(sum - b.total_percent) <= 1e-12, "random trial " + std::to_string(trial));
  }
  return check.done(std::to_string(run.detection.size()) + " report rows + 1000 random breakdowns");
}

Outcome prefs_soundness() {
  Check check;
  PoisonScenario s;
  const auto c = s.config({{"poisoning", {{"enabled", false}}}});
  const RunPaths paths{c.output()};
  cmd_chunk(c);
  cmd_build_prefs(c, s.providers());
  const auto chunks = load_chunks(paths.chunks());
  const auto qa = load_qa(paths.qa());
  const testing::RuleEmbedder embedder;
  std::vector<PreferencePair> pairs;
  for (const char* part : {"train", "val", "test"}) {
    const auto loaded = load_dpo_file(paths.prefs().parent_path() / (std::string("prefs.") + part + ".jsonl"));
    pairs.insert(pairs.end(), loaded.begin(), loaded.end());
  }
  std::size_t sound = 0;
  for (const auto& p : pairs) {
    const auto q = std::find_if(qa.begin(), qa.end(), [&](const QaInstance& x) { return x.query_id == p.query_id; });
    if (q == qa.end()) {
      check(false, "unknown query " + p.query_id);
      continue;
    }
    const auto pool = candidate_chunks(*q, chunks);
    std::vector<Embedding> vectors;
    for (const auto& ch : pool) vectors.push_back(embedder.embed(ch.text));
    const auto hit = [&](const std::string& text) {
      const auto m = reference::pairing({embedder.embed(text)}, pool, vectors);
      return q->gold_chunk_keys.contains(m.begin()->first);
    };
    const bool ok = hit(p.chosen) && !hit(p.rejected) && q->gold_chunk_keys.contains(p.gold_chunk_key);
    sound += ok;
    check(ok, "pair for " + p.query_id + " is mislabelled");
  }
  check(!pairs.empty(), "no pairs");

  TempDir dir;
  for (std::size_t n = 10; n <= 200; n += 10) {
    std::vector<PreferencePair> synthetic;
    for (std::size_t i = 0; i < n; ++i) synthetic.push_back({"q" + std::to_string(i), "t", {"d", i}, "e", "c", "r"});
    const auto files = export_dpo_file(synthetic, dir / ("p" + std::to_string(n) + ".jsonl"), {true, 13});
    std::set<std::string> ids;
    std::vector<std::size_t> sizes;
    for (const auto& f : files) {
      const auto part = load_dpo_file(f);
      sizes.push_back(part.size());
      for (const auto& p : part) ids.insert(p.query_id);
    }
    check(sizes == std::vector<std::size_t>{n * 8 / 10, n / 10, n / 10}, "split of " + std::to_string(n));
    check(ids.size() == n, "split of " + std::to_string(n) + " loses or repeats pairs");
  }
  return check.done(std::to_string(sound) + "/" + std::to_string(pairs.size()) +
                    " pairs sound; 80/10/10 exact for n=10..200");
}

Outcome chunk_round_trip() {
  Check check;
  std::mt19937_64 rng(4242);
  const WhitespaceTokenizer tok;
  const auto tokens_of = [&](const std::string& text) {
    std::vector<std::string> out;
    for (const auto& sp : tok.tokenize(text)) out.push_back(text.substr(sp.begin, sp.end - sp.begin));
    return out;
  };
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 2000;
    std::string text;
    for (std::size_t i = 0; i < n; ++i) {
      text += std::string(1 + rng() % 3, " \t\n"[rng() % 3]);
      text += "w" + std::to_string(rng() % 5000);
    }
    const auto all = tokens_of(text);
    for (std::size_t size : {128, 256, 512}) {
      const auto chunks = chunk_document({"doc", text, {}}, tok, {size});
      std::vector<std::string> joined;
      bool shape = chunks.size() == (all.size() + size - 1) / size;
      for (std::size_t i = 0; i < chunks.size(); ++i) {
        shape = shape && chunks[i].chunk_index == i && chunks[i].token_count <= size &&
                (i + 1 == chunks.size() || chunks[i].token_count == size);
        for (auto& t : tokens_of(chunks[i].text)) joined.push_back(std::move(t));
      }
      check(shape && joined == all, "document " + std::to_string(trial) + " size " + std::to_string(size));
    }
  }
  return check.done("100 documents x {128,256,512}");
}

Outcome expansion_monotone() {
  Check check;
  std::size_t cases = 0;
  // Golden scenario.
  {
    TempDir dir;
    RunConfig c = load_config(std::filesystem::path(EVSEL_TEST_DATA) / "golden" / "config.json");
    c.verifier.enabled = false;
    const auto providers = Providers::from_config(c);
    ChunkKeySet on, off;
    for (bool expansion : {true, false}) {
      c.ecse.expansion = expansion;
      c.output_dir = (dir.path() / (expansion ? "on" : "off")).string();
      cmd_chunk(c);
      cmd_select(c, providers);
      const auto sel = parse_selection_report(read_json_file(RunPaths{c.output()}.selection_report("q1")));
      (expansion ? on : off) = ChunkKeySet(sel.final_set.begin(), sel.final_set.end());
    }
    check(std::includes(on.begin(), on.end(), off.begin(), off.end()), "golden: on is not a superset");
    ++cases;
  }
  // Generated corpora with random gold sets.
  std::mt19937_64 rng(8080);
  const MockEmbeddingProvider provider({8, 2});
  for (int trial = 0; trial < 500; ++trial) {
    const auto c = random_corpus(rng, 20, 8);
    ChunkKeySet gold;
    for (const auto& ch : c.chunks) {
      if (rng() % 3 == 0) gold.insert(ch.key());
    }
    if (gold.empty()) gold.insert(c.chunks.front().key());
    const double tau = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
    const auto on = select_evidence(c.rationales, c.chunks, provider, {tau, true}).final_keys();
    const auto off = select_evidence(c.rationales, c.chunks, provider, {tau, false}).final_keys();
    const auto recall = [&](const ChunkKeySet& s) {
      std::size_t hit = 0;
      for (const auto& k : gold) hit += s.contains(k);
      return static_cast<double>(hit) / gold.size();
    };
    check(std::includes(on.begin(), on.end(), off.begin(), off.end()), "corpus " + std::to_string(trial));
    check(recall(on) >= recall(off), "recall drops on corpus " + std::to_string(trial));
    ++cases;
  }
  return check.done(std::to_string(cases) + " cases");
}

Outcome guarded(const std::function<Outcome()>& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

int main() {
  std::unique_ptr<PoisonRun> poison_run;
  const auto poison = [&]() -> const PoisonRun& {
    if (!poison_run) poison_run = std::make_unique<PoisonRun>();
    return *poison_run;
  };
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"elbow oracle equivalence", elbow_oracle},
      {"elbow affine invariance", affine_invariance},
      {"elbow worked example", worked_example},
      {"pairing brute-force equivalence", pairing_brute_force},
      {"golden end-to-end scenario", golden_scenario},
      {"poisoning and detection metrics", [&] { return poisoning(poison()); }},
      {"flag-type percentages sum to total", [&] { return flag_sums(poison()); }},
      {"preference labels and split", prefs_soundness},
      {"chunking round-trip", chunk_round_trip},
      {"expansion superset monotonicity", expansion_monotone},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const Outcome o = guarded(criteria[i].second);
    failed += !o.ok;
    std::cout << (o.ok ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << o.detail << "\n";
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " acceptance criteria passed\n";
  return failed == 0 ? 0 : 1;
}
