#include "evsel/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "evsel/errors.hpp"

namespace evsel {

using nlohmann::json;

double harmonic_mean(double a, double b) { return (a + b) == 0.0 ? 0.0 : 2.0 * a * b / (a + b); }

std::optional<CpMetrics> cp_metrics(const ChunkKeySet& selected, const ChunkKeySet& gold) {
  if (gold.empty()) return std::nullopt;
  std::size_t hit = 0;
  for (const auto& k : selected) hit += gold.contains(k) ? 1 : 0;
  CpMetrics m;
  m.precision = selected.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(selected.size());
  m.recall = static_cast<double>(hit) / static_cast<double>(gold.size());
  m.f1 = harmonic_mean(m.precision, m.recall);
  return m;
}

namespace {

double mean_of(const std::vector<std::size_t>& v) {
  return static_cast<double>(std::accumulate(v.begin(), v.end(), std::size_t{0})) / static_cast<double>(v.size());
}

void aggregate(SystemScores& s) {
  const double n = static_cast<double>(s.per_query.size());
  if (s.per_query.empty()) return;
  double p = 0, r = 0, f = 0, c = 0;
  for (const auto& q : s.per_query) {
    p += q.precision;
    r += q.recall;
    f += q.f1;
    c += static_cast<double>(q.n_selected);
  }
  s.mean_precision = p / n;
  s.mean_recall = r / n;
  s.mean_f1 = f / n;
  s.mean_selected = c / n;
}

}  // namespace

double efficiency_ratio(const std::vector<std::size_t>& baseline_counts, const std::vector<std::size_t>& reference_counts) {
  if (baseline_counts.empty() || reference_counts.empty()) throw Error("efficiency_ratio: empty count list");
  const double ref = mean_of(reference_counts);
  if (ref == 0.0) throw Error("efficiency_ratio: reference selects no evidence");
  return mean_of(baseline_counts) / ref;
}

SystemScores score_system(const std::string& system, const std::map<std::string, ChunkKeySet>& selections,
                          const std::map<std::string, ChunkKeySet>& gold) {
  SystemScores s;
  s.system = system;
  for (const auto& [qid, g] : gold) {
    auto sel_it = selections.find(qid);
    const ChunkKeySet empty;
    const ChunkKeySet& sel = sel_it == selections.end() ? empty : sel_it->second;
    auto m = cp_metrics(sel, g);
    if (!m) {
      ++s.excluded;
      continue;
    }
    s.per_query.push_back({qid, m->precision, m->recall, m->f1, sel.size()});
  }
  aggregate(s);
  return s;
}

SystemScores score_ranked(const std::string& system, const std::vector<RankedList>& ranked, std::size_t k,
                          const std::map<std::string, ChunkKeySet>& gold) {
  std::map<std::string, ChunkKeySet> selections;
  for (const auto& list : ranked) {
    auto top = list.top(k);
    selections[list.query_id] = ChunkKeySet(top.begin(), top.end());
  }
  SystemScores s = score_system(system, selections, gold);
  s.k = k;
  return s;
}

EfficiencySweep sweep_efficiency(const std::string& system, const std::vector<RankedList>& ranked,
                                 const std::map<std::string, ChunkKeySet>& gold, const SystemScores& reference) {
  EfficiencySweep out;
  out.system = system;
  out.target_recall = reference.mean_recall;
  out.reference_mean = reference.mean_selected;

  // Only queries scored by the reference take part.
  std::vector<const RankedList*> lists;
  std::vector<const ChunkKeySet*> golds;
  for (const auto& q : reference.per_query) {
    auto it = std::find_if(ranked.begin(), ranked.end(), [&](const RankedList& l) { return l.query_id == q.query_id; });
    if (it == ranked.end()) throw Error("efficiency sweep: " + system + " has no ranking for query " + q.query_id);
    lists.push_back(&*it);
    golds.push_back(&gold.at(q.query_id));
  }
  if (lists.empty() || reference.mean_selected == 0.0) return out;

  std::size_t max_n = 0;
  for (const auto* l : lists) max_n = std::max(max_n, l->entries.size());
  for (std::size_t k = 1; k <= max_n; ++k) {
    double recall = 0.0;
    double count = 0.0;
    for (std::size_t i = 0; i < lists.size(); ++i) {
      auto top = lists[i]->top(k);
      count += static_cast<double>(top.size());
      recall += cp_metrics(ChunkKeySet(top.begin(), top.end()), *golds[i])->recall;
    }
    recall /= static_cast<double>(lists.size());
    count /= static_cast<double>(lists.size());
    if (recall >= out.target_recall - 1e-12) {
      out.k = k;
      out.baseline_mean = count;
      out.ratio = count / out.reference_mean;
      return out;
    }
  }
  return out;
}

double generation_accuracy(const std::vector<int>& judgments) {
  if (judgments.empty()) throw Error("generation_accuracy: no judged instances");
  double sum = 0.0;
  for (int j : judgments) {
    if (j != 0 && j != 1) throw Error("generation_accuracy: judgments must be 0 or 1");
    sum += j;
  }
  return sum / static_cast<double>(judgments.size());
}

// ---------------------------------------------------------------------------

json to_json(const EvalReport& report) {
  json systems = json::array();
  for (const auto& s : report.systems) {
    json per_query = json::array();
    for (const auto& q : s.per_query) {
      per_query.push_back({{"query_id", q.query_id},
                           {"precision", q.precision},
                           {"recall", q.recall},
                           {"f1", q.f1},
                           {"n_selected", q.n_selected}});
    }
    json entry{{"system", s.system},
               {"per_query", std::move(per_query)},
               {"aggregate",
                {{"precision", s.mean_precision},
                 {"recall", s.mean_recall},
                 {"f1", s.mean_f1},
                 {"n_selected", s.mean_selected}}},
               {"excluded_no_gold", s.excluded}};
    entry["k"] = s.k ? json(*s.k) : json(nullptr);
    systems.push_back(std::move(entry));
  }

  json efficiency = json::array();
  for (const auto& e : report.efficiency) {
    efficiency.push_back({{"system", e.system},
                          {"target_recall", e.target_recall},
                          {"reference_mean_evidence", e.reference_mean},
                          {"k_needed", e.k ? json(*e.k) : json(nullptr)},
                          {"baseline_mean_evidence", e.k ? json(e.baseline_mean) : json(nullptr)},
                          {"ratio", e.ratio ? json(*e.ratio) : json("inf")}});
  }

  json generation = json::array();
  for (const auto& g : report.generation) {
    generation.push_back({{"system", g.system},
                          {"judged", g.judged},
                          {"unjudged", g.unjudged},
                          {"accuracy", g.accuracy ? json(*g.accuracy) : json(nullptr)}});
  }

  json detection = json::array();
  for (const auto& d : report.detection) {
    json by_type = json::object();
    for (const auto& [type, pct] : d.breakdown.percent) by_type[to_string(type)] = pct;
    detection.push_back({{"system", d.system},
                         {"true_positives", d.metrics.true_positives},
                         {"false_positives", d.metrics.false_positives},
                         {"false_negatives", d.metrics.false_negatives},
                         {"precision", d.metrics.precision},
                         {"recall", d.metrics.recall},
                         {"f1", d.metrics.f1},
                         {"poisoned_selected", d.breakdown.poisoned_selected},
                         {"flagged_percent_by_type", std::move(by_type)},
                         {"flagged_percent_total", d.breakdown.total_percent}});
  }

  return {{"config_digest", report.config_digest},
          {"metrics_note",
           "chunk-level set metrics; baselines use k = mean evidence count of the ecse selection rounded half-up; "
           "efficiency sweeps baseline k upward until its mean recall reaches the ecse mean recall"},
          {"systems", std::move(systems)},
          {"efficiency", std::move(efficiency)},
          {"generation", std::move(generation)},
          {"detection", std::move(detection)}};
}

std::string to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "system,k,precision,recall,f1,mean_selected\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& s : report.systems) {
    out << s.system << ',';
    if (s.k) out << *s.k;
    out << ',' << s.mean_precision << ',' << s.mean_recall << ',' << s.mean_f1 << ',' << s.mean_selected << '\n';
  }
  return out.str();
}

}  // namespace evsel
