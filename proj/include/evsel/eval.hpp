#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "evsel/baseline.hpp"
#include "evsel/corpus.hpp"
#include "evsel/poisoning.hpp"

namespace evsel {

struct CpMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool operator==(const CpMetrics&) const = default;
};

/// Set-based precision / recall / F1 over chunk keys. Returns nullopt when
/// gold is empty (the instance is excluded from aggregates).
std::optional<CpMetrics> cp_metrics(const ChunkKeySet& selected, const ChunkKeySet& gold);

double harmonic_mean(double a, double b);

/// mean(baseline_counts) / mean(reference_counts).
double efficiency_ratio(const std::vector<std::size_t>& baseline_counts, const std::vector<std::size_t>& reference_counts);

struct QueryScore {
  std::string query_id;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n_selected = 0;
};

struct SystemScores {
  std::string system;
  std::optional<std::size_t> k;  // set for top-k systems
  std::vector<QueryScore> per_query;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double mean_f1 = 0.0;
  double mean_selected = 0.0;
  std::size_t excluded = 0;  // instances without gold
};

/// Scores each query's selection against its gold set.
SystemScores score_system(const std::string& system, const std::map<std::string, ChunkKeySet>& selections,
                          const std::map<std::string, ChunkKeySet>& gold);

/// Scores a ranked baseline at a fixed k.
SystemScores score_ranked(const std::string& system, const std::vector<RankedList>& ranked, std::size_t k,
                          const std::map<std::string, ChunkKeySet>& gold);

struct EfficiencySweep {
  std::string system;
  double target_recall = 0.0;   // reference system's mean recall
  double reference_mean = 0.0;  // reference system's mean selected count
  std::optional<std::size_t> k;  // smallest k reaching the target
  double baseline_mean = 0.0;   // mean of min(k, n_q) at that k
  std::optional<double> ratio;  // nullopt: target never reached
};

/// Sweeps k = 1, 2, ... until the baseline's mean recall reaches the
/// reference's mean recall, then divides the baseline's mean evidence count
/// by the reference's.
EfficiencySweep sweep_efficiency(const std::string& system, const std::vector<RankedList>& ranked,
                                 const std::map<std::string, ChunkKeySet>& gold, const SystemScores& reference);

/// Mean of 0/1 judgements; throws when empty.
double generation_accuracy(const std::vector<int>& judgments);

struct GenerationAccuracy {
  std::string system;
  std::size_t judged = 0;
  std::size_t unjudged = 0;
  std::optional<double> accuracy;
};

struct DetectionReport {
  std::string system;
  DetectionMetrics metrics;
  FlagBreakdown breakdown;
};

struct EvalReport {
  std::string config_digest;
  std::vector<SystemScores> systems;
  std::vector<EfficiencySweep> efficiency;
  std::vector<GenerationAccuracy> generation;
  std::vector<DetectionReport> detection;
};

nlohmann::json to_json(const EvalReport& report);
/// One row per system: system,k,precision,recall,f1,mean_selected.
std::string to_csv(const EvalReport& report);

}  // namespace evsel
