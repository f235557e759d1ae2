#include "doctest.h"
#include "evsel/errors.hpp"
#include "evsel/eval.hpp"

using namespace evsel;

namespace {

ChunkKeySet keys(std::initializer_list<std::size_t> idx, const std::string& doc = "d") {
  ChunkKeySet out;
  for (auto i : idx) out.insert({doc, i});
  return out;
}

RankedList ranked(const std::string& qid, std::initializer_list<std::size_t> order) {
  RankedList l{qid, {}};
  double score = 1.0;
  for (auto i : order) {
    l.entries.push_back({{"d", i}, score});
    score -= 0.01;
  }
  return l;
}

}  // namespace

TEST_CASE("cp metrics") {
  CHECK(*cp_metrics(keys({1, 2}), keys({1, 2})) == CpMetrics{1, 1, 1});
  const auto all = cp_metrics(keys({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}), keys({2, 7}));
  CHECK(all->recall == 1.0);
  CHECK(all->precision == doctest::Approx(0.2));
  CHECK(*cp_metrics(keys({0}), keys({1})) == CpMetrics{0, 0, 0});
  CHECK(*cp_metrics({}, keys({1})) == CpMetrics{0, 0, 0});
  CHECK_FALSE(cp_metrics(keys({1}), {}).has_value());
  CHECK(harmonic_mean(0.5, 1.0) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("score_system excludes instances without gold") {
  const std::map<std::string, ChunkKeySet> sel{{"q1", keys({1})}, {"q2", keys({1})}};
  const std::map<std::string, ChunkKeySet> gold{{"q1", keys({1, 2})}, {"q2", {}}, {"q3", keys({4})}};
  const auto s = score_system("sys", sel, gold);
  CHECK(s.excluded == 1);
  REQUIRE(s.per_query.size() == 2);
  CHECK(s.mean_recall == doctest::Approx(0.25));
  CHECK(s.per_query[1].n_selected == 0);
}

TEST_CASE("efficiency ratio") {
  CHECK(efficiency_ratio({3, 3}, {3, 3}) == 1.0);
  CHECK(efficiency_ratio({6}, {3}) == 2.0);
  CHECK(efficiency_ratio({64, 64, 64}, {3, 3, 3}) > 1.0);
  CHECK_THROWS_AS(efficiency_ratio({}, {1}), Error);
  CHECK_THROWS_AS(efficiency_ratio({1}, {0}), Error);
}

TEST_CASE("efficiency sweep agrees with an exhaustive search") {
  // Reference selects 3 chunks with recall 1; the baseline ranks gold at 1, 3 and 6.
  const std::map<std::string, ChunkKeySet> gold{{"q", keys({0, 1, 2})}};
  const auto reference = score_system("ecse", {{"q", keys({0, 1, 2})}}, gold);
  const auto list = ranked("q", {1, 7, 0, 8, 9, 2, 3, 4});

  std::size_t exhaustive = 0;
  for (std::size_t k = 1; k <= list.entries.size() && exhaustive == 0; ++k) {
    auto top = list.top(k);
    std::size_t hits = 0;
    for (const auto& key : top) hits += gold.at("q").contains(key) ? 1 : 0;
    if (hits == 3) exhaustive = k;
  }
  REQUIRE(exhaustive == 6);

  const auto sweep = sweep_efficiency("bi", {list}, gold, reference);
  CHECK(sweep.k == exhaustive);
  CHECK(*sweep.ratio == 2.0);
  CHECK(sweep.baseline_mean == 6.0);

  // Identical selections give 1.
  const auto same = sweep_efficiency("bi", {ranked("q", {0, 1, 2, 3})}, gold, reference);
  CHECK(*same.ratio == 1.0);

  // Target never reached.
  const auto never = sweep_efficiency("bi", {ranked("q", {0, 5, 6})}, gold, reference);
  CHECK_FALSE(never.ratio.has_value());
  CHECK(to_json(EvalReport{"d", {}, {never}, {}, {}}).at("efficiency")[0].at("ratio") == "inf");

  CHECK_THROWS_AS(sweep_efficiency("bi", {ranked("other", {0})}, gold, reference), Error);
}

TEST_CASE("generation accuracy") {
  CHECK(generation_accuracy({1, 1, 0, 0}) == 0.5);
  CHECK(generation_accuracy({1, 1, 1}) == 1.0);
  CHECK_THROWS_AS(generation_accuracy({}), Error);
  CHECK_THROWS_AS(generation_accuracy({2}), Error);
}

TEST_CASE("report serialisation") {
  EvalReport r;
  r.config_digest = "abc";
  r.systems.push_back(score_system("ecse", {{"q", keys({1})}}, {{"q", keys({1, 2})}}));
  r.systems.push_back(score_ranked("bi", {ranked("q", {1, 2})}, 1, {{"q", keys({1, 2})}}));
  CHECK(to_csv(r) ==
        "system,k,precision,recall,f1,mean_selected\n"
        "ecse,,1.0000,0.5000,0.6667,1.0000\n"
        "bi,1,1.0000,0.5000,0.6667,1.0000\n");
  const auto j = to_json(r);
  CHECK(j.at("config_digest") == "abc");
  CHECK(j.at("systems")[1].at("k") == 1);
  CHECK(j.at("systems")[0].at("k").is_null());
}
