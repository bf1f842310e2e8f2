#include <random>
#include <stdexcept>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "roadmap/metrics.hpp"
#include "roadmap/rng.hpp"
#include "test_util.hpp"

using namespace roadmap;

namespace {

RankingInstance pn(std::initializer_list<std::size_t> pos,
                   std::initializer_list<std::size_t> neg) {
  RankingInstance inst;
  inst.positives = pos;
  inst.negatives = neg;
  return inst;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("exact average precision on hand rankings") {
  // Positive, negative, positive from the top.
  CHECK(exact_ap({0.9, 0.8, 0.7}, pn({0, 2}, {1})) ==
        doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  // Perfect ranking.
  CHECK(exact_ap({0.9, 0.8, 0.1}, pn({0, 1}, {2})) == 1.0);
  // Worst ranking: negative above the lone positive.
  CHECK(exact_ap({0.1, 0.9}, pn({0}, {1})) ==
        doctest::Approx(0.5).epsilon(1e-15));
  // A tie counts the tying negative as ranked at-or-above (pessimistic).
  CHECK(exact_ap({0.5, 0.5}, pn({0}, {1})) ==
        doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("recall@k with ties broken by ascending index") {
  ScoreVector s = {0.5, 0.5, 0.4};
  // Index 0 (negative) outranks the tied index 1 (positive).
  RankingInstance inst = pn({1}, {0, 2});
  CHECK(recall_at_k(s, inst, 1) == 0.0);
  CHECK(recall_at_k(s, inst, 2) == 1.0);
  // k beyond the retrieval set is clamped.
  CHECK(recall_at_k(s, inst, 99) == 1.0);
  CHECK_THROWS_AS(recall_at_k(s, inst, 0), std::invalid_argument);
}

TEST_CASE("mAP@R truncates at the positive count") {
  // Top-2 window holds one positive at rank 1: (1/1 + 0) / 2.
  CHECK(map_at_r({0.9, 0.8, 0.7}, pn({0, 2}, {1})) ==
        doctest::Approx(0.5).epsilon(1e-15));
  // All positives on top: 1.
  CHECK(map_at_r({0.9, 0.8, 0.1}, pn({0, 1}, {2})) == 1.0);
  // No positive inside the window: 0.
  CHECK(map_at_r({0.1, 0.9}, pn({0}, {1})) == 0.0);
}

TEST_CASE("mAP@R never exceeds exact AP") {
  auto rng = make_engine(23, 0);
  std::uniform_int_distribution<std::size_t> size_dist(1, 15);
  std::uniform_real_distribution<double> score_dist(-1.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t np = size_dist(rng), nn = size_dist(rng);
    RankingInstance inst = RankingInstance::external(np, nn);
    ScoreVector s(np + nn);
    for (double& v : s) v = score_dist(rng);
    CHECK(map_at_r(s, inst) <= exact_ap(s, inst) + 1e-12);
  }
}

TEST_CASE("whole-set evaluation on perfect clusters is all ones") {
  // Two classes sitting on orthogonal axes; cosine separates them cleanly.
  EmbeddingMatrix e(6, 2);
  e.data = {1, 0, 1, 0, 1, 0, 0, 1, 0, 1, 0, 1};
  LabelVector labels = {0, 0, 0, 1, 1, 1};
  const std::size_t ks[] = {1, 2};
  MetricsReport rep = evaluate(e, labels, ks);
  CHECK(rep.map == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.map_at_r == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.recall_at.at(1) == 1.0);
  CHECK(rep.recall_at.at(2) == 1.0);
  CHECK(rep.query_count == 6);
  CHECK(rep.skipped == 0);
}

TEST_CASE("queries without positives are skipped and counted") {
  EmbeddingMatrix e(3, 2);
  e.data = {1, 0, 1, 0, 0, 1};
  LabelVector labels = {0, 0, 7};
  MetricsReport rep = evaluate(e, labels, {});
  CHECK(rep.query_count == 2);
  CHECK(rep.skipped == 1);
  CHECK(rep.map == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("evaluation validates input shapes") {
  EmbeddingMatrix e(2, 2);
  e.data = {1, 0, 0, 1};
  LabelVector bad = {0};
  CHECK_THROWS_AS(evaluate(e, bad, {}), std::invalid_argument);
}

TEST_CASE("metrics report serializes with pinned keys") {
  MetricsReport rep;
  rep.map = 0.75;
  rep.map_at_r = 0.5;
  rep.recall_at[1] = 1.0;
  rep.recall_at[4] = 0.25;
  rep.query_count = 8;
  rep.skipped = 1;
  nlohmann::json j = rep;
  CHECK(j["map"] == 0.75);
  CHECK(j["map_at_r"] == 0.5);
  CHECK(j["recall@1"] == 1.0);
  CHECK(j["recall@4"] == 0.25);
  CHECK(j["queries"] == 8);
  CHECK(j["skipped"] == 1);
}

}  // TEST_SUITE
