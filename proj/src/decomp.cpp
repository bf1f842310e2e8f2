#include "roadmap/decomp.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "roadmap/metrics.hpp"

namespace roadmap {

void BatchAssignment::validate(std::size_t n) const {
  if (num_batches == 0) {
    throw std::invalid_argument("batch assignment needs at least one batch");
  }
  if (membership.size() != n) {
    throw std::invalid_argument("batch membership size " +
                                std::to_string(membership.size()) +
                                " does not match " + std::to_string(n) +
                                " scores");
  }
  for (std::size_t id : membership) {
    if (id >= num_batches) {
      throw std::invalid_argument("batch id " + std::to_string(id) +
                                  " out of range for " +
                                  std::to_string(num_batches) + " batches");
    }
  }
}

std::size_t BatchCounts::total_positives() const {
  return std::accumulate(positives.begin(), positives.end(), std::size_t{0});
}

std::size_t BatchCounts::total_negatives() const {
  return std::accumulate(negatives.begin(), negatives.end(), std::size_t{0});
}

BatchCounts counts_from(const RankingInstance& inst,
                        const BatchAssignment& asg) {
  BatchCounts c;
  c.positives.assign(asg.num_batches, 0);
  c.negatives.assign(asg.num_batches, 0);
  for (std::size_t idx : inst.positives) ++c.positives[asg.membership[idx]];
  for (std::size_t idx : inst.negatives) ++c.negatives[asg.membership[idx]];
  return c;
}

CalibrationStats calibration_stats(const ScoreVector& scores,
                                   const RankingInstance& inst,
                                   const BatchAssignment& asg, double alpha,
                                   double beta) {
  inst.validate(scores.size());
  asg.validate(scores.size());
  if (!(beta < alpha)) {
    throw std::invalid_argument("beta must be strictly below alpha");
  }
  CalibrationStats st;
  st.g_pos.assign(asg.num_batches, 0);
  st.e_pos.assign(asg.num_batches, 0);
  st.g_neg.assign(asg.num_batches, 0);
  st.e_neg.assign(asg.num_batches, 0);
  for (std::size_t idx : inst.positives) {
    const std::size_t b = asg.membership[idx];
    if (scores[idx] >= alpha) {
      ++st.g_pos[b];
    } else {
      ++st.e_pos[b];
    }
  }
  for (std::size_t idx : inst.negatives) {
    const std::size_t b = asg.membership[idx];
    if (scores[idx] <= beta) {
      ++st.g_neg[b];
    } else {
      ++st.e_neg[b];
    }
  }
  return st;
}

void to_json(nlohmann::json& j, const DgReport& r) {
  j = nlohmann::json{{"batch_aps", r.batch_aps},
                     {"global_ap", r.global_ap},
                     {"dg", r.dg},
                     {"bound_worst", r.bound_worst},
                     {"batches_perfect", r.batches_perfect},
                     {"uniform_batches", r.uniform_batches}};
  if (r.bound_refined.has_value()) {
    j["bound_refined"] = *r.bound_refined;
  }
}

DgReport decomposability_gap(
    const ScoreVector& scores, const RankingInstance& inst,
    const BatchAssignment& asg,
    std::optional<std::pair<double, double>> thresholds) {
  inst.validate(scores.size());
  asg.validate(scores.size());

  DgReport rep;
  rep.batch_aps.reserve(asg.num_batches);
  for (std::size_t b = 0; b < asg.num_batches; ++b) {
    // Restrict the instance to batch b. Sub-scores keep their original
    // score-vector indices, so the per-batch instance reuses them directly.
    RankingInstance sub;
    sub.query_index = inst.query_index;
    for (std::size_t idx : inst.positives) {
      if (asg.membership[idx] == b) sub.positives.push_back(idx);
    }
    for (std::size_t idx : inst.negatives) {
      if (asg.membership[idx] == b) sub.negatives.push_back(idx);
    }
    if (sub.positives.empty()) {
      throw std::invalid_argument("batch " + std::to_string(b) +
                                  " holds no positive of the query");
    }
    rep.batch_aps.push_back(exact_ap(scores, sub));
  }
  rep.global_ap = exact_ap(scores, inst);
  double mean_batch = 0.0;
  for (double ap : rep.batch_aps) mean_batch += ap;
  mean_batch /= static_cast<double>(rep.batch_aps.size());
  rep.dg = mean_batch - rep.global_ap;

  const BatchCounts counts = counts_from(inst, asg);
  rep.bound_worst = worst_case_bound(counts);
  rep.batches_perfect = true;
  for (double ap : rep.batch_aps) {
    if (ap < 1.0) rep.batches_perfect = false;
  }
  rep.uniform_batches = true;
  for (std::size_t b = 1; b < counts.batches(); ++b) {
    if (counts.positives[b] != counts.positives[0] ||
        counts.negatives[b] != counts.negatives[0]) {
      rep.uniform_batches = false;
    }
  }
  if (thresholds.has_value()) {
    rep.bound_refined = refined_bound(calibration_stats(
        scores, inst, asg, thresholds->first, thresholds->second));
  }
  return rep;
}

double worst_case_bound(const BatchCounts& counts) {
  const std::size_t total_pos = counts.total_positives();
  if (total_pos == 0) {
    throw std::invalid_argument("worst-case bound needs at least one positive");
  }
  double sum = 0.0;
  std::size_t pos_before = 0;
  std::size_t neg_before = 0;
  for (std::size_t b = 0; b < counts.batches(); ++b) {
    for (std::size_t j = 1; j <= counts.positives[b]; ++j) {
      const double num = static_cast<double>(j + pos_before);
      sum += num / (num + static_cast<double>(neg_before));
    }
    pos_before += counts.positives[b];
    neg_before += counts.negatives[b];
  }
  return 1.0 - sum / static_cast<double>(total_pos);
}

namespace {

// AP mass contributed by batch b when batches with the given aggregate
// prefix counts come before it in the juxtaposition.
double refined_batch_term(const CalibrationStats& stats, std::size_t b,
                          std::size_t gpos_before, std::size_t eneg_before,
                          std::size_t pos_before, std::size_t neg_before) {
  double term = 0.0;
  // Respecting positives outrank every other batch's elements except the
  // violating negatives of earlier batches.
  for (std::size_t j = 1; j <= stats.g_pos[b]; ++j) {
    const double num = static_cast<double>(j + gpos_before);
    term += num / (num + static_cast<double>(eneg_before));
  }
  // Violating positives additionally fall behind this batch's respecting
  // positives and everything from earlier batches.
  for (std::size_t j = 1; j <= stats.e_pos[b]; ++j) {
    const double num = static_cast<double>(j + stats.g_pos[b] + pos_before);
    term += num / (num + static_cast<double>(neg_before));
  }
  return term;
}

}  // namespace

double refined_bound(const CalibrationStats& stats) {
  const std::size_t k = stats.batches();
  std::size_t total_pos = 0;
  for (std::size_t b = 0; b < k; ++b) {
    total_pos += stats.g_pos[b] + stats.e_pos[b];
  }
  if (total_pos == 0) {
    throw std::invalid_argument("refined bound needs at least one positive");
  }

  // The respect counts only restrict the adversary relative to what the raw
  // positive/negative counts allow, so the count-only bound always applies
  // as a ceiling; take whichever statement is tighter.
  BatchCounts counts;
  counts.positives.resize(k);
  counts.negatives.resize(k);
  for (std::size_t b = 0; b < k; ++b) {
    counts.positives[b] = stats.g_pos[b] + stats.e_pos[b];
    counts.negatives[b] = stats.g_neg[b] + stats.e_neg[b];
  }
  const double ceiling = worst_case_bound(counts);

  // The batches form an unordered partition, but the prefix sums below
  // depend on the order they are juxtaposed in. Every order yields a valid
  // bound, so return the tightest one. The retained AP mass decomposes
  // batch-by-batch over prefix aggregates that only depend on the *set* of
  // earlier batches, which a subset DP maximizes exactly in O(2^k * k).
  constexpr std::size_t kMaxExactBatches = 20;
  if (k > kMaxExactBatches) {
    // Fall back to the given order; still a valid, possibly looser bound.
    double sum = 0.0;
    std::size_t gpos_before = 0;
    std::size_t eneg_before = 0;
    std::size_t pos_before = 0;
    std::size_t neg_before = 0;
    for (std::size_t b = 0; b < k; ++b) {
      sum += refined_batch_term(stats, b, gpos_before, eneg_before,
                                pos_before, neg_before);
      gpos_before += stats.g_pos[b];
      eneg_before += stats.e_neg[b];
      pos_before += stats.g_pos[b] + stats.e_pos[b];
      neg_before += stats.g_neg[b] + stats.e_neg[b];
    }
    return std::min(1.0 - sum / static_cast<double>(total_pos), ceiling);
  }

  const std::uint32_t full = (std::uint32_t{1} << k) - 1;
  // Aggregate counts (g_pos, e_neg, positives, negatives) per batch subset,
  // filled via the lowest-set-bit recurrence.
  struct Agg {
    std::uint32_t gpos, eneg, pos, neg;
  };
  std::vector<Agg> agg(std::size_t{full} + 1, Agg{0, 0, 0, 0});
  for (std::uint32_t s = 1; s <= full; ++s) {
    const auto b = static_cast<std::size_t>(std::countr_zero(s));
    const Agg& prev = agg[s & (s - 1)];
    agg[s] = Agg{
        prev.gpos + static_cast<std::uint32_t>(stats.g_pos[b]),
        prev.eneg + static_cast<std::uint32_t>(stats.e_neg[b]),
        prev.pos + static_cast<std::uint32_t>(stats.g_pos[b] + stats.e_pos[b]),
        prev.neg + static_cast<std::uint32_t>(stats.g_neg[b] + stats.e_neg[b])};
  }
  // best[s] = largest AP mass any arrangement of subset s can retain.
  std::vector<double> best(std::size_t{full} + 1,
                           -std::numeric_limits<double>::infinity());
  best[0] = 0.0;
  for (std::uint32_t s = 1; s <= full; ++s) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::uint32_t bits = s; bits != 0; bits &= bits - 1) {
      const auto b = static_cast<std::size_t>(std::countr_zero(bits));
      const std::uint32_t prev = s & ~(std::uint32_t{1} << b);
      const Agg& a = agg[prev];
      const double cand = best[prev] +
                          refined_batch_term(stats, b, a.gpos, a.eneg, a.pos,
                                             a.neg);
      if (cand > top) top = cand;
    }
    best[s] = top;
  }
  return std::min(1.0 - best[full] / static_cast<double>(total_pos), ceiling);
}

}  // namespace roadmap
