// Purpose: decomposability analysis of average precision — how much the mean
// of per-batch APs can exceed the global AP under a batch partition — with
// the juxtaposition worst-case bound and its calibration-aware refinement.
#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "roadmap/core.hpp"

namespace roadmap {

// Partition of a retrieval set into num_batches batches; membership[i] is
// the batch id (0-based) of score index i. For in-batch queries the query's
// own index carries a membership too, but it never joins any batch's
// positive/negative sets (the instance excludes it).
struct BatchAssignment {
  std::size_t num_batches = 0;
  std::vector<std::size_t> membership;

  void validate(std::size_t n) const;
};

// Positive/negative counts per batch, in batch order.
struct BatchCounts {
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;

  std::size_t batches() const { return positives.size(); }
  std::size_t total_positives() const;
  std::size_t total_negatives() const;
};

BatchCounts counts_from(const RankingInstance& inst,
                        const BatchAssignment& asg);

// Per-batch threshold-respect counts: a positive respects its constraint
// when score >= alpha, a negative when score <= beta. g_* count respecting
// elements, e_* violating ones; g + e covers the whole side of the batch.
struct CalibrationStats {
  std::vector<std::size_t> g_pos, e_pos;
  std::vector<std::size_t> g_neg, e_neg;

  std::size_t batches() const { return g_pos.size(); }
};

CalibrationStats calibration_stats(const ScoreVector& scores,
                                   const RankingInstance& inst,
                                   const BatchAssignment& asg, double alpha,
                                   double beta);

struct DgReport {
  std::vector<double> batch_aps;
  double global_ap = 0.0;
  double dg = 0.0;  // mean(batch_aps) - global_ap
  double bound_worst = 0.0;
  std::optional<double> bound_refined;
  // The bounds assume every batch is perfectly ranked and batches share one
  // (positive count, negative count) composition; these flags report whether
  // the analyzed partition satisfies that.
  bool batches_perfect = false;
  bool uniform_batches = false;
};

// Serializes as {"batch_aps": [...], "global_ap": ..., "dg": ...,
// "bound_worst": ..., "bound_refined": ...(when present), plus the two
// assumption flags}.
void to_json(nlohmann::json& j, const DgReport& r);

// Measures the gap for one query under a partition and evaluates the bounds.
// The refined bound is included when thresholds are supplied. Throws
// std::invalid_argument when some batch contains no positive of the query.
DgReport decomposability_gap(
    const ScoreVector& scores, const RankingInstance& inst,
    const BatchAssignment& asg,
    std::optional<std::pair<double, double>> thresholds = std::nullopt);

// Gap attained when perfectly-ranked batches are juxtaposed block after
// block in batch order: 1 - (1/P) sum_b sum_{j=1..p_b} (j + P_before) /
// (j + P_before + N_before).
double worst_case_bound(const BatchCounts& counts);

// Tightened version using threshold-respect counts: respecting positives
// compete only with violating negatives of earlier batches; violating
// positives fall behind every earlier element. The batch list is an
// unordered partition, so the juxtaposition order that yields the tightest
// bound is used (exact for up to 20 batches, given order beyond that), and
// the result never exceeds the count-only worst-case bound, which remains
// valid no matter how many elements respect the thresholds.
double refined_bound(const CalibrationStats& stats);

}  // namespace roadmap
