// Purpose: independent ground-truth machinery the main implementations are
// tested against — a sort-based average precision, an exact enumeration of
// the worst decomposability gap, and finite-difference gradient checking.
// Nothing here shares code paths with the counting/analytic implementations
// it exists to validate.
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "roadmap/core.hpp"
#include "roadmap/decomp.hpp"
#include "roadmap/surrogates.hpp"

namespace roadmap::oracle {

// Average precision by explicit descending sort; requires all retrieval
// scores to be pairwise distinct (throws std::invalid_argument otherwise, so
// the tie conventions of the counting implementation never matter here).
double sort_based_ap(const ScoreVector& scores, const RankingInstance& inst);

// Largest achievable mean(batch AP) - global AP over every global ordering
// consistent with each batch being perfectly ranked internally, found by
// exact dynamic programming over all such orderings. Limited to 12 total
// elements; every batch needs at least one positive.
double enumerate_worst_dg(const BatchCounts& counts);

struct FiniteDiffGrad {
  std::vector<double> grad;      // central difference per coordinate
  std::vector<bool> skipped;     // true where the estimate straddles a kink
};

// Central differences with step h on the loss value alone. A coordinate is
// marked skipped when a pairwise difference feeding a kinked or jumping term
// lies within 10*h of the kink: positive/positive differences near 0 and
// positive/negative differences near {0, delta} for the rank surrogates,
// scores near {alpha, beta} for the calibration hinges; the fully smooth
// loss never skips.
FiniteDiffGrad finite_diff_grad(LossKind kind, const ScoreVector& scores,
                                const RankingInstance& inst,
                                const SurrogateConfig& scfg,
                                const LossConfig& lcfg, double h);

struct CoordRecord {
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
  bool skipped = false;
};

struct GradCheckReport {
  LossKind kind = LossKind::kRoadmap;
  std::size_t trials = 0;
  double tol = 0.0;
  double h = 0.0;
  std::size_t checked = 0;   // coordinates compared
  std::size_t skipped = 0;   // coordinates skipped near kinks
  double max_rel_err = 0.0;  // over checked coordinates
  bool pass = false;
  // Full per-coordinate detail for the worst-offending trial.
  std::size_t worst_trial = 0;
  std::vector<CoordRecord> worst_coords;
};

void to_json(nlohmann::json& j, const GradCheckReport& r);

// Compares analytic gradients against finite differences on random
// instances: scores uniform on [-1, 1], positive and negative counts uniform
// on [1, 20], the trial index fixing each instance's seed. A coordinate
// passes when |analytic - numeric| <= tol * max(1, |analytic|, |numeric|);
// the report's max_rel_err uses the same scaling.
GradCheckReport grad_check(LossKind kind, std::size_t trials, double tol,
                           const SurrogateConfig& scfg, const LossConfig& lcfg,
                           double h = 1e-6, std::uint64_t seed = 0);

}  // namespace roadmap::oracle
