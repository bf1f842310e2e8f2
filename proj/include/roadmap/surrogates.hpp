// Purpose: differentiable average-precision surrogate losses over a scored
// retrieval set, plus the score-calibration hinge loss and their blend.
// Every loss returns its value together with the analytic gradient with
// respect to each score.
#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "roadmap/core.hpp"
#include "roadmap/kernels.hpp"

namespace roadmap {

// Shape of the piecewise negative-rank surrogate: sigmoid with temperature
// tau below zero, the same sigmoid shifted by +0.5 on [0, delta], and a
// linear ramp of slope rho above delta. delta is always derived from
// (tau, epsilon) — it is the point where the sigmoid's slope has decayed to
// roughly epsilon — and never stored independently.
struct SurrogateConfig {
  double tau = 0.01;
  double rho = 100.0;
  double epsilon = 0.01;

  double delta() const;
  // Throws std::invalid_argument on tau <= 0, rho < 0, or epsilon outside
  // (0, 0.5).
  void validate() const;
  // Precomputed coefficients for the kernels.
  kernels::HminusParams params() const;
};

// delta = tau * ln((1 - epsilon) / epsilon); positive for epsilon < 0.5.
double delta_from(double tau, double epsilon);

// Piecewise surrogate value / derivative at score difference t. At t == 0
// the shifted middle branch applies (value exactly 1), which keeps the
// surrogate everywhere >= the tie-counting step function it replaces. At
// t == delta the middle branch's sigmoid derivative applies.
double h_minus(double t, const SurrogateConfig& cfg);
double h_minus_grad(double t, const SurrogateConfig& cfg);

// Blend weight and calibration thresholds for the combined loss:
// same-class scores are pushed above alpha, cross-class scores below beta.
struct LossConfig {
  double lambda = 0.5;
  double alpha = 0.9;
  double beta = 0.6;

  // Throws std::invalid_argument on lambda outside [0, 1], thresholds
  // outside [-1, 1], or beta >= alpha.
  void validate() const;
};

// Per-positive rank decomposition. Entry k describes the k-th positive of
// the instance: its tie-counting rank among positives (self included), the
// tie-counting count of negatives at or above it, and the surrogate
// (smoothed) version of that negative count.
struct RankBreakdown {
  std::vector<std::size_t> rank_pos;
  std::vector<std::size_t> rank_neg;
  std::vector<double> rank_neg_smooth;
};

struct LossOutput {
  double value = 0.0;
  std::vector<double> grad;  // d(value)/d(score_i), one entry per score
};

// Tie-counting ranks (rank_pos, rank_neg) for every positive.
RankBreakdown exact_ranks(const ScoreVector& scores,
                          const RankingInstance& inst);

// Smoothed negative rank of every positive: sum over negatives of the
// piecewise surrogate at (negative score - positive score).
std::vector<double> smooth_neg_rank(const ScoreVector& scores,
                                    const RankingInstance& inst,
                                    const SurrogateConfig& cfg);

// Robust AP surrogate: 1 - mean_k rank_pos(k) / (rank_pos(k) + smooth_neg(k)).
// The positive-rank term keeps the true step function, so gradient flows
// only through the smoothed negative rank; the result upper-bounds the exact
// AP loss for any scores.
LossOutput supap_loss(const ScoreVector& scores, const RankingInstance& inst,
                      const SurrogateConfig& cfg);

// Fully sigmoid-smoothed AP surrogate (both rank terms smoothed with
// temperature tau); gradient flows through every sigmoid. Not an upper
// bound of the exact AP loss.
LossOutput smoothap_loss(const ScoreVector& scores,
                         const RankingInstance& inst,
                         const SurrogateConfig& cfg);

// Hinge calibration on absolute scores: mean over positives of
// max(0, alpha - s) plus mean over negatives of max(0, s - beta). A side
// with no members contributes 0; an instance with neither side is an error.
// At exact threshold equality the subgradient taken is 0.
LossOutput calibration_loss(const ScoreVector& scores,
                            const RankingInstance& inst,
                            const LossConfig& cfg);

// (1 - lambda) * supap + lambda * calibration.
LossOutput roadmap_loss(const ScoreVector& scores, const RankingInstance& inst,
                        const SurrogateConfig& scfg, const LossConfig& lcfg);

enum class LossKind { kSupAP, kSmoothAP, kCalibration, kRoadmap };

std::string_view loss_name(LossKind k);
// Throws std::invalid_argument for an unknown name.
LossKind loss_from_name(std::string_view name);

LossOutput evaluate_loss(LossKind kind, const ScoreVector& scores,
                         const RankingInstance& inst,
                         const SurrogateConfig& scfg, const LossConfig& lcfg);

}  // namespace roadmap
