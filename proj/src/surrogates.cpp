#include "roadmap/surrogates.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "roadmap/kernels.hpp"

namespace roadmap {

double delta_from(double tau, double epsilon) {
  if (!(tau > 0.0)) {
    throw std::invalid_argument("tau must be > 0");
  }
  if (!(epsilon > 0.0) || !(epsilon < 0.5)) {
    throw std::invalid_argument("epsilon must be in (0, 0.5)");
  }
  return tau * std::log((1.0 - epsilon) / epsilon);
}

double SurrogateConfig::delta() const { return delta_from(tau, epsilon); }

void SurrogateConfig::validate() const {
  delta_from(tau, epsilon);  // checks tau and epsilon
  if (!(rho >= 0.0) || !std::isfinite(rho)) {
    throw std::invalid_argument("rho must be finite and >= 0");
  }
}

kernels::HminusParams SurrogateConfig::params() const {
  validate();
  kernels::HminusParams p;
  p.inv_tau = 1.0 / tau;
  p.delta = delta();
  p.rho = rho;
  // Value the middle branch reaches at delta; equals (1 - epsilon) + 0.5 up
  // to rounding, computed here by direct evaluation for consistency.
  const double u = p.delta * p.inv_tau;
  p.plateau = 1.0 / (1.0 + std::exp(-u)) + 0.5;
  return p;
}

double h_minus(double t, const SurrogateConfig& cfg) {
  const kernels::HminusParams p = cfg.params();
  return kernels::hminus_rank_sum(&t, 1, 0.0, p, nullptr);
}

double h_minus_grad(double t, const SurrogateConfig& cfg) {
  const kernels::HminusParams p = cfg.params();
  double dh;
  kernels::hminus_rank_sum(&t, 1, 0.0, p, &dh);
  return dh;
}

void LossConfig::validate() const {
  if (!(lambda >= 0.0) || !(lambda <= 1.0)) {
    throw std::invalid_argument("lambda must be in [0, 1]");
  }
  if (!(alpha >= -1.0) || !(alpha <= 1.0) || !(beta >= -1.0) ||
      !(beta <= 1.0)) {
    throw std::invalid_argument("alpha and beta must be in [-1, 1]");
  }
  if (!(beta < alpha)) {
    throw std::invalid_argument("beta must be strictly below alpha");
  }
}

namespace {

struct GatheredScores {
  std::vector<double> pos;
  std::vector<double> neg;
};

GatheredScores gather(const ScoreVector& scores, const RankingInstance& inst) {
  GatheredScores g;
  g.pos.reserve(inst.positives.size());
  g.neg.reserve(inst.negatives.size());
  for (std::size_t idx : inst.positives) g.pos.push_back(scores[idx]);
  for (std::size_t idx : inst.negatives) g.neg.push_back(scores[idx]);
  return g;
}

}  // namespace

RankBreakdown exact_ranks(const ScoreVector& scores,
                          const RankingInstance& inst) {
  inst.validate(scores.size());
  const GatheredScores g = gather(scores, inst);
  const std::size_t np = g.pos.size();
  RankBreakdown out;
  out.rank_pos.resize(np);
  out.rank_neg.resize(np);
  for (std::size_t k = 0; k < np; ++k) {
    // Counting the positive itself supplies the "1 +" of the rank.
    out.rank_pos[k] = kernels::count_ge(g.pos.data(), np, g.pos[k]);
    out.rank_neg[k] =
        kernels::count_ge(g.neg.data(), g.neg.size(), g.pos[k]);
  }
  return out;
}

std::vector<double> smooth_neg_rank(const ScoreVector& scores,
                                    const RankingInstance& inst,
                                    const SurrogateConfig& cfg) {
  inst.validate(scores.size());
  const kernels::HminusParams p = cfg.params();
  const GatheredScores g = gather(scores, inst);
  std::vector<double> out(g.pos.size());
  for (std::size_t k = 0; k < g.pos.size(); ++k) {
    out[k] = kernels::hminus_rank_sum(g.neg.data(), g.neg.size(), g.pos[k], p,
                                      nullptr);
  }
  return out;
}

LossOutput supap_loss(const ScoreVector& scores, const RankingInstance& inst,
                      const SurrogateConfig& cfg) {
  inst.validate(scores.size());
  const kernels::HminusParams p = cfg.params();
  const GatheredScores g = gather(scores, inst);
  const std::size_t np = g.pos.size();
  const std::size_t nn = g.neg.size();
  const double inv_np = 1.0 / static_cast<double>(np);

  LossOutput out;
  out.grad.assign(scores.size(), 0.0);
  std::vector<double> dh(nn);
  double precision_sum = 0.0;
  for (std::size_t k = 0; k < np; ++k) {
    const double a =
        static_cast<double>(kernels::count_ge(g.pos.data(), np, g.pos[k]));
    const double s =
        kernels::hminus_rank_sum(g.neg.data(), nn, g.pos[k], p,
                                 nn != 0 ? dh.data() : nullptr);
    const double denom = a + s;
    precision_sum += a / denom;
    // d(value)/d(s_k_neg_rank) = + a / (|P| * denom^2); the positive-rank
    // term is a true step function and contributes no gradient.
    const double w = inv_np * a / (denom * denom);
    double dsum = 0.0;
    for (std::size_t j = 0; j < nn; ++j) {
      out.grad[inst.negatives[j]] += w * dh[j];
      dsum += dh[j];
    }
    out.grad[inst.positives[k]] -= w * dsum;
  }
  out.value = 1.0 - inv_np * precision_sum;
  return out;
}

LossOutput smoothap_loss(const ScoreVector& scores,
                         const RankingInstance& inst,
                         const SurrogateConfig& cfg) {
  inst.validate(scores.size());
  cfg.validate();
  const double inv_tau = 1.0 / cfg.tau;
  const GatheredScores g = gather(scores, inst);
  const std::size_t np = g.pos.size();
  const std::size_t nn = g.neg.size();
  const double inv_np = 1.0 / static_cast<double>(np);

  LossOutput out;
  out.grad.assign(scores.size(), 0.0);
  std::vector<double> dsp(np), dsn(nn);
  double precision_sum = 0.0;
  for (std::size_t k = 0; k < np; ++k) {
    // The self term sigmoid(0) = 0.5 is included in the kernel sum and
    // removed here; its gradient contributions cancel exactly below.
    const double a = 0.5 + kernels::sigmoid_rank_sum(g.pos.data(), np,
                                                     g.pos[k], inv_tau,
                                                     dsp.data());
    const double b = kernels::sigmoid_rank_sum(
        g.neg.data(), nn, g.pos[k], inv_tau, nn != 0 ? dsn.data() : nullptr);
    const double denom = a + b;
    precision_sum += a / denom;
    const double wa = -inv_np * b / (denom * denom);  // d(value)/d(a)
    const double wb = inv_np * a / (denom * denom);   // d(value)/d(b)
    double dsum_p = 0.0;
    for (std::size_t j = 0; j < np; ++j) {
      out.grad[inst.positives[j]] += wa * dsp[j];
      dsum_p += dsp[j];
    }
    double dsum_n = 0.0;
    for (std::size_t j = 0; j < nn; ++j) {
      out.grad[inst.negatives[j]] += wb * dsn[j];
      dsum_n += dsn[j];
    }
    out.grad[inst.positives[k]] -= wa * dsum_p + wb * dsum_n;
  }
  out.value = 1.0 - inv_np * precision_sum;
  return out;
}

LossOutput calibration_loss(const ScoreVector& scores,
                            const RankingInstance& inst,
                            const LossConfig& cfg) {
  cfg.validate();
  if (inst.positives.empty() && inst.negatives.empty()) {
    throw std::invalid_argument(
        "calibration loss needs at least one positive or negative");
  }
  for (std::size_t idx : inst.positives) {
    if (idx >= scores.size())
      throw std::invalid_argument("positive index out of range");
  }
  for (std::size_t idx : inst.negatives) {
    if (idx >= scores.size())
      throw std::invalid_argument("negative index out of range");
  }
  LossOutput out;
  out.grad.assign(scores.size(), 0.0);
  double value = 0.0;
  if (!inst.positives.empty()) {
    const double w = 1.0 / static_cast<double>(inst.positives.size());
    for (std::size_t idx : inst.positives) {
      const double gap = cfg.alpha - scores[idx];
      if (gap > 0.0) {  // equality contributes no value and no gradient
        value += w * gap;
        out.grad[idx] -= w;
      }
    }
  }
  if (!inst.negatives.empty()) {
    const double w = 1.0 / static_cast<double>(inst.negatives.size());
    for (std::size_t idx : inst.negatives) {
      const double gap = scores[idx] - cfg.beta;
      if (gap > 0.0) {
        value += w * gap;
        out.grad[idx] += w;
      }
    }
  }
  out.value = value;
  return out;
}

LossOutput roadmap_loss(const ScoreVector& scores, const RankingInstance& inst,
                        const SurrogateConfig& scfg, const LossConfig& lcfg) {
  lcfg.validate();
  const LossOutput rank_part = supap_loss(scores, inst, scfg);
  const LossOutput cal_part = calibration_loss(scores, inst, lcfg);
  LossOutput out;
  out.value = (1.0 - lcfg.lambda) * rank_part.value +
              lcfg.lambda * cal_part.value;
  out.grad.assign(scores.size(), 0.0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.grad[i] = (1.0 - lcfg.lambda) * rank_part.grad[i] +
                  lcfg.lambda * cal_part.grad[i];
  }
  return out;
}

std::string_view loss_name(LossKind k) {
  switch (k) {
    case LossKind::kSupAP:
      return "supap";
    case LossKind::kSmoothAP:
      return "smoothap";
    case LossKind::kCalibration:
      return "calibration";
    case LossKind::kRoadmap:
      return "roadmap";
  }
  return "unknown";
}

LossKind loss_from_name(std::string_view name) {
  if (name == "supap") return LossKind::kSupAP;
  if (name == "smoothap") return LossKind::kSmoothAP;
  if (name == "calibration") return LossKind::kCalibration;
  if (name == "roadmap") return LossKind::kRoadmap;
  throw std::invalid_argument("unknown loss '" + std::string(name) + "'");
}

LossOutput evaluate_loss(LossKind kind, const ScoreVector& scores,
                         const RankingInstance& inst,
                         const SurrogateConfig& scfg, const LossConfig& lcfg) {
  switch (kind) {
    case LossKind::kSupAP:
      return supap_loss(scores, inst, scfg);
    case LossKind::kSmoothAP:
      return smoothap_loss(scores, inst, scfg);
    case LossKind::kCalibration:
      return calibration_loss(scores, inst, lcfg);
    case LossKind::kRoadmap:
      return roadmap_loss(scores, inst, scfg, lcfg);
  }
  throw std::invalid_argument("unknown loss kind");
}

}  // namespace roadmap
