#include "roadmap/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <string>

#include "roadmap/rng.hpp"

namespace roadmap::oracle {

double sort_based_ap(const ScoreVector& scores, const RankingInstance& inst) {
  inst.validate(scores.size());
  std::vector<std::size_t> order;
  order.reserve(inst.positives.size() + inst.negatives.size());
  order.insert(order.end(), inst.positives.begin(), inst.positives.end());
  order.insert(order.end(), inst.negatives.begin(), inst.negatives.end());

  std::vector<double> vals;
  vals.reserve(order.size());
  for (std::size_t idx : order) vals.push_back(scores[idx]);
  std::sort(vals.begin(), vals.end());
  for (std::size_t i = 1; i < vals.size(); ++i) {
    if (vals[i] == vals[i - 1]) {
      throw std::invalid_argument(
          "sort-based AP needs pairwise distinct scores (duplicate " +
          std::to_string(vals[i]) + ")");
    }
  }

  std::sort(order.begin(), order.end(),
            [&scores](std::size_t a, std::size_t b) {
              return scores[a] > scores[b];
            });
  std::vector<char> is_pos(scores.size(), 0);
  for (std::size_t idx : inst.positives) is_pos[idx] = 1;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (is_pos[order[r]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(inst.positives.size());
}

namespace {

struct DgState {
  std::vector<std::size_t> pos_left;
  std::vector<std::size_t> neg_left;

  bool operator<(const DgState& o) const {
    if (pos_left != o.pos_left) return pos_left < o.pos_left;
    return neg_left < o.neg_left;
  }
};

// Minimum achievable sum of positive precision contributions over all
// remaining placements. placed_pos/placed_total are implied by the state but
// passed to avoid recomputation.
double min_precision_sum(const DgState& st, std::size_t placed_pos,
                         std::size_t placed_total,
                         std::map<DgState, double>& memo) {
  bool done = true;
  for (std::size_t b = 0; b < st.pos_left.size(); ++b) {
    if (st.pos_left[b] != 0 || st.neg_left[b] != 0) done = false;
  }
  if (done) return 0.0;
  auto it = memo.find(st);
  if (it != memo.end()) return it->second;

  double best = std::numeric_limits<double>::infinity();
  DgState next = st;
  for (std::size_t b = 0; b < st.pos_left.size(); ++b) {
    if (st.pos_left[b] > 0) {
      // Place one of batch b's positives at the next global rank.
      next.pos_left[b] -= 1;
      const double contrib = static_cast<double>(placed_pos + 1) /
                             static_cast<double>(placed_total + 1);
      best = std::min(best, contrib + min_precision_sum(next, placed_pos + 1,
                                                        placed_total + 1,
                                                        memo));
      next.pos_left[b] += 1;
    } else if (st.neg_left[b] > 0) {
      // Negatives of b may appear only after all of b's positives.
      next.neg_left[b] -= 1;
      best = std::min(best, min_precision_sum(next, placed_pos,
                                              placed_total + 1, memo));
      next.neg_left[b] += 1;
    }
  }
  memo[st] = best;
  return best;
}

}  // namespace

double enumerate_worst_dg(const BatchCounts& counts) {
  const std::size_t total =
      counts.total_positives() + counts.total_negatives();
  if (total == 0 || total > 12) {
    throw std::invalid_argument(
        "worst-gap enumeration handles 1..12 elements, got " +
        std::to_string(total));
  }
  for (std::size_t b = 0; b < counts.batches(); ++b) {
    if (counts.positives[b] == 0) {
      throw std::invalid_argument("batch " + std::to_string(b) +
                                  " has no positive");
    }
  }
  DgState st{counts.positives, counts.negatives};
  std::map<DgState, double> memo;
  const double min_sum = min_precision_sum(st, 0, 0, memo);
  const double min_ap =
      min_sum / static_cast<double>(counts.total_positives());
  // Every batch is perfectly ranked internally, so mean batch AP is 1.
  return 1.0 - min_ap;
}

namespace {

bool near(double x, double target, double radius) {
  return std::fabs(x - target) <= radius;
}

std::vector<bool> skip_mask(LossKind kind, const ScoreVector& scores,
                            const RankingInstance& inst,
                            const SurrogateConfig& scfg,
                            const LossConfig& lcfg, double h) {
  const double radius = 10.0 * h;
  std::vector<bool> skip(scores.size(), false);
  const bool rank_kinks =
      (kind == LossKind::kSupAP || kind == LossKind::kRoadmap);
  const bool hinge_kinks =
      (kind == LossKind::kCalibration || kind == LossKind::kRoadmap);
  if (rank_kinks) {
    const double delta = scfg.delta();
    for (std::size_t a = 0; a < inst.positives.size(); ++a) {
      for (std::size_t b = a + 1; b < inst.positives.size(); ++b) {
        // Tie-counting positive ranks jump where two positives cross.
        const double d =
            scores[inst.positives[a]] - scores[inst.positives[b]];
        if (near(d, 0.0, radius)) {
          skip[inst.positives[a]] = true;
          skip[inst.positives[b]] = true;
        }
      }
      for (std::size_t j = 0; j < inst.negatives.size(); ++j) {
        const double d =
            scores[inst.negatives[j]] - scores[inst.positives[a]];
        if (near(d, 0.0, radius) || near(d, delta, radius)) {
          skip[inst.positives[a]] = true;
          skip[inst.negatives[j]] = true;
        }
      }
    }
  }
  if (hinge_kinks) {
    for (std::size_t idx : inst.positives) {
      if (near(scores[idx], lcfg.alpha, radius)) skip[idx] = true;
    }
    for (std::size_t idx : inst.negatives) {
      if (near(scores[idx], lcfg.beta, radius)) skip[idx] = true;
    }
  }
  return skip;
}

}  // namespace

FiniteDiffGrad finite_diff_grad(LossKind kind, const ScoreVector& scores,
                                const RankingInstance& inst,
                                const SurrogateConfig& scfg,
                                const LossConfig& lcfg, double h) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("finite-difference step must be > 0");
  }
  FiniteDiffGrad out;
  out.grad.assign(scores.size(), 0.0);
  out.skipped = skip_mask(kind, scores, inst, scfg, lcfg, h);
  ScoreVector probe = scores;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    probe[i] = scores[i] + h;
    const double fp = evaluate_loss(kind, probe, inst, scfg, lcfg).value;
    probe[i] = scores[i] - h;
    const double fm = evaluate_loss(kind, probe, inst, scfg, lcfg).value;
    probe[i] = scores[i];
    out.grad[i] = (fp - fm) / (2.0 * h);
  }
  return out;
}

void to_json(nlohmann::json& j, const GradCheckReport& r) {
  nlohmann::json coords = nlohmann::json::array();
  for (const CoordRecord& c : r.worst_coords) {
    coords.push_back({{"analytic", c.analytic},
                      {"numeric", c.numeric},
                      {"rel_err", c.rel_err},
                      {"skipped", c.skipped}});
  }
  j = nlohmann::json{{"loss", std::string(loss_name(r.kind))},
                     {"trials", r.trials},
                     {"tol", r.tol},
                     {"h", r.h},
                     {"checked", r.checked},
                     {"skipped", r.skipped},
                     {"max_rel_err", r.max_rel_err},
                     {"pass", r.pass},
                     {"worst_trial", r.worst_trial},
                     {"worst_coords", coords}};
}

GradCheckReport grad_check(LossKind kind, std::size_t trials, double tol,
                           const SurrogateConfig& scfg, const LossConfig& lcfg,
                           double h, std::uint64_t seed) {
  if (trials == 0) {
    throw std::invalid_argument("grad check needs at least one trial");
  }
  if (!(tol > 0.0)) {
    throw std::invalid_argument("grad check tolerance must be > 0");
  }
  GradCheckReport rep;
  rep.kind = kind;
  rep.trials = trials;
  rep.tol = tol;
  rep.h = h;
  for (std::size_t t = 0; t < trials; ++t) {
    auto eng = make_engine(seed, t);
    std::uniform_int_distribution<std::size_t> size_dist(1, 20);
    const std::size_t np = size_dist(eng);
    const std::size_t nn = size_dist(eng);
    std::uniform_real_distribution<double> score_dist(-1.0, 1.0);
    ScoreVector scores(np + nn);
    for (double& s : scores) s = score_dist(eng);
    const RankingInstance inst = RankingInstance::external(np, nn);

    const LossOutput analytic = evaluate_loss(kind, scores, inst, scfg, lcfg);
    const FiniteDiffGrad fd =
        finite_diff_grad(kind, scores, inst, scfg, lcfg, h);

    std::vector<CoordRecord> recs(scores.size());
    double trial_worst = -1.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      CoordRecord& c = recs[i];
      c.analytic = analytic.grad[i];
      c.numeric = fd.grad[i];
      c.skipped = fd.skipped[i];
      if (c.skipped) {
        ++rep.skipped;
        continue;
      }
      const double scale =
          std::max({1.0, std::fabs(c.analytic), std::fabs(c.numeric)});
      c.rel_err = std::fabs(c.analytic - c.numeric) / scale;
      ++rep.checked;
      trial_worst = std::max(trial_worst, c.rel_err);
    }
    if (trial_worst >= 0.0 &&
        (rep.worst_coords.empty() || trial_worst > rep.max_rel_err)) {
      rep.max_rel_err = trial_worst;
      rep.worst_trial = t;
      rep.worst_coords = std::move(recs);
    }
  }
  rep.pass = rep.max_rel_err <= tol;
  return rep;
}

}  // namespace roadmap::oracle
