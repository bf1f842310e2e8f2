// Acceptance gate for the roadmap library. Each numbered check prints exactly
// one line, "criterion N: PASS -- detail" or "criterion N: FAIL -- detail",
// with its tolerances pinned right here in code. Checks 8-10 share one
// training grid that is computed once per process. Run with the check numbers
// as arguments (no arguments = all of them); the exit code is 0 only when
// every requested check passed.
#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "roadmap/core.hpp"
#include "roadmap/decomp.hpp"
#include "roadmap/metrics.hpp"
#include "roadmap/oracle.hpp"
#include "roadmap/rng.hpp"
#include "roadmap/surrogates.hpp"
#include "roadmap/train.hpp"

#ifndef ROADMAP_CLI_PATH
#error "ROADMAP_CLI_PATH must point at the CLI binary"
#endif

namespace {

using namespace roadmap;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

std::string f6(double v) {
  std::ostringstream o;
  o << std::setprecision(6) << v;
  return o.str();
}

std::string fsci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::string fsecs(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", s);
  return buf;
}

struct RandomInstance {
  ScoreVector scores;
  RankingInstance inst;
};

// Uniformly sized instance (1..20 positives and negatives) with scores
// uniform on [-1, 1]; `distinct` redraws until no two scores collide.
RandomInstance random_instance(std::mt19937_64& rng, bool distinct) {
  std::uniform_int_distribution<std::size_t> size_dist(1, 20);
  std::uniform_real_distribution<double> score_dist(-1.0, 1.0);
  RandomInstance r;
  const std::size_t np = size_dist(rng);
  const std::size_t nn = size_dist(rng);
  r.inst = RankingInstance::external(np, nn);
  r.scores.resize(np + nn);
  while (true) {
    for (double& s : r.scores) s = score_dist(rng);
    if (!distinct) return r;
    ScoreVector sorted = r.scores;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end()) {
      return r;
    }
  }
}

// The worked three-element example: two close positives under one clearly
// misranked negative.
const ScoreVector kToyScores = {0.85, 0.86, 0.99};

RankingInstance toy_instance() {
  RankingInstance inst;
  inst.positives = {0, 1};
  inst.negatives = {2};
  return inst;
}

// ---------------------------------------------------------------------------
// 1. The robust surrogate upper-bounds the exact AP loss; the fully smoothed
//    one does not (witness).
Outcome criterion1() {
  Stopwatch sw;
  const double kSlack = 1e-12;
  const std::size_t kTrials = 10000;
  SurrogateConfig scfg;
  auto rng = make_engine(20260822, 0xA1);
  std::size_t violations = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < kTrials; ++t) {
    RandomInstance r = random_instance(rng, false);
    const double exact_loss = 1.0 - exact_ap(r.scores, r.inst);
    const LossOutput sup = supap_loss(r.scores, r.inst, scfg);
    const double margin = sup.value - exact_loss;
    min_margin = std::min(min_margin, margin);
    if (margin < -kSlack) ++violations;
  }
  const RankingInstance toy = toy_instance();
  const double toy_exact_loss = 1.0 - exact_ap(kToyScores, toy);
  const LossOutput smooth = smoothap_loss(kToyScores, toy, scfg);
  const bool witness = smooth.value < toy_exact_loss;
  const double secs = sw.seconds();

  Outcome o;
  o.pass = violations == 0 && witness && secs < 10.0;
  o.detail = "supap >= exact AP loss - 1e-12 on " +
             std::to_string(kTrials - violations) + "/" +
             std::to_string(kTrials) + " random instances (min margin " +
             fsci(min_margin) + "); smoothap witness " + f6(smooth.value) +
             " < " + f6(toy_exact_loss) + "; " + fsecs(secs) + " s (cap 10)";
  return o;
}

// ---------------------------------------------------------------------------
// 2. Analytic gradients of all four losses match central finite differences.
Outcome criterion2() {
  Stopwatch sw;
  const double kTol = 1e-4;
  const std::size_t kTrials = 100;
  SurrogateConfig scfg;
  LossConfig lcfg;
  const std::array<LossKind, 4> kinds = {LossKind::kSupAP, LossKind::kSmoothAP,
                                         LossKind::kCalibration,
                                         LossKind::kRoadmap};
  bool all_pass = true;
  std::string parts;
  for (LossKind k : kinds) {
    const auto rep = oracle::grad_check(k, kTrials, kTol, scfg, lcfg, 1e-6, 7);
    all_pass = all_pass && rep.pass;
    if (!parts.empty()) parts += ", ";
    parts += std::string(loss_name(k)) + " max rel err " +
             fsci(rep.max_rel_err) + " (" + std::to_string(rep.skipped) +
             " coords skipped near kinks)";
  }
  const double secs = sw.seconds();
  Outcome o;
  o.pass = all_pass && secs < 30.0;
  o.detail = std::to_string(kTrials) + " trials each at tol 1e-4: " + parts +
             "; " + fsecs(secs) + " s (cap 30)";
  return o;
}

// ---------------------------------------------------------------------------
// 3. Three-element example: the fully smoothed loss is asked to show a
//    vanishing negative gradient (|dL/ds3| < 1e-6) with the positive pair
//    cancelling to 1e-9, while the robust surrogate must keep the negative's
//    gradient alive. The smoothed loss depends on score differences only, so
//    its three gradients must sum to zero exactly: dL/ds3 = -(dL/ds1 +
//    dL/ds2), and both pinned thresholds fail together, honestly, by the
//    same 3.75e-5.
Outcome criterion3() {
  SurrogateConfig scfg;
  LossConfig lcfg;
  const RankingInstance toy = toy_instance();
  const LossOutput smooth = smoothap_loss(kToyScores, toy, scfg);
  const LossOutput sup = supap_loss(kToyScores, toy, scfg);

  const double pair_sum = smooth.grad[0] + smooth.grad[1];
  const bool smooth_ok = std::fabs(pair_sum) <= 1e-9 &&
                         std::fabs(smooth.grad[2]) < 1e-6;
  const bool sup_ok =
      sup.grad[2] > 0.0 && sup.grad[0] <= 0.0 && sup.grad[1] <= 0.0;

  // Cross-check the analytic gradients against finite differences so a FAIL
  // above can only mean the thresholds are unreachable, not that the
  // gradients are wrong.
  const auto fd =
      oracle::finite_diff_grad(LossKind::kSmoothAP, kToyScores, toy, scfg,
                               lcfg, 1e-6);
  double fd_gap = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    fd_gap = std::max(fd_gap, std::fabs(fd.grad[i] - smooth.grad[i]));
  }

  Outcome o;
  o.pass = smooth_ok && sup_ok;
  o.detail = "smoothap grads (" + f6(smooth.grad[0]) + ", " +
             f6(smooth.grad[1]) + ", " + fsci(smooth.grad[2]) +
             "): positive-pair sum " + fsci(pair_sum) +
             " vs target |sum| <= 1e-9, negative grad " +
             fsci(smooth.grad[2]) +
             " vs target < 1e-6 -- the smoothed loss depends only on score "
             "differences, so its gradients sum to zero exactly and the "
             "negative's gradient must offset the pair; finite differences "
             "agree with the analytic gradients to " +
             fsci(fd_gap) +
             ", so the thresholds, not the gradients, are unmet; supap side " +
             std::string(sup_ok ? "passed" : "FAILED") + " (dL/ds3 = " +
             f6(sup.grad[2]) + " > 0, dL/ds1 = " + f6(sup.grad[0]) +
             " <= 0, dL/ds2 = " + f6(sup.grad[1]) + " <= 0)";
  return o;
}

// ---------------------------------------------------------------------------
// 4. The linear-regime onset derived from (tau, epsilon).
Outcome criterion4() {
  const double d = delta_from(0.01, 0.01);
  Outcome o;
  o.pass = std::fabs(d - 0.04595) <= 1e-5;
  o.detail = "delta_from(0.01, 0.01) = " + f6(d) +
             ", within 1e-5 of 0.04595";
  return o;
}

// ---------------------------------------------------------------------------
// 5. Decomposability-gap bounds: exhaustive enumeration over every uniform
//    batch composition with <= 10 total elements confirms the enumerated
//    worst gap never exceeds the closed-form bound and attains it (the
//    juxtaposed arrangement is the maximizer); the calibration-refined bound
//    never exceeds the worst-case bound over every respect/violate split and
//    collapses to zero when every element respects its threshold.
Outcome criterion5() {
  Stopwatch sw;
  const double kTol = 1e-12;
  std::size_t compositions = 0;
  std::size_t stats_checked = 0;
  double max_excess = 0.0;       // enumerated - bound, should stay <= 0
  double max_equality_gap = 0.0; // |enumerated - bound| at the maximizer
  bool ok = true;
  std::string first_bad;

  for (std::size_t k = 1; k <= 10 && ok; ++k) {
    for (std::size_t p = 1; k * p <= 10 && ok; ++p) {
      for (std::size_t n = 0; k * (p + n) <= 10 && ok; ++n) {
        BatchCounts counts;
        counts.positives.assign(k, p);
        counts.negatives.assign(k, n);
        const double bound = worst_case_bound(counts);
        const double worst = oracle::enumerate_worst_dg(counts);
        ++compositions;
        max_excess = std::max(max_excess, worst - bound);
        max_equality_gap =
            std::max(max_equality_gap, std::fabs(worst - bound));
        if (worst > bound + kTol || std::fabs(worst - bound) > kTol) {
          ok = false;
          first_bad = "composition " + std::to_string(k) + " batches of (" +
                      std::to_string(p) + " pos, " + std::to_string(n) +
                      " neg): enumerated " + fsci(worst) + " vs bound " +
                      fsci(bound);
          break;
        }

        // Every split of each batch's positives/negatives into
        // threshold-respecting vs violating counts.
        const std::size_t per_batch = (p + 1) * (n + 1);
        std::vector<std::size_t> digit(k, 0);
        while (true) {
          CalibrationStats stats;
          for (std::size_t b = 0; b < k; ++b) {
            const std::size_t gp = digit[b] % (p + 1);
            const std::size_t gn = digit[b] / (p + 1);
            stats.g_pos.push_back(gp);
            stats.e_pos.push_back(p - gp);
            stats.g_neg.push_back(gn);
            stats.e_neg.push_back(n - gn);
          }
          const double refined = refined_bound(stats);
          ++stats_checked;
          if (refined > bound + kTol) {
            ok = false;
            first_bad = "refined bound " + fsci(refined) +
                        " above worst-case " + fsci(bound) + " for " +
                        std::to_string(k) + " batches of (" +
                        std::to_string(p) + ", " + std::to_string(n) + ")";
            break;
          }
          bool all_respect = true;
          for (std::size_t b = 0; b < k; ++b) {
            all_respect = all_respect && stats.e_pos[b] == 0 &&
                          stats.e_neg[b] == 0;
          }
          if (all_respect && std::fabs(refined) > kTol) {
            ok = false;
            first_bad = "refined bound " + fsci(refined) +
                        " nonzero although every element respects its "
                        "threshold";
            break;
          }
          // Odometer over the k per-batch splits.
          std::size_t b = 0;
          while (b < k && ++digit[b] == per_batch) digit[b++] = 0;
          if (b == k) break;
        }
      }
    }
  }

  // The two-batch single-pair case attains exactly 1/6.
  BatchCounts pair2;
  pair2.positives = {1, 1};
  pair2.negatives = {1, 1};
  const double pin = worst_case_bound(pair2);
  const bool pin_ok = std::fabs(pin - 1.0 / 6.0) <= kTol;

  const double secs = sw.seconds();
  Outcome o;
  o.pass = ok && pin_ok && secs < 60.0;
  o.detail =
      ok ? (std::to_string(compositions) +
            " uniform compositions enumerated: worst gap == closed-form "
            "bound to " +
            fsci(max_equality_gap) + " (two batches of (1,1) pin at 1/6: " +
            f6(pin) + "); refined <= worst-case on " +
            std::to_string(stats_checked) +
            " respect/violate splits and == 0 whenever nothing violates; " +
            fsecs(secs) + " s (cap 60)")
         : first_bad;
  return o;
}

// ---------------------------------------------------------------------------
// 6. The counting AP implementation agrees with an independent sort-based
//    one, and mAP@R never exceeds AP.
Outcome criterion6() {
  Stopwatch sw;
  const double kTol = 1e-12;
  const std::size_t kTrials = 10000;
  auto rng = make_engine(20260822, 0xA6);
  double max_diff = 0.0;
  std::size_t agree = 0;
  bool truncation_ok = true;
  for (std::size_t t = 0; t < kTrials; ++t) {
    RandomInstance r = random_instance(rng, true);
    const double counted = exact_ap(r.scores, r.inst);
    const double sorted = oracle::sort_based_ap(r.scores, r.inst);
    const double diff = std::fabs(counted - sorted);
    max_diff = std::max(max_diff, diff);
    if (diff <= kTol) ++agree;
    if (map_at_r(r.scores, r.inst) > counted + kTol) truncation_ok = false;
  }
  const double secs = sw.seconds();
  Outcome o;
  o.pass = agree == kTrials && truncation_ok;
  o.detail = "exact_ap == sort_based_ap to 1e-12 on " + std::to_string(agree) +
             "/" + std::to_string(kTrials) +
             " distinct-score instances (max diff " + fsci(max_diff) +
             "); mAP@R <= AP " +
             std::string(truncation_ok ? "held on every instance" : "VIOLATED") +
             "; " + fsecs(secs) + " s";
  return o;
}

// ---------------------------------------------------------------------------
// 7. Desk-scale training run with every default: the held-out probe must be
//    solved nearly perfectly.
Outcome criterion7() {
  Stopwatch sw;
  SyntheticConfig sc;  // 8 classes, 16 per class, dim 32, sigma 0.1
  sc.seed = 0;
  Dataset ds = generate_synthetic(sc);
  TrainConfig tc;  // roadmap defaults, embed 16, batch 32, m 4, 50 epochs
  tc.seed = 0;
  TrainResult res = train(ds, tc);
  const EpochRecord& last = res.history.back();
  const double map_r = last.probe_metrics.map_at_r;
  const double r1 = last.probe_metrics.recall_at.at(1);
  const double secs = sw.seconds();
  Outcome o;
  o.pass = map_r >= 0.95 && r1 == 1.0 && secs < 120.0;
  o.detail = "128 samples -> " + std::to_string(res.train_indices.size()) +
             " train / " + std::to_string(res.probe_indices.size()) +
             " probe, 50 epochs: probe mAP@R = " + f6(map_r) +
             " (needs >= 0.95), R@1 = " + f6(r1) + " (needs 1.0); " +
             fsecs(secs) + " s (cap 120)";
  return o;
}

// ---------------------------------------------------------------------------
// Shared training grid for checks 8-10: one noisy 12-class set, five seeds,
// small-batch runs across the blend grid plus large-batch runs at the two
// blends the batch comparison needs.
struct GridStats {
  double mean_map = 0.0;
  double mean_dg = 0.0;
};

struct SharedGrid {
  std::map<std::pair<std::size_t, int>, GridStats> cells;  // (batch, %blend)
  std::size_t seeds = 0;
  double secs = 0.0;
};

const SharedGrid& shared_grid() {
  static const SharedGrid grid = [] {
    Stopwatch sw;
    SharedGrid g;
    // Twelve classes with batch 8 / m 4 means each small-batch step sees two
    // classes out of twelve, so per-batch ranking saturates long before the
    // global ranking is right -- the regime where score calibration across
    // batches pays off. Sigma 0.2 in 24 dims keeps the problem learnable but
    // far from trivially separable at embed_dim 8.
    SyntheticConfig sc;
    sc.classes = 12;
    sc.per_class = 16;
    sc.feature_dim = 24;
    sc.noise_sigma = 0.2;
    sc.seed = 42;
    Dataset ds = generate_synthetic(sc);

    const std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    struct RunSpec {
      std::size_t batch;
      int blend_pct;
    };
    std::vector<RunSpec> specs;
    for (int pct : {0, 20, 50, 80, 100}) specs.push_back({8, pct});
    for (int pct : {0, 50}) specs.push_back({32, pct});

    for (const RunSpec& spec : specs) {
      double map_sum = 0.0;
      double dg_sum = 0.0;
      for (std::uint64_t s : seeds) {
        TrainConfig tc;
        tc.loss_cfg.lambda = spec.blend_pct / 100.0;
        tc.embed_dim = 8;
        tc.batch = spec.batch;
        tc.m = 4;
        tc.epochs = 100;
        tc.optimizer.lr = 0.001;
        tc.seed = s;
        TrainResult res = train(ds, tc);
        map_sum += res.history.back().probe_metrics.map_at_r;
        dg_sum += res.history.back().probe_dg;
      }
      const double inv = 1.0 / static_cast<double>(seeds.size());
      g.cells[{spec.batch, spec.blend_pct}] = {map_sum * inv, dg_sum * inv};
    }
    g.seeds = seeds.size();
    g.secs = sw.seconds();
    return g;
  }();
  return grid;
}

// 8. The calibration term helps more at small batches: the mAP@R gain of the
//    blended loss over the pure ranking loss shrinks as the batch grows.
Outcome criterion8() {
  const SharedGrid& g = shared_grid();
  const double gain8 =
      g.cells.at({8, 50}).mean_map - g.cells.at({8, 0}).mean_map;
  const double gain32 =
      g.cells.at({32, 50}).mean_map - g.cells.at({32, 0}).mean_map;
  Outcome o;
  o.pass = gain8 > gain32 && gain8 >= 0.0 && gain32 >= 0.0;
  o.detail = "mean mAP@R gain of the blend over pure ranking, " +
             std::to_string(g.seeds) + " seeds: batch 8 " + fsci(gain8) +
             " vs batch 32 " + fsci(gain32) +
             " (needs batch-8 gain larger, both >= 0); grid " +
             fsecs(g.secs) + " s";
  return o;
}

// 9. The blend has an interior optimum: every mixed weight beats both pure
//    endpoints on mean mAP@R.
Outcome criterion9() {
  const SharedGrid& g = shared_grid();
  const double m0 = g.cells.at({8, 0}).mean_map;
  const double m20 = g.cells.at({8, 20}).mean_map;
  const double m50 = g.cells.at({8, 50}).mean_map;
  const double m80 = g.cells.at({8, 80}).mean_map;
  const double m100 = g.cells.at({8, 100}).mean_map;
  const double worst_mixed = std::min({m20, m50, m80});
  const double best_pure = std::max(m0, m100);
  Outcome o;
  o.pass = worst_mixed > best_pure;
  o.detail = "mean mAP@R at batch 8 over " + std::to_string(g.seeds) +
             " seeds -- blend 0: " + f6(m0) + ", 0.2: " + f6(m20) +
             ", 0.5: " + f6(m50) + ", 0.8: " + f6(m80) + ", 1: " + f6(m100) +
             " (every mixed weight must beat both pure endpoints)";
  return o;
}

// 10. Training with the blended loss shrinks the held-out decomposability
//     gap relative to the pure ranking loss.
Outcome criterion10() {
  const SharedGrid& g = shared_grid();
  const double dg_blend = g.cells.at({8, 50}).mean_dg;
  const double dg_pure = g.cells.at({8, 0}).mean_dg;
  Outcome o;
  o.pass = dg_blend < dg_pure;
  o.detail = "mean held-out gap over " + std::to_string(g.seeds) +
             " seeds at batch 8: blended " + fsci(dg_blend) +
             " vs pure ranking " + fsci(dg_pure) +
             " (blended must be strictly lower)";
  return o;
}

// ---------------------------------------------------------------------------
// 11. Bit determinism end to end through the CLI.
int run_cmd(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

Outcome criterion11() {
  const fs::path dir = fs::temp_directory_path() / "roadmap_acceptance_c11";
  fs::create_directories(dir);
  const std::string cli = ROADMAP_CLI_PATH;
  const std::string data = (dir / "ds.csv").string();
  const std::string quiet = " > /dev/null 2>&1";

  Outcome o;
  if (run_cmd(cli +
              " gen --classes 6 --per-class 8 --dim 12 --sigma 0.2 --seed 4 "
              "--out " +
              data + quiet) != 0) {
    o.detail = "dataset generation through the CLI failed";
    return o;
  }
  const std::string flags =
      " train --data " + data +
      " --epochs 4 --batch 8 --m 2 --embed-dim 6 --seed 9";
  const fs::path ckpt_a = dir / "a.ckpt", hist_a = dir / "a.jsonl";
  const fs::path ckpt_b = dir / "b.ckpt", hist_b = dir / "b.jsonl";
  const int rc_a = run_cmd(cli + flags + " --ckpt-out " + ckpt_a.string() +
                           " --history-out " + hist_a.string() + quiet);
  const int rc_b = run_cmd(cli + flags + " --ckpt-out " + ckpt_b.string() +
                           " --history-out " + hist_b.string() + quiet);
  if (rc_a != 0 || rc_b != 0) {
    o.detail = "training through the CLI failed (exit " +
               std::to_string(rc_a) + " / " + std::to_string(rc_b) + ")";
    return o;
  }
  const std::string ca = file_bytes(ckpt_a);
  const std::string cb = file_bytes(ckpt_b);
  const std::string ha = file_bytes(hist_a);
  const std::string hb = file_bytes(hist_b);
  const bool ckpt_same = !ca.empty() && ca == cb;
  const bool hist_same = !ha.empty() && ha == hb;
  o.pass = ckpt_same && hist_same;
  o.detail = "two identical-flag CLI train runs: checkpoints " +
             std::string(ckpt_same ? "bit-identical" : "DIFFER") + " (" +
             std::to_string(ca.size()) + " bytes), histories " +
             std::string(hist_same ? "bit-identical" : "DIFFER") + " (" +
             std::to_string(ha.size()) + " bytes)";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  using Criterion = Outcome (*)();
  const std::map<int, Criterion> criteria = {
      {1, criterion1}, {2, criterion2},  {3, criterion3}, {4, criterion4},
      {5, criterion5}, {6, criterion6},  {7, criterion7}, {8, criterion8},
      {9, criterion9}, {10, criterion10}, {11, criterion11}};

  std::vector<int> requested;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (criteria.find(n) == criteria.end()) {
      std::cerr << "unknown criterion '" << argv[i] << "' (valid: 1-11)\n";
      return 2;
    }
    requested.push_back(n);
  }
  if (requested.empty()) {
    for (const auto& [n, fn] : criteria) requested.push_back(n);
  }

  bool all_pass = true;
  for (int n : requested) {
    const Outcome o = criteria.at(n)();
    all_pass = all_pass && o.pass;
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL")
              << " -- " << o.detail << std::endl;
  }
  return all_pass ? 0 : 1;
}
