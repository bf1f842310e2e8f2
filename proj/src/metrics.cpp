#include "roadmap/metrics.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "roadmap/kernels.hpp"
#include "roadmap/surrogates.hpp"

namespace roadmap {
namespace {

// Retrieval elements (positives + negatives) ordered by descending score,
// ties by ascending element index.
std::vector<std::size_t> ranked_elements(const ScoreVector& scores,
                                         const RankingInstance& inst) {
  std::vector<std::size_t> order;
  order.reserve(inst.positives.size() + inst.negatives.size());
  order.insert(order.end(), inst.positives.begin(), inst.positives.end());
  order.insert(order.end(), inst.negatives.begin(), inst.negatives.end());
  std::sort(order.begin(), order.end(),
            [&scores](std::size_t a, std::size_t b) {
              if (scores[a] != scores[b]) return scores[a] > scores[b];
              return a < b;
            });
  return order;
}

}  // namespace

double exact_ap(const ScoreVector& scores, const RankingInstance& inst) {
  const RankBreakdown rb = exact_ranks(scores, inst);
  double sum = 0.0;
  for (std::size_t k = 0; k < rb.rank_pos.size(); ++k) {
    const double a = static_cast<double>(rb.rank_pos[k]);
    const double b = static_cast<double>(rb.rank_neg[k]);
    sum += a / (a + b);
  }
  return sum / static_cast<double>(rb.rank_pos.size());
}

double recall_at_k(const ScoreVector& scores, const RankingInstance& inst,
                   std::size_t k) {
  inst.validate(scores.size());
  if (k == 0) {
    throw std::invalid_argument("recall@k needs k >= 1");
  }
  const std::vector<std::size_t> order = ranked_elements(scores, inst);
  const std::size_t top = std::min(k, order.size());
  std::vector<char> is_pos(scores.size(), 0);
  for (std::size_t idx : inst.positives) is_pos[idx] = 1;
  for (std::size_t r = 0; r < top; ++r) {
    if (is_pos[order[r]]) return 1.0;
  }
  return 0.0;
}

double map_at_r(const ScoreVector& scores, const RankingInstance& inst) {
  inst.validate(scores.size());
  const std::vector<std::size_t> order = ranked_elements(scores, inst);
  const std::size_t r_cap = std::min(inst.positives.size(), order.size());
  std::vector<char> is_pos(scores.size(), 0);
  for (std::size_t idx : inst.positives) is_pos[idx] = 1;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < r_cap; ++r) {
    if (is_pos[order[r]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(inst.positives.size());
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = nlohmann::json{{"map", r.map},
                     {"map_at_r", r.map_at_r},
                     {"queries", r.query_count},
                     {"skipped", r.skipped}};
  for (const auto& [k, v] : r.recall_at) {
    j["recall@" + std::to_string(k)] = v;
  }
}

MetricsReport evaluate(const EmbeddingMatrix& embeddings,
                       const LabelVector& labels,
                       std::span<const std::size_t> recall_ks) {
  embeddings.validate();
  if (labels.size() != embeddings.rows) {
    throw std::invalid_argument("label count " + std::to_string(labels.size()) +
                                " does not match embedding rows " +
                                std::to_string(embeddings.rows));
  }
  MetricsReport rep;
  for (std::size_t k : recall_ks) rep.recall_at[k] = 0.0;
  for (std::size_t q = 0; q < embeddings.rows; ++q) {
    const RankingInstance inst = build_instance(labels, q);
    if (inst.flagged()) {
      ++rep.skipped;
      continue;
    }
    const ScoreVector scores = cosine_similarity(embeddings.row(q), embeddings);
    rep.map += exact_ap(scores, inst);
    rep.map_at_r += map_at_r(scores, inst);
    for (std::size_t k : recall_ks) {
      rep.recall_at[k] += recall_at_k(scores, inst, k);
    }
    ++rep.query_count;
  }
  if (rep.query_count > 0) {
    const double inv = 1.0 / static_cast<double>(rep.query_count);
    rep.map *= inv;
    rep.map_at_r *= inv;
    for (auto& [k, v] : rep.recall_at) v *= inv;
  }
  return rep;
}

}  // namespace roadmap
