// Purpose: exact retrieval-quality metrics — average precision with
// tie-counting ranks, recall@k, mAP@R — and whole-set evaluation where every
// element queries the rest.
#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include <json.hpp>

#include "roadmap/core.hpp"

namespace roadmap {

// Exact average precision of one query: mean over positives of
// rank_pos / (rank_pos + rank_neg) with tie-counting ranks.
double exact_ap(const ScoreVector& scores, const RankingInstance& inst);

// 1.0 when at least one positive sits among the k highest-scoring retrieval
// elements, else 0.0. Ties are broken by ascending element index; k larger
// than the retrieval set is clamped.
double recall_at_k(const ScoreVector& scores, const RankingInstance& inst,
                   std::size_t k);

// Precision-at-rank averaged over the first R ranks with R = |positives|:
// rank j in the top R contributes (positives among top j) / j when the
// element at rank j is itself positive, else 0. Never exceeds exact_ap.
double map_at_r(const ScoreVector& scores, const RankingInstance& inst);

struct MetricsReport {
  double map = 0.0;
  double map_at_r = 0.0;
  std::map<std::size_t, double> recall_at;
  std::size_t query_count = 0;  // queries evaluated
  std::size_t skipped = 0;      // queries with no positive, excluded
};

// Serializes as {"map": ..., "map_at_r": ..., "recall@<k>": ...,
// "queries": ..., "skipped": ...}.
void to_json(nlohmann::json& j, const MetricsReport& r);

// Cosine-scores every element against all others (self excluded) and
// averages the metrics over queries that have at least one positive.
MetricsReport evaluate(const EmbeddingMatrix& embeddings,
                       const LabelVector& labels,
                       std::span<const std::size_t> recall_ks);

}  // namespace roadmap
