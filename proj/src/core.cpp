#include "roadmap/core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "roadmap/kernels.hpp"

namespace roadmap {

void EmbeddingMatrix::validate() const {
  if (rows == 0 || dim == 0) {
    throw std::invalid_argument("embedding matrix must have rows >= 1 and dim >= 1");
  }
  if (data.size() != rows * dim) {
    throw std::invalid_argument(
        "embedding matrix storage size " + std::to_string(data.size()) +
        " does not match rows*dim = " + std::to_string(rows * dim));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw std::invalid_argument("embedding matrix entry at row " +
                                  std::to_string(i / dim) + ", col " +
                                  std::to_string(i % dim) + " is not finite");
    }
  }
}

RankingInstance RankingInstance::external(std::size_t n_pos,
                                          std::size_t n_neg) {
  RankingInstance inst;
  inst.positives.reserve(n_pos);
  inst.negatives.reserve(n_neg);
  for (std::size_t i = 0; i < n_pos; ++i) inst.positives.push_back(i);
  for (std::size_t i = 0; i < n_neg; ++i) inst.negatives.push_back(n_pos + i);
  return inst;
}

void RankingInstance::validate(std::size_t n) const {
  if (flagged()) {
    throw std::invalid_argument("ranking instance has no positives");
  }
  std::vector<char> seen(n, 0);
  auto check = [&](const std::vector<std::size_t>& side, const char* name) {
    for (std::size_t idx : side) {
      if (idx >= n) {
        throw std::invalid_argument(std::string(name) + " index " +
                                    std::to_string(idx) +
                                    " out of range for " + std::to_string(n) +
                                    " scores");
      }
      if (seen[idx]) {
        throw std::invalid_argument("index " + std::to_string(idx) +
                                    " appears twice in the instance");
      }
      seen[idx] = 1;
    }
  };
  check(positives, "positive");
  check(negatives, "negative");
  if (query_index != kExternalQuery && query_index < n && seen[query_index]) {
    throw std::invalid_argument("query index " + std::to_string(query_index) +
                                " must not appear among positives/negatives");
  }
}

RankingInstance build_instance(const LabelVector& labels,
                               std::size_t query_index) {
  if (query_index >= labels.size()) {
    throw std::invalid_argument("query index " + std::to_string(query_index) +
                                " out of range for " +
                                std::to_string(labels.size()) + " labels");
  }
  RankingInstance inst;
  inst.query_index = query_index;
  const int q = labels[query_index];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i == query_index) continue;
    if (labels[i] == q) {
      inst.positives.push_back(i);
    } else {
      inst.negatives.push_back(i);
    }
  }
  return inst;
}

namespace {

double checked_norm(std::span<const double> v, const std::string& who) {
  const double sq = kernels::dot(v.data(), v.data(), v.size());
  if (sq == 0.0) {
    throw std::invalid_argument(who + " has zero norm");
  }
  return std::sqrt(sq);
}

}  // namespace

ScoreVector cosine_similarity(std::span<const double> query,
                              const EmbeddingMatrix& gallery) {
  if (query.size() != gallery.dim) {
    throw std::invalid_argument(
        "query dimension " + std::to_string(query.size()) +
        " does not match gallery dimension " + std::to_string(gallery.dim));
  }
  const double qn = checked_norm(query, "query vector");
  ScoreVector scores(gallery.rows);
  for (std::size_t j = 0; j < gallery.rows; ++j) {
    auto g = gallery.row(j);
    const double gn = checked_norm(g, "gallery row " + std::to_string(j));
    scores[j] = kernels::dot(query.data(), g.data(), query.size()) / (qn * gn);
  }
  return scores;
}

CosineBackward cosine_similarity_backward(std::span<const double> query,
                                          const EmbeddingMatrix& gallery,
                                          const ScoreVector& upstream) {
  if (query.size() != gallery.dim) {
    throw std::invalid_argument(
        "query dimension " + std::to_string(query.size()) +
        " does not match gallery dimension " + std::to_string(gallery.dim));
  }
  if (upstream.size() != gallery.rows) {
    throw std::invalid_argument("upstream gradient size " +
                                std::to_string(upstream.size()) +
                                " does not match gallery rows " +
                                std::to_string(gallery.rows));
  }
  const std::size_t d = gallery.dim;
  const double qn = checked_norm(query, "query vector");
  CosineBackward out;
  out.query_grad.assign(d, 0.0);
  out.gallery_grad = EmbeddingMatrix(gallery.rows, d);

  // score_j = <q, g_j> / (|q| |g_j|)
  // d/dq   = g_j / (|q| |g_j|) - score_j * q / |q|^2
  // d/dg_j = q / (|q| |g_j|) - score_j * g_j / |g_j|^2
  for (std::size_t j = 0; j < gallery.rows; ++j) {
    const double u = upstream[j];
    auto g = gallery.row(j);
    const double gn = checked_norm(g, "gallery row " + std::to_string(j));
    const double s =
        kernels::dot(query.data(), g.data(), d) / (qn * gn);
    if (u == 0.0) continue;
    const double cross = u / (qn * gn);
    const double q_self = u * s / (qn * qn);
    const double g_self = u * s / (gn * gn);
    auto gg = out.gallery_grad.row(j);
    for (std::size_t c = 0; c < d; ++c) {
      out.query_grad[c] += cross * g[c] - q_self * query[c];
      gg[c] = cross * query[c] - g_self * g[c];
    }
  }
  return out;
}

}  // namespace roadmap
