// Purpose: core value types for retrieval problems — embedding matrices,
// labels, similarity scores, and the positive/negative index split a query
// induces — plus cosine scoring with its backward pass.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace roadmap {

// Similarity scores over a retrieval set, one entry per element.
using ScoreVector = std::vector<double>;

// Integer class label per element.
using LabelVector = std::vector<int>;

// Dense row-major matrix of row vectors (embeddings or raw features).
// Rows are NOT assumed unit-norm; cosine scoring normalizes explicitly.
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> data;  // rows * dim, row-major

  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t r, std::size_t d)
      : rows(r), dim(d), data(r * d, 0.0) {}

  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * dim, dim};
  }
  std::span<double> row(std::size_t i) {
    return {data.data() + i * dim, dim};
  }

  // Throws std::invalid_argument on empty shape, size mismatch, or any
  // non-finite entry.
  void validate() const;
};

// A query's view of a retrieval set: which score indices are positive
// (same class) and which are negative. The query element itself is never a
// member of either side. query_index is the element's own index for in-batch
// queries, or kExternalQuery when the query is not part of the retrieval set.
struct RankingInstance {
  static constexpr std::size_t kExternalQuery = static_cast<std::size_t>(-1);

  std::size_t query_index = kExternalQuery;
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;

  // A query with no positive is flagged; losses and metrics reject it and
  // callers are expected to skip it (and count it).
  bool flagged() const { return positives.empty(); }

  // Convenience layout for tests and tools: positives occupy indices
  // [0, n_pos), negatives [n_pos, n_pos + n_neg), query external.
  static RankingInstance external(std::size_t n_pos, std::size_t n_neg);

  // Throws std::invalid_argument when flagged or when an index is out of
  // range / duplicated across the two sides for a score vector of size n.
  void validate(std::size_t n) const;
};

// Splits a label vector into the positive/negative sets of the element at
// query_index (which is excluded from both sides).
RankingInstance build_instance(const LabelVector& labels,
                               std::size_t query_index);

// Cosine similarity of one query vector against every row of a gallery.
// Throws std::invalid_argument on dimension mismatch or a zero-norm vector
// (the error message names the offending row).
ScoreVector cosine_similarity(std::span<const double> query,
                              const EmbeddingMatrix& gallery);

struct CosineBackward {
  std::vector<double> query_grad;   // d(loss)/d(query), length dim
  EmbeddingMatrix gallery_grad;     // d(loss)/d(gallery), same shape
};

// Backward pass of cosine_similarity: upstream holds d(loss)/d(score_j).
CosineBackward cosine_similarity_backward(std::span<const double> query,
                                          const EmbeddingMatrix& gallery,
                                          const ScoreVector& upstream);

}  // namespace roadmap
