// Purpose: desk-scale training harness — synthetic clustered datasets, class
// balanced batch samplers, a linear embedding model, SGD/Adam with a step
// schedule, and a fully seeded training loop that records per-epoch loss,
// held-out metrics, and the held-out decomposability gap.
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadmap/core.hpp"
#include "roadmap/metrics.hpp"
#include "roadmap/surrogates.hpp"

namespace roadmap {

struct SyntheticConfig {
  std::size_t classes = 8;
  std::size_t per_class = 16;
  std::size_t feature_dim = 32;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Dataset {
  EmbeddingMatrix features;
  LabelVector labels;  // classes are 0..classes-1 for synthetic data
};

// Gaussian class clusters: one unit-norm mean per class drawn uniformly on
// the sphere, samples = mean + per-coordinate N(0, sigma^2) noise.
// Deterministic in cfg.seed.
Dataset generate_synthetic(const SyntheticConfig& cfg);

using BatchList = std::vector<std::vector<std::size_t>>;

// One epoch of batches: each batch draws batch/m distinct classes and m
// samples per class, all without replacement inside the batch, so every
// element sees m-1 in-batch positives. Throws std::invalid_argument when m
// < 2, batch is not a multiple of m, or fewer than batch/m classes have m
// samples. Deterministic in seed.
BatchList m_per_class_batches(const LabelVector& labels, std::size_t batch,
                              std::size_t m, std::uint64_t seed);

// Category-pair variant: visits every unordered pair of super-categories
// (in seeded order) and applies the m-per-class strategy restricted to that
// pair's classes. Pairs whose class pool cannot fill a batch are skipped and
// reported through `warnings` when given. `categories` maps class -> category.
BatchList category_pair_batches(const LabelVector& labels,
                                const std::map<int, int>& categories,
                                std::size_t batch, std::size_t m,
                                std::uint64_t seed,
                                std::vector<std::string>* warnings = nullptr);

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-3;
  double momentum = 0.9;       // SGD
  double beta1 = 0.9;          // Adam
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double decay_factor = 0.3;
  // Epochs at which the rate multiplies by decay_factor; when empty, the
  // trainer fills in 60% and 80% of the epoch count.
  std::vector<std::size_t> decay_epochs;

  void validate() const;
};

struct OptimizerState {
  std::vector<double> m1;  // SGD velocity / Adam first moment
  std::vector<double> m2;  // Adam second moment
  std::size_t step = 0;
};

// One parameter update with the given effective learning rate.
void optimizer_step(const OptimizerConfig& cfg, OptimizerState& state,
                    double lr, std::vector<double>& params,
                    const std::vector<double>& grads);

// Linear embedder: projection is feature_dim x embed_dim.
struct ModelParams {
  EmbeddingMatrix projection;
};

ModelParams init_model(std::size_t feature_dim, std::size_t embed_dim,
                       std::uint64_t seed);

// Row-wise projection: embeddings = features * projection.
EmbeddingMatrix embed(const ModelParams& params,
                      const EmbeddingMatrix& features);

enum class SamplerKind { kMPerClass, kCategoryPair };

struct TrainConfig {
  LossKind loss = LossKind::kRoadmap;
  SurrogateConfig surrogate;
  LossConfig loss_cfg;
  OptimizerConfig optimizer;
  SamplerKind sampler = SamplerKind::kMPerClass;
  std::map<int, int> categories;  // pair sampler only
  std::size_t embed_dim = 16;
  std::size_t batch = 32;
  std::size_t m = 4;
  std::size_t epochs = 50;
  double probe_fraction = 0.25;  // held-out stratified split
  std::size_t probe_batches = 2; // partition size for the gap probe
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  MetricsReport probe_metrics;
  double probe_dg = 0.0;
  std::size_t batches = 0;
  std::size_t skipped_batches = 0;
};

void to_json(nlohmann::json& j, const EpochRecord& r);

using TrainHistory = std::vector<EpochRecord>;

struct TrainResult {
  ModelParams params;
  TrainHistory history;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> probe_indices;
};

// Trains the linear embedder on the dataset minus the probe split and
// evaluates on the probe split after every epoch. Fully deterministic in
// cfg.seed. When the probe fraction rounds to zero samples the evaluation
// falls back to the training split.
TrainResult train(const Dataset& data, const TrainConfig& cfg);

struct ProbeDgReport {
  double dg = 0.0;            // means over evaluated queries
  double bound_worst = 0.0;
  std::optional<double> bound_refined;
  std::size_t queries = 0;
  std::size_t skipped = 0;    // flagged or fewer positives than batches
};

void to_json(nlohmann::json& j, const ProbeDgReport& r);

// Per-query decomposability gap under a seeded partition of each query's
// retrieval set into k batches (positives dealt round-robin first, then
// negatives, so every batch holds a positive whenever |P| >= k). A query
// with fewer positives than batches cannot feed every batch; by default such
// queries (and positive-free ones) are skipped and counted, under `strict`
// they raise std::invalid_argument naming the query.
ProbeDgReport mean_probe_dg(
    const EmbeddingMatrix& embeddings, const LabelVector& labels,
    std::size_t k_batches, std::uint64_t seed,
    std::optional<std::pair<double, double>> thresholds = std::nullopt,
    bool strict = false);

}  // namespace roadmap
