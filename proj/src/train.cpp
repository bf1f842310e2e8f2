#include "roadmap/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>

#include "roadmap/decomp.hpp"
#include "roadmap/rng.hpp"

namespace roadmap {
namespace {

// Fixed stream ids so each consumer of the base seed draws from an
// independent, reproducible sequence.
constexpr std::uint64_t kStreamClassMeans = 0x11;
constexpr std::uint64_t kStreamSampleNoise = 0x12;
constexpr std::uint64_t kStreamSplit = 0x21;
constexpr std::uint64_t kStreamInit = 0x22;
constexpr std::uint64_t kStreamEpochBase = 0x1000;
constexpr std::uint64_t kStreamProbeDg = 0x31;

std::map<int, std::vector<std::size_t>> indices_by_class(
    const LabelVector& labels) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[labels[i]].push_back(i);
  }
  return by_class;
}

}  // namespace

void SyntheticConfig::validate() const {
  if (classes < 2) {
    throw std::invalid_argument("synthetic data needs at least 2 classes");
  }
  if (per_class < 2) {
    throw std::invalid_argument(
        "synthetic data needs at least 2 samples per class");
  }
  if (feature_dim == 0) {
    throw std::invalid_argument("feature_dim must be positive");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw std::invalid_argument("noise_sigma must be finite and >= 0");
  }
}

Dataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.classes * cfg.per_class;
  Dataset ds;
  ds.features.rows = n;
  ds.features.dim = cfg.feature_dim;
  ds.features.data.assign(n * cfg.feature_dim, 0.0);
  ds.labels.resize(n);

  std::normal_distribution<double> unit(0.0, 1.0);

  // Unit-norm class means: a normalized Gaussian draw is uniform on the
  // sphere. Degenerate zero draws are retried.
  auto mean_rng = make_engine(cfg.seed, kStreamClassMeans);
  std::vector<double> means(cfg.classes * cfg.feature_dim);
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    double* m = means.data() + c * cfg.feature_dim;
    double norm = 0.0;
    do {
      norm = 0.0;
      for (std::size_t d = 0; d < cfg.feature_dim; ++d) {
        m[d] = unit(mean_rng);
        norm += m[d] * m[d];
      }
      norm = std::sqrt(norm);
    } while (norm == 0.0);
    for (std::size_t d = 0; d < cfg.feature_dim; ++d) m[d] /= norm;
  }

  auto noise_rng = make_engine(cfg.seed, kStreamSampleNoise);
  std::size_t row = 0;
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    const double* m = means.data() + c * cfg.feature_dim;
    for (std::size_t s = 0; s < cfg.per_class; ++s, ++row) {
      auto x = ds.features.row(row);
      for (std::size_t d = 0; d < cfg.feature_dim; ++d) {
        x[d] = m[d] + cfg.noise_sigma * unit(noise_rng);
      }
      ds.labels[row] = static_cast<int>(c);
    }
  }
  ds.features.validate();
  return ds;
}

namespace {

// Core of both samplers: draw `count` batches of `per_batch_classes`
// classes x m samples from the given class pool.
BatchList draw_batches(const std::map<int, std::vector<std::size_t>>& by_class,
                       const std::vector<int>& eligible, std::size_t count,
                       std::size_t per_batch_classes, std::size_t m,
                       std::mt19937_64& rng) {
  BatchList batches;
  batches.reserve(count);
  std::vector<int> classes = eligible;
  for (std::size_t b = 0; b < count; ++b) {
    std::shuffle(classes.begin(), classes.end(), rng);
    std::vector<std::size_t> batch;
    batch.reserve(per_batch_classes * m);
    for (std::size_t c = 0; c < per_batch_classes; ++c) {
      std::vector<std::size_t> pool = by_class.at(classes[c]);
      std::shuffle(pool.begin(), pool.end(), rng);
      batch.insert(batch.end(), pool.begin(), pool.begin() + m);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

void check_batch_shape(std::size_t batch, std::size_t m) {
  if (m < 2) {
    throw std::invalid_argument("samples per class (m) must be at least 2");
  }
  if (batch == 0 || batch % m != 0) {
    throw std::invalid_argument(
        "batch size must be a positive multiple of m");
  }
}

}  // namespace

BatchList m_per_class_batches(const LabelVector& labels, std::size_t batch,
                              std::size_t m, std::uint64_t seed) {
  check_batch_shape(batch, m);
  const std::size_t per_batch_classes = batch / m;
  auto by_class = indices_by_class(labels);
  std::vector<int> eligible;
  for (const auto& [cls, idx] : by_class) {
    if (idx.size() >= m) eligible.push_back(cls);
  }
  if (eligible.size() < per_batch_classes) {
    throw std::invalid_argument(
        "batch of " + std::to_string(batch) + " needs " +
        std::to_string(per_batch_classes) + " classes with >= " +
        std::to_string(m) + " samples, found " +
        std::to_string(eligible.size()));
  }
  const std::size_t count = std::max<std::size_t>(1, labels.size() / batch);
  auto rng = make_engine(seed, 0);
  return draw_batches(by_class, eligible, count, per_batch_classes, m, rng);
}

BatchList category_pair_batches(const LabelVector& labels,
                                const std::map<int, int>& categories,
                                std::size_t batch, std::size_t m,
                                std::uint64_t seed,
                                std::vector<std::string>* warnings) {
  check_batch_shape(batch, m);
  const std::size_t per_batch_classes = batch / m;
  auto by_class = indices_by_class(labels);

  std::map<int, std::vector<int>> classes_by_category;
  for (const auto& [cls, idx] : by_class) {
    auto it = categories.find(cls);
    if (it == categories.end()) {
      throw std::invalid_argument("class " + std::to_string(cls) +
                                  " has no category assignment");
    }
    if (idx.size() >= m) classes_by_category[it->second].push_back(cls);
  }
  if (classes_by_category.size() < 2) {
    throw std::invalid_argument(
        "pair sampling needs at least 2 categories with usable classes");
  }

  std::vector<std::pair<int, int>> pairs;
  for (auto a = classes_by_category.begin(); a != classes_by_category.end();
       ++a) {
    for (auto b = std::next(a); b != classes_by_category.end(); ++b) {
      pairs.emplace_back(a->first, b->first);
    }
  }
  auto rng = make_engine(seed, 0);
  std::shuffle(pairs.begin(), pairs.end(), rng);

  BatchList all;
  for (const auto& [ca, cb] : pairs) {
    std::vector<int> eligible = classes_by_category[ca];
    const auto& right = classes_by_category[cb];
    eligible.insert(eligible.end(), right.begin(), right.end());
    if (eligible.size() < per_batch_classes) {
      if (warnings != nullptr) {
        warnings->push_back("skipping category pair (" + std::to_string(ca) +
                            ", " + std::to_string(cb) + "): only " +
                            std::to_string(eligible.size()) +
                            " usable classes for a batch of " +
                            std::to_string(batch));
      }
      continue;
    }
    std::size_t pool_size = 0;
    for (int cls : eligible) pool_size += by_class.at(cls).size();
    const std::size_t count = std::max<std::size_t>(1, pool_size / batch);
    auto batches =
        draw_batches(by_class, eligible, count, per_batch_classes, m, rng);
    for (auto& b : batches) all.push_back(std::move(b));
  }
  if (all.empty()) {
    throw std::invalid_argument(
        "pair sampling produced no batches: every category pair was too "
        "small for a batch of " + std::to_string(batch));
  }
  return all;
}

void OptimizerConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw std::invalid_argument("learning rate must be finite and >= 0");
  }
  if (!(momentum >= 0.0) || momentum >= 1.0) {
    throw std::invalid_argument("momentum must lie in [0, 1)");
  }
  if (!(beta1 >= 0.0) || beta1 >= 1.0 || !(beta2 >= 0.0) || beta2 >= 1.0) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) {
    throw std::invalid_argument("Adam epsilon must be > 0");
  }
  if (!(decay_factor > 0.0) || decay_factor > 1.0) {
    throw std::invalid_argument("decay factor must lie in (0, 1]");
  }
}

void optimizer_step(const OptimizerConfig& cfg, OptimizerState& state,
                    double lr, std::vector<double>& params,
                    const std::vector<double>& grads) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("parameter/gradient size mismatch");
  }
  if (state.m1.empty()) state.m1.assign(params.size(), 0.0);
  if (cfg.kind == OptimizerKind::kAdam && state.m2.empty()) {
    state.m2.assign(params.size(), 0.0);
  }
  if (state.m1.size() != params.size() ||
      (cfg.kind == OptimizerKind::kAdam && state.m2.size() != params.size())) {
    throw std::invalid_argument("optimizer state size mismatch");
  }
  ++state.step;
  if (cfg.kind == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m1[i] = cfg.momentum * state.m1[i] + grads[i];
      params[i] -= lr * state.m1[i];
    }
    return;
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m1[i] = cfg.beta1 * state.m1[i] + (1.0 - cfg.beta1) * grads[i];
    state.m2[i] = cfg.beta2 * state.m2[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double mhat = state.m1[i] / c1;
    const double vhat = state.m2[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
  }
}

ModelParams init_model(std::size_t feature_dim, std::size_t embed_dim,
                       std::uint64_t seed) {
  if (feature_dim == 0 || embed_dim == 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  ModelParams p;
  p.projection.rows = feature_dim;
  p.projection.dim = embed_dim;
  p.projection.data.resize(feature_dim * embed_dim);
  auto rng = make_engine(seed, kStreamInit);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  for (double& w : p.projection.data) w = unit(rng) * scale;
  return p;
}

EmbeddingMatrix embed(const ModelParams& params,
                      const EmbeddingMatrix& features) {
  const EmbeddingMatrix& w = params.projection;
  if (features.dim != w.rows) {
    throw std::invalid_argument(
        "feature dim " + std::to_string(features.dim) +
        " does not match projection input dim " + std::to_string(w.rows));
  }
  EmbeddingMatrix out;
  out.rows = features.rows;
  out.dim = w.dim;
  out.data.assign(out.rows * out.dim, 0.0);
  for (std::size_t i = 0; i < features.rows; ++i) {
    auto x = features.row(i);
    auto e = out.row(i);
    for (std::size_t k = 0; k < features.dim; ++k) {
      const double xk = x[k];
      if (xk == 0.0) continue;
      auto wrow = w.row(k);
      for (std::size_t j = 0; j < w.dim; ++j) e[j] += xk * wrow[j];
    }
  }
  return out;
}

void TrainConfig::validate() const {
  surrogate.validate();
  loss_cfg.validate();
  optimizer.validate();
  check_batch_shape(batch, m);
  if (embed_dim == 0) {
    throw std::invalid_argument("embed_dim must be positive");
  }
  if (epochs == 0) {
    throw std::invalid_argument("epoch count must be positive");
  }
  if (!(probe_fraction >= 0.0) || probe_fraction >= 1.0) {
    throw std::invalid_argument("probe fraction must lie in [0, 1)");
  }
  if (probe_batches == 0) {
    throw std::invalid_argument("probe batch count must be positive");
  }
  if (sampler == SamplerKind::kCategoryPair && categories.empty()) {
    throw std::invalid_argument(
        "pair sampler needs a class -> category mapping");
  }
}

void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = nlohmann::json{{"epoch", r.epoch},
                     {"mean_loss", r.mean_loss},
                     {"metrics", r.probe_metrics},
                     {"probe_dg", r.probe_dg},
                     {"batches", r.batches},
                     {"skipped_batches", r.skipped_batches}};
}

void to_json(nlohmann::json& j, const ProbeDgReport& r) {
  j = nlohmann::json{{"dg", r.dg},
                     {"bound_worst", r.bound_worst},
                     {"queries", r.queries},
                     {"skipped", r.skipped}};
  if (r.bound_refined.has_value()) {
    j["bound_refined"] = *r.bound_refined;
  } else {
    j["bound_refined"] = nullptr;
  }
}

namespace {

// Stratified split: per class, a seeded shuffle sends floor(fraction * n)
// samples to the probe side.
void split_dataset(const LabelVector& labels, double fraction,
                   std::uint64_t seed, std::vector<std::size_t>& train_idx,
                   std::vector<std::size_t>& probe_idx) {
  auto by_class = indices_by_class(labels);
  auto rng = make_engine(seed, kStreamSplit);
  for (auto& [cls, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t take =
        static_cast<std::size_t>(fraction * static_cast<double>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      (i < take ? probe_idx : train_idx).push_back(idx[i]);
    }
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(probe_idx.begin(), probe_idx.end());
}

EmbeddingMatrix gather_rows(const EmbeddingMatrix& src,
                            const std::vector<std::size_t>& rows) {
  EmbeddingMatrix out;
  out.rows = rows.size();
  out.dim = src.dim;
  out.data.resize(out.rows * out.dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto s = src.row(rows[i]);
    std::copy(s.begin(), s.end(), out.row(i).begin());
  }
  return out;
}

LabelVector gather_labels(const LabelVector& src,
                          const std::vector<std::size_t>& rows) {
  LabelVector out;
  out.reserve(rows.size());
  for (std::size_t i : rows) out.push_back(src[i]);
  return out;
}

}  // namespace

TrainResult train(const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  data.features.validate();
  if (data.labels.size() != data.features.rows) {
    throw std::invalid_argument("label count does not match feature rows");
  }

  TrainResult result;
  split_dataset(data.labels, cfg.probe_fraction, cfg.seed,
                result.train_indices, result.probe_indices);
  if (result.train_indices.empty()) {
    throw std::invalid_argument("probe split left no training samples");
  }
  const bool probe_on_train = result.probe_indices.empty();
  const std::vector<std::size_t>& probe_rows =
      probe_on_train ? result.train_indices : result.probe_indices;

  EmbeddingMatrix train_x = gather_rows(data.features, result.train_indices);
  LabelVector train_y = gather_labels(data.labels, result.train_indices);
  EmbeddingMatrix probe_x = gather_rows(data.features, probe_rows);
  LabelVector probe_y = gather_labels(data.labels, probe_rows);

  result.params = init_model(data.features.dim, cfg.embed_dim, cfg.seed);
  std::vector<double>& w = result.params.projection.data;

  OptimizerState opt_state;
  std::vector<std::size_t> decay = cfg.optimizer.decay_epochs;
  if (decay.empty()) {
    decay = {cfg.epochs * 3 / 5, cfg.epochs * 4 / 5};
  }
  std::sort(decay.begin(), decay.end());

  const std::size_t ed = cfg.embed_dim;
  const std::size_t fd = data.features.dim;
  std::vector<double> grad_w(w.size());
  std::vector<double> d_embed;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = cfg.optimizer.lr;
    for (std::size_t d : decay) {
      if (epoch >= d) lr *= cfg.optimizer.decay_factor;
    }

    BatchList batches;
    const std::uint64_t epoch_seed =
        derive_seed(cfg.seed, kStreamEpochBase + epoch);
    if (cfg.sampler == SamplerKind::kMPerClass) {
      batches = m_per_class_batches(train_y, cfg.batch, cfg.m, epoch_seed);
    } else {
      batches = category_pair_batches(train_y, cfg.categories, cfg.batch,
                                      cfg.m, epoch_seed);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;

    for (const auto& batch_rows : batches) {
      EmbeddingMatrix bx = gather_rows(train_x, batch_rows);
      LabelVector by = gather_labels(train_y, batch_rows);
      EmbeddingMatrix be = embed(result.params, bx);

      d_embed.assign(be.data.size(), 0.0);
      double batch_loss = 0.0;
      std::size_t valid = 0;
      for (std::size_t q = 0; q < be.rows; ++q) {
        RankingInstance inst = build_instance(by, q);
        if (inst.flagged()) continue;
        ScoreVector scores = cosine_similarity(be.row(q), be);
        LossOutput out = evaluate_loss(cfg.loss, scores, inst, cfg.surrogate,
                                       cfg.loss_cfg);
        batch_loss += out.value;
        ++valid;
        CosineBackward cb =
            cosine_similarity_backward(be.row(q), be, out.grad);
        for (std::size_t r = 0; r < be.rows; ++r) {
          double* dst = d_embed.data() + r * ed;
          auto src = cb.gallery_grad.row(r);
          for (std::size_t j = 0; j < ed; ++j) dst[j] += src[j];
        }
        double* dq = d_embed.data() + q * ed;
        for (std::size_t j = 0; j < ed; ++j) dq[j] += cb.query_grad[j];
      }
      if (valid == 0) {
        ++rec.skipped_batches;
        continue;
      }
      const double inv_valid = 1.0 / static_cast<double>(valid);
      loss_sum += batch_loss * inv_valid;
      ++rec.batches;

      // grad_w = bx^T * d_embed, averaged over the batch's queries.
      std::fill(grad_w.begin(), grad_w.end(), 0.0);
      for (std::size_t i = 0; i < bx.rows; ++i) {
        auto x = bx.row(i);
        const double* de = d_embed.data() + i * ed;
        for (std::size_t k = 0; k < fd; ++k) {
          const double xk = x[k] * inv_valid;
          if (xk == 0.0) continue;
          double* gw = grad_w.data() + k * ed;
          for (std::size_t j = 0; j < ed; ++j) gw[j] += xk * de[j];
        }
      }
      optimizer_step(cfg.optimizer, opt_state, lr, w, grad_w);
    }

    rec.mean_loss =
        rec.batches == 0 ? 0.0 : loss_sum / static_cast<double>(rec.batches);

    EmbeddingMatrix probe_e = embed(result.params, probe_x);
    static constexpr std::size_t kProbeRecallKs[] = {1};
    rec.probe_metrics = evaluate(probe_e, probe_y, kProbeRecallKs);
    ProbeDgReport dg_rep =
        mean_probe_dg(probe_e, probe_y, cfg.probe_batches,
                      derive_seed(cfg.seed, kStreamProbeDg),
                      std::make_pair(cfg.loss_cfg.alpha, cfg.loss_cfg.beta));
    rec.probe_dg = dg_rep.dg;
    result.history.push_back(std::move(rec));
  }
  return result;
}

ProbeDgReport mean_probe_dg(
    const EmbeddingMatrix& embeddings, const LabelVector& labels,
    std::size_t k_batches, std::uint64_t seed,
    std::optional<std::pair<double, double>> thresholds, bool strict) {
  embeddings.validate();
  if (labels.size() != embeddings.rows) {
    throw std::invalid_argument("label count does not match embedding rows");
  }
  if (k_batches == 0) {
    throw std::invalid_argument("batch count must be positive");
  }
  ProbeDgReport rep;
  double dg_sum = 0.0;
  double worst_sum = 0.0;
  double refined_sum = 0.0;
  for (std::size_t q = 0; q < embeddings.rows; ++q) {
    RankingInstance inst = build_instance(labels, q);
    if (inst.flagged() || inst.positives.size() < k_batches) {
      if (strict) {
        if (inst.flagged()) {
          throw std::invalid_argument("query " + std::to_string(q) +
                                      " has no positives");
        }
        throw std::invalid_argument(
            "query " + std::to_string(q) + ": a partition into " +
            std::to_string(k_batches) +
            " batches leaves a batch without a positive (query has " +
            std::to_string(inst.positives.size()) + ")");
      }
      ++rep.skipped;
      continue;
    }
    ScoreVector scores = cosine_similarity(embeddings.row(q), embeddings);

    BatchAssignment asg;
    asg.num_batches = k_batches;
    asg.membership.assign(labels.size(), 0);
    auto rng = make_engine(seed, q);
    std::vector<std::size_t> pos = inst.positives;
    std::shuffle(pos.begin(), pos.end(), rng);
    for (std::size_t i = 0; i < pos.size(); ++i) {
      asg.membership[pos[i]] = i % k_batches;
    }
    std::vector<std::size_t> neg = inst.negatives;
    std::shuffle(neg.begin(), neg.end(), rng);
    for (std::size_t i = 0; i < neg.size(); ++i) {
      asg.membership[neg[i]] = i % k_batches;
    }

    DgReport r = decomposability_gap(scores, inst, asg, thresholds);
    dg_sum += r.dg;
    worst_sum += r.bound_worst;
    if (r.bound_refined.has_value()) refined_sum += *r.bound_refined;
    ++rep.queries;
  }
  if (rep.queries > 0) {
    const double inv = 1.0 / static_cast<double>(rep.queries);
    rep.dg = dg_sum * inv;
    rep.bound_worst = worst_sum * inv;
    if (thresholds.has_value()) rep.bound_refined = refined_sum * inv;
  }
  return rep;
}

}  // namespace roadmap
