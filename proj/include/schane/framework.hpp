// Representation framework: two-view augmentation, MLP encoder with
// L2-normalised outputs, linear classification head, exact backprop and an
// Adam trainer with decoupled weight decay.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "schane/data.hpp"
#include "schane/error.hpp"
#include "schane/numerics.hpp"
#include "schane/objectives.hpp"
#include "schane/rng.hpp"

namespace schane::framework {

using numerics::Matrix;
using numerics::Vector;

// ---- augmentation ------------------------------------------------------------

struct AugmentPolicy {
  double noise_sigma = 0.0;      // additive Gaussian
  double scale_jitter_lo = 1.0;  // multiplicative uniform range
  double scale_jitter_hi = 1.0;
  double mask_fraction = 0.0;    // per-coordinate zeroing probability

  void validate() const {
    if (noise_sigma < 0.0) fail(ErrorKind::ConfigError, "noise_sigma must be >= 0");
    if (!(scale_jitter_lo > 0.0 && scale_jitter_hi <= 2.0 && scale_jitter_lo <= scale_jitter_hi))
      fail(ErrorKind::ConfigError, "scale_jitter range must lie within (0,2]");
    if (!(mask_fraction >= 0.0 && mask_fraction < 1.0))
      fail(ErrorKind::ConfigError, "mask_fraction must be in [0,1)");
  }

  bool is_identity() const {
    return noise_sigma == 0.0 && scale_jitter_lo == 1.0 && scale_jitter_hi == 1.0 &&
           mask_fraction == 0.0;
  }
};

inline Vector augment_one(const Vector& x, const AugmentPolicy& policy, Rng& rng) {
  Vector y = x;
  if (policy.scale_jitter_lo != 1.0 || policy.scale_jitter_hi != 1.0) {
    const double s = rng.uniform(policy.scale_jitter_lo, policy.scale_jitter_hi);
    for (double& v : y) v *= s;
  }
  if (policy.noise_sigma > 0.0)
    for (double& v : y) v += policy.noise_sigma * rng.normal();
  if (policy.mask_fraction > 0.0)
    for (double& v : y)
      if (rng.uniform() < policy.mask_fraction) v = 0.0;
  return y;
}

// Two independently augmented views of x, deterministic per seed.
inline std::pair<Vector, Vector> make_views(const Vector& x, const AugmentPolicy& policy,
                                            std::uint64_t seed) {
  policy.validate();
  Rng rng(derive_seed(seed, "views"));
  Vector a = augment_one(x, policy, rng);
  Vector b = augment_one(x, policy, rng);
  return {std::move(a), std::move(b)};
}

// ---- parameters -----------------------------------------------------------------

struct EncoderParams {
  std::vector<Matrix> weights;  // weights[l] maps dims[l] -> dims[l+1]
  std::vector<Vector> biases;
  Matrix head_weight;  // embedding_dim x class_count
  Vector head_bias;
  double dropout_rate = 0.1;

  std::size_t layer_count() const noexcept { return weights.size(); }
  std::size_t input_dim() const { return weights.front().rows(); }
  std::size_t embedding_dim() const { return weights.back().cols(); }
  std::size_t class_count() const { return head_weight.cols(); }

  void validate() const {
    if (weights.empty() || weights.size() != biases.size())
      fail(ErrorKind::ShapeError, "encoder needs matching weights/biases");
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (biases[l].size() != weights[l].cols()) fail(ErrorKind::ShapeError, "bias dim mismatch");
      if (l > 0 && weights[l].rows() != weights[l - 1].cols())
        fail(ErrorKind::ShapeError, "adjacent layer dims disagree");
    }
    if (head_weight.rows() != weights.back().cols())
      fail(ErrorKind::ShapeError, "head input dim mismatch");
    if (head_bias.size() != head_weight.cols()) fail(ErrorKind::ShapeError, "head bias mismatch");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
      fail(ErrorKind::ConfigError, "dropout_rate must be in [0,1)");
  }
};

// Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases.
inline EncoderParams init_params(const std::vector<std::size_t>& layer_dims,
                                 std::size_t class_count, double dropout_rate,
                                 std::uint64_t seed) {
  if (layer_dims.size() < 2) fail(ErrorKind::ConfigError, "need input and embedding dims");
  Rng rng(derive_seed(seed, "init"));
  EncoderParams p;
  p.dropout_rate = dropout_rate;
  auto init_matrix = [&](std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (double& x : m.data()) x = rng.uniform(-bound, bound);
    return m;
  };
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    p.weights.push_back(init_matrix(layer_dims[l], layer_dims[l + 1]));
    p.biases.emplace_back(layer_dims[l + 1], 0.0);
  }
  p.head_weight = init_matrix(layer_dims.back(), class_count);
  p.head_bias.assign(class_count, 0.0);
  p.validate();
  return p;
}

// ---- forward ---------------------------------------------------------------------

struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre_activations;  // hidden layers, pre-ReLU
  std::vector<Matrix> activations;      // hidden layers, post ReLU (+dropout)
  std::vector<Matrix> dropout_masks;    // inverted-dropout factors; empty in eval
  Matrix pre_norm;                      // embedding-layer output before L2
  Vector norms;
  Matrix embeddings;  // L2-normalised rows
  std::vector<char> norm_guarded;
  bool zero_guard_fired = false;
  bool train_mode = false;
};

struct EncodeResult {
  Matrix embeddings;
  ForwardCache cache;
};

namespace detail {
inline Matrix affine(const Matrix& x, const Matrix& w, const Vector& b) {
  Matrix y = numerics::matmul(x, w);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double* row = y.row_ptr(i);
    for (std::size_t j = 0; j < y.cols(); ++j) row[j] += b[j];
  }
  return y;
}
}  // namespace detail

inline EncodeResult encode_rng(const EncoderParams& params, const Matrix& batch, bool train_mode,
                               Rng& rng) {
  params.validate();
  if (batch.cols() != params.input_dim())
    fail(ErrorKind::ShapeError, "batch feature dim " + std::to_string(batch.cols()) +
                                    " != encoder input " + std::to_string(params.input_dim()));

  ForwardCache cache;
  cache.input = batch;
  cache.train_mode = train_mode;
  const bool use_dropout = train_mode && params.dropout_rate > 0.0;
  const std::size_t hidden_layers = params.layer_count() - 1;

  Matrix a = batch;
  for (std::size_t l = 0; l < hidden_layers; ++l) {
    Matrix pre = detail::affine(a, params.weights[l], params.biases[l]);
    cache.pre_activations.push_back(pre);
    for (double& x : pre.data()) x = x > 0.0 ? x : 0.0;  // ReLU
    if (use_dropout) {
      Matrix mask(pre.rows(), pre.cols());
      const double keep = 1.0 - params.dropout_rate;
      for (double& m : mask.data()) m = rng.uniform() < params.dropout_rate ? 0.0 : 1.0 / keep;
      for (std::size_t i = 0; i < pre.data().size(); ++i) pre.data()[i] *= mask.data()[i];
      cache.dropout_masks.push_back(std::move(mask));
    }
    cache.activations.push_back(pre);
    a = std::move(pre);
  }

  cache.pre_norm = detail::affine(a, params.weights.back(), params.biases.back());
  const std::size_t n = cache.pre_norm.rows();
  const std::size_t d = cache.pre_norm.cols();
  cache.norms.resize(n);
  cache.norm_guarded.assign(n, 0);
  cache.embeddings = cache.pre_norm;
  for (std::size_t i = 0; i < n; ++i) {
    double* row = cache.embeddings.row_ptr(i);
    const double norm = std::sqrt(numerics::dot(row, row, d));
    cache.norms[i] = norm;
    if (norm < 1e-12) {
      // Degenerate embedding: pass through unchanged and flag the batch.
      cache.norm_guarded[i] = 1;
      cache.zero_guard_fired = true;
      continue;
    }
    for (std::size_t j = 0; j < d; ++j) row[j] /= norm;
  }
  return {cache.embeddings, std::move(cache)};
}

inline EncodeResult encode(const EncoderParams& params, const Matrix& batch, bool train_mode,
                           std::uint64_t seed) {
  Rng rng(derive_seed(seed, "encode"));
  return encode_rng(params, batch, train_mode, rng);
}

inline Matrix head_logits(const EncoderParams& params, const Matrix& embeddings) {
  if (embeddings.cols() != params.head_weight.rows())
    fail(ErrorKind::ShapeError, "embedding dim does not match head input");
  return detail::affine(embeddings, params.head_weight, params.head_bias);
}

// ---- backward --------------------------------------------------------------------

struct ParamGrads {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Matrix head_weight;
  Vector head_bias;
};

inline ParamGrads zero_grads(const EncoderParams& params) {
  ParamGrads g;
  for (const auto& w : params.weights) g.weights.emplace_back(w.rows(), w.cols());
  for (const auto& b : params.biases) g.biases.emplace_back(b.size(), 0.0);
  g.head_weight = Matrix(params.head_weight.rows(), params.head_weight.cols());
  g.head_bias.assign(params.head_bias.size(), 0.0);
  return g;
}

// Exact gradients of the upstream losses w.r.t. every parameter. Either
// gradient input may be empty (treated as zero). The L2-normalisation
// Jacobian (I - zz^T)/|v| is applied row-wise; guarded rows pass through.
inline ParamGrads backprop(const EncoderParams& params, const ForwardCache& cache,
                           const Matrix& grad_embeddings, const Matrix& grad_logits) {
  params.validate();
  const std::size_t n = cache.embeddings.rows();
  const std::size_t d = cache.embeddings.cols();
  if (cache.pre_activations.size() != params.layer_count() - 1 ||
      cache.input.cols() != params.input_dim())
    fail(ErrorKind::CacheMismatch, "cache does not match encoder layout");
  if (!grad_embeddings.empty() && !grad_embeddings.same_shape(cache.embeddings))
    fail(ErrorKind::CacheMismatch, "grad_embeddings shape mismatch");
  if (!grad_logits.empty() &&
      (grad_logits.rows() != n || grad_logits.cols() != params.class_count()))
    fail(ErrorKind::CacheMismatch, "grad_logits shape mismatch");
  const bool cache_dropout = !cache.dropout_masks.empty();
  if (cache_dropout && cache.dropout_masks.size() != cache.pre_activations.size())
    fail(ErrorKind::CacheMismatch, "dropout mask count mismatch");

  ParamGrads grads = zero_grads(params);

  Matrix g_z(n, d);
  if (!grad_embeddings.empty()) g_z = grad_embeddings;
  if (!grad_logits.empty()) {
    grads.head_weight = numerics::matmul_at(cache.embeddings, grad_logits);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = grad_logits.row_ptr(i);
      for (std::size_t j = 0; j < grad_logits.cols(); ++j) grads.head_bias[j] += row[j];
    }
    Matrix through_head = numerics::matmul_bt(grad_logits, params.head_weight);
    numerics::axpy(1.0, through_head, g_z);
  }

  // Through L2 normalisation.
  Matrix g_v(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* gz = g_z.row_ptr(i);
    double* gv = g_v.row_ptr(i);
    if (cache.norm_guarded[i]) {
      for (std::size_t j = 0; j < d; ++j) gv[j] = gz[j];
      continue;
    }
    const double* z = cache.embeddings.row_ptr(i);
    const double proj = numerics::dot(gz, z, d);
    const double inv_norm = 1.0 / cache.norms[i];
    for (std::size_t j = 0; j < d; ++j) gv[j] = (gz[j] - proj * z[j]) * inv_norm;
  }

  // Embedding layer.
  const std::size_t last = params.layer_count() - 1;
  const Matrix& last_input = last == 0 ? cache.input : cache.activations[last - 1];
  grads.weights[last] = numerics::matmul_at(last_input, g_v);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = g_v.row_ptr(i);
    for (std::size_t j = 0; j < g_v.cols(); ++j) grads.biases[last][j] += row[j];
  }
  Matrix g = numerics::matmul_bt(g_v, params.weights[last]);

  // Hidden layers, reversed.
  for (std::size_t li = last; li-- > 0;) {
    if (cache_dropout) {
      const Matrix& mask = cache.dropout_masks[li];
      for (std::size_t i = 0; i < g.data().size(); ++i) g.data()[i] *= mask.data()[i];
    }
    const Matrix& pre = cache.pre_activations[li];
    for (std::size_t i = 0; i < g.data().size(); ++i)
      if (pre.data()[i] <= 0.0) g.data()[i] = 0.0;
    const Matrix& input = li == 0 ? cache.input : cache.activations[li - 1];
    grads.weights[li] = numerics::matmul_at(input, g);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const double* row = g.row_ptr(i);
      for (std::size_t j = 0; j < g.cols(); ++j) grads.biases[li][j] += row[j];
    }
    if (li > 0) g = numerics::matmul_bt(g, params.weights[li]);
  }
  return grads;
}

// ---- Adam with decoupled weight decay ---------------------------------------------

struct AdamState {
  double learning_rate = 1e-4;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Matrix> m_weights, v_weights;
  std::vector<Vector> m_biases, v_biases;
  Matrix m_head_weight, v_head_weight;
  Vector m_head_bias, v_head_bias;

  static AdamState init(const EncoderParams& params, double lr, double wd) {
    AdamState s;
    s.learning_rate = lr;
    s.weight_decay = wd;
    for (const auto& w : params.weights) {
      s.m_weights.emplace_back(w.rows(), w.cols());
      s.v_weights.emplace_back(w.rows(), w.cols());
    }
    for (const auto& b : params.biases) {
      s.m_biases.emplace_back(b.size(), 0.0);
      s.v_biases.emplace_back(b.size(), 0.0);
    }
    s.m_head_weight = Matrix(params.head_weight.rows(), params.head_weight.cols());
    s.v_head_weight = Matrix(params.head_weight.rows(), params.head_weight.cols());
    s.m_head_bias.assign(params.head_bias.size(), 0.0);
    s.v_head_bias.assign(params.head_bias.size(), 0.0);
    return s;
  }
};

namespace detail {
inline void adam_update(std::vector<double>& p, const std::vector<double>& g,
                        std::vector<double>& m, std::vector<double>& v, const AdamState& s,
                        double bc1, double bc2, bool decay) {
  if (p.size() != g.size() || p.size() != m.size())
    fail(ErrorKind::ShapeError, "adam shape mismatch");
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    double update = mhat / (std::sqrt(vhat) + s.epsilon);
    if (decay) update += s.weight_decay * p[i];
    p[i] -= s.learning_rate * update;
  }
}
}  // namespace detail

// Standard Adam with decoupled weight decay; biases are not decayed.
inline std::pair<EncoderParams, AdamState> adam_step(const AdamState& state,
                                                     const EncoderParams& params,
                                                     const ParamGrads& grads) {
  EncoderParams p = params;
  AdamState s = state;
  ++s.step;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    detail::adam_update(p.weights[l].data(), grads.weights[l].data(), s.m_weights[l].data(),
                        s.v_weights[l].data(), s, bc1, bc2, true);
    detail::adam_update(p.biases[l], grads.biases[l], s.m_biases[l], s.v_biases[l], s, bc1, bc2,
                        false);
  }
  detail::adam_update(p.head_weight.data(), grads.head_weight.data(), s.m_head_weight.data(),
                      s.v_head_weight.data(), s, bc1, bc2, true);
  detail::adam_update(p.head_bias, grads.head_bias, s.m_head_bias, s.v_head_bias, s, bc1, bc2,
                      false);
  return {std::move(p), std::move(s)};
}

// ---- objective dispatch -------------------------------------------------------------

inline objectives::LossResult contrastive_dispatch(const objectives::EmbeddingBatch& batch,
                                                   const objectives::ObjectiveConfig& obj,
                                                   objectives::ContrastiveKind kind) {
  switch (kind) {
    case objectives::ContrastiveKind::SimCLR:
      return objectives::simclr_loss(batch, obj.tau);
    case objectives::ContrastiveKind::SupCon:
      return objectives::supcon_loss(batch, obj.tau);
    case objectives::ContrastiveKind::SCHaNe:
      return objectives::schane_loss(batch, obj.tau, obj.classic_denominator, obj.stop_grad_beta);
  }
  fail(ErrorKind::ConfigError, "unknown contrastive kind");
}

// Loss value and gradients for one already-encoded two-view batch.
// grad_logits/grad_embeddings are empty when the respective path is off.
inline objectives::LossResult batch_objective(const objectives::EmbeddingBatch& batch,
                                              const Matrix& logits,
                                              const std::vector<std::size_t>& labels,
                                              const objectives::ObjectiveConfig& obj) {
  obj.validate();
  using objectives::ObjectiveKind;
  switch (obj.kind) {
    case ObjectiveKind::CE:
      return objectives::cross_entropy(logits, labels);
    case ObjectiveKind::SimCLR:
      return contrastive_dispatch(batch, obj, objectives::ContrastiveKind::SimCLR);
    case ObjectiveKind::SupCon:
      return contrastive_dispatch(batch, obj, objectives::ContrastiveKind::SupCon);
    case ObjectiveKind::SCHaNe:
      return contrastive_dispatch(batch, obj, objectives::ContrastiveKind::SCHaNe);
    case ObjectiveKind::Combined: {
      if (obj.lambda == 0.0) return objectives::cross_entropy(logits, labels);
      const auto con = contrastive_dispatch(batch, obj, obj.contrastive);
      if (obj.lambda == 1.0) return con;
      const auto ce = objectives::cross_entropy(logits, labels);
      return objectives::combined_loss(ce, con, obj.lambda);
    }
  }
  fail(ErrorKind::ConfigError, "unknown objective kind");
}

// ---- training loop -----------------------------------------------------------------

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double learning_rate = 1e-4;
  double weight_decay = 0.05;
  AugmentPolicy augment;
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double val_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct TrainingTrace {
  std::vector<EpochStats> epochs;
};

struct TrainResult {
  EncoderParams params;
  AdamState adam;
  TrainingTrace trace;
  std::size_t next_epoch = 0;
};

namespace detail {
inline double eval_accuracy(const EncoderParams& params, const data::Dataset& ds) {
  std::vector<Vector> rows;
  rows.reserve(ds.size());
  for (const auto& s : ds.samples) rows.push_back(s.features);
  const Matrix x = Matrix::from_rows(rows);
  Rng rng(0);
  const auto enc = encode_rng(params, x, false, rng);
  const Matrix logits = head_logits(params, enc.embeddings);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const double* row = logits.row_ptr(i);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < logits.cols(); ++j)
      if (row[j] > row[arg]) arg = j;
    if (arg == ds.samples[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}
}  // namespace detail

// Epoch loop: shuffle, two views per sample, encode, objective, backprop,
// Adam. Per-epoch RNG streams are derived from (seed, epoch), so resuming
// from a checkpoint continues the exact trace of an uninterrupted run.
inline TrainResult train(EncoderParams params, AdamState adam, std::size_t start_epoch,
                         const TrainConfig& cfg, const data::Dataset& train_set,
                         const data::Dataset* val_set, const objectives::ObjectiveConfig& objective,
                         std::uint64_t seed) {
  params.validate();
  objective.validate();
  cfg.augment.validate();
  train_set.validate();
  if (cfg.batch_size < 2) fail(ErrorKind::ConfigError, "batch_size must be >= 2");
  if (train_set.samples.size() < 2)
    fail(ErrorKind::InsufficientSamples, "need at least 2 training samples");

  TrainResult out{std::move(params), std::move(adam), {}, start_epoch};
  const std::size_t n = train_set.size();

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const std::size_t epoch = start_epoch + e;
    Rng rng(derive_seed(seed, "epoch", epoch));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t loss_rows = 0;
    std::size_t start = 0;
    while (start < n) {
      std::size_t stop = std::min(n, start + cfg.batch_size);
      if (n - stop == 1) stop = n;  // fold a trailing singleton into this batch
      const std::size_t bsz = stop - start;

      std::vector<Vector> view_rows;
      view_rows.reserve(2 * bsz);
      std::vector<std::size_t> labels(2 * bsz);
      std::vector<std::size_t> view_of(2 * bsz);
      for (std::size_t t = 0; t < bsz; ++t) {
        const auto& sample = train_set.samples[order[start + t]];
        view_rows.push_back(augment_one(sample.features, cfg.augment, rng));
        view_rows.push_back(augment_one(sample.features, cfg.augment, rng));
        labels[2 * t] = labels[2 * t + 1] = sample.label;
        view_of[2 * t] = view_of[2 * t + 1] = t;
      }
      const Matrix x = Matrix::from_rows(view_rows);

      auto enc = encode_rng(out.params, x, true, rng);
      if (enc.cache.zero_guard_fired)
        fail(ErrorKind::NumericError, "zero-norm embedding during training");

      objectives::EmbeddingBatch batch{std::move(enc.embeddings), labels, view_of};
      const bool need_logits =
          objective.kind == objectives::ObjectiveKind::CE ||
          (objective.kind == objectives::ObjectiveKind::Combined && objective.lambda < 1.0);
      Matrix logits;
      if (need_logits) logits = head_logits(out.params, batch.embeddings);

      const auto loss = batch_objective(batch, logits, labels, objective);
      if (!std::isfinite(loss.value)) fail(ErrorKind::NumericError, "non-finite loss");
      loss_sum += loss.value * static_cast<double>(2 * bsz);
      loss_rows += 2 * bsz;

      const auto grads = backprop(out.params, enc.cache, loss.grad_embeddings, loss.grad_logits);
      auto stepped = adam_step(out.adam, out.params, grads);
      out.params = std::move(stepped.first);
      out.adam = std::move(stepped.second);

      start = stop;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_rows ? loss_sum / static_cast<double>(loss_rows) : 0.0;
    if (val_set && !val_set->samples.empty() && val_set->class_count == out.params.class_count())
      stats.val_accuracy = detail::eval_accuracy(out.params, *val_set);
    out.trace.epochs.push_back(stats);
  }
  out.next_epoch = start_epoch + cfg.epochs;
  return out;
}

}  // namespace schane::framework
