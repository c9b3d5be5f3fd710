// Central finite-difference harness. The oracle side only ever evaluates
// loss values; it never touches the analytic gradient code paths it checks.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "schane/framework.hpp"
#include "schane/numerics.hpp"
#include "schane/objectives.hpp"

namespace gradcheck {

using schane::numerics::Matrix;

inline constexpr double kStep = 1e-5;

// Norm-relative disagreement between an analytic gradient and the central
// finite difference of `f` at x.
inline double relative_error(std::vector<double>& x, const std::vector<double>& analytic,
                             const std::function<double()>& f, double h = kStep) {
  double diff_sq = 0.0, a_sq = 0.0, fd_sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f();
    x[i] = orig - h;
    const double down = f();
    x[i] = orig;
    const double fd = (up - down) / (2.0 * h);
    diff_sq += (analytic[i] - fd) * (analytic[i] - fd);
    a_sq += analytic[i] * analytic[i];
    fd_sq += fd * fd;
  }
  const double denom = std::max({std::sqrt(a_sq), std::sqrt(fd_sq), 1e-12});
  return std::sqrt(diff_sq) / denom;
}

// ---- parameter-space checks through the whole network ----

inline std::vector<double*> param_refs(schane::framework::EncoderParams& p) {
  std::vector<double*> refs;
  for (auto& w : p.weights)
    for (auto& x : w.data()) refs.push_back(&x);
  for (auto& b : p.biases)
    for (auto& x : b) refs.push_back(&x);
  for (auto& x : p.head_weight.data()) refs.push_back(&x);
  for (auto& x : p.head_bias) refs.push_back(&x);
  return refs;
}

inline std::vector<double> flatten(const schane::framework::ParamGrads& g) {
  std::vector<double> out;
  for (const auto& w : g.weights) out.insert(out.end(), w.data().begin(), w.data().end());
  for (const auto& b : g.biases) out.insert(out.end(), b.begin(), b.end());
  out.insert(out.end(), g.head_weight.data().begin(), g.head_weight.data().end());
  out.insert(out.end(), g.head_bias.begin(), g.head_bias.end());
  return out;
}

// Central differences require smoothness in an h-neighbourhood. Instances
// whose forward pass sits within a ReLU kink or near the zero-norm guard are
// rejected and resampled by the callers.
inline bool instance_is_smooth(const schane::framework::EncoderParams& params,
                               const Matrix& inputs) {
  schane::Rng rng(0);
  const auto enc = schane::framework::encode_rng(params, inputs, false, rng);
  if (enc.cache.zero_guard_fired) return false;
  for (const auto& pre : enc.cache.pre_activations)
    for (double v : pre.data())
      if (std::abs(v) < 1e-4) return false;
  for (double n : enc.cache.norms)
    if (n < 1e-3) return false;
  return true;
}

// Loss of one two-view batch through encode -> head -> objective, dropout off.
inline double network_loss(const schane::framework::EncoderParams& params, const Matrix& inputs,
                           const std::vector<std::size_t>& labels,
                           const std::vector<std::size_t>& view_of,
                           const schane::objectives::ObjectiveConfig& obj) {
  schane::Rng rng(0);
  auto enc = schane::framework::encode_rng(params, inputs, false, rng);
  schane::objectives::EmbeddingBatch batch{std::move(enc.embeddings), labels, view_of};
  Matrix logits;
  const bool need_logits =
      obj.kind == schane::objectives::ObjectiveKind::CE ||
      (obj.kind == schane::objectives::ObjectiveKind::Combined && obj.lambda < 1.0);
  if (need_logits) logits = schane::framework::head_logits(params, batch.embeddings);
  return schane::framework::batch_objective(batch, logits, labels, obj).value;
}

inline std::vector<double> network_grads(const schane::framework::EncoderParams& params,
                                         const Matrix& inputs,
                                         const std::vector<std::size_t>& labels,
                                         const std::vector<std::size_t>& view_of,
                                         const schane::objectives::ObjectiveConfig& obj) {
  schane::Rng rng(0);
  auto enc = schane::framework::encode_rng(params, inputs, false, rng);
  schane::objectives::EmbeddingBatch batch{enc.embeddings, labels, view_of};
  Matrix logits;
  const bool need_logits =
      obj.kind == schane::objectives::ObjectiveKind::CE ||
      (obj.kind == schane::objectives::ObjectiveKind::Combined && obj.lambda < 1.0);
  if (need_logits) logits = schane::framework::head_logits(params, batch.embeddings);
  const auto loss = schane::framework::batch_objective(batch, logits, labels, obj);
  const auto grads =
      schane::framework::backprop(params, enc.cache, loss.grad_embeddings, loss.grad_logits);
  return flatten(grads);
}

// Parameter-gradient check for one random instance; returns the norm-relative
// error between backprop and central differences.
inline double check_network_gradients(schane::framework::EncoderParams params, const Matrix& inputs,
                                      const std::vector<std::size_t>& labels,
                                      const std::vector<std::size_t>& view_of,
                                      const schane::objectives::ObjectiveConfig& obj) {
  const auto analytic = network_grads(params, inputs, labels, view_of, obj);
  const auto refs = param_refs(params);
  double diff_sq = 0.0, a_sq = 0.0, fd_sq = 0.0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const double orig = *refs[i];
    *refs[i] = orig + kStep;
    const double up = network_loss(params, inputs, labels, view_of, obj);
    *refs[i] = orig - kStep;
    const double down = network_loss(params, inputs, labels, view_of, obj);
    *refs[i] = orig;
    const double fd = (up - down) / (2.0 * kStep);
    diff_sq += (analytic[i] - fd) * (analytic[i] - fd);
    a_sq += analytic[i] * analytic[i];
    fd_sq += fd * fd;
  }
  const double denom = std::max({std::sqrt(a_sq), std::sqrt(fd_sq), 1e-12});
  return std::sqrt(diff_sq) / denom;
}

// Embedding-gradient check for a loss evaluated directly on a batch.
inline double check_embedding_gradients(
    schane::objectives::EmbeddingBatch batch,
    const std::function<schane::objectives::LossResult(const schane::objectives::EmbeddingBatch&)>&
        loss_fn) {
  const auto analytic = loss_fn(batch).grad_embeddings;
  auto& data = batch.embeddings.data();
  double diff_sq = 0.0, a_sq = 0.0, fd_sq = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double orig = data[i];
    data[i] = orig + kStep;
    const double up = loss_fn(batch).value;
    data[i] = orig - kStep;
    const double down = loss_fn(batch).value;
    data[i] = orig;
    const double fd = (up - down) / (2.0 * kStep);
    const double a = analytic.data()[i];
    diff_sq += (a - fd) * (a - fd);
    a_sq += a * a;
    fd_sq += fd * fd;
  }
  const double denom = std::max({std::sqrt(a_sq), std::sqrt(fd_sq), 1e-12});
  return std::sqrt(diff_sq) / denom;
}

}  // namespace gradcheck
