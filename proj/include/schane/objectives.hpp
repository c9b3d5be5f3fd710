// Loss functions and their analytic gradients: cross-entropy, SimCLR,
// SupCon, and SCHaNe (supervised contrastive with hard-negative weighting),
// combined per L = (1-lambda)*CE + lambda*contrastive.
//
// Similarities are s_ij = z_i.z_j / tau. For an anchor i with positive set P
// (same label, anchor excluded) and negative set N (different label), the
// hard-negative weight of negative k is
//     beta_k = exp(s_ik) * |N| / sum_{k' in N} exp(s_ik')
// and the per-anchor loss is
//     L_i = -(1/|P|) sum_{p in P} log[ exp(s_ip) / D_i ],
//     D_i = sum_{p' in P} exp(s_ip') + sum_{k in N} beta_k exp(s_ik).
// The batch loss is the mean over anchors that have at least one positive.
// SupCon is the beta == 1 special case. Gradients treat beta as a function
// of the embeddings (full chain rule) unless stop_grad_beta is set.
//
// Everything is computed in max-shifted exponent space, so losses stay
// finite for tau down to 0.05 with unit-norm embeddings.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "schane/error.hpp"
#include "schane/numerics.hpp"

namespace schane::objectives {

using numerics::Matrix;
using numerics::Vector;

struct EmbeddingBatch {
  Matrix embeddings;                 // rows = views
  std::vector<std::size_t> labels;   // class id per row
  std::vector<std::size_t> view_of;  // original sample index per row

  std::size_t size() const noexcept { return labels.size(); }

  // Validated constructor for pipeline use: unit-norm rows, two views per
  // original sample. Tests may aggregate-construct directly.
  static EmbeddingBatch make(Matrix embeddings, std::vector<std::size_t> labels,
                             std::vector<std::size_t> view_of) {
    if (embeddings.rows() != labels.size() || embeddings.rows() != view_of.size())
      fail(ErrorKind::ShapeError, "embedding batch row/label/view mismatch");
    for (std::size_t i = 0; i < embeddings.rows(); ++i) {
      const double n = numerics::dot(embeddings.row_ptr(i), embeddings.row_ptr(i), embeddings.cols());
      if (std::abs(std::sqrt(n) - 1.0) > 1e-9)
        fail(ErrorKind::NumericError, "embedding row " + std::to_string(i) + " not unit norm");
    }
    std::vector<std::size_t> seen;
    for (std::size_t v : view_of) {
      if (v >= seen.size()) seen.resize(v + 1, 0);
      ++seen[v];
    }
    for (std::size_t v = 0; v < seen.size(); ++v)
      if (seen[v] != 0 && seen[v] != 2)
        fail(ErrorKind::ViewPairingError, "sample " + std::to_string(v) + " must have exactly two views");
    return EmbeddingBatch{std::move(embeddings), std::move(labels), std::move(view_of)};
  }
};

enum class ObjectiveKind { CE, SimCLR, SupCon, SCHaNe, Combined };
enum class ContrastiveKind { SimCLR, SupCon, SCHaNe };

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::Combined;
  ContrastiveKind contrastive = ContrastiveKind::SCHaNe;  // used when kind == Combined
  double tau = 0.5;
  double lambda = 0.9;
  bool classic_denominator = false;  // unweighted (all-non-anchor) denominator for SCHaNe
  bool stop_grad_beta = false;       // treat beta as a constant in the gradient

  void validate() const {
    if (!(tau > 0.0)) fail(ErrorKind::ConfigError, "tau must be > 0");
    if (!(lambda >= 0.0 && lambda <= 1.0)) fail(ErrorKind::ConfigError, "lambda must be in [0,1]");
  }
};

struct LossDiagnostics {
  std::vector<std::size_t> positives_per_anchor;
  std::vector<double> anchor_terms;  // per-anchor loss, NaN for skipped anchors
  std::size_t skipped_anchors = 0;   // anchors without positives
  double beta_min = 0.0;
  double beta_max = 0.0;
  double beta_mean = 0.0;
};

struct LossResult {
  double value = 0.0;
  Matrix grad_embeddings;  // empty when the loss has no embedding path
  Matrix grad_logits;      // empty when the loss has no logit path
  LossDiagnostics diagnostics;
};

// ---- cross-entropy (logit path) --------------------------------------------

inline LossResult cross_entropy(const Matrix& logits, const std::vector<std::size_t>& labels) {
  if (logits.rows() == 0) fail(ErrorKind::EmptyInput, "cross_entropy on empty batch");
  if (labels.size() != logits.rows()) fail(ErrorKind::ShapeError, "label count mismatch");
  const std::size_t n = logits.rows();
  const std::size_t c = logits.cols();
  for (std::size_t lbl : labels)
    if (lbl >= c) fail(ErrorKind::LabelError, "label " + std::to_string(lbl) + " out of range");

  LossResult res;
  res.grad_logits = Matrix(n, c);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = logits.row_ptr(i);
    const double m = *std::max_element(x, x + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(x[j] - m);
    const double lse = m + std::log(z);
    total += lse - x[labels[i]];
    double* g = res.grad_logits.row_ptr(i);
    for (std::size_t j = 0; j < c; ++j) g[j] = std::exp(x[j] - m) / z * inv_n;
    g[labels[i]] -= inv_n;
  }
  res.value = total * inv_n;
  if (!std::isfinite(res.value)) fail(ErrorKind::NumericError, "cross_entropy not finite");
  return res;
}

// ---- hard-negative weights --------------------------------------------------

// Beta weights for one anchor, over its negatives in ascending row order.
// By construction sum(beta) == |N|.
inline Vector beta_weights(const EmbeddingBatch& batch, std::size_t anchor, double tau) {
  if (!(tau > 0.0)) fail(ErrorKind::ConfigError, "tau must be > 0");
  if (anchor >= batch.size()) fail(ErrorKind::ShapeError, "anchor index out of range");
  const Matrix& z = batch.embeddings;
  std::vector<double> sims;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (k == anchor || batch.labels[k] == batch.labels[anchor]) continue;
    sims.push_back(numerics::dot(z.row_ptr(anchor), z.row_ptr(k), z.cols()) / tau);
  }
  if (sims.empty()) fail(ErrorKind::NoNegatives, "anchor " + std::to_string(anchor) + " has no negatives");
  const double m = *std::max_element(sims.begin(), sims.end());
  double s1 = 0.0;
  for (double s : sims) s1 += std::exp(s - m);
  Vector beta(sims.size());
  const double count = static_cast<double>(sims.size());
  for (std::size_t k = 0; k < sims.size(); ++k) beta[k] = std::exp(sims[k] - m) * count / s1;
  return beta;
}

// ---- supervised contrastive core --------------------------------------------

namespace detail {

struct SupConOptions {
  bool hard_negative_weighting = true;  // false -> SupCon (beta == 1)
  bool stop_grad_beta = false;
};

inline LossResult supervised_contrastive(const EmbeddingBatch& batch, double tau,
                                         const SupConOptions& opt) {
  if (!(tau > 0.0)) fail(ErrorKind::ConfigError, "tau must be > 0");
  const Matrix& z = batch.embeddings;
  const std::size_t m_rows = batch.size();
  if (z.rows() != m_rows) fail(ErrorKind::ShapeError, "embedding/label count mismatch");
  if (m_rows < 2) fail(ErrorKind::InsufficientBatch, "need at least 2 views");
  const std::size_t d = z.cols();

  LossResult res;
  res.grad_embeddings = Matrix(m_rows, d);
  res.diagnostics.positives_per_anchor.assign(m_rows, 0);
  res.diagnostics.anchor_terms.assign(m_rows, std::nan(""));

  // First pass: per-anchor terms and similarity-space coefficients.
  std::vector<std::vector<double>> coeffs(m_rows);
  std::size_t contributing = 0;
  double total = 0.0;
  double beta_min = std::numeric_limits<double>::infinity();
  double beta_max = -std::numeric_limits<double>::infinity();
  double beta_sum = 0.0;
  std::size_t beta_count = 0;

  std::vector<double> sims(m_rows);
  for (std::size_t i = 0; i < m_rows; ++i) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t j = 0; j < m_rows; ++j) {
      if (j == i) continue;
      sims[j] = numerics::dot(z.row_ptr(i), z.row_ptr(j), d) / tau;
      (batch.labels[j] == batch.labels[i] ? pos : neg).push_back(j);
    }
    if (neg.empty())
      fail(ErrorKind::NoNegatives, "anchor " + std::to_string(i) + " has no negatives (single-class batch?)");
    res.diagnostics.positives_per_anchor[i] = pos.size();
    if (pos.empty()) {
      ++res.diagnostics.skipped_anchors;
      continue;  // no positive term exists for this anchor
    }
    ++contributing;

    double shift = -std::numeric_limits<double>::infinity();
    for (std::size_t j : pos) shift = std::max(shift, sims[j]);
    for (std::size_t j : neg) shift = std::max(shift, sims[j]);

    double sp = 0.0, mean_pos_sim = 0.0;
    for (std::size_t j : pos) {
      sp += std::exp(sims[j] - shift);
      mean_pos_sim += sims[j];
    }
    mean_pos_sim /= static_cast<double>(pos.size());
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t j : neg) {
      const double e = std::exp(sims[j] - shift);
      s1 += e;
      s2 += e * e;
    }
    const double n_neg = static_cast<double>(neg.size());
    const double weighted = opt.hard_negative_weighting ? n_neg * s2 / s1 : s1;
    const double denom = sp + weighted;

    const double term = std::log(denom) + shift - mean_pos_sim;
    res.diagnostics.anchor_terms[i] = term;
    total += term;

    auto& coef = coeffs[i];
    coef.assign(m_rows, 0.0);
    const double inv_pos = 1.0 / static_cast<double>(pos.size());
    for (std::size_t j : pos) coef[j] = std::exp(sims[j] - shift) / denom - inv_pos;
    for (std::size_t j : neg) {
      const double e = std::exp(sims[j] - shift);
      if (!opt.hard_negative_weighting) {
        coef[j] = e / denom;
      } else if (opt.stop_grad_beta) {
        coef[j] = n_neg * e * e / (s1 * denom);
      } else {
        coef[j] = n_neg * e * (2.0 * e * s1 - s2) / (s1 * s1 * denom);
      }
      const double beta = e * n_neg / s1;
      beta_min = std::min(beta_min, beta);
      beta_max = std::max(beta_max, beta);
      beta_sum += beta;
      ++beta_count;
    }
  }

  if (contributing == 0) fail(ErrorKind::NoPositives, "no anchor has a positive view");
  res.value = total / static_cast<double>(contributing);
  if (!std::isfinite(res.value)) fail(ErrorKind::NumericError, "contrastive loss not finite");

  // Second pass: map similarity-space coefficients to embedding gradients,
  // fixed accumulation order for determinism.
  const double scale = 1.0 / (static_cast<double>(contributing) * tau);
  for (std::size_t i = 0; i < m_rows; ++i) {
    if (coeffs[i].empty()) continue;
    double* gi = res.grad_embeddings.row_ptr(i);
    for (std::size_t j = 0; j < m_rows; ++j) {
      const double c = coeffs[i][j] * scale;
      if (c == 0.0) continue;
      const double* zj = z.row_ptr(j);
      const double* zi = z.row_ptr(i);
      double* gj = res.grad_embeddings.row_ptr(j);
      for (std::size_t k = 0; k < d; ++k) {
        gi[k] += c * zj[k];
        gj[k] += c * zi[k];
      }
    }
  }

  if (beta_count > 0 && opt.hard_negative_weighting) {
    res.diagnostics.beta_min = beta_min;
    res.diagnostics.beta_max = beta_max;
    res.diagnostics.beta_mean = beta_sum / static_cast<double>(beta_count);
  } else {
    res.diagnostics.beta_min = res.diagnostics.beta_max = res.diagnostics.beta_mean = 1.0;
  }
  return res;
}

}  // namespace detail

inline LossResult schane_loss(const EmbeddingBatch& batch, double tau,
                              bool classic_denominator = false, bool stop_grad_beta = false) {
  detail::SupConOptions opt;
  opt.hard_negative_weighting = !classic_denominator;
  opt.stop_grad_beta = stop_grad_beta;
  return detail::supervised_contrastive(batch, tau, opt);
}

inline LossResult supcon_loss(const EmbeddingBatch& batch, double tau) {
  detail::SupConOptions opt;
  opt.hard_negative_weighting = false;
  return detail::supervised_contrastive(batch, tau, opt);
}

// ---- SimCLR ------------------------------------------------------------------

// Positives are the sibling view only (via view_of); labels are ignored.
inline LossResult simclr_loss(const EmbeddingBatch& batch, double tau) {
  if (!(tau > 0.0)) fail(ErrorKind::ConfigError, "tau must be > 0");
  const Matrix& z = batch.embeddings;
  const std::size_t m_rows = batch.size();
  if (z.rows() != m_rows || batch.view_of.size() != m_rows)
    fail(ErrorKind::ShapeError, "embedding/view count mismatch");

  std::vector<std::size_t> sibling(m_rows, SIZE_MAX);
  {
    std::vector<std::vector<std::size_t>> rows_of;
    for (std::size_t i = 0; i < m_rows; ++i) {
      const std::size_t v = batch.view_of[i];
      if (v >= rows_of.size()) rows_of.resize(v + 1);
      rows_of[v].push_back(i);
    }
    std::size_t samples = 0;
    for (const auto& rows : rows_of) {
      if (rows.empty()) continue;
      if (rows.size() != 2) fail(ErrorKind::ViewPairingError, "each sample needs exactly two views");
      sibling[rows[0]] = rows[1];
      sibling[rows[1]] = rows[0];
      ++samples;
    }
    if (samples < 2)
      fail(ErrorKind::InsufficientBatch, "SimCLR needs at least 2 distinct samples");
  }

  const std::size_t d = z.cols();
  LossResult res;
  res.grad_embeddings = Matrix(m_rows, d);
  res.diagnostics.positives_per_anchor.assign(m_rows, 1);
  res.diagnostics.anchor_terms.assign(m_rows, 0.0);
  res.diagnostics.beta_min = res.diagnostics.beta_max = res.diagnostics.beta_mean = 1.0;

  const double inv_m = 1.0 / static_cast<double>(m_rows);
  const double scale = inv_m / tau;
  double total = 0.0;
  std::vector<double> sims(m_rows);
  for (std::size_t i = 0; i < m_rows; ++i) {
    double shift = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m_rows; ++j) {
      if (j == i) continue;
      sims[j] = numerics::dot(z.row_ptr(i), z.row_ptr(j), d) / tau;
      shift = std::max(shift, sims[j]);
    }
    double zsum = 0.0;
    for (std::size_t j = 0; j < m_rows; ++j)
      if (j != i) zsum += std::exp(sims[j] - shift);
    const double term = std::log(zsum) + shift - sims[sibling[i]];
    res.diagnostics.anchor_terms[i] = term;
    total += term;

    double* gi = res.grad_embeddings.row_ptr(i);
    const double* zi = z.row_ptr(i);
    for (std::size_t j = 0; j < m_rows; ++j) {
      if (j == i) continue;
      double c = std::exp(sims[j] - shift) / zsum;
      if (j == sibling[i]) c -= 1.0;
      c *= scale;
      const double* zj = z.row_ptr(j);
      double* gj = res.grad_embeddings.row_ptr(j);
      for (std::size_t k = 0; k < d; ++k) {
        gi[k] += c * zj[k];
        gj[k] += c * zi[k];
      }
    }
  }
  res.value = total * inv_m;
  if (!std::isfinite(res.value)) fail(ErrorKind::NumericError, "simclr loss not finite");
  return res;
}

// ---- Eq. 1 mixing --------------------------------------------------------------

inline LossResult combined_loss(const LossResult& ce, const LossResult& con, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail(ErrorKind::ConfigError, "lambda must be in [0,1]");
  LossResult res;
  res.value = (1.0 - lambda) * ce.value + lambda * con.value;
  if (!ce.grad_logits.empty()) {
    res.grad_logits = ce.grad_logits;
    numerics::scale(res.grad_logits, 1.0 - lambda);
  }
  if (!con.grad_embeddings.empty()) {
    res.grad_embeddings = con.grad_embeddings;
    numerics::scale(res.grad_embeddings, lambda);
  }
  if (!ce.grad_embeddings.empty()) {
    if (res.grad_embeddings.empty()) {
      res.grad_embeddings = ce.grad_embeddings;
      numerics::scale(res.grad_embeddings, 1.0 - lambda);
    } else {
      numerics::axpy(1.0 - lambda, ce.grad_embeddings, res.grad_embeddings);
    }
  }
  res.diagnostics = con.diagnostics;
  return res;
}

}  // namespace schane::objectives
