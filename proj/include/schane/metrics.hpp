// Evaluation and embedding-geometry analysis: top-1 accuracy, mean +- CI,
// cosine-similarity histograms for a class pair, the isotropy score, and
// episodic few-shot evaluation with per-episode fine-tuning.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <thread>
#include <vector>

#include "schane/data.hpp"
#include "schane/error.hpp"
#include "schane/framework.hpp"
#include "schane/numerics.hpp"
#include "schane/objectives.hpp"
#include "schane/rng.hpp"

namespace schane::metrics {

using numerics::Matrix;
using numerics::Vector;

// Fraction of rows whose argmax matches the label; ties go to the lowest
// class index.
inline double top1_accuracy(const Matrix& logits, const std::vector<std::size_t>& labels) {
  if (logits.rows() == 0) fail(ErrorKind::EmptyInput, "top1_accuracy on empty input");
  if (labels.size() != logits.rows()) fail(ErrorKind::ShapeError, "label count mismatch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    if (labels[i] >= logits.cols()) fail(ErrorKind::LabelError, "label out of range");
    const double* row = logits.row_ptr(i);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < logits.cols(); ++j)
      if (row[j] > row[arg]) arg = j;
    if (arg == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

// mean +- z*s/sqrt(n); z = 1.96 at the default 0.95 level.
struct MeanCi {
  double mean = 0.0;
  double halfwidth = 0.0;
};

inline MeanCi mean_ci(const std::vector<double>& values, double level = 0.95) {
  if (values.size() < 2) fail(ErrorKind::InsufficientSamples, "mean_ci needs >= 2 values");
  double z = 0.0;
  if (level == 0.95) {
    z = 1.96;
  } else if (level == 0.90) {
    z = 1.645;
  } else if (level == 0.99) {
    z = 2.576;
  } else {
    fail(ErrorKind::ConfigError, "unsupported confidence level");
  }
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return {mean, z * sd / std::sqrt(n)};
}

inline double median(std::vector<double> values) {
  if (values.empty()) fail(ErrorKind::EmptyInput, "median of empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// Isotropy score: Z(c) = sum_v exp(c.v) over the eigenvectors c of V^T V,
// returned as min Z / max Z in (0,1]; 1 means isotropic. Computed through
// log-sum-exp.
inline double isotropy_score(const Matrix& embeddings) {
  if (embeddings.rows() < 2 || embeddings.cols() < 2)
    fail(ErrorKind::ShapeError, "isotropy_score needs >= 2 rows and dims");
  const std::size_t d = embeddings.cols();
  Matrix gram = numerics::matmul_at(embeddings, embeddings);
  double frob = 0.0;
  for (double x : gram.data()) frob += x * x;
  if (!(frob > 0.0)) fail(ErrorKind::DegenerateInput, "all-zero embeddings");
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      const double avg = 0.5 * (gram(i, j) + gram(j, i));
      gram(i, j) = avg;
      gram(j, i) = avg;
    }
  const auto eig = numerics::symmetric_eigen(gram);

  double min_logz = std::numeric_limits<double>::infinity();
  double max_logz = -std::numeric_limits<double>::infinity();
  Vector proj(embeddings.rows());
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t i = 0; i < embeddings.rows(); ++i) {
      double s = 0.0;
      const double* row = embeddings.row_ptr(i);
      for (std::size_t k = 0; k < d; ++k) s += row[k] * eig.eigenvectors(k, c);
      proj[i] = s;
    }
    const double logz = numerics::log_sum_exp(proj);
    min_logz = std::min(min_logz, logz);
    max_logz = std::max(max_logz, logz);
  }
  return std::exp(min_logz - max_logz);
}

// ---- cosine similarity distributions -------------------------------------------

struct CosineStats {
  Vector bin_edges;  // bins+1 edges over [-1, 1]
  Vector positive_hist;
  Vector negative_hist;
  double positive_mean = 0.0;
  double negative_mean = 0.0;
  double overlap = 0.0;  // sum of per-bin minima of the normalised histograms
};

// Positive pairs: intra-class within a and within b; negative pairs: all
// a x b cross pairs. Self-pairs excluded. max_pairs (0 = unlimited) caps
// each side by deterministic subsampling.
inline CosineStats cosine_stats(const objectives::EmbeddingBatch& batch, std::size_t class_a,
                                std::size_t class_b, std::size_t bins, std::size_t max_pairs = 0,
                                std::uint64_t seed = 0) {
  if (bins < 2) fail(ErrorKind::ConfigError, "bins must be >= 2");
  if (class_a == class_b) fail(ErrorKind::ConfigError, "class_a and class_b must differ");
  std::vector<std::size_t> rows_a, rows_b;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch.labels[i] == class_a) rows_a.push_back(i);
    if (batch.labels[i] == class_b) rows_b.push_back(i);
  }
  if (rows_a.size() < 2 || rows_b.size() < 2)
    fail(ErrorKind::InsufficientSamples, "both classes need >= 2 samples for positive pairs");

  const Matrix& z = batch.embeddings;
  const std::size_t d = z.cols();
  auto cosine = [&](std::size_t i, std::size_t j) {
    const double* a = z.row_ptr(i);
    const double* b = z.row_ptr(j);
    const double na = std::sqrt(numerics::dot(a, a, d));
    const double nb = std::sqrt(numerics::dot(b, b, d));
    if (!(na > 0.0 && nb > 0.0)) fail(ErrorKind::DegenerateInput, "zero-norm embedding");
    return numerics::dot(a, b, d) / (na * nb);
  };

  std::vector<double> pos, neg;
  for (const auto* rows : {&rows_a, &rows_b})
    for (std::size_t i = 0; i < rows->size(); ++i)
      for (std::size_t j = i + 1; j < rows->size(); ++j)
        pos.push_back(cosine((*rows)[i], (*rows)[j]));
  for (std::size_t i : rows_a)
    for (std::size_t j : rows_b) neg.push_back(cosine(i, j));

  auto maybe_cap = [&](std::vector<double>& v, const char* tag) {
    if (max_pairs == 0 || v.size() <= max_pairs) return;
    Rng rng(derive_seed(seed, tag));
    const auto keep = rng.sample_without_replacement(v.size(), max_pairs);
    std::vector<double> capped;
    capped.reserve(max_pairs);
    for (std::size_t k : keep) capped.push_back(v[k]);
    v = std::move(capped);
  };
  maybe_cap(pos, "cosine_pos");
  maybe_cap(neg, "cosine_neg");

  CosineStats st;
  st.bin_edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i)
    st.bin_edges[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(bins);
  st.positive_hist.assign(bins, 0.0);
  st.negative_hist.assign(bins, 0.0);

  auto fill = [&](const std::vector<double>& vals, Vector& hist, double& mean) {
    mean = 0.0;
    for (double v : vals) {
      mean += v;
      auto idx = static_cast<std::ptrdiff_t>(std::floor((v + 1.0) / 2.0 * static_cast<double>(bins)));
      idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(bins) - 1);
      hist[static_cast<std::size_t>(idx)] += 1.0;
    }
    mean /= static_cast<double>(vals.size());
    for (double& h : hist) h /= static_cast<double>(vals.size());
  };
  fill(pos, st.positive_hist, st.positive_mean);
  fill(neg, st.negative_hist, st.negative_mean);
  for (std::size_t i = 0; i < bins; ++i)
    st.overlap += std::min(st.positive_hist[i], st.negative_hist[i]);
  return st;
}

// ---- few-shot evaluation ----------------------------------------------------------

struct EpisodeResult {
  std::size_t episode = 0;
  double accuracy = 0.0;
  Vector per_class_accuracy;
};

struct FewshotOptions {
  std::size_t way = 5;
  std::size_t shot = 1;
  std::size_t query_shot = 15;
  std::size_t episodes = 200;
  std::size_t ft_steps = 20;  // full-support-batch gradient steps per episode
  double ft_learning_rate = 0.01;
  double ft_weight_decay = 0.05;
  framework::AugmentPolicy augment;
  std::size_t threads = 1;
};

struct FewshotResult {
  double mean = 0.0;
  double ci_halfwidth = std::numeric_limits<double>::quiet_NaN();
  double median = 0.0;
  std::vector<EpisodeResult> episodes;
};

namespace detail {

inline Matrix stack_features(const std::vector<data::Sample>& samples) {
  std::vector<Vector> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) rows.push_back(s.features);
  return Matrix::from_rows(rows);
}

// Episode head initialised from support prototypes: column c is the
// normalised mean of class-c support embeddings, so logits start as cosine
// scores against class prototypes.
inline void prototype_head(framework::EncoderParams& params, const data::Episode& ep) {
  Rng rng(0);
  const Matrix support = stack_features(ep.support);
  const auto enc = framework::encode_rng(params, support, false, rng);
  const std::size_t d = enc.embeddings.cols();
  Matrix head(d, ep.way);
  std::vector<std::size_t> counts(ep.way, 0);
  for (std::size_t i = 0; i < ep.support.size(); ++i) {
    const std::size_t c = ep.support[i].label;
    for (std::size_t k = 0; k < d; ++k) head(k, c) += enc.embeddings(i, k);
    ++counts[c];
  }
  for (std::size_t c = 0; c < ep.way; ++c) {
    double norm_sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      head(k, c) /= static_cast<double>(counts[c]);
      norm_sq += head(k, c) * head(k, c);
    }
    const double norm = std::sqrt(norm_sq);
    if (norm >= 1e-12)
      for (std::size_t k = 0; k < d; ++k) head(k, c) /= norm;
  }
  params.head_weight = std::move(head);
  params.head_bias.assign(ep.way, 0.0);
}

inline EpisodeResult run_episode(const framework::EncoderParams& base,
                                 const data::Dataset& dataset,
                                 const objectives::ObjectiveConfig& objective,
                                 const FewshotOptions& opt, std::uint64_t seed,
                                 std::size_t index) {
  const data::Episode ep = data::sample_episode(dataset, opt.way, opt.shot, opt.query_shot,
                                                derive_seed(seed, "episode_sampling", index));

  framework::EncoderParams params = base;
  prototype_head(params, ep);

  if (opt.ft_steps > 0) {
    data::Dataset support;
    support.samples = ep.support;
    support.class_count = ep.way;
    support.feature_dim = dataset.feature_dim;

    framework::TrainConfig ft;
    ft.epochs = opt.ft_steps;
    ft.batch_size = ep.support.size();  // one full-support step per epoch
    ft.learning_rate = opt.ft_learning_rate;
    ft.weight_decay = opt.ft_weight_decay;
    ft.augment = opt.augment;
    auto adam = framework::AdamState::init(params, ft.learning_rate, ft.weight_decay);
    auto result = framework::train(std::move(params), std::move(adam), 0, ft, support, nullptr,
                                   objective, derive_seed(seed, "episode_ft", index));
    params = std::move(result.params);
    // Query scores come from prototypes of the adapted encoder, so the
    // classifier tracks whatever the objective did to the embedding space.
    prototype_head(params, ep);
  }

  Rng rng(0);
  const Matrix query = stack_features(ep.query);
  const auto enc = framework::encode_rng(params, query, false, rng);
  const Matrix logits = framework::head_logits(params, enc.embeddings);

  EpisodeResult res;
  res.episode = index;
  std::vector<std::size_t> labels(ep.query.size());
  for (std::size_t i = 0; i < ep.query.size(); ++i) labels[i] = ep.query[i].label;
  res.accuracy = top1_accuracy(logits, labels);
  res.per_class_accuracy.assign(ep.way, 0.0);
  std::vector<std::size_t> totals(ep.way, 0);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const double* row = logits.row_ptr(i);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < logits.cols(); ++j)
      if (row[j] > row[arg]) arg = j;
    ++totals[labels[i]];
    if (arg == labels[i]) res.per_class_accuracy[labels[i]] += 1.0;
  }
  for (std::size_t c = 0; c < ep.way; ++c)
    if (totals[c] > 0) res.per_class_accuracy[c] /= static_cast<double>(totals[c]);
  return res;
}

}  // namespace detail

// For each episode: clone params, re-head from support prototypes, fine-tune
// on the support set with the objective, then score the query set. Episode i
// derives its own seeds from (seed, i), so results are identical for any
// thread count and are paired across objectives sharing a seed.
inline FewshotResult evaluate_fewshot(const framework::EncoderParams& params,
                                      const data::Dataset& dataset,
                                      const objectives::ObjectiveConfig& objective,
                                      const FewshotOptions& opt, std::uint64_t seed) {
  dataset.validate();
  objective.validate();
  if (opt.episodes < 1) fail(ErrorKind::ConfigError, "episodes must be >= 1");

  FewshotResult out;
  out.episodes.resize(opt.episodes);
  const std::size_t threads = std::max<std::size_t>(1, opt.threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < opt.episodes; ++i)
      out.episodes[i] = detail::run_episode(params, dataset, objective, opt, seed, i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t]() {
        try {
          for (std::size_t i = t; i < opt.episodes; i += threads)
            out.episodes[i] = detail::run_episode(params, dataset, objective, opt, seed, i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<double> accs;
  accs.reserve(opt.episodes);
  for (const auto& ep : out.episodes) accs.push_back(ep.accuracy);
  if (accs.size() >= 2) {
    const auto ci = mean_ci(accs);
    out.mean = ci.mean;
    out.ci_halfwidth = ci.halfwidth;
  } else {
    out.mean = accs[0];
  }
  out.median = median(accs);
  return out;
}

}  // namespace schane::metrics
