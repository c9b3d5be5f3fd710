// Command implementations behind the CLI: generate, pretrain, fewshot,
// sweep-lambda, ablation, analyze. Each command resolves its data pipeline
// from the config alone, writes its outputs under config.out and returns the
// manifest it wrote.
//
// Few-shot protocol: starting from the pretrained (cross-entropy) checkpoint,
// the selected objective first fine-tunes the encoder on the base-class train
// split, then episodes are sampled from the novel classes and each episode
// fine-tunes a clone on its support set. Episode seeds depend only on
// (seed, episode index), so every objective and lambda sees identical
// support/query sets.
#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "schane/checkpoint.hpp"
#include "schane/data.hpp"
#include "schane/error.hpp"
#include "schane/framework.hpp"
#include "schane/manifest.hpp"
#include "schane/metrics.hpp"
#include "schane/numerics.hpp"
#include "schane/runconfig.hpp"

namespace schane::cli {

namespace fs = std::filesystem;
using numerics::Matrix;
using numerics::Vector;

inline constexpr const char* kFewshotSchema = "schane.fewshot.v1";
inline constexpr const char* kEpisodesSchema = "schane.episodes.v1";
inline constexpr const char* kAblationSchema = "schane.ablation.v1";
inline constexpr const char* kSweepSchema = "schane.sweep.v1";
inline constexpr const char* kTraceSchema = "schane.trace.v1";
inline constexpr const char* kAnalysisSchema = "schane.analysis.v1";
inline constexpr const char* kProjectionSchema = "schane.projection.v1";
inline constexpr const char* kCosineHistSchema = "schane.cosine_hist.v1";

namespace detail {

inline std::string fmt6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

inline void ensure_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::IoError, "cannot create output dir " + dir.string());
}

inline std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  return out;
}

}  // namespace detail

// ---- data pipeline ---------------------------------------------------------------

inline data::Dataset resolve_dataset(const RunConfig& cfg) {
  switch (cfg.dataset.kind) {
    case DatasetKind::Synthetic:
      return data::generate_synthetic(cfg.dataset.synthetic);
    case DatasetKind::Csv:
      return data::load_csv(cfg.dataset.csv_path);
    case DatasetKind::Idx:
      return data::load_idx(cfg.dataset.idx_images, cfg.dataset.idx_labels);
  }
  fail(ErrorKind::ConfigError, "unknown dataset kind");
}

struct Pipeline {
  data::ClassSplit classes;               // base/novel, class-disjoint
  std::array<data::Dataset, 3> base_parts;  // train/val/test of the base side
};

inline Pipeline prepare_pipeline(const RunConfig& cfg) {
  const data::Dataset ds = resolve_dataset(cfg);
  Pipeline p;
  p.classes = data::split_classes(ds, cfg.base_fraction, cfg.seed);
  p.base_parts = data::split(p.classes.base, cfg.split, cfg.seed);
  return p;
}

inline checkpoint::Checkpoint load_required_checkpoint(const RunConfig& cfg) {
  if (cfg.checkpoint.empty())
    fail(ErrorKind::ConfigError, "this command requires --checkpoint (or config key 'checkpoint')");
  return checkpoint::load(cfg.checkpoint);
}

// ---- generate ---------------------------------------------------------------------

inline Manifest cmd_generate(const ResolvedConfig& rc) {
  const RunConfig& cfg = rc.config;
  if (cfg.dataset.kind != DatasetKind::Synthetic)
    fail(ErrorKind::ConfigError, "generate requires a synthetic dataset spec");
  WallClock clock;
  detail::ensure_out_dir(cfg.out_dir);

  const data::Dataset ds = data::generate_synthetic(cfg.dataset.synthetic);
  const fs::path csv_path = fs::path(cfg.out_dir) / "dataset.csv";
  data::save_csv(ds, csv_path);

  std::cout << "generate: " << ds.class_count << " classes, " << ds.size() << " samples, dim "
            << ds.feature_dim << " -> " << csv_path.string() << "\n";

  Manifest m;
  m.command = "generate";
  m.config_document = rc.document;
  m.seeds = {{"dataset", cfg.dataset.synthetic.seed}};
  m.metrics = {{"samples", ds.size()}, {"classes", ds.class_count}, {"feature_dim", ds.feature_dim}};
  m.outputs = {{"dataset_csv", csv_path.string()}};
  m.wall_seconds = clock.seconds();
  write_manifest(m, fs::path(cfg.out_dir) / "manifest.json");
  return m;
}

// ---- pretrain ---------------------------------------------------------------------

namespace detail {

inline void write_trace_csv(const framework::TrainingTrace& trace, const fs::path& path) {
  auto out = open_out(path);
  out << "schema,epoch,mean_loss,val_accuracy\n";
  for (const auto& e : trace.epochs)
    out << kTraceSchema << ',' << e.epoch << ',' << numerics::format_full(e.mean_loss) << ','
        << (std::isnan(e.val_accuracy) ? std::string("NA") : numerics::format_full(e.val_accuracy))
        << '\n';
}

}  // namespace detail

// Cross-entropy training on the base classes; the objective stages live in
// fewshot/sweep-lambda/ablation. Supports resuming via init_from.
inline Manifest cmd_pretrain(const ResolvedConfig& rc) {
  const RunConfig& cfg = rc.config;
  WallClock clock;
  detail::ensure_out_dir(cfg.out_dir);
  const Pipeline pipe = prepare_pipeline(cfg);
  const data::Dataset& train_set = pipe.base_parts[0];
  const data::Dataset& val_set = pipe.base_parts[1];

  framework::EncoderParams params;
  framework::AdamState adam;
  std::size_t start_epoch = 0;
  std::uint64_t train_seed = cfg.seed;
  if (!cfg.init_from.empty()) {
    auto ckpt = checkpoint::load(cfg.init_from);
    if (ckpt.params.input_dim() != train_set.feature_dim ||
        ckpt.params.class_count() != train_set.class_count)
      fail(ErrorKind::ShapeError, "init_from checkpoint does not match the dataset pipeline");
    params = std::move(ckpt.params);
    adam = std::move(ckpt.adam);
    start_epoch = ckpt.epoch;
    train_seed = ckpt.seed;  // continue the original trace
  } else {
    std::vector<std::size_t> dims;
    dims.push_back(train_set.feature_dim);
    dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
    dims.push_back(cfg.embedding_dim);
    params = framework::init_params(dims, train_set.class_count, cfg.dropout, cfg.seed);
    adam = framework::AdamState::init(params, cfg.train.learning_rate, cfg.train.weight_decay);
  }

  objectives::ObjectiveConfig ce;
  ce.kind = objectives::ObjectiveKind::CE;
  ce.tau = cfg.objective.tau;
  ce.lambda = 0.0;
  auto result = framework::train(std::move(params), std::move(adam), start_epoch, cfg.train,
                                 train_set, &val_set, ce, train_seed);

  const fs::path ckpt_path = fs::path(cfg.out_dir) / "checkpoint.json";
  checkpoint::Checkpoint ckpt{std::move(result.params), std::move(result.adam), train_seed,
                              result.next_epoch,
                              {{"objective", "ce"}, {"phase", "pretrain"}}};
  checkpoint::save(ckpt, ckpt_path);
  const fs::path trace_path = fs::path(cfg.out_dir) / "trace.csv";
  detail::write_trace_csv(result.trace, trace_path);

  const double final_loss =
      result.trace.epochs.empty() ? std::nan("") : result.trace.epochs.back().mean_loss;
  const double final_val =
      result.trace.epochs.empty() ? std::nan("") : result.trace.epochs.back().val_accuracy;
  std::cout << "pretrain: " << cfg.train.epochs << " epochs on " << train_set.class_count
            << " base classes";
  if (!std::isnan(final_loss)) std::cout << ", loss " << detail::fmt6(final_loss);
  if (!std::isnan(final_val)) std::cout << ", val acc " << detail::fmt6(final_val);
  std::cout << " -> " << ckpt_path.string() << "\n";

  Manifest m;
  m.command = "pretrain";
  m.config_document = rc.document;
  m.seeds = {{"master", cfg.seed}, {"train", train_seed}};
  m.metrics = {{"epochs_trained", cfg.train.epochs},
               {"next_epoch", result.next_epoch},
               {"final_train_loss", final_loss}};
  if (!std::isnan(final_val)) m.metrics["final_val_accuracy"] = final_val;
  m.outputs = {{"checkpoint", ckpt_path.string()}, {"trace_csv", trace_path.string()}};
  m.wall_seconds = clock.seconds();
  write_manifest(m, fs::path(cfg.out_dir) / "manifest.json");
  return m;
}

// ---- objective battery (shared by fewshot / ablation / sweep) -------------------------

namespace detail {

struct BatteryRow {
  std::string objective_name;
  double lambda = 0.0;
  metrics::FewshotResult result;
  std::string checkpoint_path;  // empty when the stage checkpoint is not saved
};

// Objective fine-tune stage on base-train, then paired episodes on the novel
// classes.
inline BatteryRow run_objective(const RunConfig& cfg, const Pipeline& pipe,
                                const checkpoint::Checkpoint& base,
                                const std::string& objective_name, double lambda,
                                bool save_stage_checkpoint) {
  objectives::ObjectiveConfig obj =
      parse_objective(objective_name, cfg.objective.tau, lambda, cfg.objective.classic_denominator,
                      cfg.objective.stop_grad_beta);

  framework::EncoderParams staged = base.params;
  if (cfg.finetune_epochs > 0) {
    framework::TrainConfig stage = cfg.train;
    stage.epochs = cfg.finetune_epochs;
    stage.learning_rate = cfg.finetune_learning_rate;
    stage.weight_decay = cfg.finetune_weight_decay;
    auto adam = framework::AdamState::init(staged, stage.learning_rate, stage.weight_decay);
    auto result = framework::train(std::move(staged), std::move(adam), 0, stage, pipe.base_parts[0],
                                   nullptr, obj, derive_seed(cfg.seed, "finetune"));
    staged = std::move(result.params);
  }

  BatteryRow row;
  row.objective_name = objective_name;
  row.lambda = obj.kind == objectives::ObjectiveKind::CE ? 0.0 : lambda;
  if (save_stage_checkpoint) {
    const fs::path path = fs::path(cfg.out_dir) / ("checkpoint-" + objective_name + ".json");
    checkpoint::Checkpoint ckpt{staged, framework::AdamState::init(staged, cfg.finetune_learning_rate,
                                                                   cfg.finetune_weight_decay),
                                derive_seed(cfg.seed, "finetune"), cfg.finetune_epochs,
                                {{"objective", objective_name}, {"phase", "finetune"}}};
    checkpoint::save(ckpt, path);
    row.checkpoint_path = path.string();
  }
  row.result = metrics::evaluate_fewshot(staged, pipe.classes.novel, obj, cfg.fewshot,
                                         derive_seed(cfg.seed, "fewshot"));
  return row;
}

inline void write_fewshot_header(std::ofstream& out, bool with_lambda, bool with_delta) {
  out << "schema,";
  if (with_lambda) out << "lambda,";
  out << "objective,way,shot,query_shot,episodes,seed,mean_acc,median_acc,ci95_halfwidth";
  if (with_delta) out << ",delta_vs_ce_mean,delta_vs_ce_ci95";
  out << '\n';
}

inline void write_fewshot_row(std::ofstream& out, const char* schema, const RunConfig& cfg,
                              const BatteryRow& row, bool with_lambda, const double* delta_mean,
                              const double* delta_ci) {
  out << schema << ',';
  if (with_lambda) out << numerics::format_full(row.lambda) << ',';
  out << row.objective_name << ',' << cfg.fewshot.way << ',' << cfg.fewshot.shot << ','
      << cfg.fewshot.query_shot << ',' << cfg.fewshot.episodes << ',' << cfg.seed << ','
      << numerics::format_full(row.result.mean) << ',' << numerics::format_full(row.result.median)
      << ','
      << (std::isnan(row.result.ci_halfwidth) ? std::string("NA")
                                              : numerics::format_full(row.result.ci_halfwidth));
  if (delta_mean) out << ',' << numerics::format_full(*delta_mean);
  if (delta_ci)
    out << ',' << (std::isnan(*delta_ci) ? std::string("NA") : numerics::format_full(*delta_ci));
  out << '\n';
}

inline void write_episodes_csv(const fs::path& path, const std::vector<BatteryRow>& rows) {
  auto out = open_out(path);
  out << "schema,objective,lambda,episode,accuracy\n";
  for (const auto& row : rows)
    for (const auto& ep : row.result.episodes)
      out << kEpisodesSchema << ',' << row.objective_name << ','
          << numerics::format_full(row.lambda) << ',' << ep.episode << ','
          << numerics::format_full(ep.accuracy) << '\n';
}

inline json row_metrics(const BatteryRow& row) {
  json j{{"objective", row.objective_name},
         {"lambda", row.lambda},
         {"mean_acc", row.result.mean},
         {"median_acc", row.result.median}};
  if (!std::isnan(row.result.ci_halfwidth)) j["ci95_halfwidth"] = row.result.ci_halfwidth;
  return j;
}

}  // namespace detail

// ---- fewshot ----------------------------------------------------------------------

inline Manifest cmd_fewshot(const ResolvedConfig& rc) {
  const RunConfig& cfg = rc.config;
  WallClock clock;
  detail::ensure_out_dir(cfg.out_dir);
  const Pipeline pipe = prepare_pipeline(cfg);
  const auto base = load_required_checkpoint(cfg);

  std::vector<std::string> names;
  if (cfg.objective_name == "all") {
    names = {"ce", "ce+simclr", "ce+supcon", "ce+schane"};
  } else {
    names = {cfg.objective_name};
  }

  std::vector<detail::BatteryRow> rows;
  for (const auto& name : names)
    rows.push_back(detail::run_objective(cfg, pipe, base, name, cfg.objective.lambda, true));

  const fs::path csv_path = fs::path(cfg.out_dir) / "fewshot.csv";
  {
    auto out = detail::open_out(csv_path);
    detail::write_fewshot_header(out, false, false);
    for (const auto& row : rows)
      detail::write_fewshot_row(out, kFewshotSchema, cfg, row, false, nullptr, nullptr);
  }
  const fs::path episodes_path = fs::path(cfg.out_dir) / "episodes.csv";
  detail::write_episodes_csv(episodes_path, rows);

  Manifest m;
  m.command = "fewshot";
  m.config_document = rc.document;
  m.seeds = {{"master", cfg.seed},
             {"finetune", derive_seed(cfg.seed, "finetune")},
             {"fewshot", derive_seed(cfg.seed, "fewshot")}};
  m.metrics["rows"] = json::array();
  for (const auto& row : rows) {
    std::cout << "fewshot " << row.objective_name << ": mean " << detail::fmt6(row.result.mean)
              << " median " << detail::fmt6(row.result.median);
    if (!std::isnan(row.result.ci_halfwidth))
      std::cout << " +- " << detail::fmt6(row.result.ci_halfwidth);
    else
      std::cout << " (ci skipped: single episode)";
    std::cout << " over " << cfg.fewshot.episodes << " episodes\n";
    m.metrics["rows"].push_back(detail::row_metrics(row));
    if (!row.checkpoint_path.empty())
      m.outputs["checkpoint-" + row.objective_name] = row.checkpoint_path;
  }
  m.outputs["fewshot_csv"] = csv_path.string();
  m.outputs["episodes_csv"] = episodes_path.string();
  m.wall_seconds = clock.seconds();
  write_manifest(m, fs::path(cfg.out_dir) / "manifest.json");
  return m;
}

// ---- ablation ---------------------------------------------------------------------

inline Manifest cmd_ablation(const ResolvedConfig& rc) {
  const RunConfig& cfg = rc.config;
  WallClock clock;
  detail::ensure_out_dir(cfg.out_dir);
  const Pipeline pipe = prepare_pipeline(cfg);
  const auto base = load_required_checkpoint(cfg);

  const std::vector<std::string> names{"ce", "ce+simclr", "ce+supcon", "ce+schane"};
  std::vector<detail::BatteryRow> rows;
  for (const auto& name : names)
    rows.push_back(detail::run_objective(cfg, pipe, base, name, cfg.objective.lambda, true));

  // Paired per-episode deltas against the CE row.
  const auto& ce_eps = rows[0].result.episodes;
  std::vector<double> delta_means(rows.size(), 0.0);
  std::vector<double> delta_cis(rows.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    std::vector<double> diffs(ce_eps.size());
    for (std::size_t e = 0; e < ce_eps.size(); ++e)
      diffs[e] = rows[r].result.episodes[e].accuracy - ce_eps[e].accuracy;
    if (diffs.size() >= 2) {
      const auto ci = metrics::mean_ci(diffs);
      delta_means[r] = ci.mean;
      delta_cis[r] = ci.halfwidth;
    } else {
      delta_means[r] = diffs.empty() ? 0.0 : diffs[0];
    }
  }

  const fs::path csv_path = fs::path(cfg.out_dir) / "ablation.csv";
  {
    auto out = detail::open_out(csv_path);
    detail::write_fewshot_header(out, false, true);
    for (std::size_t r = 0; r < rows.size(); ++r)
      detail::write_fewshot_row(out, kAblationSchema, cfg, rows[r], false, &delta_means[r],
                                &delta_cis[r]);
  }
  const fs::path episodes_path = fs::path(cfg.out_dir) / "episodes.csv";
  detail::write_episodes_csv(episodes_path, rows);

  Manifest m;
  m.command = "ablation";
  m.config_document = rc.document;
  m.seeds = {{"master", cfg.seed},
             {"finetune", derive_seed(cfg.seed, "finetune")},
             {"fewshot", derive_seed(cfg.seed, "fewshot")}};
  m.metrics["rows"] = json::array();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    json jr = detail::row_metrics(rows[r]);
    if (r > 0) {
      jr["delta_vs_ce_mean"] = delta_means[r];
      if (!std::isnan(delta_cis[r])) jr["delta_vs_ce_ci95"] = delta_cis[r];
    }
    m.metrics["rows"].push_back(jr);
    std::cout << "ablation " << rows[r].objective_name << ": mean "
              << detail::fmt6(rows[r].result.mean);
    if (r > 0) std::cout << " (delta vs ce " << detail::fmt6(delta_means[r]) << ")";
    std::cout << "\n";
    if (!rows[r].checkpoint_path.empty())
      m.outputs["checkpoint-" + rows[r].objective_name] = rows[r].checkpoint_path;
  }
  m.outputs["ablation_csv"] = csv_path.string();
  m.outputs["episodes_csv"] = episodes_path.string();
  m.wall_seconds = clock.seconds();
  write_manifest(m, fs::path(cfg.out_dir) / "manifest.json");
  return m;
}

// ---- lambda sweep -----------------------------------------------------------------

inline Manifest cmd_sweep_lambda(const ResolvedConfig& rc) {
  const RunConfig& cfg = rc.config;
  if (cfg.objective.kind == objectives::ObjectiveKind::CE || cfg.objective_name == "all")
    fail(ErrorKind::ConfigError, "sweep-lambda needs a contrastive objective (e.g. ce+schane)");
  WallClock clock;
  detail::ensure_out_dir(cfg.out_dir);
  const Pipeline pipe = prepare_pipeline(cfg);
  const auto base = load_required_checkpoint(cfg);

  std::vector<detail::BatteryRow> rows;
  for (double lambda : cfg.lambda_grid)
    rows.push_back(detail::run_objective(cfg, pipe, base, cfg.objective_name, lambda, false));

  const fs::path csv_path = fs::path(cfg.out_dir) / "sweep.csv";
  {
    auto out = detail::open_out(csv_path);
    detail::write_fewshot_header(out, true, false);
    for (const auto& row : rows)
      detail::write_fewshot_row(out, kSweepSchema, cfg, row, true, nullptr, nullptr);
  }
  const fs::path episodes_path = fs::path(cfg.out_dir) / "episodes.csv";
  detail::write_episodes_csv(episodes_path, rows);

  Manifest m;
  m.command = "sweep-lambda";
  m.config_document = rc.document;
  m.seeds = {{"master", cfg.seed},
             {"finetune", derive_seed(cfg.seed, "finetune")},
             {"fewshot", derive_seed(cfg.seed, "fewshot")}};
  m.metrics["rows"] = json::array();
  for (const auto& row : rows) {
    std::cout << "sweep lambda=" << detail::fmt6(row.lambda) << ": mean "
              << detail::fmt6(row.result.mean) << "\n";
    m.metrics["rows"].push_back(detail::row_metrics(row));
  }
  m.outputs["sweep_csv"] = csv_path.string();
  m.outputs["episodes_csv"] = episodes_path.string();
  m.wall_seconds = clock.seconds();
  write_manifest(m, fs::path(cfg.out_dir) / "manifest.json");
  return m;
}

// ---- analyze ----------------------------------------------------------------------

inline Manifest cmd_analyze(const ResolvedConfig& rc) {
  const RunConfig& cfg = rc.config;
  WallClock clock;
  detail::ensure_out_dir(cfg.out_dir);
  const Pipeline pipe = prepare_pipeline(cfg);
  const auto ckpt = load_required_checkpoint(cfg);

  const data::Dataset& subject =
      cfg.analysis.split == "novel" ? pipe.classes.novel : pipe.base_parts[2];
  subject.validate();

  std::vector<Vector> feature_rows;
  std::vector<std::size_t> labels;
  feature_rows.reserve(subject.size());
  for (const auto& s : subject.samples) {
    feature_rows.push_back(s.features);
    labels.push_back(s.label);
  }
  Rng rng(0);
  const auto enc =
      framework::encode_rng(ckpt.params, Matrix::from_rows(feature_rows), false, rng);
  const Matrix& embeddings = enc.embeddings;

  const double isotropy = metrics::isotropy_score(embeddings);

  std::size_t class_a = 0, class_b = 1;
  if (cfg.analysis.class_pair) {
    class_a = cfg.analysis.class_pair->first;
    class_b = cfg.analysis.class_pair->second;
    if (class_a >= subject.class_count || class_b >= subject.class_count)
      fail(ErrorKind::ConfigError, "analysis.class_pair out of range");
  } else {
    Rng pick(derive_seed(cfg.seed, "analysis_pair"));
    const auto chosen = pick.sample_without_replacement(subject.class_count, 2);
    class_a = chosen[0];
    class_b = chosen[1];
  }
  objectives::EmbeddingBatch batch;
  batch.embeddings = embeddings;
  batch.labels = labels;
  batch.view_of.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) batch.view_of[i] = i;
  const auto cosine = metrics::cosine_stats(batch, class_a, class_b, cfg.analysis.bins,
                                            cfg.analysis.max_pairs, cfg.seed);

  const Matrix projection = numerics::pca_project(embeddings, cfg.analysis.pca_dims);
  const fs::path proj_path = fs::path(cfg.out_dir) / "projection.csv";
  {
    auto out = detail::open_out(proj_path);
    out << "schema,index,label";
    for (std::size_t d = 0; d < cfg.analysis.pca_dims; ++d) out << ",pc" << d + 1;
    out << '\n';
    for (std::size_t i = 0; i < projection.rows(); ++i) {
      out << kProjectionSchema << ',' << i << ',' << labels[i];
      for (std::size_t d = 0; d < projection.cols(); ++d)
        out << ',' << numerics::format_full(projection(i, d));
      out << '\n';
    }
  }
  const fs::path hist_path = fs::path(cfg.out_dir) / "cosine_hist.csv";
  {
    auto out = detail::open_out(hist_path);
    out << "schema,bin_lo,bin_hi,positive,negative\n";
    for (std::size_t b = 0; b < cfg.analysis.bins; ++b)
      out << kCosineHistSchema << ',' << numerics::format_full(cosine.bin_edges[b]) << ','
          << numerics::format_full(cosine.bin_edges[b + 1]) << ','
          << numerics::format_full(cosine.positive_hist[b]) << ','
          << numerics::format_full(cosine.negative_hist[b]) << '\n';
  }

  json summary{{"schema", kAnalysisSchema},
               {"checkpoint", cfg.checkpoint},
               {"split", cfg.analysis.split},
               {"embeddings", embeddings.rows()},
               {"isotropy_score", isotropy},
               {"cosine",
                {{"class_a", class_a},
                 {"class_b", class_b},
                 {"bins", cfg.analysis.bins},
                 {"overlap", cosine.overlap},
                 {"positive_mean", cosine.positive_mean},
                 {"negative_mean", cosine.negative_mean}}}};
  const fs::path summary_path = fs::path(cfg.out_dir) / "analysis.json";
  {
    auto out = detail::open_out(summary_path);
    out << summary.dump(1) << '\n';
  }

  std::cout << "analyze: isotropy " << detail::fmt6(isotropy) << ", cosine overlap "
            << detail::fmt6(cosine.overlap) << " (classes " << class_a << "/" << class_b << ", "
            << embeddings.rows() << " embeddings)\n";

  Manifest m;
  m.command = "analyze";
  m.config_document = rc.document;
  m.seeds = {{"master", cfg.seed}};
  m.metrics = {{"isotropy_score", isotropy},
               {"cosine_overlap", cosine.overlap},
               {"cosine_positive_mean", cosine.positive_mean},
               {"cosine_negative_mean", cosine.negative_mean},
               {"class_a", class_a},
               {"class_b", class_b},
               {"embeddings", embeddings.rows()}};
  m.outputs = {{"analysis_json", summary_path.string()},
               {"projection_csv", proj_path.string()},
               {"cosine_hist_csv", hist_path.string()}};
  m.wall_seconds = clock.seconds();
  write_manifest(m, fs::path(cfg.out_dir) / "manifest.json");
  return m;
}

}  // namespace schane::cli
