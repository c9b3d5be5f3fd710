// Run configuration: JSON schema, defaults, the pinned synthetic-fewshot
// preset, strict unknown-key rejection and flag overrides.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "schane/error.hpp"
#include "schane/framework.hpp"
#include "schane/metrics.hpp"
#include "schane/objectives.hpp"

namespace schane::cli {

using nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

enum class DatasetKind { Synthetic, Csv, Idx };

struct DatasetSource {
  DatasetKind kind = DatasetKind::Synthetic;
  data::SyntheticSpec synthetic;
  std::string csv_path;
  std::string idx_images;
  std::string idx_labels;
};

struct AnalysisConfig {
  std::size_t bins = 40;
  std::size_t pca_dims = 2;
  std::size_t max_pairs = 0;                    // 0 = all pairs
  std::optional<std::pair<std::size_t, std::size_t>> class_pair;
  std::string split = "base_test";              // base_test | novel
};

struct RunConfig {
  DatasetSource dataset;
  data::SplitFractions split;
  double base_fraction = 0.5;

  objectives::ObjectiveConfig objective;  // kind parsed from the config string
  std::string objective_name = "ce+schane";

  std::vector<std::size_t> hidden_dims{128};
  std::size_t embedding_dim = 64;
  double dropout = 0.1;

  framework::TrainConfig train;       // pretrain stage
  std::size_t finetune_epochs = 30;   // objective stage before episodes
  double finetune_learning_rate = 1e-4;
  double finetune_weight_decay = 0.05;

  metrics::FewshotOptions fewshot;
  std::vector<double> lambda_grid{0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
  AnalysisConfig analysis;

  std::string checkpoint;  // input checkpoint (fewshot/sweep/ablation/analyze)
  std::string init_from;   // optional resume source for pretrain
  std::uint64_t seed = 42;
  std::string out_dir = "runs/out";
  std::size_t threads = 1;
};

// ---- objective names ------------------------------------------------------------

inline objectives::ObjectiveConfig parse_objective(const std::string& name, double tau,
                                                   double lambda, bool classic_denominator,
                                                   bool stop_grad_beta) {
  objectives::ObjectiveConfig obj;
  obj.tau = tau;
  obj.lambda = lambda;
  obj.classic_denominator = classic_denominator;
  obj.stop_grad_beta = stop_grad_beta;
  if (name == "ce") {
    obj.kind = objectives::ObjectiveKind::CE;
  } else if (name == "ce+simclr" || name == "simclr") {
    obj.kind = objectives::ObjectiveKind::Combined;
    obj.contrastive = objectives::ContrastiveKind::SimCLR;
  } else if (name == "ce+supcon" || name == "supcon") {
    obj.kind = objectives::ObjectiveKind::Combined;
    obj.contrastive = objectives::ContrastiveKind::SupCon;
  } else if (name == "ce+schane" || name == "schane") {
    obj.kind = objectives::ObjectiveKind::Combined;
    obj.contrastive = objectives::ContrastiveKind::SCHaNe;
  } else {
    fail(ErrorKind::ConfigError, "unknown objective '" + name + "'");
  }
  obj.validate();
  return obj;
}

inline std::string canonical_objective_name(const std::string& name) {
  if (name == "simclr") return "ce+simclr";
  if (name == "supcon") return "ce+supcon";
  if (name == "schane") return "ce+schane";
  return name;
}

// ---- defaults and preset -----------------------------------------------------------

inline json default_config_json() {
  return json{
      {"dataset",
       {{"kind", "synthetic"},
        {"classes", 20},
        {"dim", 64},
        {"per_class", 100},
        {"mean_radius", 4.0},
        {"noise_sigma", 1.0},
        {"seed", 1},
        {"path", ""},
        {"images", ""},
        {"labels", ""}}},
      {"split", {{"train", 0.8}, {"val", 0.1}, {"test", 0.1}}},
      {"base_fraction", 0.5},
      {"objective",
       {{"kind", "ce+schane"},
        {"tau", 0.5},
        {"lambda", 0.9},
        {"classic_denominator", false},
        {"stop_grad_beta", false}}},
      {"model", {{"hidden", json::array({128})}, {"embedding_dim", 64}, {"dropout", 0.1}}},
      {"train",
       {{"epochs", 30}, {"batch_size", 128}, {"learning_rate", 1e-4}, {"weight_decay", 0.05}}},
      {"finetune", {{"epochs", 30}, {"learning_rate", 1e-4}, {"weight_decay", 0.05}}},
      {"augment",
       {{"noise_sigma", 0.5}, {"scale_jitter", json::array({0.9, 1.1})}, {"mask_fraction", 0.05}}},
      {"fewshot",
       {{"way", 5},
        {"shot", 1},
        {"query_shot", 15},
        {"episodes", 200},
        {"ft_steps", 20},
        {"ft_learning_rate", 0.01},
        {"ft_weight_decay", 0.05}}},
      {"lambda_grid", json::array({0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0})},
      {"analysis",
       {{"bins", 40},
        {"pca_dims", 2},
        {"max_pairs", 0},
        {"class_pair", nullptr},
        {"split", "base_test"}}},
      {"checkpoint", ""},
      {"init_from", ""},
      {"seed", 42},
      {"out", "runs/out"},
      {"threads", 1},
  };
}

// Every parameter the acceptance benchmark depends on, pinned.
inline json preset_synthetic_fewshot() {
  return json{
      {"dataset",
       {{"kind", "synthetic"},
        {"classes", 20},
        {"dim", 64},
        {"per_class", 100},
        {"mean_radius", 4.0},
        {"noise_sigma", 1.0},
        {"seed", 1}}},
      {"split", {{"train", 0.8}, {"val", 0.1}, {"test", 0.1}}},
      {"base_fraction", 0.5},
      {"objective", {{"kind", "ce+schane"}, {"tau", 0.5}, {"lambda", 0.9}}},
      {"model", {{"hidden", json::array({128})}, {"embedding_dim", 64}, {"dropout", 0.1}}},
      {"train",
       {{"epochs", 30}, {"batch_size", 128}, {"learning_rate", 1e-3}, {"weight_decay", 0.05}}},
      {"finetune", {{"epochs", 30}, {"learning_rate", 1e-3}, {"weight_decay", 0.05}}},
      {"augment",
       {{"noise_sigma", 0.5}, {"scale_jitter", json::array({0.9, 1.1})}, {"mask_fraction", 0.05}}},
      {"fewshot",
       {{"way", 5},
        {"shot", 1},
        {"query_shot", 15},
        {"episodes", 200},
        {"ft_steps", 20},
        {"ft_learning_rate", 0.01},
        {"ft_weight_decay", 0.05}}},
      {"seed", 42},
  };
}

inline json named_preset(const std::string& name) {
  if (name == "synthetic-fewshot") return preset_synthetic_fewshot();
  fail(ErrorKind::ConfigError, "unknown preset '" + name + "'");
}

// ---- schema validation ----------------------------------------------------------------

namespace detail {

// Rejects any key that does not exist in the defaults document (which
// enumerates the full schema). Arrays are value-level, not schema-level.
inline void reject_unknown_keys(const json& doc, const json& schema, const std::string& prefix) {
  if (!doc.is_object()) return;
  if (!schema.is_object())
    fail(ErrorKind::ConfigError, "unexpected object at config key '" + prefix + "'");
  for (const auto& [key, value] : doc.items()) {
    if (!schema.contains(key))
      fail(ErrorKind::ConfigError,
           "unknown config key '" + (prefix.empty() ? key : prefix + "." + key) + "'");
    if (value.is_object()) reject_unknown_keys(value, schema.at(key), prefix.empty() ? key : prefix + "." + key);
  }
}

inline void deep_merge(json& base, const json& overlay) {
  if (!overlay.is_object()) {
    base = overlay;
    return;
  }
  if (!base.is_object()) base = json::object();
  for (const auto& [key, value] : overlay.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object()) {
      deep_merge(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

template <typename T>
inline T get_checked(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::ConfigError, "bad value for config key '" + where + "'");
  }
}

}  // namespace detail

// Merged document -> typed RunConfig, with validation.
inline RunConfig config_from_json(const json& merged) {
  RunConfig cfg;
  const auto& d = merged.at("dataset");
  const std::string kind = detail::get_checked<std::string>(d, "kind", "dataset.kind");
  if (kind == "synthetic") {
    cfg.dataset.kind = DatasetKind::Synthetic;
  } else if (kind == "csv") {
    cfg.dataset.kind = DatasetKind::Csv;
  } else if (kind == "idx") {
    cfg.dataset.kind = DatasetKind::Idx;
  } else {
    fail(ErrorKind::ConfigError, "dataset.kind must be synthetic|csv|idx");
  }
  cfg.dataset.synthetic.class_count = detail::get_checked<std::size_t>(d, "classes", "dataset.classes");
  cfg.dataset.synthetic.feature_dim = detail::get_checked<std::size_t>(d, "dim", "dataset.dim");
  cfg.dataset.synthetic.samples_per_class =
      detail::get_checked<std::size_t>(d, "per_class", "dataset.per_class");
  cfg.dataset.synthetic.mean_radius = detail::get_checked<double>(d, "mean_radius", "dataset.mean_radius");
  cfg.dataset.synthetic.noise_sigma = detail::get_checked<double>(d, "noise_sigma", "dataset.noise_sigma");
  cfg.dataset.synthetic.seed = detail::get_checked<std::uint64_t>(d, "seed", "dataset.seed");
  if (d.contains("path")) cfg.dataset.csv_path = detail::get_checked<std::string>(d, "path", "dataset.path");
  if (d.contains("images"))
    cfg.dataset.idx_images = detail::get_checked<std::string>(d, "images", "dataset.images");
  if (d.contains("labels"))
    cfg.dataset.idx_labels = detail::get_checked<std::string>(d, "labels", "dataset.labels");
  if (cfg.dataset.kind == DatasetKind::Csv && cfg.dataset.csv_path.empty())
    fail(ErrorKind::ConfigError, "dataset.path required for csv datasets");
  if (cfg.dataset.kind == DatasetKind::Idx &&
      (cfg.dataset.idx_images.empty() || cfg.dataset.idx_labels.empty()))
    fail(ErrorKind::ConfigError, "dataset.images and dataset.labels required for idx datasets");

  const auto& sp = merged.at("split");
  cfg.split.train = detail::get_checked<double>(sp, "train", "split.train");
  cfg.split.val = detail::get_checked<double>(sp, "val", "split.val");
  cfg.split.test = detail::get_checked<double>(sp, "test", "split.test");
  cfg.base_fraction = detail::get_checked<double>(merged, "base_fraction", "base_fraction");

  const auto& ob = merged.at("objective");
  cfg.objective_name =
      canonical_objective_name(detail::get_checked<std::string>(ob, "kind", "objective.kind"));
  // "all" expands to the four ablation objectives inside commands that
  // support it; the parsed config then carries the shared tau/lambda.
  cfg.objective = parse_objective(
      cfg.objective_name == "all" ? "ce+schane" : cfg.objective_name,
      detail::get_checked<double>(ob, "tau", "objective.tau"),
      detail::get_checked<double>(ob, "lambda", "objective.lambda"),
      detail::get_checked<bool>(ob, "classic_denominator", "objective.classic_denominator"),
      detail::get_checked<bool>(ob, "stop_grad_beta", "objective.stop_grad_beta"));

  const auto& mo = merged.at("model");
  cfg.hidden_dims = detail::get_checked<std::vector<std::size_t>>(mo, "hidden", "model.hidden");
  cfg.embedding_dim = detail::get_checked<std::size_t>(mo, "embedding_dim", "model.embedding_dim");
  cfg.dropout = detail::get_checked<double>(mo, "dropout", "model.dropout");
  if (cfg.embedding_dim < 2) fail(ErrorKind::ConfigError, "model.embedding_dim must be >= 2");

  const auto& tr = merged.at("train");
  cfg.train.epochs = detail::get_checked<std::size_t>(tr, "epochs", "train.epochs");
  cfg.train.batch_size = detail::get_checked<std::size_t>(tr, "batch_size", "train.batch_size");
  cfg.train.learning_rate = detail::get_checked<double>(tr, "learning_rate", "train.learning_rate");
  cfg.train.weight_decay = detail::get_checked<double>(tr, "weight_decay", "train.weight_decay");

  const auto& ft = merged.at("finetune");
  cfg.finetune_epochs = detail::get_checked<std::size_t>(ft, "epochs", "finetune.epochs");
  cfg.finetune_learning_rate =
      detail::get_checked<double>(ft, "learning_rate", "finetune.learning_rate");
  cfg.finetune_weight_decay =
      detail::get_checked<double>(ft, "weight_decay", "finetune.weight_decay");

  const auto& au = merged.at("augment");
  cfg.train.augment.noise_sigma = detail::get_checked<double>(au, "noise_sigma", "augment.noise_sigma");
  const auto jitter = detail::get_checked<std::vector<double>>(au, "scale_jitter", "augment.scale_jitter");
  if (jitter.size() != 2) fail(ErrorKind::ConfigError, "augment.scale_jitter must be [lo, hi]");
  cfg.train.augment.scale_jitter_lo = jitter[0];
  cfg.train.augment.scale_jitter_hi = jitter[1];
  cfg.train.augment.mask_fraction = detail::get_checked<double>(au, "mask_fraction", "augment.mask_fraction");
  cfg.train.augment.validate();

  const auto& fs = merged.at("fewshot");
  cfg.fewshot.way = detail::get_checked<std::size_t>(fs, "way", "fewshot.way");
  cfg.fewshot.shot = detail::get_checked<std::size_t>(fs, "shot", "fewshot.shot");
  cfg.fewshot.query_shot = detail::get_checked<std::size_t>(fs, "query_shot", "fewshot.query_shot");
  cfg.fewshot.episodes = detail::get_checked<std::size_t>(fs, "episodes", "fewshot.episodes");
  cfg.fewshot.ft_steps = detail::get_checked<std::size_t>(fs, "ft_steps", "fewshot.ft_steps");
  cfg.fewshot.ft_learning_rate =
      detail::get_checked<double>(fs, "ft_learning_rate", "fewshot.ft_learning_rate");
  cfg.fewshot.ft_weight_decay =
      detail::get_checked<double>(fs, "ft_weight_decay", "fewshot.ft_weight_decay");
  cfg.fewshot.augment = cfg.train.augment;

  cfg.lambda_grid = detail::get_checked<std::vector<double>>(merged, "lambda_grid", "lambda_grid");
  for (double l : cfg.lambda_grid)
    if (!(l >= 0.0 && l <= 1.0)) fail(ErrorKind::ConfigError, "lambda_grid values must be in [0,1]");
  if (cfg.lambda_grid.empty()) fail(ErrorKind::ConfigError, "lambda_grid must not be empty");

  const auto& an = merged.at("analysis");
  cfg.analysis.bins = detail::get_checked<std::size_t>(an, "bins", "analysis.bins");
  cfg.analysis.pca_dims = detail::get_checked<std::size_t>(an, "pca_dims", "analysis.pca_dims");
  cfg.analysis.max_pairs = detail::get_checked<std::size_t>(an, "max_pairs", "analysis.max_pairs");
  cfg.analysis.split = detail::get_checked<std::string>(an, "split", "analysis.split");
  if (cfg.analysis.split != "base_test" && cfg.analysis.split != "novel")
    fail(ErrorKind::ConfigError, "analysis.split must be base_test|novel");
  if (!an.at("class_pair").is_null()) {
    const auto pair = detail::get_checked<std::vector<std::size_t>>(an, "class_pair", "analysis.class_pair");
    if (pair.size() != 2) fail(ErrorKind::ConfigError, "analysis.class_pair must be [a, b]");
    cfg.analysis.class_pair = {pair[0], pair[1]};
  }

  cfg.checkpoint = detail::get_checked<std::string>(merged, "checkpoint", "checkpoint");
  cfg.init_from = detail::get_checked<std::string>(merged, "init_from", "init_from");
  cfg.seed = detail::get_checked<std::uint64_t>(merged, "seed", "seed");
  cfg.out_dir = detail::get_checked<std::string>(merged, "out", "out");
  cfg.threads = detail::get_checked<std::size_t>(merged, "threads", "threads");
  cfg.fewshot.threads = cfg.threads;
  if (cfg.threads < 1) fail(ErrorKind::ConfigError, "threads must be >= 1");
  return cfg;
}

// Load a config file; manifest files are accepted and contribute their
// embedded config, so any run can be repeated from its manifest.
inline json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, "config parse error: " + std::string(e.what()));
  }
  if (j.is_object() && j.contains("format") && j["format"] == "schane.manifest") {
    if (!j.contains("config")) fail(ErrorKind::ConfigError, "manifest has no config section");
    return j["config"];
  }
  return j;
}

struct ConfigOverlays {
  std::optional<std::string> preset;
  std::optional<std::filesystem::path> config_file;
  json flag_overrides = json::object();  // applied last
};

// defaults < preset < file < flags; the merged document is returned next to
// the typed config so manifests can embed the exact resolved configuration.
struct ResolvedConfig {
  RunConfig config;
  json document;
};

inline ResolvedConfig resolve_config(const ConfigOverlays& overlays) {
  json merged = default_config_json();
  const json schema = merged;
  if (overlays.preset) {
    const json preset = named_preset(*overlays.preset);
    detail::reject_unknown_keys(preset, schema, "");
    detail::deep_merge(merged, preset);
  }
  if (overlays.config_file) {
    const json file = load_config_file(*overlays.config_file);
    if (!file.is_object()) fail(ErrorKind::ConfigError, "config root must be a JSON object");
    detail::reject_unknown_keys(file, schema, "");
    detail::deep_merge(merged, file);
  }
  detail::reject_unknown_keys(overlays.flag_overrides, schema, "");
  detail::deep_merge(merged, overlays.flag_overrides);
  return {config_from_json(merged), merged};
}

}  // namespace schane::cli
