// schane CLI: dataset generation, pretraining, few-shot evaluation, lambda
// sweeps, the objective ablation and embedding analysis. Every command
// writes a manifest.json that can be fed back via --config to repeat the run.
#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "schane/commands.hpp"

namespace {

struct FlagState {
  schane::cli::ConfigOverlays overlays;
  std::string preset;
  std::string config_path;
};

// Every flag maps onto its config-document key; flags beat the file, the
// file beats the preset.
void add_common_flags(CLI::App* cmd, FlagState& st) {
  auto& doc = st.overlays.flag_overrides;
  cmd->add_option_function<std::string>(
         "--config", [&st](const std::string& v) { st.config_path = v; }, "Config or manifest JSON");
  cmd->add_option_function<std::string>(
         "--preset", [&st](const std::string& v) { st.preset = v; },
         "Named preset (synthetic-fewshot)");
  cmd->add_option_function<std::uint64_t>(
         "--seed", [&doc](std::uint64_t v) { doc["seed"] = v; }, "Master seed");
  cmd->add_option_function<std::string>(
         "--out", [&doc](const std::string& v) { doc["out"] = v; }, "Output directory");
  cmd->add_option_function<std::size_t>(
         "--threads", [&doc](std::size_t v) { doc["threads"] = v; }, "Episode evaluation threads");
  cmd->add_option_function<std::string>(
         "--checkpoint", [&doc](const std::string& v) { doc["checkpoint"] = v; },
         "Input checkpoint path");
  cmd->add_option_function<std::string>(
         "--objective", [&doc](const std::string& v) { doc["objective"]["kind"] = v; },
         "Objective: ce, ce+simclr, ce+supcon, ce+schane, all");
  cmd->add_option_function<double>(
         "--tau", [&doc](double v) { doc["objective"]["tau"] = v; }, "Contrastive temperature");
  cmd->add_option_function<double>(
         "--lambda", [&doc](double v) { doc["objective"]["lambda"] = v; }, "CE/contrastive mix");
  cmd->add_option_function<std::size_t>(
         "--epochs", [&doc](std::size_t v) { doc["train"]["epochs"] = v; }, "Training epochs");
  cmd->add_option_function<std::size_t>(
         "--batch-size", [&doc](std::size_t v) { doc["train"]["batch_size"] = v; }, "Batch size");
  cmd->add_option_function<double>(
         "--lr", [&doc](double v) { doc["train"]["learning_rate"] = v; }, "Learning rate");
  cmd->add_option_function<double>(
         "--weight-decay", [&doc](double v) { doc["train"]["weight_decay"] = v; }, "Weight decay");
  cmd->add_option_function<double>(
         "--dropout", [&doc](double v) { doc["model"]["dropout"] = v; }, "Dropout rate");
  cmd->add_option_function<std::size_t>(
         "--finetune-epochs", [&doc](std::size_t v) { doc["finetune"]["epochs"] = v; },
         "Objective fine-tune epochs before episodes");
  cmd->add_option_function<std::size_t>(
         "--way", [&doc](std::size_t v) { doc["fewshot"]["way"] = v; }, "Episode way");
  cmd->add_option_function<std::size_t>(
         "--shot", [&doc](std::size_t v) { doc["fewshot"]["shot"] = v; }, "Support shots per class");
  cmd->add_option_function<std::size_t>(
         "--query-shot", [&doc](std::size_t v) { doc["fewshot"]["query_shot"] = v; },
         "Query shots per class");
  cmd->add_option_function<std::size_t>(
         "--episodes", [&doc](std::size_t v) { doc["fewshot"]["episodes"] = v; }, "Episode count");
  cmd->add_option_function<std::string>(
         "--csv", [&doc](const std::string& v) {
           doc["dataset"]["kind"] = "csv";
           doc["dataset"]["path"] = v;
         },
         "Load dataset from CSV");
  cmd->add_option_function<std::vector<std::string>>(
         "--idx", [&doc](const std::vector<std::string>& v) {
           doc["dataset"]["kind"] = "idx";
           doc["dataset"]["images"] = v.at(0);
           doc["dataset"]["labels"] = v.at(1);
         },
         "Load dataset from IDX files: IMAGES LABELS")
      ->expected(2);
  cmd->add_option_function<std::size_t>(
         "--classes", [&doc](std::size_t v) { doc["dataset"]["classes"] = v; },
         "Synthetic class count");
  cmd->add_option_function<std::size_t>(
         "--dim", [&doc](std::size_t v) { doc["dataset"]["dim"] = v; }, "Synthetic feature dim");
  cmd->add_option_function<std::size_t>(
         "--per-class", [&doc](std::size_t v) { doc["dataset"]["per_class"] = v; },
         "Synthetic samples per class");
  cmd->add_option_function<double>(
         "--noise-sigma", [&doc](double v) { doc["dataset"]["noise_sigma"] = v; },
         "Synthetic within-class sigma");
  cmd->add_option_function<double>(
         "--base-fraction", [&doc](double v) { doc["base_fraction"] = v; },
         "Fraction of classes in the base split");
  cmd->add_option_function<std::string>(
         "--init-from", [&doc](const std::string& v) { doc["init_from"] = v; },
         "Resume pretraining from a checkpoint");
  cmd->add_option_function<std::string>(
         "--analysis-split", [&doc](const std::string& v) { doc["analysis"]["split"] = v; },
         "Analysis subject: base_test or novel");
}

schane::cli::ResolvedConfig resolve(FlagState& st) {
  if (!st.preset.empty()) st.overlays.preset = st.preset;
  if (!st.config_path.empty()) st.overlays.config_file = st.config_path;
  return schane::cli::resolve_config(st.overlays);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Supervised contrastive fine-tuning with hard-negative weighting"};
  app.require_subcommand(1);
  app.set_version_flag("--version", schane::cli::kToolVersion);

  FlagState st;
  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset CSV");
  auto* pretrain = app.add_subcommand("pretrain", "Cross-entropy pretraining on base classes");
  auto* fewshot = app.add_subcommand("fewshot", "Objective fine-tune + episodic evaluation");
  auto* sweep = app.add_subcommand("sweep-lambda", "Few-shot accuracy across the lambda grid");
  auto* ablation = app.add_subcommand("ablation", "CE / CE+SimCLR / CE+SupCon / CE+SCHaNe battery");
  auto* analyze = app.add_subcommand("analyze", "Isotropy, cosine histograms and PCA projection");
  for (auto* cmd : {generate, pretrain, fewshot, sweep, ablation, analyze})
    add_common_flags(cmd, st);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 2;
  }

  try {
    const auto rc = resolve(st);
    if (generate->parsed()) schane::cli::cmd_generate(rc);
    if (pretrain->parsed()) schane::cli::cmd_pretrain(rc);
    if (fewshot->parsed()) schane::cli::cmd_fewshot(rc);
    if (sweep->parsed()) schane::cli::cmd_sweep_lambda(rc);
    if (ablation->parsed()) schane::cli::cmd_ablation(rc);
    if (analyze->parsed()) schane::cli::cmd_analyze(rc);
    return 0;
  } catch (const schane::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
