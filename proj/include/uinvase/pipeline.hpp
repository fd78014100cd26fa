#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "uinvase/data.hpp"
#include "uinvase/eval.hpp"
#include "uinvase/invase.hpp"

namespace uinvase::pipeline {

// Everything one reproduction run needs, loadable from a single JSON file.
// See README.md for the key list and defaults.
struct RunConfig {
  std::filesystem::path dataset = "data/wdbc.csv";
  std::string name = "default";
  std::filesystem::path out = "runs";
  std::uint64_t seed = 0;
  data::SplitSpec split;
  invase::TrainingConfig training;
  std::vector<eval::Strategy> strategies = {eval::Strategy::kOracle, eval::Strategy::kRandom,
                                            eval::Strategy::kUncertainty};
  std::vector<double> rates = eval::default_rates();
  std::vector<std::string> figure_features = {"worst radius", "perimeter error", "mean area",
                                              "smoothness error", "worst concavity"};
  std::size_t random_shuffles = 10;
  std::size_t ablation_seeds = 5;
  std::vector<double> ablation_omegas = {0.1, 0.0};
  bool json_exports = false;

  void validate() const;
};

// Unknown keys are rejected with ConfigError. Relative dataset paths are
// resolved against `base_dir` when given.
RunConfig run_config_from_json(const nlohmann::json& doc,
                               const std::filesystem::path& base_dir = {});
nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

// runs/<name>/{checkpoints,history,tables,curves,figures}
struct RunLayout {
  std::filesystem::path root;

  std::filesystem::path checkpoints() const { return root / "checkpoints"; }
  std::filesystem::path history() const { return root / "history"; }
  std::filesystem::path tables() const { return root / "tables"; }
  std::filesystem::path curves() const { return root / "curves"; }
  std::filesystem::path figures() const { return root / "figures"; }
  std::filesystem::path checkpoint(std::size_t resample) const;
  std::filesystem::path history_csv(std::size_t resample) const;
};

RunLayout layout_for(const RunConfig& config);

// One resample: raw split plus its standardized counterpart.
struct PreparedResample {
  std::size_t index = 0;
  data::Split split;
  data::StandardizedPair standardized;
};

PreparedResample prepare_resample(const data::LabeledDataset& dataset,
                                  const RunConfig& config, std::size_t index);

// Training settings for resample `index`: the run's TrainingConfig with a
// per-resample seed.
invase::TrainingConfig training_config_for(const RunConfig& config, std::size_t index);

using ProgressFn = std::function<void(std::string_view)>;

// Trains every resample and writes checkpoints, split audits and history
// CSVs. Throws TrainingError naming the resample on divergence.
std::vector<invase::TrainedModel> run_train(const RunConfig& config,
                                            const data::LabeledDataset& dataset,
                                            const ProgressFn& progress = {});

struct EvaluationReport {
  std::vector<eval::PredictionSet> predsets;
  // curves[metric] holds one curve per configured strategy
  std::vector<std::vector<eval::QueryCurve>> curves;
  eval::GainTable roc_table;
  eval::GainTable pr_table;
  eval::GainTable bias_table;
  double baseline_auc_roc = 0.0;
  double baseline_auc_pr = 0.0;
  double baseline_bias = 0.0;

  const eval::QueryCurve& curve(eval::Metric metric, eval::Strategy strategy) const;
};

// Query-rate curves and gain tables over already computed prediction sets.
EvaluationReport evaluate_predsets(std::vector<eval::PredictionSet> predsets,
                                   const RunConfig& config);

eval::PredictionSet predict_resample(const invase::TrainedModel& model,
                                     const PreparedResample& prepared);

// Loads the checkpoints written by run_train, evaluates them and writes the
// tables/ and curves/ files. Throws MissingArtifactError if a checkpoint is
// absent and ConfigError if its dimension does not match the dataset.
EvaluationReport run_evaluate(const RunConfig& config, const data::LabeledDataset& dataset);

void write_evaluation(const EvaluationReport& report, const RunConfig& config);

struct AblationRun {
  std::size_t seed_index = 0;
  double omega = 0.0;
  double correlation = 0.0;
  std::vector<eval::BiasLogvarRow> rows;
};

struct AblationReport {
  std::vector<AblationRun> runs;
  // mean correlation per entry of config.ablation_omegas
  std::vector<double> mean_correlation;
};

// Paired runs that differ only in omega, one pair per ablation seed.
AblationReport run_ablation(const RunConfig& config, const data::LabeledDataset& dataset,
                            const ProgressFn& progress = {});
void write_ablation(const AblationReport& report, const RunConfig& config);

// Resolves names against dataset.feature_names; ConfigError lists the valid
// names otherwise.
std::vector<std::size_t> resolve_features(const data::LabeledDataset& dataset,
                                          const std::vector<std::string>& names);

// Band CSVs for config.figure_features using the resample-0 checkpoint.
// Returns the written paths.
std::vector<std::filesystem::path> run_export_figures(const RunConfig& config,
                                                      const data::LabeledDataset& dataset);

std::string file_slug(std::string_view name);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace uinvase::pipeline
