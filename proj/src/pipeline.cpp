#include "uinvase/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "uinvase/checkpoint.hpp"
#include "uinvase/errors.hpp"
#include "uinvase/model_io.hpp"

namespace uinvase::pipeline {

using nlohmann::json;

namespace {

constexpr eval::Metric kMetrics[] = {eval::Metric::kBias, eval::Metric::kAucRoc,
                                     eval::Metric::kAucPr};

std::size_t metric_slot(eval::Metric metric) {
  switch (metric) {
    case eval::Metric::kBias:
      return 0;
    case eval::Metric::kAucRoc:
      return 1;
    case eval::Metric::kAucPr:
      return 2;
  }
  return 0;
}

void report(const ProgressFn& progress, const std::string& message) {
  if (progress) progress(message);
}

}  // namespace

void RunConfig::validate() const {
  training.validate();
  if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0)) {
    throw ConfigError("split.train_fraction must lie in (0, 1)");
  }
  if (split.resample_count == 0) throw ConfigError("split.resample_count must be positive");
  if (name.empty()) throw ConfigError("name must not be empty");
  if (strategies.empty()) throw ConfigError("at least one strategy is required");
  if (rates.empty() || rates.front() != 0.0) throw ConfigError("rates must start at 0");
  for (std::size_t k = 0; k < rates.size(); ++k) {
    if (!(rates[k] >= 0.0 && rates[k] <= 1.0) || (k > 0 && rates[k] <= rates[k - 1])) {
      throw ConfigError("rates must be strictly increasing within [0, 1]");
    }
  }
  if (random_shuffles == 0) throw ConfigError("random_shuffles must be positive");
  if (ablation_seeds == 0) throw ConfigError("ablation_seeds must be positive");
  for (double w : ablation_omegas) {
    if (!(w >= 0.0)) throw ConfigError("ablation omegas must be non-negative");
  }
}

RunConfig run_config_from_json(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig c;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "dataset") {
        c.dataset = value.get<std::string>();
        if (c.dataset.is_relative() && !base_dir.empty()) c.dataset = base_dir / c.dataset;
      } else if (key == "name") {
        c.name = value.get<std::string>();
      } else if (key == "out") {
        c.out = value.get<std::string>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "split") {
        for (const auto& [k, v] : value.items()) {
          if (k == "train_fraction") c.split.train_fraction = v.get<double>();
          else if (k == "resample_count") c.split.resample_count = v.get<std::size_t>();
          else throw ConfigError(fmt::format("unknown key 'split.{}'", k));
        }
      } else if (key == "training") {
        if (value.contains("seed")) {
          throw ConfigError("'training.seed' is not accepted; set the top-level 'seed'");
        }
        c.training = invase::config_from_json(value);
      } else if (key == "strategies") {
        c.strategies.clear();
        for (const auto& s : value) c.strategies.push_back(eval::strategy_from_string(s.get<std::string>()));
      } else if (key == "rates") {
        c.rates = value.get<std::vector<double>>();
      } else if (key == "figure_features") {
        c.figure_features = value.get<std::vector<std::string>>();
      } else if (key == "random_shuffles") {
        c.random_shuffles = value.get<std::size_t>();
      } else if (key == "ablation_seeds") {
        c.ablation_seeds = value.get<std::size_t>();
      } else if (key == "ablation_omegas") {
        c.ablation_omegas = value.get<std::vector<double>>();
      } else if (key == "json_exports") {
        c.json_exports = value.get<bool>();
      } else {
        throw ConfigError(fmt::format("unknown config key '{}'", key));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("run config: {}", e.what()));
  }
  c.split.seed = c.seed;
  c.validate();
  return c;
}

json run_config_to_json(const RunConfig& c) {
  json training = invase::config_to_json(c.training);
  training.erase("seed");
  json strategies = json::array();
  for (auto s : c.strategies) strategies.push_back(std::string(eval::to_string(s)));
  return {{"dataset", c.dataset.string()},
          {"name", c.name},
          {"out", c.out.string()},
          {"seed", c.seed},
          {"split",
           {{"train_fraction", c.split.train_fraction},
            {"resample_count", c.split.resample_count}}},
          {"training", std::move(training)},
          {"strategies", std::move(strategies)},
          {"rates", c.rates},
          {"figure_features", c.figure_features},
          {"random_shuffles", c.random_shuffles},
          {"ablation_seeds", c.ablation_seeds},
          {"ablation_omegas", c.ablation_omegas},
          {"json_exports", c.json_exports}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config {}", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return run_config_from_json(doc, path.parent_path());
}

std::filesystem::path RunLayout::checkpoint(std::size_t resample) const {
  return checkpoints() / fmt::format("resample_{:02}.json", resample);
}

std::filesystem::path RunLayout::history_csv(std::size_t resample) const {
  return history() / fmt::format("resample_{:02}.csv", resample);
}

RunLayout layout_for(const RunConfig& config) { return {config.out / config.name}; }

PreparedResample prepare_resample(const data::LabeledDataset& dataset,
                                  const RunConfig& config, std::size_t index) {
  data::SplitSpec spec = config.split;
  spec.seed = config.seed;
  PreparedResample prepared;
  prepared.index = index;
  prepared.split = data::resample(dataset, spec, index);
  prepared.standardized = data::standardize(prepared.split.train, prepared.split.test);
  return prepared;
}

invase::TrainingConfig training_config_for(const RunConfig& config, std::size_t index) {
  invase::TrainingConfig t = config.training;
  t.seed = derive_seed(config.seed, 1000 + index);
  return t;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << text;
}

std::vector<invase::TrainedModel> run_train(const RunConfig& config,
                                            const data::LabeledDataset& dataset,
                                            const ProgressFn& progress) {
  config.validate();
  const auto layout = layout_for(config);
  for (const auto& dir : {layout.checkpoints(), layout.history(), layout.tables(),
                          layout.curves(), layout.figures()}) {
    std::filesystem::create_directories(dir);
  }
  nn::write_json_file(run_config_to_json(config), layout.root / "config.json");
  std::vector<invase::TrainedModel> models;
  for (std::size_t r = 0; r < config.split.resample_count; ++r) {
    const auto prepared = prepare_resample(dataset, config, r);
    try {
      models.push_back(invase::train(prepared.standardized.train, training_config_for(config, r)));
    } catch (const invase::TrainingDivergence& e) {
      invase::save_model(e.last_good(), layout.checkpoints() /
                                            fmt::format("resample_{:02}.last_good.json", r));
      throw TrainingError(fmt::format("resample {}: {}", r, e.what()));
    }
    invase::save_model(models.back(), layout.checkpoint(r));
    nn::write_json_file(data::split_membership_json(prepared.split, r),
                        layout.checkpoints() / fmt::format("split_{:02}.json", r));
    write_text_file(layout.history_csv(r), invase::history_csv(models.back().history));
    report(progress, fmt::format("trained resample {}/{}", r + 1, config.split.resample_count));
  }
  return models;
}

const eval::QueryCurve& EvaluationReport::curve(eval::Metric metric,
                                                eval::Strategy strategy) const {
  for (const auto& c : curves.at(metric_slot(metric))) {
    if (c.strategy == strategy) return c;
  }
  throw UsageError(fmt::format("no {} curve for strategy {}", eval::to_string(metric),
                               eval::to_string(strategy)));
}

eval::PredictionSet predict_resample(const invase::TrainedModel& model,
                                     const PreparedResample& prepared) {
  const auto& test = prepared.standardized.test;
  return eval::make_prediction_set(invase::predict(model, test.features), test.labels,
                                   prepared.index);
}

EvaluationReport evaluate_predsets(std::vector<eval::PredictionSet> predsets,
                                   const RunConfig& config) {
  EvaluationReport rep;
  rep.predsets = std::move(predsets);
  std::vector<double> columns;
  for (double rate : eval::table_rates()) {
    if (std::any_of(config.rates.begin(), config.rates.end(),
                    [&](double r) { return std::abs(r - rate) < 1e-12; })) {
      columns.push_back(rate);
    }
  }
  if (config.rates.back() == 1.0) columns.push_back(1.0);

  rep.curves.resize(3);
  for (auto metric : kMetrics) {
    for (std::size_t s = 0; s < config.strategies.size(); ++s) {
      rep.curves[metric_slot(metric)].push_back(
          eval::strategy_curve(config.strategies[s], metric, rep.predsets, config.rates,
                               config.random_shuffles, derive_seed(config.seed, 77)));
    }
  }
  rep.bias_table = eval::gain_table(rep.curves[0], columns);
  rep.roc_table = eval::gain_table(rep.curves[1], columns);
  rep.pr_table = eval::gain_table(rep.curves[2], columns);
  rep.baseline_bias = rep.curves[0].front().mean.front();
  rep.baseline_auc_roc = rep.curves[1].front().mean.front();
  rep.baseline_auc_pr = rep.curves[2].front().mean.front();
  return rep;
}

EvaluationReport run_evaluate(const RunConfig& config, const data::LabeledDataset& dataset) {
  config.validate();
  const auto layout = layout_for(config);
  std::vector<eval::PredictionSet> predsets;
  for (std::size_t r = 0; r < config.split.resample_count; ++r) {
    const auto path = layout.checkpoint(r);
    if (!std::filesystem::exists(path)) {
      throw MissingArtifactError(fmt::format("missing checkpoint {}", path.string()));
    }
    const auto model = invase::load_model(path);
    if (model.dim() != dataset.dim()) {
      throw ConfigError(fmt::format("checkpoint {} expects {} features, dataset has {}",
                                    path.string(), model.dim(), dataset.dim()));
    }
    predsets.push_back(predict_resample(model, prepare_resample(dataset, config, r)));
  }
  auto rep = evaluate_predsets(std::move(predsets), config);
  write_evaluation(rep, config);
  return rep;
}

void write_evaluation(const EvaluationReport& rep, const RunConfig& config) {
  const auto layout = layout_for(config);
  write_text_file(layout.tables() / "auc_roc_gain.csv", eval::gain_table_csv(rep.roc_table));
  write_text_file(layout.tables() / "auc_pr_gain.csv", eval::gain_table_csv(rep.pr_table));
  write_text_file(layout.tables() / "bias_gain.csv", eval::gain_table_csv(rep.bias_table));
  for (auto metric : kMetrics) {
    const auto& curves = rep.curves[metric_slot(metric)];
    write_text_file(layout.curves() / fmt::format("{}.csv", eval::to_string(metric)),
                    eval::curves_csv(curves));
    if (config.json_exports) {
      nn::write_json_file(eval::curves_json(curves),
                          layout.curves() / fmt::format("{}.json", eval::to_string(metric)));
    }
  }
  const json summary = {{"resamples", rep.predsets.size()},
                        {"baseline_auc_roc", rep.baseline_auc_roc},
                        {"baseline_auc_pr", rep.baseline_auc_pr},
                        {"baseline_bias", rep.baseline_bias}};
  nn::write_json_file(summary, layout.tables() / "summary.json");
  if (config.json_exports) {
    nn::write_json_file(eval::gain_table_json(rep.roc_table), layout.tables() / "auc_roc_gain.json");
    nn::write_json_file(eval::gain_table_json(rep.pr_table), layout.tables() / "auc_pr_gain.json");
    nn::write_json_file(eval::gain_table_json(rep.bias_table), layout.tables() / "bias_gain.json");
  }
}

AblationReport run_ablation(const RunConfig& config, const data::LabeledDataset& dataset,
                            const ProgressFn& progress) {
  config.validate();
  AblationReport rep;
  rep.mean_correlation.assign(config.ablation_omegas.size(), 0.0);
  for (std::size_t k = 0; k < config.ablation_seeds; ++k) {
    const auto prepared = prepare_resample(dataset, config, k % config.split.resample_count);
    invase::TrainingConfig base = config.training;
    base.seed = derive_seed(config.seed, 5000 + k);
    base.uncertainty_enabled = true;
    for (std::size_t w = 0; w < config.ablation_omegas.size(); ++w) {
      invase::TrainingConfig t = base;
      t.omega = config.ablation_omegas[w];
      invase::TrainedModel model;
      try {
        model = invase::train(prepared.standardized.train, t);
      } catch (const invase::TrainingDivergence& e) {
        throw TrainingError(fmt::format("ablation seed {} omega {}: {}", k, t.omega, e.what()));
      }
      AblationRun run;
      run.seed_index = k;
      run.omega = t.omega;
      run.rows = eval::bias_vs_logvar_export(model, prepared.standardized.test);
      run.correlation = eval::logvar_bias_correlation(run.rows);
      rep.mean_correlation[w] += run.correlation / static_cast<double>(config.ablation_seeds);
      report(progress, fmt::format("ablation seed {} omega {}: correlation {:.4f}", k, t.omega,
                                   run.correlation));
      rep.runs.push_back(std::move(run));
    }
  }
  return rep;
}

void write_ablation(const AblationReport& rep, const RunConfig& config) {
  const auto layout = layout_for(config);
  std::string summary = "seed,omega,correlation,test_size\n";
  for (const auto& run : rep.runs) {
    write_text_file(layout.figures() /
                        fmt::format("bias_vs_logvar_seed{}_omega{}.csv", run.seed_index, run.omega),
                    eval::bias_logvar_csv(run.rows));
    summary += fmt::format("{},{},{},{}\n", run.seed_index, run.omega, run.correlation,
                           run.rows.size());
  }
  for (std::size_t w = 0; w < config.ablation_omegas.size(); ++w) {
    summary += fmt::format("mean,{},{},\n", config.ablation_omegas[w], rep.mean_correlation[w]);
  }
  write_text_file(layout.tables() / "ablation_correlation.csv", summary);
  nn::write_json_file({{"omegas", config.ablation_omegas},
                       {"seeds", config.ablation_seeds},
                       {"mean_correlation", rep.mean_correlation}},
                      layout.tables() / "ablation.json");
}

std::vector<std::size_t> resolve_features(const data::LabeledDataset& dataset,
                                          const std::vector<std::string>& names) {
  std::vector<std::size_t> out;
  for (const auto& name : names) {
    const auto it = std::find(dataset.feature_names.begin(), dataset.feature_names.end(), name);
    if (it == dataset.feature_names.end()) {
      std::string valid;
      for (const auto& n : dataset.feature_names) valid += fmt::format("\n  {}", n);
      throw ConfigError(fmt::format("unknown feature '{}'; valid names ({}):{}", name,
                                    dataset.feature_names.size(), valid));
    }
    out.push_back(static_cast<std::size_t>(it - dataset.feature_names.begin()));
  }
  return out;
}

std::string file_slug(std::string_view name) {
  std::string slug;
  for (char ch : name) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      slug += static_cast<char>(std::tolower(c));
    } else if (!slug.empty() && slug.back() != '_') {
      slug += '_';
    }
  }
  while (!slug.empty() && slug.back() == '_') slug.pop_back();
  return slug;
}

std::vector<std::filesystem::path> run_export_figures(const RunConfig& config,
                                                      const data::LabeledDataset& dataset) {
  config.validate();
  const auto features = resolve_features(dataset, config.figure_features);
  const auto layout = layout_for(config);
  const auto path = layout.checkpoint(0);
  if (!std::filesystem::exists(path)) {
    throw MissingArtifactError(fmt::format("missing checkpoint {}", path.string()));
  }
  const auto model = invase::load_model(path);
  if (model.dim() != dataset.dim()) {
    throw ConfigError(fmt::format("checkpoint {} expects {} features, dataset has {}",
                                  path.string(), model.dim(), dataset.dim()));
  }
  const auto prepared = prepare_resample(dataset, config, 0);
  std::vector<std::filesystem::path> written;
  for (std::size_t f : features) {
    const auto band = eval::uncertainty_band_export(model, prepared.split.test,
                                                    prepared.split.train,
                                                    prepared.standardized.scaler, f);
    const auto out = layout.figures() / fmt::format("band_{}.csv", file_slug(band.feature_name));
    write_text_file(out, eval::band_csv(band));
    written.push_back(out);
  }
  return written;
}

}  // namespace uinvase::pipeline
