#include "cli.hpp"

#include <optional>
#include <ostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "uinvase/data.hpp"
#include "uinvase/errors.hpp"
#include "uinvase/pipeline.hpp"

namespace uinvase::cli {

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> name;
  std::optional<std::string> dataset;
  std::optional<double> omega;
  std::optional<double> lambda;
  std::optional<double> weight_decay;
  std::optional<std::size_t> resamples;
  std::optional<std::size_t> iterations;
  bool no_uncertainty = false;
  bool json = false;
};

void add_common_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "Run configuration (JSON)");
  cmd->add_option("--seed", o.seed, "Master seed for splits and training");
  cmd->add_option("--out", o.out, "Output root directory (default: runs)");
  cmd->add_option("--name", o.name, "Run name; outputs go to <out>/<name>");
  cmd->add_option("--dataset", o.dataset, "WDBC CSV path");
  cmd->add_option("--omega", o.omega, "Uncertainty preference weight");
  cmd->add_option("--lambda", o.lambda, "Sparsity weight on the mask size");
  cmd->add_option("--weight-decay", o.weight_decay, "L2 penalty on network weights");
  cmd->add_option("--resamples", o.resamples, "Number of random train/test splits");
  cmd->add_option("--iterations", o.iterations, "Training iterations per model");
  cmd->add_flag("--no-uncertainty", o.no_uncertainty,
                "Vanilla mode: l2 predictor, frozen log-variance, omega = 0");
  cmd->add_flag("--json", o.json, "Also write JSON mirrors of tables and curves");
}

pipeline::RunConfig resolve_config(const Overrides& o) {
  pipeline::RunConfig c =
      o.config_path.empty() ? pipeline::RunConfig{} : pipeline::load_run_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out = *o.out;
  if (o.name) c.name = *o.name;
  if (o.dataset) c.dataset = *o.dataset;
  if (o.omega) c.training.omega = *o.omega;
  if (o.lambda) c.training.lambda = *o.lambda;
  if (o.weight_decay) c.training.weight_decay = *o.weight_decay;
  if (o.resamples) c.split.resample_count = *o.resamples;
  if (o.iterations) c.training.iterations = *o.iterations;
  if (o.no_uncertainty) c.training.uncertainty_enabled = false;
  if (o.json) c.json_exports = true;
  c.split.seed = c.seed;
  c.validate();
  return c;
}

void print_table(std::ostream& out, const std::string& title, const eval::GainTable& table) {
  fmt::print(out, "{} (baseline {:.2f}%)\n{}", title, table.baseline,
             eval::gain_table_csv(table));
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Uncertainty-aware instance-wise feature selection"};
  app.require_subcommand(1);
  Overrides o;
  auto* train = app.add_subcommand("train", "Train one model per resample");
  auto* evaluate = app.add_subcommand("evaluate", "Query-rate curves and gain tables");
  auto* ablate = app.add_subcommand("ablate", "Reward-shaping ablation (omega vs 0)");
  auto* figures = app.add_subcommand("export-figures", "Uncertainty band CSVs per feature");
  for (auto* cmd : {train, evaluate, ablate, figures}) add_common_options(cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const auto config = resolve_config(o);
    const auto dataset = data::load_wdbc(config.dataset);
    const auto layout = pipeline::layout_for(config);
    auto progress = [&](std::string_view msg) { fmt::print(err, "{}\n", msg); };

    if (train->parsed()) {
      pipeline::run_train(config, dataset, progress);
      fmt::print(out, "wrote {} checkpoints to {}\n", config.split.resample_count,
                 layout.checkpoints().string());
    } else if (evaluate->parsed()) {
      const auto rep = pipeline::run_evaluate(config, dataset);
      fmt::print(out, "resamples: {}\n", rep.predsets.size());
      fmt::print(out, "AUC-ROC at 0% queries: {:.4f}\n", rep.baseline_auc_roc);
      fmt::print(out, "AUC-PR at 0% queries: {:.4f}\n", rep.baseline_auc_pr);
      fmt::print(out, "bias at 0% queries: {:.6f}\n", rep.baseline_bias);
      print_table(out, "AUC-ROC gain (percentage points)", rep.roc_table);
      print_table(out, "AUC-PR gain (percentage points)", rep.pr_table);
    } else if (ablate->parsed()) {
      const auto rep = pipeline::run_ablation(config, dataset, progress);
      pipeline::write_ablation(rep, config);
      for (std::size_t w = 0; w < config.ablation_omegas.size(); ++w) {
        fmt::print(out, "omega {}: mean corr(logvar, squared bias) = {:.4f}\n",
                   config.ablation_omegas[w], rep.mean_correlation[w]);
      }
    } else if (figures->parsed()) {
      for (const auto& path : pipeline::run_export_figures(config, dataset)) {
        fmt::print(out, "wrote {}\n", path.string());
      }
    }
    return kExitOk;
  } catch (const MissingArtifactError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitMissing;
  } catch (const TrainingError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitDivergence;
  } catch (const ConfigError& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const UsageError& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 1;
  }
}

}  // namespace uinvase::cli
