#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "uinvase/data.hpp"
#include "uinvase/invase.hpp"
#include "uinvase/rng.hpp"

namespace uinvase::eval {

using Vector = Eigen::VectorXd;

// Test-set predictions of one resample.
struct PredictionSet {
  Vector score;     // predictive mean mu
  Vector variance;  // sigma^2
  Vector label;     // 0 or 1
  std::size_t resample = 0;

  std::size_t size() const { return static_cast<std::size_t>(score.size()); }
  // Throws UsageError unless sizes agree, values are finite, labels are
  // binary and every variance is positive.
  void validate() const;
};

PredictionSet make_prediction_set(const invase::PredictionBatch& batch,
                                  const Vector& labels, std::size_t resample);

enum class Strategy { kOracle, kRandom, kUncertainty };
enum class Metric { kBias, kAucRoc, kAucPr };

// Row labels used in the gain tables: "Oracle", "w/o Uncertainty", "Ours".
std::string_view display_name(Strategy strategy);
// Machine names: "oracle", "random", "uncertainty" and "bias", "auc_roc", "auc_pr".
std::string_view to_string(Strategy strategy);
std::string_view to_string(Metric metric);
Strategy strategy_from_string(std::string_view name);
Metric metric_from_string(std::string_view name);

// Mann-Whitney statistic: fraction of (positive, negative) pairs ranked
// correctly, ties counted one half. Throws MetricError on a single class.
double auc_roc(std::span<const double> scores, std::span<const double> labels);

// Average precision: mean over positives of the precision at each positive's
// rank, ranking by descending score with ties broken by ascending index.
// Throws MetricError when there are no positives.
double auc_pr(std::span<const double> scores, std::span<const double> labels);

// Mean of (label - score)^2.
double mean_squared_bias(std::span<const double> scores, std::span<const double> labels);

double compute_metric(Metric metric, std::span<const double> scores,
                      std::span<const double> labels);

// Query priority over test indices. Oracle: descending (y - mu)^2;
// uncertainty: descending sigma^2; both tie-break by index. Random: a shuffle
// drawn from `rng`.
std::vector<std::size_t> query_order(Strategy strategy, const PredictionSet& predset,
                                     Rng& rng);

// ceil(rate * n), capped at n.
std::size_t query_count(double rate, std::size_t n);

// Metric after replacing the scores of the first query_count(rate, n)
// samples in `order` with their true labels, for each rate. Rates must be
// strictly increasing within [0, 1].
std::vector<double> query_curve(const PredictionSet& predset,
                                std::span<const std::size_t> order,
                                std::span<const double> rates, Metric metric);

// Query rates reported in the gain tables.
std::vector<double> table_rates();
// Table rates merged with a 5% grid over [0, 1].
std::vector<double> default_rates();

struct QueryCurve {
  Strategy strategy = Strategy::kOracle;
  Metric metric = Metric::kBias;
  std::vector<double> rates;
  std::vector<double> mean;  // across resamples
  std::vector<double> std;   // sample standard deviation across resamples
  std::vector<std::vector<double>> per_resample;
};

// One curve per resample, aggregated. The random strategy averages
// `random_shuffles` seeded shuffles within every resample.
QueryCurve strategy_curve(Strategy strategy, Metric metric,
                          std::span<const PredictionSet> predsets,
                          std::span<const double> rates, std::size_t random_shuffles,
                          std::uint64_t seed);

struct GainTable {
  Metric metric = Metric::kAucRoc;
  double baseline = 0.0;  // mean metric at rate 0, in percent
  std::vector<double> columns;
  std::vector<Strategy> strategies;
  std::vector<std::vector<double>> gains;  // [strategy][column], percentage points

  double gain(Strategy strategy, double rate) const;
};

// gain(q) = 100 * (metric(q) - metric(0)) for AUC metrics and
// 100 * (metric(0) - metric(q)) for bias, on the across-resample means.
// Throws UsageError if the curves disagree on metric or rates, or a column
// is not among the rates.
GainTable gain_table(std::span<const QueryCurve> curves, std::span<const double> columns);

// Methods,0.1%,0.5%,... with one row per strategy.
std::string gain_table_csv(const GainTable& table);
nlohmann::json gain_table_json(const GainTable& table);
// rate,<strategy>_mean,<strategy>_std,... for curves sharing one metric.
std::string curves_csv(std::span<const QueryCurve> curves);
nlohmann::json curves_json(std::span<const QueryCurve> curves);

struct BandRow {
  double feature_value = 0.0;  // raw (unstandardized) units
  double mean = 0.0;
  double lower = 0.0;  // mean - sigma
  double upper = 0.0;  // mean + sigma
  double sigma = 0.0;
  double label = 0.0;
};

struct BandExport {
  std::string feature_name;
  std::vector<BandRow> test_rows;  // sorted by feature value
  std::vector<std::pair<double, double>> train_points;  // (raw value, label), sorted
};

// Prediction band along one feature. Inputs are raw; `scaler` maps them to
// the model's standardized space.
BandExport uncertainty_band_export(const invase::TrainedModel& model,
                                   const data::LabeledDataset& test_raw,
                                   const data::LabeledDataset& train_raw,
                                   const data::Standardizer& scaler,
                                   std::size_t feature_index);

// kind,feature_value,mu,lower,upper,sigma,label; kind is "test" or "train"
// (train rows leave the prediction columns empty).
std::string band_csv(const BandExport& band);

struct BiasLogvarRow {
  double logvar = 0.0;
  double squared_bias = 0.0;
};

std::vector<BiasLogvarRow> bias_vs_logvar_export(const invase::TrainedModel& model,
                                                 const data::LabeledDataset& test_std);
std::string bias_logvar_csv(std::span<const BiasLogvarRow> rows);

// Pearson correlation; 0 when either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);
double logvar_bias_correlation(std::span<const BiasLogvarRow> rows);

}  // namespace uinvase::eval
