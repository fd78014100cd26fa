#include "uinvase/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "uinvase/errors.hpp"

namespace uinvase::eval {

namespace {

bool is_positive(double label) { return label > 0.5; }

void check_sizes(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) {
    throw UsageError(fmt::format("{} scores but {} labels", scores.size(), labels.size()));
  }
}

std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Stable descending order of `key`, ties by ascending index.
std::vector<std::size_t> descending_order(std::span<const double> key) {
  std::vector<std::size_t> order(key.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  return order;
}

}  // namespace

void PredictionSet::validate() const {
  if (variance.size() != score.size() || label.size() != score.size()) {
    throw UsageError("prediction set: column sizes differ");
  }
  for (Eigen::Index i = 0; i < score.size(); ++i) {
    if (!std::isfinite(score(i)) || !std::isfinite(variance(i))) {
      throw UsageError(fmt::format("prediction set: non-finite value at {}", i));
    }
    if (!(variance(i) > 0.0)) {
      throw UsageError(fmt::format("prediction set: non-positive variance at {}", i));
    }
    if (label(i) != 0.0 && label(i) != 1.0) {
      throw UsageError(fmt::format("prediction set: label {} is not binary", label(i)));
    }
  }
}

PredictionSet make_prediction_set(const invase::PredictionBatch& batch,
                                  const Vector& labels, std::size_t resample) {
  PredictionSet set;
  set.score = batch.mean;
  set.variance = batch.logvar.array().exp();
  set.label = labels;
  set.resample = resample;
  set.validate();
  return set;
}

std::string_view display_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::kOracle:
      return "Oracle";
    case Strategy::kRandom:
      return "w/o Uncertainty";
    case Strategy::kUncertainty:
      return "Ours";
  }
  return "";
}

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::kOracle:
      return "oracle";
    case Strategy::kRandom:
      return "random";
    case Strategy::kUncertainty:
      return "uncertainty";
  }
  return "";
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::kBias:
      return "bias";
    case Metric::kAucRoc:
      return "auc_roc";
    case Metric::kAucPr:
      return "auc_pr";
  }
  return "";
}

Strategy strategy_from_string(std::string_view name) {
  for (auto s : {Strategy::kOracle, Strategy::kRandom, Strategy::kUncertainty}) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError(fmt::format("unknown strategy '{}'", name));
}

Metric metric_from_string(std::string_view name) {
  for (auto m : {Metric::kBias, Metric::kAucRoc, Metric::kAucPr}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError(fmt::format("unknown metric '{}'", name));
}

double auc_roc(std::span<const double> scores, std::span<const double> labels) {
  check_sizes(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Work in half-pair units so ties stay exact integers.
  std::uint64_t half_pairs = 0;
  std::uint64_t negatives_below = 0;
  std::uint64_t positives = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    std::uint64_t pos = 0;
    std::uint64_t neg = 0;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) {
      (is_positive(labels[order[end]]) ? pos : neg)++;
      ++end;
    }
    half_pairs += 2 * pos * negatives_below + pos * neg;
    negatives_below += neg;
    positives += pos;
    start = end;
  }
  if (positives == 0 || negatives_below == 0) {
    throw MetricError("AUC-ROC needs both classes");
  }
  return static_cast<double>(half_pairs) /
         static_cast<double>(2 * positives * negatives_below);
}

double auc_pr(std::span<const double> scores, std::span<const double> labels) {
  check_sizes(scores, labels);
  const auto order = descending_order(scores);
  std::size_t hits = 0;
  double precision_sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (is_positive(labels[order[rank]])) {
      ++hits;
      precision_sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0) throw MetricError("AUC-PR needs at least one positive");
  return precision_sum / static_cast<double>(hits);
}

double mean_squared_bias(std::span<const double> scores, std::span<const double> labels) {
  check_sizes(scores, labels);
  if (scores.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double r = labels[i] - scores[i];
    total += r * r;
  }
  return total / static_cast<double>(scores.size());
}

double compute_metric(Metric metric, std::span<const double> scores,
                      std::span<const double> labels) {
  switch (metric) {
    case Metric::kBias:
      return mean_squared_bias(scores, labels);
    case Metric::kAucRoc:
      return auc_roc(scores, labels);
    case Metric::kAucPr:
      return auc_pr(scores, labels);
  }
  return 0.0;
}

std::vector<std::size_t> query_order(Strategy strategy, const PredictionSet& predset,
                                     Rng& rng) {
  switch (strategy) {
    case Strategy::kOracle: {
      std::vector<double> sq(predset.size());
      for (std::size_t i = 0; i < sq.size(); ++i) {
        const double r = predset.label(static_cast<Eigen::Index>(i)) -
                         predset.score(static_cast<Eigen::Index>(i));
        sq[i] = r * r;
      }
      return descending_order(sq);
    }
    case Strategy::kUncertainty:
      return descending_order(as_span(predset.variance));
    case Strategy::kRandom:
      return rng.permutation(predset.size());
  }
  return {};
}

std::size_t query_count(double rate, std::size_t n) {
  // The slack absorbs products such as 0.2 * 115 = 23.000000000000004.
  const double raw = std::ceil(rate * static_cast<double>(n) - 1e-9);
  if (raw <= 0.0) return 0;
  return std::min(n, static_cast<std::size_t>(raw));
}

std::vector<double> query_curve(const PredictionSet& predset,
                                std::span<const std::size_t> order,
                                std::span<const double> rates, Metric metric) {
  const std::size_t n = predset.size();
  if (order.size() != n) throw UsageError("query order does not cover the prediction set");
  for (std::size_t k = 0; k < rates.size(); ++k) {
    if (!(rates[k] >= 0.0 && rates[k] <= 1.0) || (k > 0 && rates[k] <= rates[k - 1])) {
      throw UsageError("query rates must be strictly increasing within [0, 1]");
    }
  }
  std::vector<double> scores(predset.score.data(), predset.score.data() + n);
  const auto labels = as_span(predset.label);
  std::vector<double> values;
  values.reserve(rates.size());
  std::size_t corrected = 0;
  for (double rate : rates) {
    const std::size_t target = query_count(rate, n);
    for (; corrected < target; ++corrected) {
      scores[order[corrected]] = labels[order[corrected]];
    }
    values.push_back(compute_metric(metric, scores, labels));
  }
  return values;
}

std::vector<double> table_rates() { return {0.001, 0.005, 0.01, 0.05, 0.1, 0.5}; }

std::vector<double> default_rates() {
  std::vector<double> rates = table_rates();
  for (int k = 0; k <= 20; ++k) rates.push_back(k * 0.05);
  std::sort(rates.begin(), rates.end());
  rates.erase(std::unique(rates.begin(), rates.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-12; }),
              rates.end());
  return rates;
}

QueryCurve strategy_curve(Strategy strategy, Metric metric,
                          std::span<const PredictionSet> predsets,
                          std::span<const double> rates, std::size_t random_shuffles,
                          std::uint64_t seed) {
  if (predsets.empty()) throw UsageError("strategy_curve: no prediction sets");
  QueryCurve curve;
  curve.strategy = strategy;
  curve.metric = metric;
  curve.rates.assign(rates.begin(), rates.end());

  for (const auto& predset : predsets) {
    std::vector<double> values(rates.size(), 0.0);
    const std::size_t draws = strategy == Strategy::kRandom ? std::max<std::size_t>(1, random_shuffles) : 1;
    for (std::size_t k = 0; k < draws; ++k) {
      Rng rng(derive_seed(seed, predset.resample * 1000003ULL + k));
      const auto order = query_order(strategy, predset, rng);
      const auto v = query_curve(predset, order, rates, metric);
      for (std::size_t r = 0; r < v.size(); ++r) values[r] += v[r];
    }
    for (auto& v : values) v /= static_cast<double>(draws);
    curve.per_resample.push_back(std::move(values));
  }

  const double count = static_cast<double>(predsets.size());
  curve.mean.assign(rates.size(), 0.0);
  curve.std.assign(rates.size(), 0.0);
  for (std::size_t r = 0; r < rates.size(); ++r) {
    double sum = 0.0;
    for (const auto& run : curve.per_resample) sum += run[r];
    curve.mean[r] = sum / count;
    if (predsets.size() > 1) {
      double ss = 0.0;
      for (const auto& run : curve.per_resample) {
        ss += (run[r] - curve.mean[r]) * (run[r] - curve.mean[r]);
      }
      curve.std[r] = std::sqrt(ss / (count - 1.0));
    }
  }
  return curve;
}

namespace {

std::size_t rate_index(const std::vector<double>& rates, double rate) {
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (std::abs(rates[i] - rate) < 1e-12) return i;
  }
  throw UsageError(fmt::format("rate {} is not on the curve", rate));
}

std::string percent_label(double rate) { return fmt::format("{}%", rate * 100.0); }

}  // namespace

double GainTable::gain(Strategy strategy, double rate) const {
  for (std::size_t s = 0; s < strategies.size(); ++s) {
    if (strategies[s] == strategy) return gains[s].at(rate_index(columns, rate));
  }
  throw UsageError(fmt::format("strategy {} not in gain table", to_string(strategy)));
}

GainTable gain_table(std::span<const QueryCurve> curves, std::span<const double> columns) {
  if (curves.empty()) throw UsageError("gain_table: no curves");
  const auto& first = curves.front();
  for (const auto& c : curves) {
    if (c.metric != first.metric || c.rates != first.rates) {
      throw UsageError("gain_table: curves disagree on metric or rates");
    }
  }
  const std::size_t zero = rate_index(first.rates, 0.0);
  GainTable table;
  table.metric = first.metric;
  table.baseline = 100.0 * first.mean[zero];
  table.columns.assign(columns.begin(), columns.end());
  const double sign = first.metric == Metric::kBias ? -1.0 : 1.0;
  for (const auto& c : curves) {
    table.strategies.push_back(c.strategy);
    std::vector<double> row;
    for (double rate : columns) {
      row.push_back(sign * (100.0 * c.mean[rate_index(c.rates, rate)] - 100.0 * c.mean[zero]));
    }
    table.gains.push_back(std::move(row));
  }
  return table;
}

std::string gain_table_csv(const GainTable& table) {
  std::string out = "Methods";
  for (double rate : table.columns) out += "," + percent_label(rate);
  out += '\n';
  for (std::size_t s = 0; s < table.strategies.size(); ++s) {
    out += display_name(table.strategies[s]);
    for (double g : table.gains[s]) out += fmt::format(",{:.2f}", g);
    out += '\n';
  }
  return out;
}

nlohmann::json gain_table_json(const GainTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t s = 0; s < table.strategies.size(); ++s) {
    rows.push_back({{"strategy", std::string(to_string(table.strategies[s]))},
                    {"label", std::string(display_name(table.strategies[s]))},
                    {"gains", table.gains[s]}});
  }
  return {{"metric", std::string(to_string(table.metric))},
          {"baseline_percent", table.baseline},
          {"rates", table.columns},
          {"rows", std::move(rows)}};
}

std::string curves_csv(std::span<const QueryCurve> curves) {
  if (curves.empty()) return {};
  std::string out = "rate";
  for (const auto& c : curves) {
    out += fmt::format(",{0}_mean,{0}_std", to_string(c.strategy));
  }
  out += '\n';
  for (std::size_t r = 0; r < curves.front().rates.size(); ++r) {
    out += fmt::format("{}", curves.front().rates[r]);
    for (const auto& c : curves) out += fmt::format(",{},{}", c.mean.at(r), c.std.at(r));
    out += '\n';
  }
  return out;
}

nlohmann::json curves_json(std::span<const QueryCurve> curves) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : curves) {
    out.push_back({{"strategy", std::string(to_string(c.strategy))},
                   {"metric", std::string(to_string(c.metric))},
                   {"rates", c.rates},
                   {"mean", c.mean},
                   {"std", c.std}});
  }
  return out;
}

BandExport uncertainty_band_export(const invase::TrainedModel& model,
                                   const data::LabeledDataset& test_raw,
                                   const data::LabeledDataset& train_raw,
                                   const data::Standardizer& scaler,
                                   std::size_t feature_index) {
  if (feature_index >= test_raw.dim()) {
    throw UsageError(fmt::format("feature index {} out of range [0, {})", feature_index,
                                 test_raw.dim()));
  }
  const auto j = static_cast<Eigen::Index>(feature_index);
  const auto pred = invase::predict(model, scaler.apply(test_raw).features);

  BandExport band;
  if (feature_index < test_raw.feature_names.size()) {
    band.feature_name = test_raw.feature_names[feature_index];
  }
  for (std::size_t i = 0; i < test_raw.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double sigma = std::sqrt(std::exp(pred.logvar(r)));
    band.test_rows.push_back({test_raw.features(r, j), pred.mean(r), pred.mean(r) - sigma,
                              pred.mean(r) + sigma, sigma, test_raw.labels(r)});
  }
  std::stable_sort(band.test_rows.begin(), band.test_rows.end(),
                   [](const BandRow& a, const BandRow& b) {
                     return a.feature_value < b.feature_value;
                   });
  for (std::size_t i = 0; i < train_raw.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    band.train_points.emplace_back(train_raw.features(r, j), train_raw.labels(r));
  }
  std::stable_sort(band.train_points.begin(), band.train_points.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  return band;
}

std::string band_csv(const BandExport& band) {
  std::string out = "kind,feature_value,mu,lower,upper,sigma,label\n";
  for (const auto& r : band.test_rows) {
    out += fmt::format("test,{},{},{},{},{},{}\n", r.feature_value, r.mean, r.lower,
                       r.upper, r.sigma, r.label);
  }
  for (const auto& [value, label] : band.train_points) {
    out += fmt::format("train,{},,,,,{}\n", value, label);
  }
  return out;
}

std::vector<BiasLogvarRow> bias_vs_logvar_export(const invase::TrainedModel& model,
                                                 const data::LabeledDataset& test_std) {
  const auto pred = invase::predict(model, test_std.features);
  std::vector<BiasLogvarRow> rows;
  rows.reserve(test_std.size());
  for (std::size_t i = 0; i < test_std.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double bias = test_std.labels(r) - pred.mean(r);
    rows.push_back({pred.logvar(r), bias * bias});
  }
  return rows;
}

std::string bias_logvar_csv(std::span<const BiasLogvarRow> rows) {
  std::string out = "logvar,squared_bias\n";
  for (const auto& r : rows) out += fmt::format("{},{}\n", r.logvar, r.squared_bias);
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw UsageError("pearson: length mismatch");
  if (x.size() < 2) return 0.0;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double logvar_bias_correlation(std::span<const BiasLogvarRow> rows) {
  std::vector<double> logvar;
  std::vector<double> bias;
  for (const auto& r : rows) {
    logvar.push_back(r.logvar);
    bias.push_back(r.squared_bias);
  }
  return pearson(logvar, bias);
}

}  // namespace uinvase::eval
