#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "uinvase/data.hpp"
#include "uinvase/errors.hpp"
#include "uinvase/eval.hpp"
#include "uinvase/invase.hpp"

using namespace uinvase;
using namespace uinvase::eval;

namespace {

using Vec = std::vector<double>;

PredictionSet make_set(const Vec& score, const Vec& var, const Vec& label) {
  PredictionSet p;
  p.score = Eigen::Map<const Vector>(score.data(), static_cast<Eigen::Index>(score.size()));
  p.variance = Eigen::Map<const Vector>(var.data(), static_cast<Eigen::Index>(var.size()));
  p.label = Eigen::Map<const Vector>(label.data(), static_cast<Eigen::Index>(label.size()));
  return p;
}

double brute_roc(const Vec& s, const Vec& y) {
  double good = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1.0 || y[j] != 0.0) continue;
      pairs += 1.0;
      good += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return good / pairs;
}

// Walks a fully sorted ranking and averages precision at each positive.
double brute_ap(const Vec& s, const Vec& y) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  double hits = 0.0, total = 0.0;
  for (std::size_t rank = 0; rank < idx.size(); ++rank) {
    if (y[idx[rank]] == 1.0) {
      hits += 1.0;
      total += hits / static_cast<double>(rank + 1);
    }
  }
  return total / hits;
}

PredictionSet random_set(Rng& rng, std::size_t n) {
  Vec s(n), v(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = static_cast<double>(rng.below(5)) / 4.0;
    v[i] = 0.1 + static_cast<double>(rng.below(4));
    y[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  }
  return make_set(s, v, y);
}

const std::vector<double> kUnitRates = {0.0, 0.1, 0.2, 0.25, 0.3, 0.4, 0.5,
                                        0.6, 0.7, 0.75, 0.8, 0.9, 1.0};

}  // namespace

TEST_CASE("auc_roc: examples and errors") {
  CHECK(auc_roc(Vec{0.1, 0.9}, Vec{0, 1}) == 1.0);
  CHECK(auc_roc(Vec{0.9, 0.1}, Vec{0, 1}) == 0.0);
  CHECK(auc_roc(Vec{0.2, 0.4, 0.6, 0.8}, Vec{0, 1, 0, 1}) == 0.75);
  CHECK(auc_roc(Vec{0.5, 0.5}, Vec{0, 1}) == 0.5);
  CHECK_THROWS_AS(auc_roc(Vec{0.1, 0.2}, Vec{1, 1}), MetricError);
  CHECK_THROWS_AS(auc_roc(Vec{0.1, 0.2}, Vec{0, 0}), MetricError);
  CHECK_THROWS_AS(auc_roc(Vec{0.1}, Vec{0, 1}), UsageError);
}

TEST_CASE("auc_pr: examples and errors") {
  CHECK(auc_pr(Vec{0.1, 0.9}, Vec{0, 1}) == 1.0);
  CHECK(auc_pr(Vec{0.2, 0.4, 0.6, 0.8}, Vec{0, 1, 0, 1}) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
  // tie broken by index: positive at index 0 ranks first
  CHECK(auc_pr(Vec{0.5, 0.5}, Vec{1, 0}) == 1.0);
  CHECK(auc_pr(Vec{0.5, 0.5}, Vec{0, 1}) == 0.5);
  CHECK_THROWS_AS(auc_pr(Vec{0.1, 0.2}, Vec{0, 0}), MetricError);
}

TEST_CASE("metrics match brute-force oracles on random small instances") {
  Rng rng(1234);
  int checked = 0;
  while (checked < 1000) {
    const std::size_t n = 2 + rng.below(7);
    Vec s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(4)) / 3.0;  // frequent ties
      y[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
    const double pos = std::accumulate(y.begin(), y.end(), 0.0);
    if (pos == 0.0 || pos == static_cast<double>(n)) continue;
    REQUIRE(auc_roc(s, y) == brute_roc(s, y));
    REQUIRE(auc_pr(s, y) == brute_ap(s, y));
    ++checked;
  }
}

TEST_CASE("mean_squared_bias") {
  CHECK(mean_squared_bias(Vec{0.5, 1.0}, Vec{1, 0}) == doctest::Approx((0.25 + 1.0) / 2.0));
  CHECK(compute_metric(Metric::kBias, Vec{1, 0}, Vec{1, 0}) == 0.0);
}

TEST_CASE("names round trip") {
  for (auto s : {Strategy::kOracle, Strategy::kRandom, Strategy::kUncertainty}) {
    CHECK(strategy_from_string(to_string(s)) == s);
  }
  for (auto m : {Metric::kBias, Metric::kAucRoc, Metric::kAucPr}) {
    CHECK(metric_from_string(to_string(m)) == m);
  }
  CHECK(display_name(Strategy::kRandom) == "w/o Uncertainty");
  CHECK(display_name(Strategy::kUncertainty) == "Ours");
  CHECK_THROWS_AS(strategy_from_string("best"), ConfigError);
}

TEST_CASE("query_order: examples") {
  Rng rng(0);
  const auto p = make_set({0.9, 0.1, 0.5}, {3, 1, 2}, {0, 0, 1});
  CHECK(query_order(Strategy::kOracle, p, rng) == std::vector<std::size_t>{0, 2, 1});
  CHECK(query_order(Strategy::kUncertainty, p, rng) == std::vector<std::size_t>{0, 2, 1});

  const auto tied = make_set({0, 0, 0}, {1, 1, 1}, {1, 1, 1});
  CHECK(query_order(Strategy::kOracle, tied, rng) == std::vector<std::size_t>{0, 1, 2});

  Rng a(5);
  const auto big = random_set(a, 50);
  Rng c(77), d(77);
  const auto r1 = query_order(Strategy::kRandom, big, c);
  CHECK(r1 == query_order(Strategy::kRandom, big, d));
  auto sorted = r1;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(50);
  std::iota(iota.begin(), iota.end(), 0);
  CHECK(sorted == iota);
}

TEST_CASE("query_count rounds up") {
  CHECK(query_count(0.0, 114) == 0);
  CHECK(query_count(0.001, 114) == 1);
  CHECK(query_count(0.1, 114) == 12);
  CHECK(query_count(0.2, 5) == 1);
  CHECK(query_count(0.2, 10) == 2);
  CHECK(query_count(1.0, 114) == 114);
}

TEST_CASE("query_curve: rate 0 is raw and rate 1 saturates") {
  const auto p = make_set({0.9, 0.2, 0.6, 0.4}, {1, 2, 3, 4}, {0, 1, 0, 1});
  const std::vector<std::size_t> order = {3, 2, 1, 0};
  const std::vector<double> rates = {0.0, 1.0};
  const auto bias = query_curve(p, order, rates, Metric::kBias);
  CHECK(bias[0] == doctest::Approx((0.81 + 0.64 + 0.36 + 0.36) / 4.0));
  CHECK(bias[1] == 0.0);
  const auto roc = query_curve(p, order, rates, Metric::kAucRoc);
  CHECK(roc[0] == auc_roc(Vec{0.9, 0.2, 0.6, 0.4}, Vec{0, 1, 0, 1}));
  CHECK(roc[1] == 1.0);
  CHECK(query_curve(p, order, rates, Metric::kAucPr)[1] == 1.0);

  const std::vector<double> bad = {0.5, 0.2};
  CHECK_THROWS_AS(query_curve(p, order, bad, Metric::kBias), UsageError);
}

TEST_CASE("query_curve laws on random prediction sets") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = random_set(rng, 1 + rng.below(12));
    const auto oracle = query_curve(p, query_order(Strategy::kOracle, p, rng), kUnitRates, Metric::kBias);
    for (auto s : {Strategy::kOracle, Strategy::kRandom, Strategy::kUncertainty}) {
      const auto curve = query_curve(p, query_order(s, p, rng), kUnitRates, Metric::kBias);
      for (std::size_t k = 1; k < curve.size(); ++k) REQUIRE(curve[k] <= curve[k - 1]);
      for (std::size_t k = 0; k < curve.size(); ++k) REQUIRE(oracle[k] <= curve[k]);
      REQUIRE(curve.back() == 0.0);
    }
  }
}

TEST_CASE("strategy_curve: mean and sample std across resamples") {
  std::vector<PredictionSet> sets = {make_set({0.0, 1.0}, {1, 2}, {1, 0}),
                                     make_set({0.5, 1.0}, {1, 2}, {1, 0})};
  const std::vector<double> rates = {0.0, 1.0};
  const auto c = strategy_curve(Strategy::kOracle, Metric::kBias, sets, rates, 10, 1);
  REQUIRE(c.per_resample.size() == 2);
  CHECK(c.per_resample[0][0] == 1.0);
  CHECK(c.per_resample[1][0] == 0.625);
  CHECK(c.mean[0] == doctest::Approx(0.8125));
  CHECK(c.std[0] == doctest::Approx(std::sqrt(2.0 * 0.1875 * 0.1875)));
  CHECK(c.mean[1] == 0.0);

  const auto r1 = strategy_curve(Strategy::kRandom, Metric::kAucRoc, sets, rates, 10, 3);
  const auto r2 = strategy_curve(Strategy::kRandom, Metric::kAucRoc, sets, rates, 10, 3);
  CHECK(r1.mean == r2.mean);
}

TEST_CASE("default rates contain zero, the table rates and one") {
  const auto rates = default_rates();
  CHECK(rates.front() == 0.0);
  CHECK(rates.back() == 1.0);
  CHECK(std::is_sorted(rates.begin(), rates.end()));
  CHECK(std::adjacent_find(rates.begin(), rates.end()) == rates.end());
  for (double r : table_rates()) CHECK(std::find(rates.begin(), rates.end(), r) != rates.end());
  CHECK(std::find(rates.begin(), rates.end(), 0.2) != rates.end());
}

TEST_CASE("gain table: saturation identity on a 98.40% AUC-ROC baseline") {
  // 25 positives and 25 negatives; ten negatives outrank exactly one positive
  // each, so 10 of 625 pairs are inverted.
  Vec s, y;
  for (int i = 0; i < 25; ++i) {
    s.push_back(0.5 + 0.01 * i);
    y.push_back(1.0);
  }
  for (int i = 0; i < 25; ++i) {
    s.push_back(i < 10 ? 0.505 : 0.01 * i);
    y.push_back(0.0);
  }
  CHECK(brute_roc(s, y) == 615.0 / 625.0);

  const auto p = make_set(s, Vec(s.size(), 1.0), y);
  std::vector<PredictionSet> sets = {p};
  std::vector<double> rates = {0.0, 0.5, 1.0};
  std::vector<QueryCurve> curves;
  for (auto st : {Strategy::kOracle, Strategy::kRandom, Strategy::kUncertainty}) {
    curves.push_back(strategy_curve(st, Metric::kAucRoc, sets, rates, 10, 1));
  }
  const std::vector<double> cols = {0.5, 1.0};
  const auto table = gain_table(curves, cols);
  CHECK(table.baseline == doctest::Approx(98.40));
  CHECK(table.gain(Strategy::kOracle, 1.0) == 100.0 - table.baseline);
  CHECK(table.gain(Strategy::kOracle, 0.5) == doctest::Approx(1.60));
  CHECK(table.baseline + table.gain(Strategy::kOracle, 1.0) == 100.0);
}

TEST_CASE("gain table: AUC-PR saturation arithmetic matches 99.06 + 0.94") {
  std::vector<QueryCurve> curves(1);
  curves[0].strategy = Strategy::kOracle;
  curves[0].metric = Metric::kAucPr;
  curves[0].rates = {0.0, 0.5, 1.0};
  curves[0].mean = {0.9906, 1.0, 1.0};
  curves[0].std = {0, 0, 0};
  const std::vector<double> cols = {0.5, 1.0};
  const auto t = gain_table(curves, cols);
  CHECK(t.baseline == doctest::Approx(99.06));
  CHECK(t.gain(Strategy::kOracle, 0.5) == doctest::Approx(0.94));
  CHECK(t.gain(Strategy::kOracle, 1.0) == 100.0 - t.baseline);
}

TEST_CASE("gain table: bias gain is the reduction, errors on mismatch") {
  std::vector<QueryCurve> curves(2);
  for (auto& c : curves) {
    c.metric = Metric::kBias;
    c.rates = {0.0, 0.5, 1.0};
    c.std = {0, 0, 0};
  }
  curves[0].strategy = Strategy::kOracle;
  curves[0].mean = {0.04, 0.0, 0.0};
  curves[1].strategy = Strategy::kRandom;
  curves[1].mean = {0.04, 0.02, 0.0};
  const std::vector<double> cols = {0.5, 1.0};
  const auto t = gain_table(curves, cols);
  CHECK(t.gain(Strategy::kOracle, 0.5) == doctest::Approx(4.0));
  CHECK(t.gain(Strategy::kRandom, 0.5) == doctest::Approx(2.0));

  const std::vector<double> missing = {0.3};
  CHECK_THROWS_AS(gain_table(curves, missing), UsageError);
  curves[1].metric = Metric::kAucRoc;
  CHECK_THROWS_AS(gain_table(curves, cols), UsageError);
  CHECK_THROWS_AS(t.gain(Strategy::kUncertainty, 0.5), UsageError);
}

TEST_CASE("gain table CSV follows the published layout") {
  Rng rng(3);
  std::vector<PredictionSet> sets;
  for (int r = 0; r < 3; ++r) {
    auto p = random_set(rng, 40);
    p.label(0) = 1.0;
    p.label(1) = 0.0;
    sets.push_back(p);
  }
  const auto rates = default_rates();
  std::vector<QueryCurve> curves;
  for (auto st : {Strategy::kOracle, Strategy::kRandom, Strategy::kUncertainty}) {
    curves.push_back(strategy_curve(st, Metric::kAucRoc, sets, rates, 10, 1));
  }
  const auto cols = table_rates();
  const auto csv = gain_table_csv(gain_table(curves, cols));
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "Methods,0.1%,0.5%,1%,5%,10%,50%");
  std::getline(in, line);
  CHECK(line.rfind("Oracle,", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("w/o Uncertainty,", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("Ours,", 0) == 0);
  CHECK(std::count(line.begin(), line.end(), ',') == 6);

  const auto curve_csv = curves_csv(curves);
  CHECK(curve_csv.rfind("rate,oracle_mean,oracle_std,random_mean,random_std,uncertainty_mean,"
                        "uncertainty_std\n",
                        0) == 0);
  CHECK(std::count(curve_csv.begin(), curve_csv.end(), '\n') == static_cast<long>(rates.size() + 1));
  const auto doc = gain_table_json(gain_table(curves, cols));
  CHECK(doc["metric"] == "auc_roc");
}

TEST_CASE("a perfect model has zero gains everywhere") {
  std::vector<PredictionSet> sets = {make_set({1, 0, 1, 0}, {1, 1, 1, 1}, {1, 0, 1, 0})};
  const auto rates = default_rates();
  for (auto metric : {Metric::kAucRoc, Metric::kAucPr, Metric::kBias}) {
    std::vector<QueryCurve> curves;
    for (auto st : {Strategy::kOracle, Strategy::kRandom, Strategy::kUncertainty}) {
      curves.push_back(strategy_curve(st, metric, sets, rates, 10, 1));
    }
    const auto cols = table_rates();
    const auto t = gain_table(curves, cols);
    CHECK(t.baseline == (metric == Metric::kBias ? 0.0 : 100.0));
    for (const auto& row : t.gains) {
      for (double g : row) CHECK(g == 0.0);
    }
  }
}

TEST_CASE("pearson") {
  CHECK(pearson(Vec{1, 2, 3}, Vec{2, 4, 6}) == doctest::Approx(1.0));
  CHECK(pearson(Vec{1, 2, 3}, Vec{3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(pearson(Vec{1, 1, 1}, Vec{3, 2, 1}) == 0.0);
}

TEST_CASE("band and bias exports") {
  const auto syn = data::gen_synthetic(120, 3, {0}, 0.3, 4);
  const auto split = data::resample(syn.data, {0.8, 1, 2}, 0);
  const auto pair = data::standardize(split.train, split.test);
  invase::TrainingConfig c;
  c.iterations = 200;
  c.hidden = 8;
  const auto model = invase::train(pair.train, c);

  const auto band = uncertainty_band_export(model, split.test, split.train, pair.scaler, 0);
  CHECK(band.feature_name == "x0");
  REQUIRE(band.test_rows.size() == split.test.size());
  CHECK(band.train_points.size() == split.train.size());
  for (std::size_t i = 0; i < band.test_rows.size(); ++i) {
    const auto& r = band.test_rows[i];
    CHECK(r.upper - r.mean == doctest::Approx(r.sigma));
    CHECK(r.mean - r.lower == doctest::Approx(r.sigma));
    CHECK(r.sigma > 0.0);
    if (i > 0) CHECK(band.test_rows[i - 1].feature_value <= r.feature_value);
  }
  const auto pb = invase::predict(model, pair.test.features);
  // the row holding the smallest raw value must carry that sample's sigma
  Eigen::Index argmin = 0;
  split.test.features.col(0).minCoeff(&argmin);
  CHECK(band.test_rows[0].sigma == doctest::Approx(std::exp(0.5 * pb.logvar(argmin))));

  const auto csv = band_csv(band);
  CHECK(csv.rfind("kind,feature_value,mu,lower,upper,sigma,label\n", 0) == 0);
  CHECK(csv == band_csv(uncertainty_band_export(model, split.test, split.train, pair.scaler, 0)));
  CHECK_THROWS_AS(uncertainty_band_export(model, split.test, split.train, pair.scaler, 3), UsageError);

  const auto rows = bias_vs_logvar_export(model, pair.test);
  CHECK(rows.size() == pair.test.size());
  for (const auto& r : rows) {
    CHECK(r.logvar >= invase::kLogVarMin);
    CHECK(r.logvar <= invase::kLogVarMax);
    CHECK(r.squared_bias >= 0.0);
  }
  CHECK(bias_logvar_csv(rows).rfind("logvar,squared_bias\n", 0) == 0);
}

TEST_CASE("prediction set validation") {
  auto p = make_set({0.1, 0.2}, {1.0, 0.0}, {0, 1});
  CHECK_THROWS_AS(p.validate(), UsageError);
  p = make_set({0.1, 0.2}, {1.0, 1.0}, {0, 0.5});
  CHECK_THROWS_AS(p.validate(), UsageError);
  p = make_set({0.1, 0.2}, {1.0, 1.0}, {0, 1});
  CHECK_NOTHROW(p.validate());
}
