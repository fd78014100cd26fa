#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "uinvase/data.hpp"
#include "uinvase/errors.hpp"

using namespace uinvase;
using namespace uinvase::data;

namespace {

const std::filesystem::path kWdbc = std::filesystem::path(UINVASE_SOURCE_DIR) / "data" / "wdbc.csv";

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << text;
  return path;
}

std::string numeric_fields(int count, double value) {
  std::string s;
  for (int j = 0; j < count; ++j) s += "," + std::to_string(value + j);
  return s;
}

LabeledDataset from_columns(std::initializer_list<std::initializer_list<double>> rows) {
  LabeledDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(rows.begin()->size()));
  ds.labels = Vector::Zero(ds.features.rows());
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) ds.features(i, j++) = v;
    ++i;
  }
  for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
    ds.feature_names.push_back("f" + std::to_string(j));
  }
  return ds;
}

// Fraction of (positive, negative) pairs ordered correctly; ties count 1/2.
double pairwise_auc(const Vector& score, const Vector& label) {
  double good = 0.0, pairs = 0.0;
  for (Eigen::Index i = 0; i < score.size(); ++i) {
    if (label(i) != 1.0) continue;
    for (Eigen::Index j = 0; j < score.size(); ++j) {
      if (label(j) != 0.0) continue;
      pairs += 1.0;
      if (score(i) > score(j)) good += 1.0;
      else if (score(i) == score(j)) good += 0.5;
    }
  }
  return good / pairs;
}

}  // namespace

TEST_CASE("load_wdbc: canonical file") {
  const auto ds = load_wdbc(kWdbc);
  CHECK(ds.size() == 569);
  CHECK(ds.dim() == 30);
  CHECK(ds.labels.sum() == 212.0);
  CHECK(((ds.labels.array() == 0.0) || (ds.labels.array() == 1.0)).all());
  CHECK(ds.features.allFinite());
  REQUIRE(ds.feature_names.size() == 30);
  CHECK(ds.feature_names.front() == "mean radius");
  CHECK(ds.feature_names[20] == "worst radius");
}

TEST_CASE("load_wdbc: loading is order-stable") {
  const auto a = load_wdbc(kWdbc);
  const auto b = load_wdbc(kWdbc);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
}

TEST_CASE("load_wdbc: headerless UCI layout, M -> 1 and B -> 0") {
  const auto path = write_temp("uinvase_noheader.csv", "842302,M" + numeric_fields(30, 1.0) +
                                                           "\n842517,B" + numeric_fields(30, 2.0) + "\n");
  const auto ds = load_wdbc(path);
  std::filesystem::remove(path);
  REQUIRE(ds.size() == 2);
  CHECK(ds.labels(0) == 1.0);
  CHECK(ds.labels(1) == 0.0);
  CHECK(ds.features(0, 0) == 1.0);
  CHECK(ds.features(1, 29) == 31.0);
  CHECK(ds.feature_names == wdbc_feature_names());
}

TEST_CASE("load_wdbc: errors") {
  std::string header = "id,diagnosis";
  for (int j = 0; j < 30; ++j) header += ",f" + std::to_string(j);

  const auto only_header = write_temp("uinvase_header_only.csv", header + "\n");
  CHECK_THROWS_AS(load_wdbc(only_header), DataError);
  std::filesystem::remove(only_header);

  const auto bad_label =
      write_temp("uinvase_bad_label.csv", header + "\n1,M" + numeric_fields(30, 0.0) + "\n2,X" +
                                              numeric_fields(30, 0.0) + "\n");
  try {
    load_wdbc(bad_label);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":3:") != std::string::npos);
    CHECK(msg.find("'X'") != std::string::npos);
  }
  std::filesystem::remove(bad_label);

  const auto short_row =
      write_temp("uinvase_short_row.csv", "1,M" + numeric_fields(29, 0.0) + "\n");
  CHECK_THROWS_AS(load_wdbc(short_row), DataError);
  std::filesystem::remove(short_row);

  const auto bad_value =
      write_temp("uinvase_bad_value.csv", "1,B" + numeric_fields(29, 0.0) + ",abc\n");
  CHECK_THROWS_AS(load_wdbc(bad_value), DataError);
  std::filesystem::remove(bad_value);

  CHECK_THROWS_AS(load_wdbc("/nonexistent/wdbc.csv"), MissingArtifactError);
}

TEST_CASE("standardize: examples") {
  const auto train = from_columns({{1.0, 4.0}, {3.0, 4.0}});
  const auto test = from_columns({{5.0, 9.0}});
  const auto pair = standardize(train, test);
  CHECK(pair.train.features(0, 0) == doctest::Approx(-1.0));
  CHECK(pair.train.features(1, 0) == doctest::Approx(1.0));
  CHECK(pair.test.features(0, 0) == doctest::Approx(3.0));
  // constant column
  CHECK(pair.train.features.col(1).isZero(0.0));
  CHECK(pair.test.features(0, 1) == 0.0);
  CHECK(pair.scaler.means(0) == 2.0);
  CHECK(pair.scaler.stds(0) == 1.0);
  CHECK(pair.scaler.apply_value(0, 5.0) == 3.0);

  CHECK_THROWS_AS(Standardizer::fit(LabeledDataset{}), UsageError);
}

TEST_CASE("standardize: train columns have zero mean and unit std") {
  const auto ds = load_wdbc(kWdbc);
  const auto split = resample(ds, {}, 0);
  const auto pair = standardize(split.train, split.test);
  const auto& f = pair.train.features;
  const double n = static_cast<double>(f.rows());
  for (Eigen::Index j = 0; j < f.cols(); ++j) {
    const double mean = f.col(j).mean();
    const double sd = std::sqrt((f.col(j).array() - mean).square().sum() / n);
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(sd - 1.0) < 1e-9);
  }
}

TEST_CASE("resample: determinism, sizes and disjointness") {
  const auto ds = load_wdbc(kWdbc);
  const SplitSpec spec{0.8, 20, 123};
  const auto a = resample(ds, spec, 0);
  const auto b = resample(ds, spec, 0);
  CHECK(a.train_rows == b.train_rows);
  CHECK(a.test_rows == b.test_rows);
  CHECK(a.train.features == b.train.features);

  const auto c = resample(ds, spec, 1);
  CHECK(a.test_rows != c.test_rows);

  for (std::size_t idx = 0; idx < spec.resample_count; ++idx) {
    const auto s = resample(ds, spec, idx);
    CHECK(s.train_rows.size() + s.test_rows.size() == ds.size());
    std::set<std::size_t> all(s.train_rows.begin(), s.train_rows.end());
    all.insert(s.test_rows.begin(), s.test_rows.end());
    CHECK(all.size() == ds.size());
    CHECK(*all.rbegin() == ds.size() - 1);
    CHECK(s.train.size() == s.train_rows.size());
    CHECK(s.test.labels(0) == ds.labels(static_cast<Eigen::Index>(s.test_rows[0])));
  }

  CHECK_THROWS_AS(resample(ds, spec, 20), UsageError);
}

TEST_CASE("resample: n = 10 gives 8 train and 2 test rows") {
  LabeledDataset ds;
  ds.features = Matrix::Random(10, 3);
  ds.labels = Vector::Zero(10);
  ds.feature_names = {"a", "b", "c"};
  const auto s = resample(ds, {0.8, 5, 9}, 3);
  CHECK(s.train_rows.size() == 8);
  CHECK(s.test_rows.size() == 2);
  const auto doc = split_membership_json(s, 3);
  CHECK(doc["resample"] == 3);
  CHECK(doc["test_rows"].size() == 2);
}

TEST_CASE("gen_synthetic: noiseless single relevant feature") {
  const auto syn = gen_synthetic(500, 4, {0}, 0.0, 1);
  const auto& ds = syn.data;
  CHECK(ds.size() == 500);
  CHECK(ds.dim() == 4);
  CHECK(syn.relevant == std::vector<bool>{true, false, false, false});
  for (Eigen::Index i = 0; i < 500; ++i) {
    CHECK(ds.labels(i) == (ds.features(i, 0) > 0.0 ? 1.0 : 0.0));
  }
}

TEST_CASE("gen_synthetic: determinism and errors") {
  const auto a = gen_synthetic(50, 5, {1, 3}, 0.5, 8);
  const auto b = gen_synthetic(50, 5, {1, 3}, 0.5, 8);
  CHECK(a.data.features == b.data.features);
  CHECK(a.data.labels == b.data.labels);
  CHECK_THROWS_AS(gen_synthetic(50, 5, {}, 0.5, 8), UsageError);
  CHECK_THROWS_AS(gen_synthetic(50, 5, {5}, 0.5, 8), UsageError);
  CHECK_THROWS_AS(gen_synthetic(0, 5, {0}, 0.5, 8), UsageError);
}

TEST_CASE("gen_synthetic: logistic fit on the relevant features separates the classes") {
  const std::vector<std::size_t> relevant = {0, 2};
  const auto syn = gen_synthetic(1000, 6, relevant, 0.1, 17);
  const auto& ds = syn.data;

  // Plain batch gradient descent on the logistic log-loss.
  Vector w = Vector::Zero(3);
  for (int step = 0; step < 2000; ++step) {
    Vector g = Vector::Zero(3);
    for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
      const double z = w(0) * ds.features(i, 0) + w(1) * ds.features(i, 2) + w(2);
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double r = p - ds.labels(i);
      g(0) += r * ds.features(i, 0);
      g(1) += r * ds.features(i, 2);
      g(2) += r;
    }
    w -= 0.5 * g / static_cast<double>(ds.size());
  }
  Vector score(ds.features.rows());
  for (Eigen::Index i = 0; i < score.size(); ++i) {
    score(i) = w(0) * ds.features(i, 0) + w(1) * ds.features(i, 2) + w(2);
  }
  CHECK(pairwise_auc(score, ds.labels) > 0.95);
}
