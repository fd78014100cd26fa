#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace uinvase::data {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Rows of real features with binary labels stored as 0.0 / 1.0.
struct LabeledDataset {
  Matrix features;  // n x d
  Vector labels;    // n, each exactly 0 or 1
  std::vector<std::string> feature_names;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }

  LabeledDataset subset(const std::vector<std::size_t>& rows) const;
};

// The 30 canonical WDBC feature names in file order.
const std::vector<std::string>& wdbc_feature_names();

// Reads the UCI WDBC layout: id, diagnosis (M|B), 30 numeric features.
// A header line is detected when its second field is not a diagnosis code.
// Diagnosis M maps to label 1, B to 0; the id column is dropped.
LabeledDataset load_wdbc(const std::filesystem::path& path);

// z-score transform fitted on a training set. Constant columns map to 0.
struct Standardizer {
  Vector means;
  Vector stds;  // population standard deviation; 0 marks a constant column

  static Standardizer fit(const LabeledDataset& train);
  LabeledDataset apply(const LabeledDataset& ds) const;
  double apply_value(std::size_t feature, double value) const;
};

struct StandardizedPair {
  LabeledDataset train;
  LabeledDataset test;
  Standardizer scaler;
};

StandardizedPair standardize(const LabeledDataset& train, const LabeledDataset& test);

struct SplitSpec {
  double train_fraction = 0.8;
  std::size_t resample_count = 20;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  LabeledDataset train;
  LabeledDataset test;
};

// Independent random partition number `index`, deterministic in (seed, index).
// The train side has round(train_fraction * n) rows.
Split resample(const LabeledDataset& dataset, const SplitSpec& spec, std::size_t index);

// Membership audit record for one split.
nlohmann::json split_membership_json(const Split& split, std::size_t index);

struct SyntheticDataset {
  LabeledDataset data;
  std::vector<bool> relevant;  // ground-truth feature mask
};

// Features ~ N(0, 1); label = 1[sum of relevant features + N(0, noise_std^2) > 0].
// `relevant_set` holds 0-based feature indices.
SyntheticDataset gen_synthetic(std::size_t n, std::size_t d,
                               const std::vector<std::size_t>& relevant_set,
                               double noise_std, std::uint64_t seed);

}  // namespace uinvase::data
