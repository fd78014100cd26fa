#include "uinvase/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string_view>

#include <fmt/format.h>

#include "uinvase/errors.hpp"
#include "uinvase/rng.hpp"

namespace uinvase::data {

namespace {

constexpr std::size_t kWdbcFeatures = 30;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  // from_chars rejects a leading '+', which some CSV writers emit.
  if (text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& rows) const {
  LabeledDataset out;
  out.feature_names = feature_names;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = static_cast<Eigen::Index>(rows[i]);
    if (rows[i] >= size()) throw UsageError("subset row out of range");
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(src);
    out.labels(static_cast<Eigen::Index>(i)) = labels(src);
  }
  return out;
}

const std::vector<std::string>& wdbc_feature_names() {
  static const std::vector<std::string> names = [] {
    const char* stats[] = {"radius",    "texture",        "perimeter",
                           "area",      "smoothness",     "compactness",
                           "concavity", "concave points", "symmetry",
                           "fractal dimension"};
    std::vector<std::string> out;
    for (const char* s : stats) out.push_back(fmt::format("mean {}", s));
    for (const char* s : stats) out.push_back(fmt::format("{} error", s));
    for (const char* s : stats) out.push_back(fmt::format("worst {}", s));
    return out;
  }();
  return names;
}

LabeledDataset load_wdbc(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError(fmt::format("cannot open dataset {}", path.string()));

  std::vector<std::string> names = wdbc_feature_names();
  std::vector<double> values;
  std::vector<double> labels;
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != kWdbcFeatures + 2) {
      throw DataError(fmt::format("{}:{}: expected {} columns, found {}",
                                  path.string(), line_no, kWdbcFeatures + 2,
                                  fields.size()));
    }
    const auto diagnosis = fields[1];
    if (first_content) {
      first_content = false;
      if (diagnosis != "M" && diagnosis != "B") {
        double probe = 0.0;
        if (!parse_double(fields[2], probe)) {
          // Header row: keep its feature names.
          for (std::size_t j = 0; j < kWdbcFeatures; ++j) {
            names[j] = std::string(fields[j + 2]);
          }
          continue;
        }
      }
    }
    if (diagnosis == "M") {
      labels.push_back(1.0);
    } else if (diagnosis == "B") {
      labels.push_back(0.0);
    } else {
      throw DataError(fmt::format("{}:{}: invalid diagnosis '{}' (expected M or B)",
                                  path.string(), line_no, diagnosis));
    }
    for (std::size_t j = 0; j < kWdbcFeatures; ++j) {
      double v = 0.0;
      if (!parse_double(fields[j + 2], v)) {
        throw DataError(fmt::format("{}:{}: column {} is not a finite number: '{}'",
                                    path.string(), line_no, j + 3, fields[j + 2]));
      }
      values.push_back(v);
    }
  }
  if (labels.empty()) {
    throw DataError(fmt::format("{}: dataset is empty", path.string()));
  }

  LabeledDataset ds;
  ds.feature_names = std::move(names);
  const auto n = static_cast<Eigen::Index>(labels.size());
  ds.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                               Eigen::RowMajor>>(
      values.data(), n, static_cast<Eigen::Index>(kWdbcFeatures));
  ds.labels = Eigen::Map<const Vector>(labels.data(), n);
  return ds;
}

Standardizer Standardizer::fit(const LabeledDataset& train) {
  if (train.size() == 0) throw UsageError("standardize: empty training set");
  Standardizer s;
  const double n = static_cast<double>(train.size());
  s.means = train.features.colwise().mean().transpose();
  s.stds.resize(s.means.size());
  for (Eigen::Index j = 0; j < s.means.size(); ++j) {
    const double var =
        (train.features.col(j).array() - s.means(j)).square().sum() / n;
    s.stds(j) = std::sqrt(var);
  }
  return s;
}

double Standardizer::apply_value(std::size_t feature, double value) const {
  const auto j = static_cast<Eigen::Index>(feature);
  if (stds(j) == 0.0) return 0.0;
  return (value - means(j)) / stds(j);
}

LabeledDataset Standardizer::apply(const LabeledDataset& ds) const {
  if (static_cast<Eigen::Index>(ds.dim()) != means.size()) {
    throw UsageError("standardizer dimension mismatch");
  }
  LabeledDataset out = ds;
  for (Eigen::Index j = 0; j < means.size(); ++j) {
    if (stds(j) == 0.0) {
      out.features.col(j).setZero();
    } else {
      out.features.col(j) = (ds.features.col(j).array() - means(j)) / stds(j);
    }
  }
  return out;
}

StandardizedPair standardize(const LabeledDataset& train, const LabeledDataset& test) {
  auto scaler = Standardizer::fit(train);
  return {scaler.apply(train), scaler.apply(test), std::move(scaler)};
}

Split resample(const LabeledDataset& dataset, const SplitSpec& spec, std::size_t index) {
  if (index >= spec.resample_count) {
    throw UsageError(fmt::format("resample index {} out of range [0, {})", index,
                                 spec.resample_count));
  }
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw UsageError("train_fraction must lie in (0, 1)");
  }
  const std::size_t n = dataset.size();
  const auto n_train = static_cast<std::size_t>(
      std::llround(spec.train_fraction * static_cast<double>(n)));
  Rng rng(derive_seed(spec.seed, index));
  const auto perm = rng.permutation(n);

  Split split;
  split.train_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  // Keep file order within each side.
  std::sort(split.train_rows.begin(), split.train_rows.end());
  std::sort(split.test_rows.begin(), split.test_rows.end());
  split.train = dataset.subset(split.train_rows);
  split.test = dataset.subset(split.test_rows);
  return split;
}

nlohmann::json split_membership_json(const Split& split, std::size_t index) {
  return {{"resample", index},
          {"train_rows", split.train_rows},
          {"test_rows", split.test_rows}};
}

SyntheticDataset gen_synthetic(std::size_t n, std::size_t d,
                               const std::vector<std::size_t>& relevant_set,
                               double noise_std, std::uint64_t seed) {
  if (relevant_set.empty()) throw UsageError("gen_synthetic: empty relevant set");
  if (n == 0) throw UsageError("gen_synthetic: n must be positive");
  if (noise_std < 0.0) throw UsageError("gen_synthetic: negative noise_std");
  SyntheticDataset out;
  out.relevant.assign(d, false);
  for (auto j : relevant_set) {
    if (j >= d) throw UsageError(fmt::format("relevant feature {} out of range", j));
    out.relevant[j] = true;
  }

  Rng rng(seed);
  auto& ds = out.data;
  ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  ds.labels.resize(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back(fmt::format("x{}", j));
  for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
    double logit = 0.0;
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
      ds.features(i, j) = rng.normal();
      if (out.relevant[static_cast<std::size_t>(j)]) logit += ds.features(i, j);
    }
    const double noise = rng.normal();
    logit += noise_std * noise;
    ds.labels(i) = logit > 0.0 ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace uinvase::data
