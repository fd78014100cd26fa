#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "uinvase/adam.hpp"
#include "uinvase/data.hpp"
#include "uinvase/errors.hpp"
#include "uinvase/nn.hpp"
#include "uinvase/rng.hpp"

namespace uinvase::invase {

using nn::Matrix;
using nn::Vector;

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;
// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] inside logs.
inline constexpr double kProbFloor = 1e-8;
// Test-time masks keep feature j iff pi_j > kSelectThreshold.
inline constexpr double kSelectThreshold = 0.5;

// Selection probabilities together with the binary mask drawn from them.
struct SelectionMask {
  Vector probabilities;
  Vector mask;  // entries exactly 0.0 or 1.0

  std::size_t dim() const { return static_cast<std::size_t>(mask.size()); }
  std::size_t l0() const;
};

struct GaussianPrediction {
  double mean = 0.0;
  double logvar = 0.0;

  double variance() const;
};

// Predictor input for one sample: [x * s, s]. The mask channel tells the
// predictor a suppressed coordinate apart from a measured zero.
Vector suppress(const Vector& x, const Vector& s);
Matrix suppress(const Matrix& x, const Matrix& s);

// Sigmoid outputs of the selector, one row per sample. Throws TrainingError
// when the network produces non-finite values.
Matrix select_probabilities(const nn::DenseNetwork& selector, const Matrix& x);

// Independent Bernoulli(pi_j) draw per coordinate.
Vector sample_mask(const Vector& pi, Rng& rng);
Matrix sample_mask(const Matrix& pi, Rng& rng);

// Deterministic test-time mask.
Matrix threshold_mask(const Matrix& pi);

// Gaussian negative log-likelihood without its additive constant:
// logvar / 2 + (y - mean)^2 / (2 exp(logvar)).
double gaussian_nll(const GaussianPrediction& pred, double y);

enum class Mode { kVanilla, kUncertainty };

// Predictor f^phi: a shared trunk over the suppressed input with a mean head
// and a log-variance head. The log-variance is clamped to
// [kLogVarMin, kLogVarMax]; an empty logvar head means logvar = 0.
struct Predictor {
  nn::DenseNetwork trunk;
  nn::DenseNetwork mean_head;
  nn::DenseNetwork logvar_head;

  struct Output {
    Vector mean;
    Vector logvar;      // clamped
    Vector raw_logvar;  // before clamping
  };
  struct Tapes {
    nn::Tape trunk;
    nn::Tape mean;
    nn::Tape logvar;
  };
  struct Grads {
    nn::Gradients trunk;
    nn::Gradients mean;
    nn::Gradients logvar;
  };

  // trunk 2d -> hidden -> hidden (relu), heads hidden -> 1 (identity).
  // With zero_logvar_head the variance head starts at exactly zero weights.
  static Predictor init(std::size_t d, std::size_t hidden, Rng& rng,
                        bool zero_logvar_head);

  bool has_uncertainty_head() const { return !logvar_head.empty(); }
  std::size_t feature_dim() const { return trunk.input_dim() / 2; }

  Output forward(const Matrix& input, Tapes* tapes = nullptr) const;

  // d_logvar is taken w.r.t. the clamped value; entries whose raw value lies
  // outside the clamp range receive zero gradient.
  Grads backward(const Tapes& tapes, const Output& out, const Vector& d_mean,
                 const Vector& d_logvar) const;
};

// Per-sample pieces of the loss estimator.
struct LossEstimate {
  Vector predictor_loss;  // (y-mu)^2 in vanilla mode, gaussian_nll otherwise
  Vector baseline_loss;   // (y - f_gamma(x))^2
  Vector advantage;       // baseline_loss - predictor_loss
  Vector variance;        // exp(logvar) of the predictor
};

// Scores the masked predictor against the full-feature baseline.
// Throws ConfigError in uncertainty mode if the predictor has no variance head.
LossEstimate loss_estimator(const Matrix& x, const Matrix& masks, const Vector& y,
                            const Predictor& predictor,
                            const nn::DenseNetwork& baseline, Mode mode);

struct TrainingConfig {
  double lambda = 0.1;  // sparsity weight on ||s||_0
  double omega = 0.1;   // uncertainty preference weight
  bool uncertainty_enabled = true;
  std::size_t iterations = 10000;
  std::size_t batch_size = 64;
  std::size_t hidden = 100;
  std::size_t history_interval = 100;
  // L2 penalty on every weight matrix of all three networks.
  double weight_decay = 0.1;
  std::uint64_t seed = 0;
  nn::AdamOptions adam;

  Mode mode() const { return uncertainty_enabled ? Mode::kUncertainty : Mode::kVanilla; }
  // omega as used by the reward: zero whenever uncertainty is disabled.
  double effective_omega() const { return uncertainty_enabled ? omega : 0.0; }
  void validate() const;
};

// R = omega * variance + advantage - lambda * ||s||_0, with omega forced to 0
// in vanilla mode.
double reward(double advantage, double variance, std::size_t mask_size,
              const TrainingConfig& config);

struct PolicyLoss {
  double value = 0.0;
  Matrix grad_pi;  // d value / d pi, same shape as pi
};

// Score-function loss -(1/n) sum_i R_i sum_j [s ln pi + (1-s) ln(1-pi)].
// Rewards are constants; pi is clamped to [kProbFloor, 1-kProbFloor] inside
// the logs, and clamped entries get zero gradient.
PolicyLoss selector_policy_loss(const Matrix& pi, const Matrix& masks, const Vector& rewards);

struct TrainingRecord {
  std::size_t iteration = 0;
  double predictor_loss = 0.0;
  double baseline_loss = 0.0;
  double mean_reward = 0.0;
  double mean_mask_size = 0.0;
  double mean_logvar = 0.0;
};

struct TrainedModel {
  nn::DenseNetwork selector;
  Predictor predictor;
  nn::DenseNetwork baseline;
  TrainingConfig config;
  std::vector<TrainingRecord> history;

  std::size_t dim() const { return selector.input_dim(); }
  // Throws ConfigError if the three networks disagree on d.
  void check_consistent() const;
};

// Everything one training iteration saw, handed to an optional observer.
struct IterationTrace {
  std::size_t iteration = 0;  // 1-based
  const Matrix& x;
  const Vector& y;
  const Matrix& pi;
  const Matrix& masks;
  const LossEstimate& estimate;  // computed with the freshly updated critics
  const Vector& rewards;
  // Networks after this iteration's updates; the critics are the ones that
  // produced `estimate`.
  const TrainedModel& model;
};
using IterationObserver = std::function<void(const IterationTrace&)>;

class TrainingDivergence : public TrainingError {
 public:
  TrainingDivergence(std::size_t iteration, std::shared_ptr<const TrainedModel> last_good,
                     const std::string& what);
  std::size_t iteration() const { return iteration_; }
  const TrainedModel& last_good() const { return *last_good_; }

 private:
  std::size_t iteration_;
  std::shared_ptr<const TrainedModel> last_good_;
};

// Freshly initialised networks for dimension d under `config`.
TrainedModel init_model(std::size_t d, const TrainingConfig& config);

// Joint actor-critic training on standardized data. Each iteration draws one
// batch and one mask sample, then updates the predictor, the baseline and the
// selector in that order. Deterministic in config.seed.
TrainedModel train(const data::LabeledDataset& train_set, const TrainingConfig& config,
                   const IterationObserver& observer = {});

struct PredictionBatch {
  Matrix probabilities;
  Matrix masks;
  Vector mean;
  Vector logvar;

  std::size_t size() const { return static_cast<std::size_t>(mean.size()); }
  SelectionMask selection(std::size_t i) const;
  GaussianPrediction prediction(std::size_t i) const;
};

// Test-time inference with thresholded masks; no randomness.
PredictionBatch predict(const TrainedModel& model, const Matrix& x);

}  // namespace uinvase::invase
