#include "uinvase/invase.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include <fmt/format.h>

namespace uinvase::invase {

std::size_t SelectionMask::l0() const {
  return static_cast<std::size_t>((mask.array() != 0.0).count());
}

double GaussianPrediction::variance() const { return std::exp(logvar); }

Vector suppress(const Vector& x, const Vector& s) {
  if (x.size() != s.size()) {
    throw UsageError(fmt::format("suppress: x has {} entries, mask {}", x.size(), s.size()));
  }
  Vector out(2 * x.size());
  out << x.cwiseProduct(s), s;
  return out;
}

Matrix suppress(const Matrix& x, const Matrix& s) {
  if (x.rows() != s.rows() || x.cols() != s.cols()) {
    throw UsageError(fmt::format("suppress: x is {}x{}, masks {}x{}", x.rows(),
                                 x.cols(), s.rows(), s.cols()));
  }
  Matrix out(x.rows(), 2 * x.cols());
  out << x.cwiseProduct(s), s;
  return out;
}

Matrix select_probabilities(const nn::DenseNetwork& selector, const Matrix& x) {
  Matrix pi = selector.forward(x);
  if (!pi.allFinite()) throw TrainingError("selector produced non-finite probabilities");
  return pi;
}

Vector sample_mask(const Vector& pi, Rng& rng) {
  Vector s(pi.size());
  for (Eigen::Index j = 0; j < pi.size(); ++j) s(j) = rng.bernoulli(pi(j)) ? 1.0 : 0.0;
  return s;
}

Matrix sample_mask(const Matrix& pi, Rng& rng) {
  Matrix s(pi.rows(), pi.cols());
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    for (Eigen::Index j = 0; j < pi.cols(); ++j) {
      s(i, j) = rng.bernoulli(pi(i, j)) ? 1.0 : 0.0;
    }
  }
  return s;
}

Matrix threshold_mask(const Matrix& pi) {
  return pi.unaryExpr([](double p) { return p > kSelectThreshold ? 1.0 : 0.0; });
}

double gaussian_nll(const GaussianPrediction& pred, double y) {
  const double r = y - pred.mean;
  const double loss = 0.5 * pred.logvar + r * r / (2.0 * pred.variance());
  if (!std::isfinite(loss)) throw TrainingError("gaussian_nll is not finite");
  return loss;
}

Predictor Predictor::init(std::size_t d, std::size_t hidden, Rng& rng,
                          bool zero_logvar_head) {
  using nn::Activation;
  const std::array<nn::LayerSpec, 2> trunk_spec = {
      {{2 * d, hidden, Activation::kRelu}, {hidden, hidden, Activation::kRelu}}};
  const std::array<nn::LayerSpec, 1> head_spec = {{{hidden, 1, Activation::kIdentity}}};
  Predictor p;
  p.trunk = nn::DenseNetwork::glorot(trunk_spec, rng);
  p.mean_head = nn::DenseNetwork::glorot(head_spec, rng);
  p.logvar_head = nn::DenseNetwork::glorot(head_spec, rng);
  if (zero_logvar_head) {
    auto& layer = p.logvar_head.mutable_layer(0);
    layer.weight.setZero();
    layer.bias.setZero();
  }
  return p;
}

Predictor::Output Predictor::forward(const Matrix& input, Tapes* tapes) const {
  const Matrix features = trunk.forward(input, tapes ? &tapes->trunk : nullptr);
  Output out;
  out.mean = mean_head.forward(features, tapes ? &tapes->mean : nullptr).col(0);
  if (has_uncertainty_head()) {
    out.raw_logvar = logvar_head.forward(features, tapes ? &tapes->logvar : nullptr).col(0);
  } else {
    out.raw_logvar = Vector::Zero(input.rows());
  }
  out.logvar = out.raw_logvar.cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
  return out;
}

Predictor::Grads Predictor::backward(const Tapes& tapes, const Output& out,
                                     const Vector& d_mean, const Vector& d_logvar) const {
  Grads g;
  g.mean = mean_head.backward(tapes.mean, d_mean);
  Matrix d_features = g.mean.input;
  if (has_uncertainty_head()) {
    Vector d_raw = d_logvar;
    for (Eigen::Index i = 0; i < d_raw.size(); ++i) {
      if (out.raw_logvar(i) < kLogVarMin || out.raw_logvar(i) > kLogVarMax) d_raw(i) = 0.0;
    }
    g.logvar = logvar_head.backward(tapes.logvar, d_raw);
    d_features += g.logvar.input;
  }
  g.trunk = trunk.backward(tapes.trunk, d_features);
  return g;
}

LossEstimate loss_estimator(const Matrix& x, const Matrix& masks, const Vector& y,
                            const Predictor& predictor,
                            const nn::DenseNetwork& baseline, Mode mode) {
  if (mode == Mode::kUncertainty && !predictor.has_uncertainty_head()) {
    throw ConfigError("uncertainty mode requires a log-variance head");
  }
  if (y.size() != x.rows()) throw UsageError("loss_estimator: label count mismatch");
  const auto out = predictor.forward(suppress(x, masks));
  const Vector base = baseline.forward(x).col(0);

  LossEstimate est;
  est.variance = out.logvar.array().exp();
  est.baseline_loss = (y - base).array().square();
  est.predictor_loss.resize(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (mode == Mode::kVanilla) {
      const double r = y(i) - out.mean(i);
      est.predictor_loss(i) = r * r;
    } else {
      est.predictor_loss(i) = gaussian_nll({out.mean(i), out.logvar(i)}, y(i));
    }
  }
  est.advantage = est.baseline_loss - est.predictor_loss;
  return est;
}

void TrainingConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (!(omega >= 0.0)) throw ConfigError("omega must be non-negative");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (hidden == 0) throw ConfigError("hidden width must be positive");
  if (history_interval == 0) throw ConfigError("history_interval must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(adam.learning_rate > 0.0 && adam.beta1 > 0.0 && adam.beta2 > 0.0 &&
        adam.epsilon > 0.0)) {
    throw ConfigError("Adam hyperparameters must be positive");
  }
}

double reward(double advantage, double variance, std::size_t mask_size,
              const TrainingConfig& config) {
  const double sparsity = config.lambda * static_cast<double>(mask_size);
  const double omega = config.effective_omega();
  if (omega == 0.0) return advantage - sparsity;
  return omega * variance + advantage - sparsity;
}

PolicyLoss selector_policy_loss(const Matrix& pi, const Matrix& masks,
                                const Vector& rewards) {
  if (pi.rows() != masks.rows() || pi.cols() != masks.cols() ||
      rewards.size() != pi.rows()) {
    throw UsageError("selector_policy_loss: shape mismatch");
  }
  PolicyLoss out;
  out.grad_pi = Matrix::Zero(pi.rows(), pi.cols());
  if (pi.rows() == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(pi.rows());
  double total = 0.0;
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    double log_prob = 0.0;
    for (Eigen::Index j = 0; j < pi.cols(); ++j) {
      const double raw = pi(i, j);
      const double p = std::clamp(raw, kProbFloor, 1.0 - kProbFloor);
      const bool clamped = p != raw;
      const double s = masks(i, j);
      log_prob += s * std::log(p) + (1.0 - s) * std::log(1.0 - p);
      if (!clamped) {
        out.grad_pi(i, j) = -inv_n * rewards(i) * (s / p - (1.0 - s) / (1.0 - p));
      }
    }
    total += rewards(i) * log_prob;
  }
  out.value = -inv_n * total;
  return out;
}

void TrainedModel::check_consistent() const {
  const std::size_t d = selector.input_dim();
  if (selector.output_dim() != d || predictor.trunk.input_dim() != 2 * d ||
      baseline.input_dim() != d || baseline.output_dim() != 1 ||
      predictor.mean_head.output_dim() != 1 ||
      predictor.mean_head.input_dim() != predictor.trunk.output_dim() ||
      (predictor.has_uncertainty_head() &&
       predictor.logvar_head.input_dim() != predictor.trunk.output_dim())) {
    throw ConfigError("model networks are not dimension-consistent");
  }
}

TrainingDivergence::TrainingDivergence(std::size_t iteration,
                                       std::shared_ptr<const TrainedModel> last_good,
                                       const std::string& what)
    : TrainingError(fmt::format("training diverged at iteration {}: {}", iteration, what)),
      iteration_(iteration),
      last_good_(std::move(last_good)) {}

TrainedModel init_model(std::size_t d, const TrainingConfig& config) {
  config.validate();
  using nn::Activation;
  Rng rng(derive_seed(config.seed, 1));
  const std::size_t h = config.hidden;
  const std::array<nn::LayerSpec, 3> selector_spec = {{{d, h, Activation::kRelu},
                                                       {h, h, Activation::kRelu},
                                                       {h, d, Activation::kSigmoid}}};
  const std::array<nn::LayerSpec, 3> baseline_spec = {{{d, h, Activation::kRelu},
                                                       {h, h, Activation::kRelu},
                                                       {h, 1, Activation::kIdentity}}};
  TrainedModel model;
  model.config = config;
  model.selector = nn::DenseNetwork::glorot(selector_spec, rng);
  model.predictor = Predictor::init(d, h, rng, !config.uncertainty_enabled);
  model.baseline = nn::DenseNetwork::glorot(baseline_spec, rng);
  return model;
}

namespace {

double mean(const Vector& v) { return v.size() == 0 ? 0.0 : v.mean(); }

}  // namespace

TrainedModel train(const data::LabeledDataset& train_set, const TrainingConfig& config,
                   const IterationObserver& observer) {
  const std::size_t n = train_set.size();
  const std::size_t d = train_set.dim();
  if (n == 0) throw UsageError("train: empty training set");
  TrainedModel model = init_model(d, config);
  if (config.iterations == 0) return model;

  Rng batch_rng(derive_seed(config.seed, 2));
  Rng mask_rng(derive_seed(config.seed, 3));
  auto selector_opt = nn::AdamState::for_network(model.selector, config.adam);
  auto trunk_opt = nn::AdamState::for_network(model.predictor.trunk, config.adam);
  auto mean_opt = nn::AdamState::for_network(model.predictor.mean_head, config.adam);
  auto logvar_opt = nn::AdamState::for_network(model.predictor.logvar_head, config.adam);
  auto baseline_opt = nn::AdamState::for_network(model.baseline, config.adam);

  const bool uncertainty = config.uncertainty_enabled;
  const Mode mode = config.mode();
  const std::size_t b = std::min(config.batch_size, n);
  const double inv_b = 1.0 / static_cast<double>(b);
  auto last_good = std::make_shared<const TrainedModel>(model);

  for (std::size_t it = 1; it <= config.iterations; ++it) {
    const auto perm = batch_rng.permutation(n);
    Matrix x(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(d));
    Vector y(static_cast<Eigen::Index>(b));
    for (std::size_t i = 0; i < b; ++i) {
      x.row(static_cast<Eigen::Index>(i)) =
          train_set.features.row(static_cast<Eigen::Index>(perm[i]));
      y(static_cast<Eigen::Index>(i)) = train_set.labels(static_cast<Eigen::Index>(perm[i]));
    }

    try {
      nn::Tape selector_tape;
      const Matrix pi = model.selector.forward(x, &selector_tape);
      if (!pi.allFinite()) throw TrainingError("selector produced non-finite probabilities");
      const Matrix masks = sample_mask(pi, mask_rng);
      const Matrix pred_in = suppress(x, masks);

      // Predictor and variance head.
      Predictor::Tapes ptapes;
      const auto out = model.predictor.forward(pred_in, &ptapes);
      Vector d_mean(y.size());
      Vector d_logvar = Vector::Zero(y.size());
      double predictor_loss = 0.0;
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double r = y(i) - out.mean(i);
        if (uncertainty) {
          const double var = std::exp(out.logvar(i));
          predictor_loss += 0.5 * out.logvar(i) + r * r / (2.0 * var);
          d_mean(i) = -r / var * inv_b;
          d_logvar(i) = (0.5 - r * r / (2.0 * var)) * inv_b;
        } else {
          predictor_loss += r * r;
          d_mean(i) = -2.0 * r * inv_b;
        }
      }
      predictor_loss *= inv_b;
      if (!std::isfinite(predictor_loss)) throw TrainingError("predictor loss is not finite");
      auto pgrads = model.predictor.backward(ptapes, out, d_mean, d_logvar);
      nn::add_l2_penalty(pgrads.trunk, model.predictor.trunk, config.weight_decay);
      nn::add_l2_penalty(pgrads.mean, model.predictor.mean_head, config.weight_decay);
      nn::add_l2_penalty(pgrads.logvar, model.predictor.logvar_head, config.weight_decay);
      nn::adam_step(trunk_opt, model.predictor.trunk, pgrads.trunk);
      nn::adam_step(mean_opt, model.predictor.mean_head, pgrads.mean);
      if (uncertainty) nn::adam_step(logvar_opt, model.predictor.logvar_head, pgrads.logvar);

      // Baseline on the full feature set.
      nn::Tape baseline_tape;
      const Vector base = model.baseline.forward(x, &baseline_tape).col(0);
      const Vector base_res = base - y;
      const double baseline_loss = base_res.squaredNorm() * inv_b;
      if (!std::isfinite(baseline_loss)) throw TrainingError("baseline loss is not finite");
      auto bgrads = model.baseline.backward(baseline_tape, 2.0 * inv_b * base_res);
      nn::add_l2_penalty(bgrads, model.baseline, config.weight_decay);
      nn::adam_step(baseline_opt, model.baseline, bgrads);

      // Rewards from the refreshed critics, then the selector update.
      const LossEstimate est =
          loss_estimator(x, masks, y, model.predictor, model.baseline, mode);
      Vector rewards(y.size());
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const auto l0 = static_cast<std::size_t>((masks.row(i).array() != 0.0).count());
        rewards(i) = reward(est.advantage(i), est.variance(i), l0, config);
      }
      if (!rewards.allFinite()) throw TrainingError("reward is not finite");
      const PolicyLoss policy = selector_policy_loss(pi, masks, rewards);
      auto sgrads = model.selector.backward(selector_tape, policy.grad_pi);
      nn::add_l2_penalty(sgrads, model.selector, config.weight_decay);
      nn::adam_step(selector_opt, model.selector, sgrads);

      if (observer) observer(IterationTrace{it, x, y, pi, masks, est, rewards, model});

      if (it % config.history_interval == 0) {
        model.history.push_back({it, predictor_loss, baseline_loss, mean(rewards),
                                 masks.sum() * inv_b, mean(out.logvar)});
        last_good = std::make_shared<const TrainedModel>(model);
      }
    } catch (const TrainingDivergence&) {
      throw;
    } catch (const TrainingError& e) {
      throw TrainingDivergence(it, last_good, e.what());
    } catch (const DataError& e) {
      throw TrainingDivergence(it, last_good, e.what());
    }
  }
  return model;
}

SelectionMask PredictionBatch::selection(std::size_t i) const {
  const auto r = static_cast<Eigen::Index>(i);
  return {probabilities.row(r).transpose(), masks.row(r).transpose()};
}

GaussianPrediction PredictionBatch::prediction(std::size_t i) const {
  const auto r = static_cast<Eigen::Index>(i);
  return {mean(r), logvar(r)};
}

PredictionBatch predict(const TrainedModel& model, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != model.dim()) {
    throw UsageError(fmt::format("predict: batch width {} does not match model dim {}",
                                 x.cols(), model.dim()));
  }
  PredictionBatch out;
  out.probabilities = select_probabilities(model.selector, x);
  out.masks = threshold_mask(out.probabilities);
  const auto pred = model.predictor.forward(suppress(x, out.masks));
  out.mean = pred.mean;
  out.logvar = pred.logvar;
  return out;
}

}  // namespace uinvase::invase
