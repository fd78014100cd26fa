#include "uinvase/model_io.hpp"

#include <fmt/format.h>

#include "uinvase/checkpoint.hpp"

namespace uinvase::invase {

using nlohmann::json;

json config_to_json(const TrainingConfig& c) {
  return {{"lambda", c.lambda},
          {"omega", c.omega},
          {"uncertainty_enabled", c.uncertainty_enabled},
          {"iterations", c.iterations},
          {"batch_size", c.batch_size},
          {"hidden", c.hidden},
          {"history_interval", c.history_interval},
          {"weight_decay", c.weight_decay},
          {"seed", c.seed},
          {"learning_rate", c.adam.learning_rate},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"epsilon", c.adam.epsilon}};
}

TrainingConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("training config must be a JSON object");
  TrainingConfig c;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "lambda") c.lambda = value.get<double>();
      else if (key == "omega") c.omega = value.get<double>();
      else if (key == "uncertainty_enabled") c.uncertainty_enabled = value.get<bool>();
      else if (key == "iterations") c.iterations = value.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "hidden") c.hidden = value.get<std::size_t>();
      else if (key == "history_interval") c.history_interval = value.get<std::size_t>();
      else if (key == "weight_decay") c.weight_decay = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "learning_rate") c.adam.learning_rate = value.get<double>();
      else if (key == "beta1") c.adam.beta1 = value.get<double>();
      else if (key == "beta2") c.adam.beta2 = value.get<double>();
      else if (key == "epsilon") c.adam.epsilon = value.get<double>();
      else throw ConfigError(fmt::format("unknown training key '{}'", key));
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("training config: {}", e.what()));
  }
  c.validate();
  return c;
}

std::filesystem::path meta_path(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".meta.json";
  return p;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  json doc = {{"format", std::string(kModelFormat)},
              {"selector", nn::network_to_json(model.selector)},
              {"baseline", nn::network_to_json(model.baseline)},
              {"predictor",
               {{"trunk", nn::network_to_json(model.predictor.trunk)},
                {"mean_head", nn::network_to_json(model.predictor.mean_head)},
                {"logvar_head", nn::network_to_json(model.predictor.logvar_head)}}}};
  nn::write_json_file(doc, path);

  json history = json::array();
  for (const auto& r : model.history) {
    history.push_back({{"iteration", r.iteration},
                       {"predictor_loss", r.predictor_loss},
                       {"baseline_loss", r.baseline_loss},
                       {"mean_reward", r.mean_reward},
                       {"mean_mask_size", r.mean_mask_size},
                       {"mean_logvar", r.mean_logvar}});
  }
  nn::write_json_file({{"format", std::string(kModelMetaFormat)},
                       {"config", config_to_json(model.config)},
                       {"history", std::move(history)}},
                      meta_path(path));
}

TrainedModel load_model(const std::filesystem::path& path) {
  const json doc = nn::read_json_file(path);
  const json meta = nn::read_json_file(meta_path(path));
  TrainedModel model;
  try {
    if (doc.at("format").get<std::string>() != kModelFormat ||
        meta.at("format").get<std::string>() != kModelMetaFormat) {
      throw ConfigError(fmt::format("{}: unsupported checkpoint format", path.string()));
    }
    model.selector = nn::network_from_json(doc.at("selector"));
    model.baseline = nn::network_from_json(doc.at("baseline"));
    const auto& p = doc.at("predictor");
    model.predictor.trunk = nn::network_from_json(p.at("trunk"));
    model.predictor.mean_head = nn::network_from_json(p.at("mean_head"));
    model.predictor.logvar_head = nn::network_from_json(p.at("logvar_head"));
    model.config = config_from_json(meta.at("config"));
    for (const auto& r : meta.at("history")) {
      model.history.push_back({r.at("iteration").get<std::size_t>(),
                               r.at("predictor_loss").get<double>(),
                               r.at("baseline_loss").get<double>(),
                               r.at("mean_reward").get<double>(),
                               r.at("mean_mask_size").get<double>(),
                               r.at("mean_logvar").get<double>()});
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: malformed checkpoint: {}", path.string(), e.what()));
  }
  model.check_consistent();
  return model;
}

std::string history_csv(const std::vector<TrainingRecord>& history) {
  std::string out =
      "iteration,predictor_loss,baseline_loss,mean_reward,mean_mask_size,mean_logvar\n";
  for (const auto& r : history) {
    out += fmt::format("{},{},{},{},{},{}\n", r.iteration, r.predictor_loss,
                       r.baseline_loss, r.mean_reward, r.mean_mask_size, r.mean_logvar);
  }
  return out;
}

}  // namespace uinvase::invase
