#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "uinvase/invase.hpp"

namespace uinvase::invase {

// A model checkpoint is two files:
//   <path>            {"format": "uinvase.model/1", "selector": N, "baseline": N,
//                      "predictor": {"trunk": N, "mean_head": N, "logvar_head": N}}
//   <path>.meta.json  {"format": "uinvase.model-meta/1", "config": {...},
//                      "history": [{iteration, predictor_loss, ...}, ...]}
// where N is a network document (see nn/checkpoint.hpp).
inline constexpr std::string_view kModelFormat = "uinvase.model/1";
inline constexpr std::string_view kModelMetaFormat = "uinvase.model-meta/1";

nlohmann::json config_to_json(const TrainingConfig& config);
// Unknown keys are rejected; missing keys keep their defaults.
TrainingConfig config_from_json(const nlohmann::json& doc);

std::filesystem::path meta_path(const std::filesystem::path& checkpoint);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
// Throws MissingArtifactError when either file is absent.
TrainedModel load_model(const std::filesystem::path& path);

// Header: iteration,predictor_loss,baseline_loss,mean_reward,mean_mask_size,mean_logvar
std::string history_csv(const std::vector<TrainingRecord>& history);

}  // namespace uinvase::invase
