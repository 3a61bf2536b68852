#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "iqa/features.hpp"
#include "iqa/scripted.hpp"
#include "iqa/training.hpp"

namespace iqa {

struct EvalConfig {
  bool greedy = false;
  bool mask_predicted_invalid = false;
  std::uint64_t seed = 0;
  bool parallel = true;
  bool write_logs = false;
  int window_size = 5;
};

// One JSON document with sections world, detector, memory, reward, training, eval.
struct RunConfig {
  ControllerConfig controller;
  // Unset means: 1.0 under an oracle detector (one sighting is conclusive), 0.5 otherwise.
  std::optional<double> memory_alpha;
  RewardConfig reward;
  AnswerConfig answer;
  TrainingConfig training;
  EvalConfig eval;
  ScriptedOptions scripted;

  RunConfig();
  // Episode options for a given detector, with the memory rate resolved.
  EpisodeOptions episode_options(const DetectorModel& detector) const;
  EpisodeOptions episode_options() const { return episode_options(controller.detector); }
};

nlohmann::json detector_to_json(const DetectorModel& d);
DetectorModel detector_from_json(const nlohmann::json& j);
nlohmann::json controller_to_json(const ControllerConfig& c);
ControllerConfig controller_from_json(const nlohmann::json& j);
nlohmann::json episode_options_to_json(const EpisodeOptions& o);
EpisodeOptions episode_options_from_json(const nlohmann::json& j);

nlohmann::json feature_options_to_json(const FeatureOptions& f);
FeatureOptions feature_options_from_json(const nlohmann::json& j);

nlohmann::json run_config_to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace iqa
