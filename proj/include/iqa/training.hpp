#pragma once

#include <filesystem>
#include <vector>

#include "iqa/features.hpp"
#include "iqa/policy.hpp"

namespace iqa {

struct TrainingConfig {
  int num_envs = 8;
  int n_steps = 5;
  double gamma = 0.99;
  LossWeights loss;
  AdamConfig adam;
  int updates = 3000;
  int updates_per_epoch = 100;
  double init_scale = 0.01;
  std::uint64_t seed = 0;
  bool parallel = true;
  std::filesystem::path dump_dir;  // where a divergence dumps its state; empty = temp dir
};

struct EpochStats {
  int epoch = 0;
  int updates = 0;
  int episodes = 0;
  std::array<int, kNumQuestionTypes> episodes_per_qtype{};
  std::array<double, kNumQuestionTypes> accuracy{};
  double mean_primitive_length = 0.0;
  double mean_planner_length = 0.0;
  double invalid_pct = 0.0;
  double mean_return = 0.0;
  double mean_loss = 0.0;
  double mean_entropy = 0.0;
};

struct TrainingResult {
  PolicyParams params;
  std::vector<EpochStats> curves;
};

struct TrainingSlice {
  const RoomTable* rooms = nullptr;
  std::vector<DatasetItem> items;
};

TrainingResult train_actor_critic(const TrainingSlice& slice, const EpisodeOptions& env, const FeatureOptions& features,
                                  const TrainingConfig& cfg);

void write_curves_csv(const std::vector<EpochStats>& curves, const std::filesystem::path& path);

}  // namespace iqa
