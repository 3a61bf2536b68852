#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "iqa/config.hpp"
#include "iqa/features.hpp"
#include "iqa/policy.hpp"
#include "iqa/scripted.hpp"
#include "iqa/training.hpp"

namespace iqa {

enum class AgentKind : std::uint8_t { Scripted, ActorCritic, Memoryless, MLA };

struct AgentSpec {
  AgentKind kind = AgentKind::Scripted;
  std::string name = "scripted";
  PolicyParams params;
  FeatureOptions features;
  SamplingOptions sampling;
  std::array<int, kNumQuestionTypes> mla_choice{};
  ScriptedOptions scripted;

  static AgentSpec scripted_agent(ScriptedOptions opts = {});
  static AgentSpec mla(std::array<int, kNumQuestionTypes> choices);
  static AgentSpec learned(std::string name, PolicyParams params, FeatureOptions features, SamplingOptions sampling = {});
};

struct RunOptions {
  EpisodeOptions episode;
  std::uint64_t seed = 0;
  bool parallel = true;
  std::filesystem::path log_dir;  // empty: no trajectory logs
};

std::uint64_t detector_seed_for(std::uint64_t seed, const std::string& item_id);
std::uint64_t agent_seed_for(std::uint64_t seed, const std::string& item_id);

// Runs one episode to completion. `opened` receives the receptacles a scripted agent opened.
EpisodeRecord run_episode(const AgentSpec& agent, const RoomSpec& room, const DatasetItem& item, EpisodeOptions options,
                          std::uint64_t agent_seed, std::set<int>* opened = nullptr);

// One record per item, in item order; episodes fan out over OpenMP threads.
std::vector<EpisodeRecord> run_episodes(const AgentSpec& agent, const RoomTable& rooms,
                                        const std::vector<DatasetItem>& items, const RunOptions& options);

struct QtypeMetrics {
  int episodes = 0;
  int correct = 0;
  double accuracy = 0.0;
  double mean_length = 0.0;  // primitive steps
  double mean_planner_steps = 0.0;
  long planner_commands = 0;
  long invalid_commands = 0;
  double invalid_pct = 0.0;
};

struct SliceMetrics {
  std::array<QtypeMetrics, kNumQuestionTypes> per_qtype{};
  QtypeMetrics overall;
};

// Slices: "all", "seen" (rooms used for training), "unseen" (held-out rooms).
struct MetricsReport {
  std::map<std::string, SliceMetrics> slices;
  const SliceMetrics& slice(const std::string& name) const;
};

MetricsReport compute_metrics(const std::vector<EpisodeRecord>& records, const std::map<std::string, Split>& room_split);

using MetricsRows = std::vector<std::pair<std::string, MetricsReport>>;
std::string format_metrics_table(const MetricsRows& rows, const std::string& slice = "all");
void write_metrics_csv(const MetricsRows& rows, const std::filesystem::path& path);

struct AblationConfig {
  RunConfig run;
  std::filesystem::path out_dir;  // snapshots, curves, metrics; empty: nothing written
  std::vector<std::string> arms;  // empty: all
};

struct AblationRow {
  std::string name;
  MetricsReport report;
  std::vector<EpochStats> curves;
};

std::vector<std::string> ablation_arm_names();

// Trains the learned arms on the train split (same budget and seeds) and
// evaluates every arm on the test split.
std::vector<AblationRow> run_ablation_suite(const AblationConfig& cfg, const RoomTable& rooms, const Dataset& dataset);

}  // namespace iqa
