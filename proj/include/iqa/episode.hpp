#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iqa/controllers.hpp"
#include "iqa/questions.hpp"

namespace iqa {

inline constexpr int kNumPlannerActions = 32;
inline constexpr int kNavGoalDepth = 5;     // forward offsets 1..5
inline constexpr int kNavGoalHalfWidth = 2;  // lateral offsets -2..2
inline constexpr int kNumNavigateActions = kNavGoalDepth * (2 * kNavGoalHalfWidth + 1);

enum class PlannerKind : std::uint8_t { Navigate, Scan, Open, Close, Answer };

struct PlannerAction {
  PlannerKind kind = PlannerKind::Answer;
  int forward = 0;  // Navigate: 1..5
  int lateral = 0;  // Navigate: -2..2, positive to the right
  ScanDirection direction = ScanDirection::Up;
  friend bool operator==(const PlannerAction&, const PlannerAction&) = default;
};

// Canonical order: Navigate row-major by (forward, lateral), scan u/d/l/r, open, close, answer.
PlannerAction planner_action(int index);
int planner_index(const PlannerAction& a);
std::string planner_action_name(int index);
inline constexpr int kScanUp = 25, kScanDown = 26, kScanLeft = 27, kScanRight = 28;
inline constexpr int kOpenAction = 29, kCloseAction = 30, kAnswerAction = 31;

Cell navigation_goal(const AgentState& agent, int forward, int lateral);

using PlannerMask = std::array<bool, kNumPlannerActions>;

// Ground-truth affordances of all 32 commands in the current state.
PlannerMask valid_planner_actions(const WorldHandle& world);

struct RewardConfig {
  double r_answer = 10.0;
  double c_time = 0.01;
  double c_invalid = 1.0;
  double c_coverage = 10.0;  // per unit of coverage fraction gained
  int max_planner_steps = 100;
  int max_primitive_steps = 2000;
  void validate() const;
};

enum class AnswerSource : std::uint8_t { Memory, CurrentView };
enum class ControlMode : std::uint8_t { Planner, Primitive };

struct EpisodeOptions {
  ControllerConfig controller;
  RewardConfig reward;
  AnswerConfig answer;
  AnswerSource answer_source = AnswerSource::Memory;
  ControlMode control = ControlMode::Planner;
  std::uint64_t detector_seed = 0;
};

struct StepLog {
  int index = 0;
  int action = 0;  // planner index, or low-level index in primitive mode (answer = 7 + choice)
  double reward = 0.0;
  bool predicted_valid = true;  // ground-truth mask before execution
  bool succeeded = true;        // observed outcome of the execution
  AgentState pose;
  double coverage = 0.0;
  int primitive_begin = 0;
  int primitive_end = 0;
  int event_begin = 0;  // slice of the world event stream produced by this step
  int event_end = 0;
};

struct StepResult {
  double reward = 0.0;
  bool done = false;
  bool was_valid = true;
  bool answered = false;
  bool correct = false;
  int answer = -1;
  bool capped = false;
};

struct EpisodeRecord {
  std::string item_id;
  std::uint64_t config_id = 0;
  Split split = Split::Test;
  std::string room_id;
  QuestionType qtype = QuestionType::Existence;
  std::string agent = "scripted";
  ControlMode control = ControlMode::Planner;
  int answer_given = -1;
  int ground_truth = 0;
  bool correct = false;
  int planner_steps = 0;
  int primitive_steps = 0;
  int invalid_commands = 0;
  double total_return = 0.0;
  std::vector<StepLog> steps;
  std::vector<WorldEvent> events;
  std::uint64_t detector_seed = 0;
  std::uint64_t agent_seed = 0;
  std::uint64_t final_digest = 0;
  AgentState final_pose;
};

using RoomTable = std::map<std::string, RoomSpec>;
RoomTable make_room_table(const std::vector<RoomSpec>& rooms);
const RoomSpec& room_for(const RoomTable& rooms, const std::string& room_id);

class Episode {
 public:
  Episode(const RoomSpec& room, const DatasetItem& item, EpisodeOptions options);

  const WorldHandle& world() const { return world_; }
  const Question& question() const { return item_.question; }
  const DatasetItem& item() const { return item_; }
  const EpisodeOptions& options() const { return options_; }
  bool done() const { return done_; }
  int planner_steps() const { return static_cast<int>(steps_.size()); }
  int invalid_commands() const { return invalid_; }
  double total_return() const { return return_; }
  const std::vector<StepLog>& steps() const { return steps_; }
  int last_action() const { return last_action_; }
  bool last_succeeded() const { return last_succeeded_; }

  PlannerMask valid_mask() const { return valid_planner_actions(world_); }
  std::array<bool, kNumLowLevelActions> valid_primitive_mask() const;

  // Planner-control step.
  StepResult step(int planner_index);
  // Primitive-control step (7 low-level actions).
  StepResult step_primitive(int low_level_index);
  // Submits an explicit choice (human answer dialog, MLA).
  StepResult answer_with(int choice);

  // Choice the Answerer would submit right now.
  int readout() const;

  EpisodeRecord record(const std::string& agent, std::uint64_t agent_seed = 0) const;

 private:
  StepResult finish_step(int action, bool predicted_valid, bool succeeded, double coverage_before, int primitive_before,
                         int event_before, std::optional<int> answer);

  DatasetItem item_;
  EpisodeOptions options_;
  WorldHandle world_;
  std::vector<StepLog> steps_;
  int invalid_ = 0;
  double return_ = 0.0;
  bool done_ = false;
  int answer_ = -1;
  bool correct_ = false;
  int last_action_ = -1;
  bool last_succeeded_ = true;
};

// The Answerer's choice for a world state under the episode's answer source.
int readout_choice(const WorldHandle& world, const Question& q, const EpisodeOptions& options);

// Rebuilds the world from a record's event stream.
WorldHandle replay_world(const RoomSpec& room, const SceneConfig& config, const ControllerConfig& controller,
                         std::uint64_t detector_seed, const std::vector<WorldEvent>& events);

}  // namespace iqa
