#pragma once

#include <array>
#include <optional>
#include <vector>

#include "iqa/memory.hpp"
#include "iqa/questions.hpp"
#include "iqa/rng.hpp"
#include "iqa/world.hpp"

namespace iqa {

// Parametric stand-in for a learned detector + depth projection.
struct DetectorModel {
  enum class Mode : std::uint8_t { Oracle, Noisy };
  Mode mode = Mode::Oracle;
  std::array<double, kNumObjectClasses> recall{};               // rho per class
  std::array<double, kNumObjectClasses> false_positive_rate{};  // phi per (visible cell, class)
  double localization_noise = 0.0;                              // lambda

  static DetectorModel oracle();
  static DetectorModel noisy(double recall, double false_positive_rate, double localization_noise);
  bool is_oracle() const { return mode == Mode::Oracle; }
  void validate() const;
};

Detections detect(const Observation& obs, const DetectorModel& model, Rng& rng, int width, int height);

// Free-space probabilities: > 0.5 known free, == 0.5 unknown, < 0.5 blocked.
struct OccupancyGrid {
  int width = 0;
  int height = 0;
  std::vector<double> free_prob;

  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  double at(Cell c) const { return free_prob[static_cast<std::size_t>(c.y * width + c.x)]; }
};

OccupancyGrid occupancy_from_memory(const SpatialMemory& mem);
OccupancyGrid occupancy_from_scene(const Scene& scene);

struct AStarConfig {
  double known_cost = 1.0;
  double unknown_cost = 2.0;
  double unknown_tolerance = 1e-9;  // |p - 0.5| within this counts as unknown
};

// Cost of entering c, or nullopt if c is (believed) blocked.
std::optional<double> step_cost(const OccupancyGrid& grid, Cell c, const AStarConfig& cfg);

// 4-connected minimum-cost path including both endpoints, or nullopt when unreachable.
std::optional<std::vector<Cell>> astar(const OccupancyGrid& grid, Cell start, Cell goal, const AStarConfig& cfg = {});
double path_cost(const OccupancyGrid& grid, const std::vector<Cell>& path, const AStarConfig& cfg = {});

enum class NavigatorMode : std::uint8_t { Memory, Oracle };

struct ControllerConfig {
  VisibilityConfig visibility;
  MemoryConfig memory;
  DetectorModel detector = DetectorModel::oracle();
  AStarConfig astar;
  NavigatorMode navigator = NavigatorMode::Memory;
  int scan_every = 8;         // primitive moves between wide-angle scans
  int max_nav_steps = 200;    // primitive steps per navigate call
  int max_primitive_steps = 2000;
};

struct PrimitiveRecord {
  LowLevelAction action = LowLevelAction::MoveAhead;
  bool success = true;
};

// Everything that touches world or memory state, in order; replaying the
// events against a fresh handle with the same seeds reproduces both exactly.
struct WorldEvent {
  enum class Kind : std::uint8_t { Act, Perceive, Blocked, Intent };
  Kind kind = Kind::Act;
  LowLevelAction action = LowLevelAction::MoveAhead;
  Cell cell;
  friend bool operator==(const WorldEvent&, const WorldEvent&) = default;
};

// Per-episode world state shared by all controllers: ground-truth scene,
// agent pose, spatial memory and the detector's random stream.
class WorldHandle {
 public:
  WorldHandle(Scene scene, AgentState start, ControllerConfig cfg, std::uint64_t detector_seed);

  const Scene& scene() const { return scene_; }
  const AgentState& agent() const { return agent_; }
  const SpatialMemory& memory() const { return memory_; }
  const ControllerConfig& config() const { return cfg_; }
  const std::vector<PrimitiveRecord>& trace() const { return trace_; }
  int primitive_steps() const { return static_cast<int>(trace_.size()); }
  bool primitive_budget_left() const { return primitive_steps() < cfg_.max_primitive_steps; }
  const Observation& last_observation() const { return last_obs_; }
  const Detections& last_detections() const { return last_det_; }
  int detector_passes() const { return detector_passes_; }

  // One primitive action against ground truth; recorded in the trace.
  ActionResult act(LowLevelAction action);
  // Observe, run the detector and fuse into memory.
  void perceive();
  // Fuse a bump into a cell found blocked by MoveAhead.
  void record_blocked(Cell c);
  void mark_intent(Cell goal);
  const std::vector<WorldEvent>& events() const { return events_; }
  // Re-executes a recorded event stream.
  void apply_event(const WorldEvent& e);

 private:
  Scene scene_;
  AgentState agent_;
  ControllerConfig cfg_;
  SpatialMemory memory_;
  Rng detector_rng_;
  std::vector<PrimitiveRecord> trace_;
  std::vector<WorldEvent> events_;
  Observation last_obs_;
  Detections last_det_;
  int detector_passes_ = 0;
};

enum class NavOutcome : std::uint8_t { Arrived, TerminatedUnreachable, BudgetExhausted };
std::string_view nav_outcome_name(NavOutcome o);

struct NavResult {
  NavOutcome outcome = NavOutcome::Arrived;
  int primitive_steps = 0;
  // Cells entered, in order; the start cell is not included.
  std::vector<Cell> visited;
  // Every path the navigator planned, in order.
  std::vector<std::vector<Cell>> plans;
};

NavResult navigate(WorldHandle& world, Cell goal, int budget);

enum class ScanDirection : std::uint8_t { Up, Down, Left, Right };
// One primitive camera motion (clamped at pitch limits) followed by a detector pass.
ActionOutcome scan(WorldHandle& world, ScanDirection direction);

// Open/close through the environment; a success triggers one detector pass.
ActionOutcome manipulate(WorldHandle& world, bool open);

struct AnswerConfig {
  double tau = 0.5;
  double epsilon = 0.01;
};

struct AnswerDistribution {
  std::vector<double> probabilities;
  int choice() const;
};

// Deterministic readout of the memory for question q.
AnswerDistribution answer(const SpatialMemory& mem, const Question& q, const AnswerConfig& cfg = {});

// Memory holding exactly the ground-truth contents of every cell (all
// receptacles open, everything inspected); the Answerer's exactness reference.
SpatialMemory ground_truth_memory(const Scene& scene);

}  // namespace iqa
