#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "iqa/common.hpp"

namespace iqa {

struct ObjectInstance {
  int class_id = 0;  // small-object class, [0, kNumObjectClasses)
  int instance_id = 0;
  friend bool operator==(const ObjectInstance&, const ObjectInstance&) = default;
};

struct Receptacle {
  Cell cell;
  ReceptacleClass class_id = ReceptacleClass::Countertop;
  bool openable = false;
  bool is_open = false;
  HeightBand height_band = HeightBand::Mid;
  std::vector<ObjectInstance> contents;  // inside; hidden while closed
  std::vector<ObjectInstance> surface;   // on top
};

struct FloorObject {
  Cell cell;
  ObjectInstance object;
};

struct ReceptacleSpec {
  Cell cell;
  ReceptacleClass class_id = ReceptacleClass::Countertop;
  HeightBand height_band = HeightBand::Mid;
  bool openable = false;
};

// Static room layout. The outer ring of cells is always wall.
struct RoomSpec {
  std::string room_id;
  int width = 0;
  int height = 0;
  std::vector<Cell> walls;  // interior walls / furniture footprints
  std::vector<ReceptacleSpec> receptacles;
  std::vector<Cell> floor_sites;  // floor cells eligible for loose objects
  std::uint64_t seed = 0;
};

struct AgentState {
  Cell cell;
  Heading heading = Heading::N;
  Pitch pitch = Pitch::Level;
  friend bool operator==(const AgentState&, const AgentState&) = default;
};

enum class LocationKind : std::uint8_t { Floor, Inside, On };

struct Placement {
  ObjectInstance object;
  LocationKind kind = LocationKind::Floor;
  Cell cell;  // floor cell, or the receptacle's cell
  friend bool operator==(const Placement&, const Placement&) = default;
};

struct SceneConfig {
  std::string room_id;
  std::vector<Placement> placements;
  AgentState start;
  std::uint64_t seed = 0;
};

class Scene {
 public:
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> wall;  // row-major, 1 = wall
  std::vector<Receptacle> receptacles;
  std::vector<FloorObject> loose_objects;
  std::string room_id;
  std::uint64_t rng_seed = 0;

  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  int index(Cell c) const { return c.y * width + c.x; }
  bool is_wall(Cell c) const { return wall[static_cast<std::size_t>(index(c))] != 0; }
  // Index into receptacles, or -1.
  int receptacle_at(Cell c) const { return receptacle_index_[static_cast<std::size_t>(index(c))]; }
  bool is_free(Cell c) const { return in_bounds(c) && !is_wall(c) && receptacle_at(c) < 0; }
  int free_cell_count() const;
  std::vector<std::uint8_t> free_mask() const;

  void rebuild_index();

 private:
  std::vector<int> receptacle_index_;
};

// Frustum and interaction constants. Distances are in cells (1 cell = 25 cm).
struct VisibilityConfig {
  double max_range = 12.0;
  double fov_degrees = 90.0;
  double interaction_range = 4.0;
  std::array<double, 2> down_range{0.0, 4.0};
  std::array<double, 2> level_range{2.0, 12.0};
  std::array<double, 2> up_range{4.0, 12.0};

  std::array<double, 2> range_for(Pitch p) const;
};

enum class LowLevelAction : std::uint8_t { MoveAhead, RotateLeft, RotateRight, LookUp, LookDown, Open, Close };
inline constexpr int kNumLowLevelActions = 7;

enum class InvalidReason : std::uint8_t { None, Blocked, PitchLimit, NotInView, OutOfRange, AlreadyOpen, AlreadyClosed };
std::string_view reason_name(InvalidReason r);
std::string_view action_name(LowLevelAction a);

struct ActionOutcome {
  bool success = true;
  InvalidReason reason = InvalidReason::None;
};

struct ActionResult {
  AgentState agent;
  ActionOutcome outcome;
  int receptacle = -1;  // receptacle toggled by Open/Close
};

struct VisibleCell {
  Cell cell;
  bool is_free = false;
  // Everything at this cell that can ever be seen is currently in view: floor
  // cells under a floor-facing camera, receptacles at a matching pitch that are
  // not hiding closed contents.
  bool fully_visible = false;
};

struct VisibleReceptacle {
  int index = -1;
  ReceptacleClass class_id = ReceptacleClass::Countertop;
  Cell cell;
  bool openable = false;
  bool is_open = false;
  HeightBand height_band = HeightBand::Mid;
  double range = 0.0;
  double angle_degrees = 0.0;
};

struct VisibleObject {
  int class_id = 0;
  int instance_id = 0;
  Cell cell;
  int receptacle = -1;
};

struct Observation {
  AgentState pose;
  std::vector<VisibleCell> cells;
  std::vector<VisibleReceptacle> receptacles;
  std::vector<VisibleObject> objects;
};

Scene load_scene(const RoomSpec& room, const SceneConfig& config);

ActionResult apply_action(Scene& scene, const AgentState& agent, LowLevelAction action,
                          const VisibilityConfig& vis = {});

Observation observe(const Scene& scene, const AgentState& agent, const VisibilityConfig& vis = {});

std::array<bool, kNumLowLevelActions> valid_low_level(const Scene& scene, const AgentState& agent,
                                                       const VisibilityConfig& vis = {});

// Cells strictly between from and to on the Bresenham line.
std::vector<Cell> bresenham_interior(Cell from, Cell to);
bool line_of_sight(const Scene& scene, Cell from, Cell to);
// Frustum, pitch range and occlusion test for a single cell.
bool cell_in_view(const Scene& scene, const AgentState& agent, Cell c, const VisibilityConfig& vis = {});

// All cells connected to the first free cell; used for the connectivity invariant.
bool free_space_connected(const Scene& scene);

// Digest of the mutable scene state plus agent pose; replay compares these.
std::uint64_t state_digest(const Scene& scene, const AgentState& agent);

}  // namespace iqa
