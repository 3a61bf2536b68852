#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "iqa/world.hpp"

namespace iqa {

inline constexpr int kRoomSchemaVersion = 1;

nlohmann::json room_to_json(const RoomSpec& room);
RoomSpec room_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const SceneConfig& config);
SceneConfig config_from_json(const nlohmann::json& j);

nlohmann::json agent_to_json(const AgentState& a);
AgentState agent_from_json(const nlohmann::json& j);

nlohmann::json cell_to_json(Cell c);
Cell cell_from_json(const nlohmann::json& j);

RoomSpec read_room(const std::filesystem::path& path);
void write_room(const RoomSpec& room, const std::filesystem::path& path);
// All *.json rooms in a directory except split.json, sorted by room_id.
std::vector<RoomSpec> read_room_dir(const std::filesystem::path& dir);

// Procedural kitchen layout with walls hugging receptacles and a connected floor.
// Every openable receptacle is openable from some free cell.
RoomSpec generate_kitchen(const std::string& room_id, int width, int height, std::uint64_t seed);

// True if every receptacle can be seen at its height band from a free cell
// within interaction range (and, if openable, opened from there).
bool receptacles_serviceable(const RoomSpec& room, const VisibilityConfig& vis = {});

struct RoomSet {
  std::vector<RoomSpec> train;
  std::vector<RoomSpec> test;
};

struct RoomSetOptions {
  std::string prefix = "kitchen";
  int count = 30;
  int train_rooms = 25;
  int min_size = 10;
  int max_size = 14;
  std::uint64_t seed = 0;
};

// Rooms <prefix>_01.. with side lengths drawn from [min_size, max_size]; the
// first train_rooms go to the training split.
RoomSet generate_room_set(const RoomSetOptions& opts);
// Writes every room plus split.json.
void write_room_set(const RoomSet& set, const std::filesystem::path& dir);
// Reads a room directory; split.json decides the split when present, otherwise
// the first train_rooms (by id) are training rooms.
RoomSet read_room_set(const std::filesystem::path& dir, int train_rooms = 25);

}  // namespace iqa
