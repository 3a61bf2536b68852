#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "iqa/episode.hpp"

namespace iqa {

inline constexpr const char* kLogSchema = "iqa.log/1";

// Dense snapshot with a channel-name header.
nlohmann::json memory_snapshot(const SpatialMemory& mem);
SpatialMemory memory_from_snapshot(const nlohmann::json& j);

nlohmann::json event_to_json(const WorldEvent& e);
WorldEvent event_from_json(const nlohmann::json& j);

// gzip-compressed JSON lines: a header (item, room, options, seeds, events
// before the first step), one line per step, and a result line with totals
// and the final memory.
void write_episode_log(const std::filesystem::path& path, const EpisodeRecord& record, const RoomSpec& room,
                       const DatasetItem& item, const EpisodeOptions& options, const SpatialMemory& final_memory,
                       bool memory_per_step = false);

struct EpisodeLog {
  nlohmann::json header;
  std::vector<nlohmann::json> steps;
  nlohmann::json result;
};

EpisodeLog read_episode_log(const std::filesystem::path& path);

// Rebuilds the record (without seeds' provenance beyond what the log stores).
EpisodeRecord record_from_log(const EpisodeLog& log);

struct ReplayReport {
  bool state_match = false;   // scene + pose digest
  bool memory_match = false;  // final memory bit-identical
  bool answer_match = false;
  bool totals_match = false;
  std::string detail;
  bool ok() const { return state_match && memory_match && answer_match && totals_match; }
};

ReplayReport replay_log(const EpisodeLog& log);
ReplayReport replay_log(const std::filesystem::path& path);

// Maps an arbitrary id to [A-Za-z0-9_-], replacing anything else with '_'.
std::string sanitize_log_id(const std::string& id);
// File name of the log for one agent/item pair inside a log directory.
std::string episode_log_name(const std::string& agent, const std::string& item_id);

// Low-level reading of gzip JSON lines, used by the replay endpoint.
std::vector<std::string> read_gzip_lines(const std::filesystem::path& path);

}  // namespace iqa
