#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "iqa/rng.hpp"
#include "iqa/world.hpp"

namespace iqa {

enum class QuestionType : std::uint8_t { Existence = 0, Counting = 1, SpatialRelationship = 2 };
inline constexpr int kNumQuestionTypes = 3;
std::string_view qtype_name(QuestionType t);
std::optional<QuestionType> qtype_from_name(std::string_view name);

inline constexpr int kMaxCount = 3;

struct Question {
  QuestionType qtype = QuestionType::Existence;
  int object_class = 0;
  std::optional<ReceptacleClass> container;  // SpatialRelationship only
  std::vector<std::string> choices;
  std::string text;

  int num_choices() const { return static_cast<int>(choices.size()); }
};

// Builds the template text and the fixed choice list: [yes, no] or [0, 1, 2, 3].
Question make_question(QuestionType qtype, int object_class, std::optional<ReceptacleClass> container = std::nullopt);

// Index into q.choices. yes = 0, no = 1; counting answers index their count.
int answer_of(const Scene& scene, const Question& q);
int answer_of(const RoomSpec& room, const SceneConfig& config, const Question& q);

// One placement site per receptacle (inside if openable, on top otherwise) and
// one per designated floor cell.
struct Site {
  LocationKind kind = LocationKind::Floor;
  Cell cell;
  std::optional<ReceptacleClass> receptacle;
};
std::vector<Site> placement_sites(const RoomSpec& room);
std::vector<Cell> room_free_cells(const RoomSpec& room);

struct ClassRequirement {
  int object_class = 0;
  int count = 0;
  // If set, at least `min_in_container` instances sit in/on receptacles of this class.
  std::optional<ReceptacleClass> container;
  int min_in_container = 0;
  // If set, no instance sits in/on a receptacle of this class.
  std::optional<ReceptacleClass> forbidden_container;
  // If true, only sites hidden until opened are eligible.
  bool hidden_only = false;
};

struct ConfigConstraints {
  std::vector<ClassRequirement> required;
  // Classes not named in `required` get a uniform count in [min, max].
  int distractor_min = 0;
  int distractor_max = 2;
  bool place_distractors = true;
};

SceneConfig generate_configuration(const RoomSpec& room, const ConfigConstraints& constraints, Rng& rng);

// Constraints forcing answer `answer` to question q.
ConfigConstraints constraints_for_answer(const Question& q, int answer, Rng& rng, const RoomSpec& room);

enum class Split : std::uint8_t { Train, Test };
std::string_view split_name(Split s);

struct DatasetItem {
  std::string item_id;
  Question question;
  SceneConfig config;
  int answer = 0;
  Split split = Split::Train;
  std::uint64_t config_id = 0;
};

struct Dataset {
  std::vector<DatasetItem> items;
  std::map<std::string, Split> room_split;
  double scale_factor = 1.0;
  std::uint64_t seed = 0;
};

struct DatasetOptions {
  double scale_factor = 1.0;
  std::uint64_t seed = 0;
  int train_per_room_qtype = 1024;  // paper-scale item counts before scaling
  int test_per_room_qtype = 128;
  int max_questions_per_room_qtype = 8;
  // Also emit test items with fresh placements in the training rooms
  // (the "seen" evaluation slice).
  bool seen_test = false;
  bool parallel = true;
};

// Number of items per (room, qtype) after scaling: rounded to the nearest
// multiple of the choice count, at least one full block.
int scaled_item_count(int paper_count, double scale, int num_choices);
// Largest question count q <= max_q with items divisible by q * num_choices.
int questions_for(int items, int num_choices, int max_q);

Dataset generate_dataset(const std::vector<RoomSpec>& train_rooms, const std::vector<RoomSpec>& test_rooms,
                         const DatasetOptions& options);

struct BalanceReport {
  // [split][qtype] -> item count
  std::map<Split, std::array<int, kNumQuestionTypes>> counts;
  std::map<Split, int> rooms;
  int questions_checked = 0;
  std::map<Split, int> totals;
};

BalanceReport verify_balance(const Dataset& dataset);

std::uint64_t config_digest(const SceneConfig& config);

nlohmann::json question_to_json(const Question& q);
Question question_from_json(const nlohmann::json& j);
nlohmann::json item_to_json(const DatasetItem& item);
DatasetItem item_from_json(const nlohmann::json& j);

inline constexpr int kDatasetSchemaVersion = 1;
// dataset.jsonl + manifest.json (+ rooms/ copies) under dir.
void write_dataset(const Dataset& dataset, const std::vector<RoomSpec>& rooms, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace iqa
