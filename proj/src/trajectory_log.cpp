#include "iqa/trajectory_log.hpp"

#include <cctype>
#include <cstring>

#include <zlib.h>

#include "iqa/config.hpp"
#include "iqa/room_io.hpp"

namespace iqa {

using nlohmann::json;

json memory_snapshot(const SpatialMemory& mem) {
  return {{"height", mem.height()},
          {"width", mem.width()},
          {"num_classes", mem.num_classes()},
          {"channels", mem.channel_names()},
          {"layout", "row-major cells, channels innermost"},
          {"coverage_domain", mem.coverage_domain()},
          {"values", std::vector<double>(mem.data().begin(), mem.data().end())}};
}

SpatialMemory memory_from_snapshot(const json& j) {
  return memory_from_values(j.at("height").get<int>(), j.at("width").get<int>(), j.at("num_classes").get<int>(),
                            j.at("values").get<std::vector<double>>(),
                            j.at("coverage_domain").get<std::vector<std::uint8_t>>());
}

namespace {

constexpr const char* kEventKinds[] = {"act", "perceive", "blocked", "intent"};

json events_json(const std::vector<WorldEvent>& events, int begin, int end) {
  json arr = json::array();
  for (int i = begin; i < end; ++i) arr.push_back(event_to_json(events[static_cast<std::size_t>(i)]));
  return arr;
}

class GzWriter {
 public:
  explicit GzWriter(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    f_ = gzopen(path.string().c_str(), "wb");
    if (!f_) throw Error("cannot write log " + path.string());
  }
  ~GzWriter() {
    if (f_) gzclose(f_);
  }
  GzWriter(const GzWriter&) = delete;
  GzWriter& operator=(const GzWriter&) = delete;

  void line(const json& j) {
    const std::string s = j.dump() + "\n";
    if (gzwrite(f_, s.data(), static_cast<unsigned>(s.size())) != static_cast<int>(s.size())) throw Error("log write failed");
  }

 private:
  gzFile f_ = nullptr;
};

}  // namespace

json event_to_json(const WorldEvent& e) {
  json j = {{"k", kEventKinds[static_cast<int>(e.kind)]}};
  if (e.kind == WorldEvent::Kind::Act) j["a"] = static_cast<int>(e.action);
  if (e.kind == WorldEvent::Kind::Blocked || e.kind == WorldEvent::Kind::Intent) j["c"] = cell_to_json(e.cell);
  return j;
}

WorldEvent event_from_json(const json& j) {
  WorldEvent e;
  const std::string k = j.at("k").get<std::string>();
  for (int i = 0; i < 4; ++i)
    if (k == kEventKinds[i]) e.kind = static_cast<WorldEvent::Kind>(i);
  if (j.contains("a")) e.action = static_cast<LowLevelAction>(j.at("a").get<int>());
  if (j.contains("c")) e.cell = cell_from_json(j.at("c"));
  return e;
}

void write_episode_log(const std::filesystem::path& path, const EpisodeRecord& record, const RoomSpec& room,
                       const DatasetItem& item, const EpisodeOptions& options, const SpatialMemory& final_memory,
                       bool memory_per_step) {
  GzWriter out(path);
  const int first = record.steps.empty() ? static_cast<int>(record.events.size()) : record.steps.front().event_begin;
  out.line({{"type", "header"},
            {"schema", kLogSchema},
            {"agent", record.agent},
            {"item", item_to_json(item)},
            {"room", room_to_json(room)},
            {"options", episode_options_to_json(options)},
            {"detector_seed", record.detector_seed},
            {"agent_seed", record.agent_seed},
            {"initial_events", events_json(record.events, 0, first)}});
  for (const auto& s : record.steps) {
    json line = {{"type", "step"},
                 {"i", s.index},
                 {"action", s.action},
                 {"reward", s.reward},
                 {"valid", s.predicted_valid},
                 {"ok", s.succeeded},
                 {"pose", agent_to_json(s.pose)},
                 {"coverage", s.coverage},
                 {"primitive", {s.primitive_begin, s.primitive_end}},
                 {"events", events_json(record.events, s.event_begin, s.event_end)}};
    if (record.control == ControlMode::Planner && s.action < kNumPlannerActions)
      line["action_name"] = planner_action_name(s.action);
    if (memory_per_step) {
      const WorldHandle w = replay_world(room, item.config, options.controller, record.detector_seed,
                                         std::vector<WorldEvent>(record.events.begin(), record.events.begin() + s.event_end));
      line["memory"] = memory_snapshot(w.memory());
    }
    out.line(line);
  }
  out.line({{"type", "result"},
            {"answer", record.answer_given},
            {"ground_truth", record.ground_truth},
            {"correct", record.correct},
            {"planner_steps", record.planner_steps},
            {"primitive_steps", record.primitive_steps},
            {"invalid_commands", record.invalid_commands},
            {"total_return", record.total_return},
            {"final_digest", record.final_digest},
            {"final_pose", agent_to_json(record.final_pose)},
            {"memory", memory_snapshot(final_memory)}});
}

std::vector<std::string> read_gzip_lines(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw Error("cannot read log " + path.string());
  std::vector<std::string> lines;
  std::string cur;
  char buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof buf)) > 0) {
    for (int i = 0; i < n; ++i) {
      if (buf[i] == '\n') {
        lines.push_back(std::move(cur));
        cur.clear();
      } else {
        cur.push_back(buf[i]);
      }
    }
  }
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw MalformedSpec("corrupt log " + path.string());
  if (!cur.empty()) lines.push_back(std::move(cur));
  return lines;
}

EpisodeLog read_episode_log(const std::filesystem::path& path) {
  EpisodeLog log;
  for (const auto& line : read_gzip_lines(path)) {
    json j = json::parse(line);
    const std::string type = j.value("type", "");
    if (type == "header") log.header = std::move(j);
    else if (type == "step") log.steps.push_back(std::move(j));
    else if (type == "result") log.result = std::move(j);
  }
  if (log.header.is_null() || log.result.is_null()) throw MalformedSpec("incomplete log " + path.string());
  if (log.header.value("schema", "") != kLogSchema) throw ConfigMismatch("unsupported log schema");
  return log;
}

EpisodeRecord record_from_log(const EpisodeLog& log) {
  const DatasetItem item = item_from_json(log.header.at("item"));
  const EpisodeOptions options = episode_options_from_json(log.header.at("options"));
  EpisodeRecord r;
  r.item_id = item.item_id;
  r.config_id = item.config_id;
  r.split = item.split;
  r.room_id = item.config.room_id;
  r.qtype = item.question.qtype;
  r.agent = log.header.value("agent", "");
  r.control = options.control;
  r.detector_seed = log.header.at("detector_seed").get<std::uint64_t>();
  r.agent_seed = log.header.at("agent_seed").get<std::uint64_t>();
  for (const auto& e : log.header.at("initial_events")) r.events.push_back(event_from_json(e));
  for (const auto& s : log.steps) {
    StepLog st;
    st.index = s.at("i").get<int>();
    st.action = s.at("action").get<int>();
    st.reward = s.at("reward").get<double>();
    st.predicted_valid = s.at("valid").get<bool>();
    st.succeeded = s.at("ok").get<bool>();
    st.pose = agent_from_json(s.at("pose"));
    st.coverage = s.at("coverage").get<double>();
    st.primitive_begin = s.at("primitive")[0].get<int>();
    st.primitive_end = s.at("primitive")[1].get<int>();
    st.event_begin = static_cast<int>(r.events.size());
    for (const auto& e : s.at("events")) r.events.push_back(event_from_json(e));
    st.event_end = static_cast<int>(r.events.size());
    r.steps.push_back(st);
  }
  const json& res = log.result;
  r.answer_given = res.at("answer").get<int>();
  r.ground_truth = res.at("ground_truth").get<int>();
  r.correct = res.at("correct").get<bool>();
  r.planner_steps = res.at("planner_steps").get<int>();
  r.primitive_steps = res.at("primitive_steps").get<int>();
  r.invalid_commands = res.at("invalid_commands").get<int>();
  r.total_return = res.at("total_return").get<double>();
  r.final_digest = res.at("final_digest").get<std::uint64_t>();
  r.final_pose = agent_from_json(res.at("final_pose"));
  return r;
}

ReplayReport replay_log(const EpisodeLog& log) {
  const DatasetItem item = item_from_json(log.header.at("item"));
  const RoomSpec room = room_from_json(log.header.at("room"));
  const EpisodeOptions options = episode_options_from_json(log.header.at("options"));
  const EpisodeRecord rec = record_from_log(log);
  const WorldHandle world = replay_world(room, item.config, options.controller, rec.detector_seed, rec.events);

  ReplayReport rep;
  rep.state_match = state_digest(world.scene(), world.agent()) == rec.final_digest && world.agent() == rec.final_pose;
  rep.memory_match = world.memory() == memory_from_snapshot(log.result.at("memory"));

  const bool answered = rec.answer_given >= 0;
  const bool planner_answered = answered && options.control == ControlMode::Planner && !rec.steps.empty() &&
                                rec.steps.back().action == kAnswerAction && rec.agent != "mla" && rec.agent != "human" &&
                                rec.agent != "external";
  if (planner_answered) rep.answer_match = readout_choice(world, item.question, options) == rec.answer_given;
  else rep.answer_match = !answered || rec.correct == (rec.answer_given == item.answer);
  rep.answer_match = rep.answer_match && rec.correct == (answered && rec.answer_given == item.answer);

  double ret = 0.0;
  int invalid = 0;
  for (const auto& s : rec.steps) {
    ret += s.reward;
    invalid += !s.predicted_valid;
  }
  rep.totals_match = ret == rec.total_return && invalid == rec.invalid_commands &&
                     static_cast<int>(rec.steps.size()) == rec.planner_steps &&
                     world.primitive_steps() == rec.primitive_steps;
  if (!rep.ok()) {
    rep.detail = std::string("state=") + (rep.state_match ? "ok" : "differs") + " memory=" +
                 (rep.memory_match ? "ok" : "differs") + " answer=" + (rep.answer_match ? "ok" : "differs") +
                 " totals=" + (rep.totals_match ? "ok" : "differs");
  }
  return rep;
}

ReplayReport replay_log(const std::filesystem::path& path) { return replay_log(read_episode_log(path)); }

std::string sanitize_log_id(const std::string& id) {
  std::string out;
  for (char c : id) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
  return out;
}

std::string episode_log_name(const std::string& agent, const std::string& item_id) {
  return sanitize_log_id(agent + "_" + item_id) + ".jsonl.gz";
}

}  // namespace iqa
