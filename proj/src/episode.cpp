#include "iqa/episode.hpp"

#include <algorithm>
#include <stdexcept>

namespace iqa {

PlannerAction planner_action(int index) {
  if (index < 0 || index >= kNumPlannerActions) throw std::out_of_range("planner action index out of range");
  PlannerAction a;
  if (index < kNumNavigateActions) {
    a.kind = PlannerKind::Navigate;
    a.forward = index / (2 * kNavGoalHalfWidth + 1) + 1;
    a.lateral = index % (2 * kNavGoalHalfWidth + 1) - kNavGoalHalfWidth;
    return a;
  }
  if (index < kOpenAction) {
    a.kind = PlannerKind::Scan;
    a.direction = static_cast<ScanDirection>(index - kScanUp);
    return a;
  }
  a.kind = index == kOpenAction ? PlannerKind::Open : index == kCloseAction ? PlannerKind::Close : PlannerKind::Answer;
  return a;
}

int planner_index(const PlannerAction& a) {
  switch (a.kind) {
    case PlannerKind::Navigate:
      return (a.forward - 1) * (2 * kNavGoalHalfWidth + 1) + (a.lateral + kNavGoalHalfWidth);
    case PlannerKind::Scan: return kScanUp + static_cast<int>(a.direction);
    case PlannerKind::Open: return kOpenAction;
    case PlannerKind::Close: return kCloseAction;
    case PlannerKind::Answer: return kAnswerAction;
  }
  return kAnswerAction;
}

std::string planner_action_name(int index) {
  const PlannerAction a = planner_action(index);
  switch (a.kind) {
    case PlannerKind::Navigate:
      return "navigate(" + std::to_string(a.forward) + "," + std::to_string(a.lateral) + ")";
    case PlannerKind::Scan: {
      static constexpr const char* dirs[] = {"up", "down", "left", "right"};
      return std::string("scan_") + dirs[static_cast<int>(a.direction)];
    }
    case PlannerKind::Open: return "open";
    case PlannerKind::Close: return "close";
    case PlannerKind::Answer: return "answer";
  }
  return "answer";
}

Cell navigation_goal(const AgentState& agent, int forward, int lateral) {
  return agent.cell + forward_vector(agent.heading) * forward + right_vector(agent.heading) * lateral;
}

PlannerMask valid_planner_actions(const WorldHandle& world) {
  PlannerMask mask{};
  const Scene& scene = world.scene();
  const AgentState& agent = world.agent();
  for (int i = 0; i < kNumNavigateActions; ++i) {
    const PlannerAction a = planner_action(i);
    const Cell goal = navigation_goal(agent, a.forward, a.lateral);
    mask[static_cast<std::size_t>(i)] = scene.in_bounds(goal) && scene.is_free(goal) && goal != agent.cell;
  }
  const auto low = valid_low_level(scene, agent, world.config().visibility);
  mask[kScanUp] = low[static_cast<int>(LowLevelAction::LookUp)];
  mask[kScanDown] = low[static_cast<int>(LowLevelAction::LookDown)];
  mask[kScanLeft] = true;
  mask[kScanRight] = true;
  mask[kOpenAction] = low[static_cast<int>(LowLevelAction::Open)];
  mask[kCloseAction] = low[static_cast<int>(LowLevelAction::Close)];
  mask[kAnswerAction] = true;
  return mask;
}

void RewardConfig::validate() const {
  if (r_answer < 0 || c_time < 0 || c_invalid < 0 || c_coverage < 0) throw MalformedSpec("reward terms must be non-negative");
  if (max_planner_steps <= 0 || max_primitive_steps <= 0) throw MalformedSpec("episode caps must be positive");
}

RoomTable make_room_table(const std::vector<RoomSpec>& rooms) {
  RoomTable t;
  for (const auto& r : rooms) t.emplace(r.room_id, r);
  return t;
}

const RoomSpec& room_for(const RoomTable& rooms, const std::string& room_id) {
  const auto it = rooms.find(room_id);
  if (it == rooms.end()) throw ConfigMismatch("dataset references unknown room " + room_id);
  return it->second;
}

namespace {

ControllerConfig with_budget(ControllerConfig c, const RewardConfig& r) {
  c.max_primitive_steps = r.max_primitive_steps;
  return c;
}

}  // namespace

Episode::Episode(const RoomSpec& room, const DatasetItem& item, EpisodeOptions options)
    : item_(item),
      options_(std::move(options)),
      world_(load_scene(room, item.config), item.config.start, with_budget(options_.controller, options_.reward),
             options_.detector_seed) {
  options_.reward.validate();
  options_.controller.max_primitive_steps = options_.reward.max_primitive_steps;
  world_.perceive();
}

std::array<bool, kNumLowLevelActions> Episode::valid_primitive_mask() const {
  return valid_low_level(world_.scene(), world_.agent(), world_.config().visibility);
}

int readout_choice(const WorldHandle& world, const Question& q, const EpisodeOptions& options) {
  if (options.answer_source == AnswerSource::Memory) return answer(world.memory(), q, options.answer).choice();
  const SpatialMemory& mem = world.memory();
  SpatialMemory view(mem.height(), mem.width(), mem.num_classes(), mem.coverage_domain());
  MemoryConfig transient = options.controller.memory;
  transient.alpha = 1.0;
  transient.channel_alpha.clear();
  integrate_observation(view, world.last_detections(), transient);
  return answer(view, q, options.answer).choice();
}

int Episode::readout() const { return readout_choice(world_, item_.question, options_); }

StepResult Episode::step(int index) {
  if (done_) throw EpisodeFinished("step after the episode ended");
  if (options_.control != ControlMode::Planner) throw std::logic_error("episode is under primitive control");
  const PlannerAction a = planner_action(index);
  const bool predicted = valid_mask()[static_cast<std::size_t>(index)];
  const double cov_before = coverage_fraction(world_.memory());
  const int prim_before = world_.primitive_steps();
  const int ev_before = static_cast<int>(world_.events().size());
  bool ok = true;
  std::optional<int> given;
  switch (a.kind) {
    case PlannerKind::Navigate: {
      const Cell goal = navigation_goal(world_.agent(), a.forward, a.lateral);
      const int left = options_.reward.max_primitive_steps - world_.primitive_steps();
      const NavResult nav = navigate(world_, goal, std::min(options_.controller.max_nav_steps, left));
      ok = nav.outcome == NavOutcome::Arrived;
      break;
    }
    case PlannerKind::Scan: ok = scan(world_, a.direction).success; break;
    case PlannerKind::Open: ok = manipulate(world_, true).success; break;
    case PlannerKind::Close: ok = manipulate(world_, false).success; break;
    case PlannerKind::Answer: given = readout(); break;
  }
  return finish_step(index, predicted, ok, cov_before, prim_before, ev_before, given);
}

StepResult Episode::step_primitive(int index) {
  if (done_) throw EpisodeFinished("step after the episode ended");
  if (index < 0 || index >= kNumLowLevelActions) throw std::out_of_range("low-level action index out of range");
  const auto action = static_cast<LowLevelAction>(index);
  const bool predicted = valid_primitive_mask()[static_cast<std::size_t>(index)];
  const double cov_before = coverage_fraction(world_.memory());
  const int prim_before = world_.primitive_steps();
  const int ev_before = static_cast<int>(world_.events().size());
  const bool ok = world_.act(action).outcome.success;
  world_.perceive();
  return finish_step(index, predicted, ok, cov_before, prim_before, ev_before, std::nullopt);
}

StepResult Episode::answer_with(int choice) {
  if (done_) throw EpisodeFinished("answer after the episode ended");
  if (choice < 0 || choice >= item_.question.num_choices()) throw std::out_of_range("answer choice out of range");
  const double cov_before = coverage_fraction(world_.memory());
  const int action = options_.control == ControlMode::Planner ? kAnswerAction : kNumLowLevelActions + choice;
  return finish_step(action, true, true, cov_before, world_.primitive_steps(),
                     static_cast<int>(world_.events().size()), choice);
}

StepResult Episode::finish_step(int action, bool predicted_valid, bool succeeded, double coverage_before,
                                int primitive_before, int event_before, std::optional<int> given) {
  const RewardConfig& rc = options_.reward;
  StepResult res;
  res.was_valid = predicted_valid;
  const double cov = coverage_fraction(world_.memory());
  double reward = -rc.c_time + rc.c_coverage * (cov - coverage_before);
  if (!predicted_valid) {
    reward -= rc.c_invalid;
    ++invalid_;
  }
  if (given) {
    answer_ = *given;
    correct_ = *given == item_.answer;
    reward += correct_ ? rc.r_answer : -rc.r_answer;
    done_ = true;
    res.answered = true;
    res.correct = correct_;
    res.answer = *given;
  }
  StepLog log;
  log.index = static_cast<int>(steps_.size());
  log.action = action;
  log.predicted_valid = predicted_valid;
  log.succeeded = succeeded;
  log.pose = world_.agent();
  log.coverage = cov;
  log.primitive_begin = primitive_before;
  log.primitive_end = world_.primitive_steps();
  log.event_begin = event_before;
  log.event_end = static_cast<int>(world_.events().size());
  steps_.push_back(log);
  if (!done_ && (planner_steps() >= rc.max_planner_steps || world_.primitive_steps() >= rc.max_primitive_steps)) {
    done_ = true;
    correct_ = false;
    res.capped = true;
    reward -= rc.r_answer;
  }
  steps_.back().reward = reward;
  return_ += reward;
  last_action_ = action;
  last_succeeded_ = succeeded;
  res.reward = reward;
  res.done = done_;
  return res;
}

EpisodeRecord Episode::record(const std::string& agent, std::uint64_t agent_seed) const {
  EpisodeRecord r;
  r.item_id = item_.item_id;
  r.config_id = item_.config_id;
  r.split = item_.split;
  r.room_id = item_.config.room_id;
  r.qtype = item_.question.qtype;
  r.agent = agent;
  r.control = options_.control;
  r.answer_given = answer_;
  r.ground_truth = item_.answer;
  r.correct = correct_;
  r.planner_steps = planner_steps();
  r.primitive_steps = world_.primitive_steps();
  r.invalid_commands = invalid_;
  r.total_return = return_;
  r.steps = steps_;
  r.events = world_.events();
  r.detector_seed = options_.detector_seed;
  r.agent_seed = agent_seed;
  r.final_digest = state_digest(world_.scene(), world_.agent());
  r.final_pose = world_.agent();
  return r;
}

WorldHandle replay_world(const RoomSpec& room, const SceneConfig& config, const ControllerConfig& controller,
                         std::uint64_t detector_seed, const std::vector<WorldEvent>& events) {
  WorldHandle world(load_scene(room, config), config.start, controller, detector_seed);
  for (const auto& e : events) world.apply_event(e);
  return world;
}

}  // namespace iqa
