#include "iqa/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace iqa {

DetectorModel DetectorModel::oracle() {
  DetectorModel m;
  m.mode = Mode::Oracle;
  m.recall.fill(1.0);
  m.false_positive_rate.fill(0.0);
  m.localization_noise = 0.0;
  return m;
}

DetectorModel DetectorModel::noisy(double recall, double false_positive_rate, double localization_noise) {
  DetectorModel m;
  m.mode = Mode::Noisy;
  m.recall.fill(recall);
  m.false_positive_rate.fill(false_positive_rate);
  m.localization_noise = localization_noise;
  m.validate();
  return m;
}

void DetectorModel::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  for (double r : recall)
    if (!prob(r)) throw MalformedSpec("detector recall outside [0, 1]");
  for (double f : false_positive_rate)
    if (!prob(f)) throw MalformedSpec("detector false-positive rate outside [0, 1]");
  if (!prob(localization_noise)) throw MalformedSpec("detector localization noise outside [0, 1]");
}

Detections detect(const Observation& obs, const DetectorModel& model, Rng& rng, int width, int height) {
  Detections out;
  out.pose = obs.pose;
  out.cells = obs.cells;
  for (const auto& r : obs.receptacles) out.items.push_back({receptacle_channel(r.class_id), r.cell});
  if (model.is_oracle()) {
    for (const auto& o : obs.objects) out.items.push_back({o.class_id, o.cell});
    return out;
  }
  for (const auto& o : obs.objects) {
    if (!rng.bernoulli(model.recall[static_cast<std::size_t>(o.class_id)])) continue;
    Cell cell = o.cell;
    if (rng.bernoulli(model.localization_noise)) {
      const Cell d = cell - obs.pose.cell;
      Cell step = forward_vector(obs.pose.heading);
      if (d.x != 0 || d.y != 0) {
        step = std::abs(d.x) >= std::abs(d.y) ? Cell{d.x > 0 ? 1 : -1, 0} : Cell{0, d.y > 0 ? 1 : -1};
      }
      cell = rng.bernoulli(0.5) ? cell + step : cell - step;
      cell.x = std::clamp(cell.x, 0, width - 1);
      cell.y = std::clamp(cell.y, 0, height - 1);
    }
    out.items.push_back({o.class_id, cell});
  }
  for (const auto& vc : obs.cells) {
    for (int c = 0; c < kNumObjectClasses; ++c) {
      if (rng.bernoulli(model.false_positive_rate[static_cast<std::size_t>(c)])) out.items.push_back({c, vc.cell});
    }
  }
  return out;
}

OccupancyGrid occupancy_from_memory(const SpatialMemory& mem) {
  OccupancyGrid g{mem.width(), mem.height(), {}};
  g.free_prob.resize(static_cast<std::size_t>(mem.width() * mem.height()));
  for (int y = 0; y < mem.height(); ++y)
    for (int x = 0; x < mem.width(); ++x)
      g.free_prob[static_cast<std::size_t>(y * mem.width() + x)] = mem.at({x, y}, mem.free_channel());
  return g;
}

OccupancyGrid occupancy_from_scene(const Scene& scene) {
  OccupancyGrid g{scene.width, scene.height, {}};
  g.free_prob.resize(static_cast<std::size_t>(scene.width * scene.height));
  for (int y = 0; y < scene.height; ++y)
    for (int x = 0; x < scene.width; ++x)
      g.free_prob[static_cast<std::size_t>(y * scene.width + x)] = scene.is_free({x, y}) ? 1.0 : 0.0;
  return g;
}

std::optional<double> step_cost(const OccupancyGrid& grid, Cell c, const AStarConfig& cfg) {
  if (!grid.in_bounds(c)) return std::nullopt;
  const double p = grid.at(c);
  if (std::abs(p - 0.5) <= cfg.unknown_tolerance) return cfg.unknown_cost;
  if (p > 0.5) return cfg.known_cost;
  return std::nullopt;
}

std::optional<std::vector<Cell>> astar(const OccupancyGrid& grid, Cell start, Cell goal, const AStarConfig& cfg) {
  if (!grid.in_bounds(start) || !grid.in_bounds(goal)) return std::nullopt;
  if (start == goal) return std::vector<Cell>{start};
  if (!step_cost(grid, goal, cfg)) return std::nullopt;

  const double min_step = std::min(cfg.known_cost, cfg.unknown_cost);
  const auto n = static_cast<std::size_t>(grid.width * grid.height);
  const auto idx = [&](Cell c) { return static_cast<std::size_t>(c.y * grid.width + c.x); };
  const auto heuristic = [&](Cell c) { return min_step * (std::abs(c.x - goal.x) + std::abs(c.y - goal.y)); };

  std::vector<double> g(n, std::numeric_limits<double>::infinity());
  std::vector<int> parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);
  using Entry = std::tuple<double, double, std::size_t>;  // f, h, index
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  g[idx(start)] = 0.0;
  open.emplace(heuristic(start), heuristic(start), idx(start));
  while (!open.empty()) {
    const auto [f, h, ci] = open.top();
    open.pop();
    if (closed[ci]) continue;
    closed[ci] = 1;
    const Cell c{static_cast<int>(ci) % grid.width, static_cast<int>(ci) / grid.width};
    if (c == goal) break;
    for (int d = 0; d < 4; ++d) {
      const Cell nb = c + forward_vector(static_cast<Heading>(d));
      const auto cost = step_cost(grid, nb, cfg);
      if (!cost) continue;
      const std::size_t ni = idx(nb);
      if (closed[ni]) continue;
      const double cand = g[ci] + *cost;
      if (cand < g[ni]) {
        g[ni] = cand;
        parent[ni] = static_cast<int>(ci);
        open.emplace(cand + heuristic(nb), heuristic(nb), ni);
      }
    }
  }
  if (!closed[idx(goal)]) return std::nullopt;
  std::vector<Cell> path;
  for (int cur = static_cast<int>(idx(goal)); cur >= 0; cur = parent[static_cast<std::size_t>(cur)]) {
    path.push_back({cur % grid.width, cur / grid.width});
  }
  std::reverse(path.begin(), path.end());
  return path;
}

double path_cost(const OccupancyGrid& grid, const std::vector<Cell>& path, const AStarConfig& cfg) {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const auto c = step_cost(grid, path[i], cfg);
    if (!c) return std::numeric_limits<double>::infinity();
    total += *c;
  }
  return total;
}

WorldHandle::WorldHandle(Scene scene, AgentState start, ControllerConfig cfg, std::uint64_t detector_seed)
    : scene_(std::move(scene)), agent_(start), cfg_(std::move(cfg)), detector_rng_(detector_seed) {
  cfg_.memory.validate();
  cfg_.detector.validate();
  memory_ = SpatialMemory(scene_.height, scene_.width, kNumClasses, scene_.free_mask());
}

ActionResult WorldHandle::act(LowLevelAction action) {
  ActionResult res = apply_action(scene_, agent_, action, cfg_.visibility);
  agent_ = res.agent;
  trace_.push_back({action, res.outcome.success});
  events_.push_back({WorldEvent::Kind::Act, action, {}});
  return res;
}

void WorldHandle::perceive() {
  last_obs_ = observe(scene_, agent_, cfg_.visibility);
  last_det_ = detect(last_obs_, cfg_.detector, detector_rng_, scene_.width, scene_.height);
  integrate_observation(memory_, last_det_, cfg_.memory);
  ++detector_passes_;
  events_.push_back({WorldEvent::Kind::Perceive, LowLevelAction::MoveAhead, {}});
}

void WorldHandle::record_blocked(Cell c) {
  Detections bump;
  bump.pose = agent_;
  bump.cells.push_back({c, false, false});
  integrate_observation(memory_, bump, cfg_.memory);
  events_.push_back({WorldEvent::Kind::Blocked, LowLevelAction::MoveAhead, c});
}

void WorldHandle::mark_intent(Cell goal) {
  mark_navigation_intent(memory_, goal);
  events_.push_back({WorldEvent::Kind::Intent, LowLevelAction::MoveAhead, goal});
}

void WorldHandle::apply_event(const WorldEvent& e) {
  switch (e.kind) {
    case WorldEvent::Kind::Act: act(e.action); break;
    case WorldEvent::Kind::Perceive: perceive(); break;
    case WorldEvent::Kind::Blocked: record_blocked(e.cell); break;
    case WorldEvent::Kind::Intent: mark_intent(e.cell); break;
  }
}

std::string_view nav_outcome_name(NavOutcome o) {
  static constexpr std::string_view names[] = {"arrived", "terminated_unreachable", "budget_exhausted"};
  return names[static_cast<int>(o)];
}

namespace {

std::optional<Heading> heading_towards(Cell from, Cell to) {
  for (int h = 0; h < 4; ++h) {
    if (from + forward_vector(static_cast<Heading>(h)) == to) return static_cast<Heading>(h);
  }
  return std::nullopt;
}

void wide_scan(WorldHandle& world) {
  scan(world, ScanDirection::Left);
  scan(world, ScanDirection::Right);
}

}  // namespace

NavResult navigate(WorldHandle& world, Cell goal, int budget) {
  NavResult res;
  if (!world.scene().in_bounds(goal)) {
    res.outcome = NavOutcome::TerminatedUnreachable;
    return res;
  }
  world.mark_intent(goal);
  const int start_steps = world.primitive_steps();
  auto spent = [&] { return world.primitive_steps() - start_steps; };
  auto out_of_budget = [&] { return spent() >= budget || !world.primitive_budget_left(); };
  int moves_since_scan = 0;

  while (true) {
    if (world.agent().cell == goal) {
      if (world.primitive_budget_left()) wide_scan(world);
      res.outcome = NavOutcome::Arrived;
      break;
    }
    if (out_of_budget()) {
      res.outcome = NavOutcome::BudgetExhausted;
      break;
    }
    const OccupancyGrid grid = world.config().navigator == NavigatorMode::Oracle ? occupancy_from_scene(world.scene())
                                                                                 : occupancy_from_memory(world.memory());
    auto path = astar(grid, world.agent().cell, goal, world.config().astar);
    if (!path) {
      res.outcome = NavOutcome::TerminatedUnreachable;
      break;
    }
    res.plans.push_back(*path);
    const Cell next = (*path)[1];
    const Heading want = *heading_towards(world.agent().cell, next);
    while (world.agent().heading != want && !out_of_budget()) {
      const bool left = turned_left(world.agent().heading) == want;
      world.act(left ? LowLevelAction::RotateLeft : LowLevelAction::RotateRight);
      world.perceive();
      ++moves_since_scan;
    }
    if (world.agent().heading != want) continue;  // budget ran out mid-turn
    if (out_of_budget()) continue;
    const ActionResult moved = world.act(LowLevelAction::MoveAhead);
    if (!moved.outcome.success) {
      world.record_blocked(next);
    } else {
      res.visited.push_back(next);
    }
    world.perceive();
    ++moves_since_scan;
    if (moves_since_scan >= world.config().scan_every && world.agent().cell != goal && !out_of_budget()) {
      wide_scan(world);
      moves_since_scan = 0;
    }
  }
  res.primitive_steps = spent();
  return res;
}

ActionOutcome scan(WorldHandle& world, ScanDirection direction) {
  static constexpr LowLevelAction actions[] = {LowLevelAction::LookUp, LowLevelAction::LookDown,
                                               LowLevelAction::RotateLeft, LowLevelAction::RotateRight};
  const ActionResult res = world.act(actions[static_cast<int>(direction)]);
  world.perceive();
  return res.outcome;
}

ActionOutcome manipulate(WorldHandle& world, bool open) {
  const ActionResult res = world.act(open ? LowLevelAction::Open : LowLevelAction::Close);
  if (res.outcome.success) world.perceive();
  return res.outcome;
}

int AnswerDistribution::choice() const {
  return static_cast<int>(std::max_element(probabilities.begin(), probabilities.end()) - probabilities.begin());
}

AnswerDistribution answer(const SpatialMemory& mem, const Question& q, const AnswerConfig& cfg) {
  int count = 0;
  bool in_container = false;
  const int container_channel = q.container ? receptacle_channel(*q.container) : -1;
  for (int y = 0; y < mem.height(); ++y) {
    for (int x = 0; x < mem.width(); ++x) {
      if (mem.at({x, y}, q.object_class) <= cfg.tau) continue;
      ++count;
      if (container_channel >= 0 && mem.at({x, y}, container_channel) > cfg.tau) in_container = true;
    }
  }
  int selected = 0;
  switch (q.qtype) {
    case QuestionType::Existence: selected = count > 0 ? 0 : 1; break;
    case QuestionType::Counting: selected = std::min(count, q.num_choices() - 1); break;
    case QuestionType::SpatialRelationship: selected = in_container ? 0 : 1; break;
  }
  AnswerDistribution dist;
  const int n = q.num_choices();
  dist.probabilities.assign(static_cast<std::size_t>(n), n > 1 ? cfg.epsilon / (n - 1) : 0.0);
  dist.probabilities[static_cast<std::size_t>(selected)] = n > 1 ? 1.0 - cfg.epsilon : 1.0;
  return dist;
}

SpatialMemory ground_truth_memory(const Scene& scene) {
  const int k = kNumClasses;
  const int channels = k + 3;
  std::vector<double> values(static_cast<std::size_t>(scene.width * scene.height * channels), 0.0);
  auto put = [&](Cell c, int ch, double v) {
    values[static_cast<std::size_t>(scene.index(c) * channels + ch)] = v;
  };
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      const Cell c{x, y};
      put(c, k, scene.is_free(c) ? 1.0 : 0.0);
      put(c, k + 1, 1.0);
    }
  }
  for (const auto& fo : scene.loose_objects) put(fo.cell, fo.object.class_id, 1.0);
  for (const auto& r : scene.receptacles) {
    put(r.cell, receptacle_channel(r.class_id), 1.0);
    for (const auto& o : r.contents) put(r.cell, o.class_id, 1.0);
    for (const auto& o : r.surface) put(r.cell, o.class_id, 1.0);
  }
  return memory_from_values(scene.height, scene.width, k, std::move(values), scene.free_mask());
}

}  // namespace iqa
