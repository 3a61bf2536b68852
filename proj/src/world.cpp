#include "iqa/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <set>

#include "iqa/rng.hpp"

namespace iqa {

namespace {

bool band_matches(Pitch p, HeightBand b) { return band_for_pitch(p) == b; }

struct ViewGeometry {
  int forward = 0;
  int lateral = 0;
  double range = 0.0;
  double angle_degrees = 0.0;
};

ViewGeometry geometry(const AgentState& agent, Cell c) {
  const Cell d = c - agent.cell;
  const Cell f = forward_vector(agent.heading);
  const Cell r = right_vector(agent.heading);
  ViewGeometry g;
  g.forward = d.x * f.x + d.y * f.y;
  g.lateral = d.x * r.x + d.y * r.y;
  g.range = std::hypot(static_cast<double>(d.x), static_cast<double>(d.y));
  g.angle_degrees = std::atan2(std::abs(g.lateral), static_cast<double>(g.forward)) * 180.0 / std::numbers::pi;
  return g;
}

// Pitch-independent part of the frustum test plus the pitch's range band.
bool in_frustum(const ViewGeometry& g, const AgentState& agent, const VisibilityConfig& vis) {
  if (g.forward < 0) return false;
  const double half = std::tan(vis.fov_degrees * 0.5 * std::numbers::pi / 180.0);
  if (std::abs(g.lateral) > g.forward * half + 1e-9) return false;
  if (g.range > vis.max_range + 1e-9) return false;
  const auto band = vis.range_for(agent.pitch);
  return g.range >= band[0] - 1e-9 && g.range <= band[1] + 1e-9;
}

struct InteractionChoice {
  int receptacle = -1;
  InvalidReason reason = InvalidReason::NotInView;
};

InteractionChoice interaction_target(const Scene& scene, const AgentState& agent, bool want_open,
                                     const VisibilityConfig& vis) {
  const Observation obs = observe(scene, agent, vis);
  InteractionChoice choice;
  bool saw_out_of_range = false;
  bool saw_wrong_state = false;
  const VisibleReceptacle* best = nullptr;
  for (const auto& r : obs.receptacles) {
    if (!r.openable) continue;
    if (r.range > vis.interaction_range + 1e-9) {
      saw_out_of_range = true;
      continue;
    }
    if (r.is_open == want_open) {
      saw_wrong_state = true;
      continue;
    }
    if (best == nullptr) {
      best = &r;
      continue;
    }
    const auto key = [&](const VisibleReceptacle& v) {
      return std::make_tuple(v.angle_degrees, v.range, scene.index(v.cell));
    };
    if (key(r) < key(*best)) best = &r;
  }
  if (best != nullptr) {
    choice.receptacle = best->index;
    choice.reason = InvalidReason::None;
  } else if (saw_wrong_state) {
    choice.reason = want_open ? InvalidReason::AlreadyOpen : InvalidReason::AlreadyClosed;
  } else if (saw_out_of_range) {
    choice.reason = InvalidReason::OutOfRange;
  }
  return choice;
}

}  // namespace

std::array<double, 2> VisibilityConfig::range_for(Pitch p) const {
  switch (p) {
    case Pitch::Down: return down_range;
    case Pitch::Level: return level_range;
    case Pitch::Up: return up_range;
  }
  return level_range;
}

std::string_view reason_name(InvalidReason r) {
  static constexpr std::string_view names[] = {"none",         "blocked",      "pitch_limit",   "not_in_view",
                                               "out_of_range", "already_open", "already_closed"};
  return names[static_cast<int>(r)];
}

std::string_view action_name(LowLevelAction a) {
  static constexpr std::string_view names[] = {"MoveAhead", "RotateLeft", "RotateRight", "LookUp",
                                               "LookDown",  "Open",       "Close"};
  return names[static_cast<int>(a)];
}

void Scene::rebuild_index() {
  receptacle_index_.assign(static_cast<std::size_t>(width * height), -1);
  for (std::size_t i = 0; i < receptacles.size(); ++i) {
    receptacle_index_[static_cast<std::size_t>(index(receptacles[i].cell))] = static_cast<int>(i);
  }
}

int Scene::free_cell_count() const {
  int n = 0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) n += is_free({x, y}) ? 1 : 0;
  return n;
}

std::vector<std::uint8_t> Scene::free_mask() const {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(width * height), 0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) mask[static_cast<std::size_t>(index({x, y}))] = is_free({x, y}) ? 1 : 0;
  return mask;
}

bool free_space_connected(const Scene& scene) {
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(scene.width * scene.height), 0);
  int total = 0;
  std::optional<Cell> first;
  for (int y = 0; y < scene.height; ++y)
    for (int x = 0; x < scene.width; ++x)
      if (scene.is_free({x, y})) {
        ++total;
        if (!first) first = Cell{x, y};
      }
  if (!first) return true;
  std::queue<Cell> frontier;
  frontier.push(*first);
  seen[static_cast<std::size_t>(scene.index(*first))] = 1;
  int reached = 0;
  while (!frontier.empty()) {
    const Cell c = frontier.front();
    frontier.pop();
    ++reached;
    for (int h = 0; h < 4; ++h) {
      const Cell n = c + forward_vector(static_cast<Heading>(h));
      if (!scene.is_free(n)) continue;
      auto& s = seen[static_cast<std::size_t>(scene.index(n))];
      if (s) continue;
      s = 1;
      frontier.push(n);
    }
  }
  return reached == total;
}

Scene load_scene(const RoomSpec& room, const SceneConfig& config) {
  if (room.width < 3 || room.height < 3) throw MalformedSpec("room " + room.room_id + ": grid must be at least 3x3");
  if (!config.room_id.empty() && config.room_id != room.room_id)
    throw MalformedSpec("config for room " + config.room_id + " applied to room " + room.room_id);

  Scene scene;
  scene.width = room.width;
  scene.height = room.height;
  scene.room_id = room.room_id;
  scene.rng_seed = config.seed;
  scene.wall.assign(static_cast<std::size_t>(room.width * room.height), 0);
  for (int y = 0; y < room.height; ++y)
    for (int x = 0; x < room.width; ++x)
      if (x == 0 || y == 0 || x == room.width - 1 || y == room.height - 1)
        scene.wall[static_cast<std::size_t>(y * room.width + x)] = 1;
  for (const Cell& w : room.walls) {
    if (!scene.in_bounds(w)) throw MalformedSpec("wall outside grid");
    scene.wall[static_cast<std::size_t>(scene.index(w))] = 1;
  }
  for (const auto& rs : room.receptacles) {
    if (!scene.in_bounds(rs.cell) || scene.is_wall(rs.cell))
      throw MalformedSpec("receptacle placed on a wall or outside the grid");
    Receptacle r;
    r.cell = rs.cell;
    r.class_id = rs.class_id;
    r.openable = rs.openable;
    r.height_band = rs.height_band;
    scene.receptacles.push_back(std::move(r));
  }
  scene.rebuild_index();
  for (std::size_t i = 0; i < scene.receptacles.size(); ++i) {
    if (scene.receptacle_at(scene.receptacles[i].cell) != static_cast<int>(i))
      throw MalformedSpec("two receptacles share a cell");
  }

  std::set<int> ids;
  std::set<std::tuple<int, int>> occupancy;  // (cell index, class); a receptacle is one site
  for (const Placement& p : config.placements) {
    if (p.object.class_id < 0 || p.object.class_id >= kNumObjectClasses) throw MalformedSpec("unknown object class");
    if (!ids.insert(p.object.instance_id).second)
      throw MalformedSpec("duplicate instance id " + std::to_string(p.object.instance_id));
    if (!scene.in_bounds(p.cell)) throw MalformedSpec("placement outside grid");
    if (!occupancy.insert({scene.index(p.cell), p.object.class_id}).second)
      throw MalformedSpec("two instances of one class at the same site");
    if (p.kind == LocationKind::Floor) {
      if (!scene.is_free(p.cell)) throw MalformedSpec("floor placement on a blocked cell");
      scene.loose_objects.push_back({p.cell, p.object});
      continue;
    }
    const int ri = scene.receptacle_at(p.cell);
    if (ri < 0) throw MalformedSpec("missing receptacle for placement");
    Receptacle& r = scene.receptacles[static_cast<std::size_t>(ri)];
    if (p.kind == LocationKind::Inside) {
      if (!r.openable) throw MalformedSpec("placement inside a non-openable receptacle");
      r.contents.push_back(p.object);
    } else {
      r.surface.push_back(p.object);
    }
  }

  if (!free_space_connected(scene)) throw UnreachableLayout("room " + room.room_id + ": free space is disconnected");
  if (!scene.is_free(config.start.cell)) throw MalformedSpec("agent start cell is not free");
  return scene;
}

std::vector<Cell> bresenham_interior(Cell from, Cell to) {
  std::vector<Cell> out;
  int x0 = from.x, y0 = from.y;
  const int dx = std::abs(to.x - from.x);
  const int dy = -std::abs(to.y - from.y);
  const int sx = from.x < to.x ? 1 : -1;
  const int sy = from.y < to.y ? 1 : -1;
  int err = dx + dy;
  while (!(x0 == to.x && y0 == to.y)) {
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
    if (!(x0 == to.x && y0 == to.y)) out.push_back({x0, y0});
  }
  return out;
}

bool line_of_sight(const Scene& scene, Cell from, Cell to) {
  for (const Cell& c : bresenham_interior(from, to)) {
    if (!scene.is_free(c)) return false;
  }
  return true;
}

bool cell_in_view(const Scene& scene, const AgentState& agent, Cell c, const VisibilityConfig& vis) {
  return scene.in_bounds(c) && in_frustum(geometry(agent, c), agent, vis) && line_of_sight(scene, agent.cell, c);
}

Observation observe(const Scene& scene, const AgentState& agent, const VisibilityConfig& vis) {
  Observation obs;
  obs.pose = agent;
  const int reach = static_cast<int>(std::ceil(vis.max_range));
  const bool floor_in_view = agent.pitch != Pitch::Up;
  for (int y = agent.cell.y - reach; y <= agent.cell.y + reach; ++y) {
    for (int x = agent.cell.x - reach; x <= agent.cell.x + reach; ++x) {
      const Cell c{x, y};
      if (!scene.in_bounds(c)) continue;
      const ViewGeometry g = geometry(agent, c);
      if (!in_frustum(g, agent, vis)) continue;
      if (!line_of_sight(scene, agent.cell, c)) continue;

      VisibleCell vc{c, scene.is_free(c), false};
      const int ri = scene.receptacle_at(c);
      if (vc.is_free) {
        vc.fully_visible = floor_in_view;
        if (floor_in_view) {
          for (const auto& fo : scene.loose_objects) {
            if (fo.cell == c) obs.objects.push_back({fo.object.class_id, fo.object.instance_id, c, -1});
          }
        }
      } else if (ri >= 0) {
        const Receptacle& r = scene.receptacles[static_cast<std::size_t>(ri)];
        if (band_matches(agent.pitch, r.height_band)) {
          vc.fully_visible = !r.openable || r.is_open;
          obs.receptacles.push_back({ri, r.class_id, c, r.openable, r.is_open, r.height_band, g.range, g.angle_degrees});
          for (const auto& o : r.surface) obs.objects.push_back({o.class_id, o.instance_id, c, ri});
          if (r.is_open) {
            for (const auto& o : r.contents) obs.objects.push_back({o.class_id, o.instance_id, c, ri});
          }
        }
      }
      obs.cells.push_back(vc);
    }
  }
  return obs;
}

ActionResult apply_action(Scene& scene, const AgentState& agent, LowLevelAction action, const VisibilityConfig& vis) {
  ActionResult res{agent, {}, -1};
  switch (action) {
    case LowLevelAction::MoveAhead: {
      const Cell target = agent.cell + forward_vector(agent.heading);
      if (scene.is_free(target)) {
        res.agent.cell = target;
      } else {
        res.outcome = {false, InvalidReason::Blocked};
      }
      break;
    }
    case LowLevelAction::RotateLeft: res.agent.heading = turned_left(agent.heading); break;
    case LowLevelAction::RotateRight: res.agent.heading = turned_right(agent.heading); break;
    case LowLevelAction::LookUp:
      if (agent.pitch == Pitch::Up) {
        res.outcome = {false, InvalidReason::PitchLimit};
      } else {
        res.agent.pitch = agent.pitch == Pitch::Down ? Pitch::Level : Pitch::Up;
      }
      break;
    case LowLevelAction::LookDown:
      if (agent.pitch == Pitch::Down) {
        res.outcome = {false, InvalidReason::PitchLimit};
      } else {
        res.agent.pitch = agent.pitch == Pitch::Up ? Pitch::Level : Pitch::Down;
      }
      break;
    case LowLevelAction::Open:
    case LowLevelAction::Close: {
      const bool want_open = action == LowLevelAction::Open;
      const InteractionChoice choice = interaction_target(scene, agent, want_open, vis);
      if (choice.receptacle < 0) {
        res.outcome = {false, choice.reason};
      } else {
        scene.receptacles[static_cast<std::size_t>(choice.receptacle)].is_open = want_open;
        res.receptacle = choice.receptacle;
      }
      break;
    }
  }
  return res;
}

std::array<bool, kNumLowLevelActions> valid_low_level(const Scene& scene, const AgentState& agent,
                                                       const VisibilityConfig& vis) {
  std::array<bool, kNumLowLevelActions> mask{};
  mask[static_cast<int>(LowLevelAction::MoveAhead)] = scene.is_free(agent.cell + forward_vector(agent.heading));
  mask[static_cast<int>(LowLevelAction::RotateLeft)] = true;
  mask[static_cast<int>(LowLevelAction::RotateRight)] = true;
  mask[static_cast<int>(LowLevelAction::LookUp)] = agent.pitch != Pitch::Up;
  mask[static_cast<int>(LowLevelAction::LookDown)] = agent.pitch != Pitch::Down;
  mask[static_cast<int>(LowLevelAction::Open)] = interaction_target(scene, agent, true, vis).receptacle >= 0;
  mask[static_cast<int>(LowLevelAction::Close)] = interaction_target(scene, agent, false, vis).receptacle >= 0;
  return mask;
}

std::uint64_t state_digest(const Scene& scene, const AgentState& agent) {
  std::uint64_t h = hash_string(scene.room_id);
  h = hash_combine(h, static_cast<std::uint64_t>(scene.index(agent.cell)));
  h = hash_combine(h, static_cast<std::uint64_t>(agent.heading));
  h = hash_combine(h, static_cast<std::uint64_t>(static_cast<int>(agent.pitch) + 30));
  for (const auto& r : scene.receptacles) {
    h = hash_combine(h, static_cast<std::uint64_t>(r.is_open));
    for (const auto& o : r.contents) h = hash_combine(h, static_cast<std::uint64_t>(o.instance_id) * 31 + 1);
    for (const auto& o : r.surface) h = hash_combine(h, static_cast<std::uint64_t>(o.instance_id) * 31 + 2);
  }
  for (const auto& fo : scene.loose_objects) {
    h = hash_combine(h, static_cast<std::uint64_t>(fo.object.instance_id) * 131 + static_cast<std::uint64_t>(scene.index(fo.cell)));
  }
  return h;
}

}  // namespace iqa
