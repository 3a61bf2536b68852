#include "iqa/scripted.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace iqa {

namespace {

constexpr int kUnreached = std::numeric_limits<int>::max();

std::vector<int> bfs_distances(const Scene& scene, Cell from) {
  std::vector<int> dist(static_cast<std::size_t>(scene.width * scene.height), kUnreached);
  std::deque<Cell> queue{from};
  dist[static_cast<std::size_t>(scene.index(from))] = 0;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    for (int h = 0; h < 4; ++h) {
      const Cell n = c + forward_vector(static_cast<Heading>(h));
      if (!scene.is_free(n) || dist[static_cast<std::size_t>(scene.index(n))] != kUnreached) continue;
      dist[static_cast<std::size_t>(scene.index(n))] = dist[static_cast<std::size_t>(scene.index(c))] + 1;
      queue.push_back(n);
    }
  }
  return dist;
}

int turn_steps(Heading from, Heading to) {
  const int d = (static_cast<int>(to) - static_cast<int>(from) + 4) % 4;
  return d == 3 ? 1 : d;
}

int pitch_steps(Pitch from, Pitch to) { return std::abs(static_cast<int>(to) - static_cast<int>(from)) / 30; }

// Rough planner-step estimate to reach a pose.
double pose_cost(const AgentState& agent, const AgentState& pose, int dist) {
  double cost = pitch_steps(agent.pitch, pose.pitch);
  if (pose.cell == agent.cell) return cost + turn_steps(agent.heading, pose.heading);
  return cost + std::ceil(dist / 4.0) + 1.0;
}

int rotate_towards(Heading from, Heading to) { return turned_left(from) == to ? kScanLeft : kScanRight; }

Pitch pitch_for_band(HeightBand b) {
  switch (b) {
    case HeightBand::Low: return Pitch::Down;
    case HeightBand::Mid: return Pitch::Level;
    case HeightBand::High: return Pitch::Up;
  }
  return Pitch::Level;
}

}  // namespace

int ScriptedExplorer::drive_to(const Episode& ep, const AgentState& target) {
  const AgentState& agent = ep.world().agent();
  if (agent.cell != target.cell) {
    const auto path = astar(occupancy_from_scene(ep.world().scene()), agent.cell, target.cell);
    if (!path || path->size() < 2) return -1;
    const Cell f = forward_vector(agent.heading);
    const Cell r = right_vector(agent.heading);
    for (std::size_t k = path->size() - 1; k >= 1; --k) {
      const Cell d = (*path)[k] - agent.cell;
      const int fw = d.x * f.x + d.y * f.y;
      const int lat = d.x * r.x + d.y * r.y;
      if (fw >= 1 && fw <= kNavGoalDepth && std::abs(lat) <= kNavGoalHalfWidth) {
        return planner_index({PlannerKind::Navigate, fw, lat, ScanDirection::Up});
      }
    }
    const Cell step = (*path)[1] - agent.cell;
    for (int h = 0; h < 4; ++h) {
      if (forward_vector(static_cast<Heading>(h)) == step) return rotate_towards(agent.heading, static_cast<Heading>(h));
    }
    return -1;
  }
  if (agent.heading != target.heading) return rotate_towards(agent.heading, target.heading);
  if (agent.pitch != target.pitch) {
    return static_cast<int>(agent.pitch) < static_cast<int>(target.pitch) ? kScanUp : kScanDown;
  }
  return -1;
}

int ScriptedExplorer::next_action(const Episode& ep) {
  if (pending_close_) {
    pending_close_ = false;
    return kCloseAction;
  }
  const WorldHandle& world = ep.world();
  const Scene& scene = world.scene();
  const SpatialMemory& mem = world.memory();
  const AgentState& agent = world.agent();
  const VisibilityConfig& vis = world.config().visibility;
  const std::vector<int> dist = bfs_distances(scene, agent.cell);

  for (int guard = 0; guard < 2 * static_cast<int>(scene.receptacles.size()) + 4; ++guard) {
    if (exploring_) {
      std::vector<Cell> uncovered;
      if (coverage_fraction(mem) < opts_.coverage_target) {
        for (int y = 0; y < scene.height; ++y)
          for (int x = 0; x < scene.width; ++x)
            if (scene.is_free({x, y}) && Cell{x, y} != agent.cell && mem.at({x, y}, mem.coverage_channel()) < 1.0) uncovered.push_back({x, y});
      }
      double best_score = 0.0;
      AgentState best{};
      for (int y = 0; y < scene.height && !uncovered.empty(); ++y) {
        for (int x = 0; x < scene.width; ++x) {
          const int d = dist[static_cast<std::size_t>(y * scene.width + x)];
          if (d == kUnreached) continue;
          for (int h = 0; h < 4; ++h) {
            for (Pitch p : {Pitch::Level, Pitch::Down}) {
              const AgentState pose{{x, y}, static_cast<Heading>(h), p};
              int gain = 0;
              for (Cell u : uncovered) gain += cell_in_view(scene, pose, u, vis);
              if (gain == 0) continue;
              const double score = gain / (pose_cost(agent, pose, d) + 1.0);
              if (score > best_score + 1e-12) {
                best_score = score;
                best = pose;
              }
            }
          }
        }
      }
      if (best_score <= 0.0) {
        exploring_ = false;
        continue;
      }
      const int a = drive_to(ep, best);
      return a >= 0 ? a : kScanLeft;
    }

    if (!opts_.inspect_receptacles) return kAnswerAction;
    if (service_poses_.empty()) {
      // All receptacles are closed here, so the poses from which Open selects
      // a given receptacle never change during the episode.
      service_poses_.resize(scene.receptacles.size());
      for (int ri = 0; ri < static_cast<int>(scene.receptacles.size()); ++ri) {
        const Receptacle& r = scene.receptacles[static_cast<std::size_t>(ri)];
        const Pitch p = pitch_for_band(r.height_band);
        for (int y = 0; y < scene.height; ++y)
          for (int x = 0; x < scene.width; ++x)
            for (int h = 0; h < 4; ++h) {
              const AgentState pose{{x, y}, static_cast<Heading>(h), p};
              if (!scene.is_free(pose.cell) || !cell_in_view(scene, pose, r.cell, vis)) continue;
              if (r.openable) {
                Scene trial = scene;
                if (apply_action(trial, pose, LowLevelAction::Open, vis).receptacle != ri) continue;
              }
              service_poses_[static_cast<std::size_t>(ri)].push_back(pose);
            }
        if (service_poses_[static_cast<std::size_t>(ri)].empty()) skipped_.insert(ri);
      }
    }
    double best_cost = std::numeric_limits<double>::infinity();
    AgentState best{};
    int best_r = -1;
    for (int ri = 0; ri < static_cast<int>(scene.receptacles.size()); ++ri) {
      const Receptacle& r = scene.receptacles[static_cast<std::size_t>(ri)];
      if (skipped_.count(ri)) continue;
      if (r.openable ? opened_.count(ri) > 0 : mem.at(r.cell, receptacle_channel(r.class_id)) > 0.5) continue;
      for (const AgentState& pose : service_poses_[static_cast<std::size_t>(ri)]) {
        const int d = dist[static_cast<std::size_t>(scene.index(pose.cell))];
        if (d == kUnreached) continue;
        const double cost = pose_cost(agent, pose, d);
        if (cost < best_cost) {
          best_cost = cost;
          best = pose;
          best_r = ri;
        }
      }
    }
    if (best_r < 0) return kAnswerAction;
    const int a = drive_to(ep, best);
    if (a >= 0) return a;
    if (scene.receptacles[static_cast<std::size_t>(best_r)].openable) {
      opened_.insert(best_r);
      pending_close_ = true;
      return kOpenAction;
    }
    skipped_.insert(best_r);
  }
  return kAnswerAction;
}

std::array<int, kNumQuestionTypes> modal_answers(const std::vector<DatasetItem>& items) {
  std::array<std::array<int, kMaxCount + 1>, kNumQuestionTypes> hist{};
  for (const auto& it : items) ++hist[static_cast<std::size_t>(it.question.qtype)][static_cast<std::size_t>(it.answer)];
  std::array<int, kNumQuestionTypes> modal{};
  for (int t = 0; t < kNumQuestionTypes; ++t) {
    const auto& h = hist[static_cast<std::size_t>(t)];
    modal[static_cast<std::size_t>(t)] = static_cast<int>(std::max_element(h.begin(), h.end()) - h.begin());
  }
  return modal;
}

}  // namespace iqa
