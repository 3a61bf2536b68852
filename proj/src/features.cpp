#include "iqa/features.hpp"

#include <algorithm>
#include <cmath>

namespace iqa {

std::string_view feature_source_name(FeatureSource s) {
  static constexpr std::string_view names[] = {"memory", "observation", "pose", "question", "history", "progress"};
  return names[static_cast<int>(s)];
}

namespace {

// Builds names/sources and values in one pass so the two can never drift apart.
class Builder {
 public:
  Builder(const FeatureOptions& opts, bool with_values) : opts_(opts), with_values_(with_values) {}

  void add(std::string name, FeatureSource src, double value = 0.0) {
    spec_.names.push_back(std::move(name));
    spec_.sources.push_back(src);
    if (with_values_) values_.push_back(opts_.question_blind && src == FeatureSource::Question ? 0.0 : value);
  }

  FeatureSpec spec_;
  std::vector<double> values_;

 private:
  const FeatureOptions& opts_;
  bool with_values_;
};

std::string goal_tag(int i) {
  const PlannerAction a = planner_action(i);
  return std::to_string(a.forward) + "_" + std::to_string(a.lateral);
}

bool unknown_free(double p) { return std::abs(p - 0.5) <= 1e-9; }

void add_pose_and_affordance(Builder& b, const Episode* ep) {
  const AgentState pose = ep ? ep->world().agent() : AgentState{};
  b.add("pitch_down", FeatureSource::Pose, pose.pitch == Pitch::Down);
  b.add("pitch_level", FeatureSource::Pose, pose.pitch == Pitch::Level);
  b.add("pitch_up", FeatureSource::Pose, pose.pitch == Pitch::Up);
  bool closed_near = false, open_near = false;
  if (ep) {
    const double reach = ep->world().config().visibility.interaction_range;
    for (const auto& r : ep->world().last_observation().receptacles) {
      if (!r.openable || r.range > reach) continue;
      (r.is_open ? open_near : closed_near) = true;
    }
  }
  b.add("view_closed_openable_in_reach", FeatureSource::Observation, closed_near);
  b.add("view_open_in_reach", FeatureSource::Observation, open_near);
}

void add_question(Builder& b, const Episode* ep) {
  const Question* q = ep ? &ep->question() : nullptr;
  for (int t = 0; t < kNumQuestionTypes; ++t)
    b.add("q_type_" + std::string(qtype_name(static_cast<QuestionType>(t))), FeatureSource::Question,
          q && static_cast<int>(q->qtype) == t);
  for (int c = 0; c < kNumObjectClasses; ++c)
    b.add("q_object_" + std::string(kObjectNames[static_cast<std::size_t>(c)]), FeatureSource::Question,
          q && q->object_class == c);
  for (int c = 0; c < kNumReceptacleClasses; ++c)
    b.add("q_container_" + std::string(kReceptacleNames[static_cast<std::size_t>(c)]), FeatureSource::Question,
          q && q->container && static_cast<int>(*q->container) == c);
}

void add_history(Builder& b, const Episode* ep) {
  const int last = ep ? ep->last_action() : -1;
  for (int i = 0; i < kNumPlannerActions; ++i) b.add("last_" + planner_action_name(i), FeatureSource::History, last == i);
  b.add("last_none", FeatureSource::History, last < 0);
  b.add("last_failed", FeatureSource::History, ep && last >= 0 && !ep->last_succeeded());
}

void add_progress(Builder& b, const Episode* ep) {
  const int max_steps = ep ? ep->options().reward.max_planner_steps : 1;
  b.add("planner_step_fraction", FeatureSource::Progress,
        ep ? static_cast<double>(ep->planner_steps()) / max_steps : 0.0);
}

void build_memory(Builder& b, const Episode* ep, const FeatureOptions& opts) {
  const SpatialMemory* mem = ep ? &ep->world().memory() : nullptr;
  const int channels = kNumClasses + 3;
  std::vector<double> mean(channels, 0.0), mx(channels, 0.0);
  if (mem) {
    const EgoWindow w = read_window(*mem, ep->world().agent(), opts.window_size);
    const int cells = w.size * w.size;
    for (int r = 0; r < w.size; ++r)
      for (int c = 0; c < w.size; ++c)
        for (int ch = 0; ch < channels; ++ch) {
          const double v = w.at(r, c, ch);
          mean[static_cast<std::size_t>(ch)] += v / cells;
          mx[static_cast<std::size_t>(ch)] = std::max(mx[static_cast<std::size_t>(ch)], v);
        }
  }
  const auto names = SpatialMemory(1, 1, kNumClasses).channel_names();
  for (int ch = 0; ch < channels; ++ch) {
    b.add("win_mean_" + names[static_cast<std::size_t>(ch)], FeatureSource::Memory, mean[static_cast<std::size_t>(ch)]);
    b.add("win_max_" + names[static_cast<std::size_t>(ch)], FeatureSource::Memory, mx[static_cast<std::size_t>(ch)]);
  }
  if (!opts.extended) {
    add_question(b, ep);
    add_history(b, ep);
    b.add("coverage_fraction", FeatureSource::Memory, mem ? coverage_fraction(*mem) : 0.0);
    return;
  }
  for (int i = 0; i < kNumNavigateActions; ++i) {
    double v = 0.0;
    if (mem) {
      const PlannerAction a = planner_action(i);
      const Cell g = navigation_goal(ep->world().agent(), a.forward, a.lateral);
      if (mem->in_bounds(g)) v = mem->at(g, mem->free_channel());
    }
    b.add("goal_free_" + goal_tag(i), FeatureSource::Memory, v);
  }
  for (int i = 0; i < kNumNavigateActions; ++i) {
    double v = 0.0;
    if (mem) {
      const PlannerAction a = planner_action(i);
      const Cell g = navigation_goal(ep->world().agent(), a.forward, a.lateral);
      int unknown = 0;
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
          const Cell c{g.x + dx, g.y + dy};
          if (mem->in_bounds(c) && unknown_free(mem->at(c, mem->free_channel()))) ++unknown;
        }
      v = unknown / 25.0;
    }
    b.add("goal_unknown_" + goal_tag(i), FeatureSource::Memory, v);
  }
  add_pose_and_affordance(b, ep);
  add_question(b, ep);

  double qmax = 0.0, cmax = 0.0;
  int count = 0;
  bool conj = false;
  if (mem) {
    const Question& q = ep->question();
    const int cch = q.container ? receptacle_channel(*q.container) : -1;
    for (int y = 0; y < mem->height(); ++y)
      for (int x = 0; x < mem->width(); ++x) {
        const double v = mem->at({x, y}, q.object_class);
        qmax = std::max(qmax, v);
        if (cch >= 0) cmax = std::max(cmax, mem->at({x, y}, cch));
        if (v > opts.tau) {
          ++count;
          if (cch >= 0 && mem->at({x, y}, cch) > opts.tau) conj = true;
        }
      }
  }
  b.add("q_object_max", FeatureSource::Question, qmax);
  b.add("q_object_count", FeatureSource::Question, std::min(count, kMaxCount) / static_cast<double>(kMaxCount));
  b.add("q_container_max", FeatureSource::Question, cmax);
  b.add("q_object_in_container", FeatureSource::Question, conj);

  add_history(b, ep);
  add_progress(b, ep);
  b.add("coverage_fraction", FeatureSource::Memory, mem ? coverage_fraction(*mem) : 0.0);
}

void build_memoryless(Builder& b, const Episode* ep, const FeatureOptions& opts) {
  std::vector<double> counts(kNumClasses, 0.0);
  int free_cells = 0;
  std::vector<double> goal_free(kNumNavigateActions, 0.0);
  int queried = 0;
  if (ep) {
    const Detections& det = ep->world().last_detections();
    for (const auto& d : det.items) counts[static_cast<std::size_t>(d.channel)] += 1.0;
    for (const auto& vc : det.cells) free_cells += vc.is_free;
    for (int i = 0; i < kNumNavigateActions; ++i) {
      const PlannerAction a = planner_action(i);
      const Cell g = navigation_goal(ep->world().agent(), a.forward, a.lateral);
      for (const auto& vc : det.cells)
        if (vc.cell == g && vc.is_free) goal_free[static_cast<std::size_t>(i)] = 1.0;
    }
    for (const auto& d : det.items) queried += d.channel == ep->question().object_class;
  }
  const auto names = SpatialMemory(1, 1, kNumClasses).channel_names();
  for (int c = 0; c < kNumClasses; ++c)
    b.add("view_count_" + names[static_cast<std::size_t>(c)], FeatureSource::Observation,
          std::min(counts[static_cast<std::size_t>(c)], 3.0) / 3.0);
  b.add("view_free_cells", FeatureSource::Observation, std::min(free_cells, 40) / 40.0);
  if (!opts.extended) {
    add_question(b, ep);
    add_history(b, ep);
    return;
  }
  for (int i = 0; i < kNumNavigateActions; ++i)
    b.add("view_goal_free_" + goal_tag(i), FeatureSource::Observation, goal_free[static_cast<std::size_t>(i)]);
  add_pose_and_affordance(b, ep);
  add_question(b, ep);
  b.add("q_object_in_view", FeatureSource::Question, std::min(queried, kMaxCount) / static_cast<double>(kMaxCount));
  add_history(b, ep);
  add_progress(b, ep);
}

Builder build(const Episode* ep, const FeatureOptions& opts) {
  Builder b(opts, ep != nullptr);
  if (opts.mode == FeatureMode::Memory) build_memory(b, ep, opts);
  else build_memoryless(b, ep, opts);
  return b;
}

}  // namespace

FeatureSpec feature_spec(const FeatureOptions& opts) { return build(nullptr, opts).spec_; }

std::vector<double> extract_features(const Episode& episode, const FeatureOptions& opts) {
  return build(&episode, opts).values_;
}

}  // namespace iqa
