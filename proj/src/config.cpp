#include "iqa/config.hpp"

#include <fstream>

namespace iqa {

using nlohmann::json;

RunConfig::RunConfig() { controller.detector = DetectorModel::noisy(0.9, 0.001, 0.1); }

EpisodeOptions RunConfig::episode_options(const DetectorModel& detector) const {
  EpisodeOptions o;
  o.controller = controller;
  o.controller.detector = detector;
  o.controller.memory.alpha = memory_alpha.value_or(detector.is_oracle() ? 1.0 : 0.5);
  o.controller.max_primitive_steps = reward.max_primitive_steps;
  o.reward = reward;
  o.answer = answer;
  return o;
}

namespace {

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json array2(const std::array<double, 2>& a) { return json::array({a[0], a[1]}); }

}  // namespace

json detector_to_json(const DetectorModel& d) {
  return {{"mode", d.is_oracle() ? "oracle" : "noisy"},
          {"recall", d.recall},
          {"false_positive_rate", d.false_positive_rate},
          {"localization_noise", d.localization_noise}};
}

DetectorModel detector_from_json(const json& j) {
  const std::string mode = j.value("mode", "noisy");
  if (mode == "oracle") return DetectorModel::oracle();
  if (mode != "noisy") throw MalformedSpec("detector mode must be oracle or noisy");
  DetectorModel d = DetectorModel::noisy(0.9, 0.001, 0.1);
  const auto per_class = [&](const char* key, std::array<double, kNumObjectClasses>& out) {
    if (!j.contains(key)) return;
    if (j.at(key).is_number()) out.fill(j.at(key).get<double>());
    else out = j.at(key).get<std::array<double, kNumObjectClasses>>();
  };
  per_class("recall", d.recall);
  per_class("false_positive_rate", d.false_positive_rate);
  read(j, "localization_noise", d.localization_noise);
  d.validate();
  return d;
}

json controller_to_json(const ControllerConfig& c) {
  const auto& v = c.visibility;
  return {{"visibility",
           {{"max_range", v.max_range},
            {"fov_degrees", v.fov_degrees},
            {"interaction_range", v.interaction_range},
            {"down_range", array2(v.down_range)},
            {"level_range", array2(v.level_range)},
            {"up_range", array2(v.up_range)}}},
          {"memory",
           {{"alpha", c.memory.alpha},
            {"tau_detect", c.memory.tau_detect},
            {"window_size", c.memory.window_size},
            {"integration_window", c.memory.integration_window},
            {"channel_alpha", c.memory.channel_alpha}}},
          {"detector", detector_to_json(c.detector)},
          {"astar",
           {{"known_cost", c.astar.known_cost},
            {"unknown_cost", c.astar.unknown_cost},
            {"unknown_tolerance", c.astar.unknown_tolerance}}},
          {"navigator", c.navigator == NavigatorMode::Oracle ? "oracle" : "memory"},
          {"scan_every", c.scan_every},
          {"max_nav_steps", c.max_nav_steps},
          {"max_primitive_steps", c.max_primitive_steps}};
}

ControllerConfig controller_from_json(const json& j) {
  ControllerConfig c;
  if (j.contains("visibility")) {
    const json& v = j.at("visibility");
    read(v, "max_range", c.visibility.max_range);
    read(v, "fov_degrees", c.visibility.fov_degrees);
    read(v, "interaction_range", c.visibility.interaction_range);
    read(v, "down_range", c.visibility.down_range);
    read(v, "level_range", c.visibility.level_range);
    read(v, "up_range", c.visibility.up_range);
  }
  if (j.contains("memory")) {
    const json& m = j.at("memory");
    read(m, "alpha", c.memory.alpha);
    read(m, "tau_detect", c.memory.tau_detect);
    read(m, "window_size", c.memory.window_size);
    read(m, "integration_window", c.memory.integration_window);
    read(m, "channel_alpha", c.memory.channel_alpha);
  }
  if (j.contains("detector")) c.detector = detector_from_json(j.at("detector"));
  if (j.contains("astar")) {
    const json& a = j.at("astar");
    read(a, "known_cost", c.astar.known_cost);
    read(a, "unknown_cost", c.astar.unknown_cost);
    read(a, "unknown_tolerance", c.astar.unknown_tolerance);
  }
  c.navigator = j.value("navigator", "memory") == "oracle" ? NavigatorMode::Oracle : NavigatorMode::Memory;
  read(j, "scan_every", c.scan_every);
  read(j, "max_nav_steps", c.max_nav_steps);
  read(j, "max_primitive_steps", c.max_primitive_steps);
  c.memory.validate();
  return c;
}

namespace {

json reward_to_json(const RewardConfig& r) {
  return {{"r_answer", r.r_answer},
          {"c_time", r.c_time},
          {"c_invalid", r.c_invalid},
          {"c_coverage", r.c_coverage},
          {"max_planner_steps", r.max_planner_steps},
          {"max_primitive_steps", r.max_primitive_steps}};
}

RewardConfig reward_from_json(const json& j) {
  RewardConfig r;
  read(j, "r_answer", r.r_answer);
  read(j, "c_time", r.c_time);
  read(j, "c_invalid", r.c_invalid);
  read(j, "c_coverage", r.c_coverage);
  read(j, "max_planner_steps", r.max_planner_steps);
  read(j, "max_primitive_steps", r.max_primitive_steps);
  r.validate();
  return r;
}

}  // namespace

json episode_options_to_json(const EpisodeOptions& o) {
  return {{"controller", controller_to_json(o.controller)},
          {"reward", reward_to_json(o.reward)},
          {"answer", {{"tau", o.answer.tau}, {"epsilon", o.answer.epsilon}}},
          {"answer_source", o.answer_source == AnswerSource::Memory ? "memory" : "current_view"},
          {"control", o.control == ControlMode::Planner ? "planner" : "primitive"},
          {"detector_seed", o.detector_seed}};
}

EpisodeOptions episode_options_from_json(const json& j) {
  EpisodeOptions o;
  o.controller = controller_from_json(j.at("controller"));
  o.reward = reward_from_json(j.at("reward"));
  read(j.at("answer"), "tau", o.answer.tau);
  read(j.at("answer"), "epsilon", o.answer.epsilon);
  o.answer_source = j.value("answer_source", "memory") == "memory" ? AnswerSource::Memory : AnswerSource::CurrentView;
  o.control = j.value("control", "planner") == "planner" ? ControlMode::Planner : ControlMode::Primitive;
  read(j, "detector_seed", o.detector_seed);
  return o;
}

json run_config_to_json(const RunConfig& c) {
  json world = controller_to_json(c.controller);
  world.erase("memory");
  world.erase("detector");
  json memory = controller_to_json(c.controller).at("memory");
  memory["alpha"] = c.memory_alpha ? json(*c.memory_alpha) : json("auto");
  const auto& t = c.training;
  return {{"world", world},
          {"detector", detector_to_json(c.controller.detector)},
          {"memory", memory},
          {"reward", reward_to_json(c.reward)},
          {"answer", {{"tau", c.answer.tau}, {"epsilon", c.answer.epsilon}}},
          {"training",
           {{"num_envs", t.num_envs},
            {"n_steps", t.n_steps},
            {"gamma", t.gamma},
            {"value_coef", t.loss.value},
            {"entropy_coef", t.loss.entropy},
            {"validity_coef", t.loss.validity},
            {"lr", t.adam.lr},
            {"max_grad_norm", t.adam.max_grad_norm},
            {"updates", t.updates},
            {"updates_per_epoch", t.updates_per_epoch},
            {"init_scale", t.init_scale},
            {"seed", t.seed},
            {"parallel", t.parallel}}},
          {"eval",
           {{"greedy", c.eval.greedy},
            {"mask_predicted_invalid", c.eval.mask_predicted_invalid},
            {"seed", c.eval.seed},
            {"parallel", c.eval.parallel},
            {"write_logs", c.eval.write_logs}}},
          {"scripted", {{"coverage_target", c.scripted.coverage_target}, {"inspect_receptacles", c.scripted.inspect_receptacles}}}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  json controller = j.value("world", json::object());
  if (j.contains("memory")) {
    json memory = j.at("memory");
    if (memory.contains("alpha")) {
      if (memory.at("alpha").is_number()) c.memory_alpha = memory.at("alpha").get<double>();
      memory.erase("alpha");
    }
    controller["memory"] = memory;
  }
  if (j.contains("detector")) controller["detector"] = j.at("detector");
  else controller["detector"] = detector_to_json(c.controller.detector);
  c.controller = controller_from_json(controller);
  if (j.contains("reward")) c.reward = reward_from_json(j.at("reward"));
  if (j.contains("answer")) {
    read(j.at("answer"), "tau", c.answer.tau);
    read(j.at("answer"), "epsilon", c.answer.epsilon);
  }
  if (j.contains("training")) {
    const json& t = j.at("training");
    auto& tc = c.training;
    read(t, "num_envs", tc.num_envs);
    read(t, "n_steps", tc.n_steps);
    read(t, "gamma", tc.gamma);
    read(t, "value_coef", tc.loss.value);
    read(t, "entropy_coef", tc.loss.entropy);
    read(t, "validity_coef", tc.loss.validity);
    read(t, "lr", tc.adam.lr);
    read(t, "max_grad_norm", tc.adam.max_grad_norm);
    read(t, "updates", tc.updates);
    read(t, "updates_per_epoch", tc.updates_per_epoch);
    read(t, "init_scale", tc.init_scale);
    read(t, "seed", tc.seed);
    read(t, "parallel", tc.parallel);
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    read(e, "greedy", c.eval.greedy);
    read(e, "mask_predicted_invalid", c.eval.mask_predicted_invalid);
    read(e, "seed", c.eval.seed);
    read(e, "parallel", c.eval.parallel);
    read(e, "write_logs", c.eval.write_logs);
  }
  if (j.contains("scripted")) {
    read(j.at("scripted"), "coverage_target", c.scripted.coverage_target);
    read(j.at("scripted"), "inspect_receptacles", c.scripted.inspect_receptacles);
  }
  return c;
}

json feature_options_to_json(const FeatureOptions& f) {
  return {{"mode", f.mode == FeatureMode::Memory ? "memory" : "memoryless"},
          {"question_blind", f.question_blind},
          {"extended", f.extended},
          {"window_size", f.window_size},
          {"tau", f.tau}};
}

FeatureOptions feature_options_from_json(const json& j) {
  FeatureOptions f;
  const std::string mode = j.value("mode", "memory");
  if (mode != "memory" && mode != "memoryless") throw MalformedSpec("feature mode must be memory or memoryless");
  f.mode = mode == "memory" ? FeatureMode::Memory : FeatureMode::Memoryless;
  read(j, "question_blind", f.question_blind);
  read(j, "extended", f.extended);
  read(j, "window_size", f.window_size);
  read(j, "tau", f.tau);
  return f;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw MalformedSpec("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw MalformedSpec(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace iqa
