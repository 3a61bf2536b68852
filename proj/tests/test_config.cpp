#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "support.hpp"

using namespace iqa;

TEST_CASE("run config JSON round trip") {
  RunConfig c;
  c.controller.detector = DetectorModel::noisy(0.7, 0.002, 0.3);
  c.memory_alpha = 0.4;
  c.reward.c_invalid = 2.5;
  c.training.updates = 123;
  c.training.loss.validity = 0.0;
  c.eval.greedy = true;
  const nlohmann::json j = run_config_to_json(c);
  CHECK(run_config_to_json(run_config_from_json(j)) == j);
}

TEST_CASE("memory rate resolves by detector") {
  RunConfig c;
  CHECK(c.episode_options(DetectorModel::oracle()).controller.memory.alpha == 1.0);
  CHECK(c.episode_options(DetectorModel::noisy(0.8, 0.01, 0.2)).controller.memory.alpha == 0.5);
  c.memory_alpha = 0.3;
  CHECK(c.episode_options(DetectorModel::oracle()).controller.memory.alpha == 0.3);
}

TEST_CASE("feature and episode options round trip") {
  FeatureOptions f;
  f.mode = FeatureMode::Memoryless;
  f.question_blind = true;
  const FeatureOptions g = feature_options_from_json(feature_options_to_json(f));
  CHECK(g.mode == f.mode);
  CHECK(g.question_blind);
  EpisodeOptions o;
  o.reward.max_planner_steps = 77;
  o.answer_source = AnswerSource::CurrentView;
  CHECK(episode_options_to_json(episode_options_from_json(episode_options_to_json(o))) == episode_options_to_json(o));
}

TEST_CASE("config files: partial documents use defaults, bad values are rejected") {
  const auto path = std::filesystem::temp_directory_path() / "iqa_test_config.json";
  {
    std::ofstream f(path);
    f << R"({"training": {"updates": 42}})";
  }
  const RunConfig c = load_run_config(path);
  CHECK(c.training.updates == 42);
  CHECK(c.training.num_envs == RunConfig().training.num_envs);
  {
    std::ofstream f(path);
    f << R"({"reward": {"c_time": -1}})";
  }
  CHECK_THROWS_AS(load_run_config(path), MalformedSpec);
  {
    std::ofstream f(path);
    f << "{not json";
  }
  CHECK_THROWS_AS(load_run_config(path), MalformedSpec);
  std::filesystem::remove(path);
}
