#include <doctest.h>

#include "support.hpp"

using namespace iqa;
using namespace iqa::test;

namespace {

EpisodeOptions oracle_options() {
  EpisodeOptions o;
  o.controller.detector = DetectorModel::oracle();
  o.controller.memory.alpha = 1.0;
  return o;
}

}  // namespace

TEST_CASE("single-cell room answers immediately") {
  const RoomSpec room = open_room(3, 3, "cell");
  const DatasetItem item = make_item(room, make_question(QuestionType::Existence, 0), empty_config(room, {{1, 1}, Heading::N, Pitch::Level}));
  const EpisodeRecord r = run_episode(AgentSpec::scripted_agent(), room, item, oracle_options(), 0);
  CHECK(r.planner_steps == 1);
  CHECK(r.steps.front().action == kAnswerAction);
  CHECK(r.correct);
}

TEST_CASE("every openable receptacle is opened and closed again") {
  Rng rng(12);
  for (int k = 0; k < 6; ++k) {
    const RoomSpec room = generate_kitchen("open" + std::to_string(k), 9 + k % 3, 10, 40 + static_cast<std::uint64_t>(k));
    const SceneConfig cfg = generate_configuration(room, {}, rng);
    const DatasetItem item = make_item(room, make_question(QuestionType::Counting, 0), cfg);
    std::set<int> opened;
    const EpisodeRecord r = run_episode(AgentSpec::scripted_agent(), room, item, oracle_options(), 0, &opened);
    const Scene scene = load_scene(room, cfg);
    for (std::size_t i = 0; i < scene.receptacles.size(); ++i)
      if (scene.receptacles[i].openable) CHECK(opened.count(static_cast<int>(i)) == 1);
    const WorldHandle end = replay_world(room, cfg, oracle_options().controller, r.detector_seed, r.events);
    for (const auto& rec : end.scene().receptacles) CHECK_FALSE(rec.is_open);
    CHECK(r.correct);
  }
}

TEST_CASE("scripted episodes terminate within the caps on generated rooms") {
  const RoomSet set = generate_room_set({"cap", 10, 10, 8, 14, 5});
  Rng rng(3);
  EpisodeOptions o = oracle_options();
  int capped = 0, over = 0;
  for (int e = 0; e < 1000; ++e) {
    const RoomSpec& room = set.train[static_cast<std::size_t>(e) % set.train.size()];
    const DatasetItem item = make_item(room, make_question(QuestionType::Existence, static_cast<int>(rng.index(kNumObjectClasses))),
                                       generate_configuration(room, {}, rng));
    const EpisodeRecord r = run_episode(AgentSpec::scripted_agent(), room, item, o, 0);
    over += r.planner_steps > o.reward.max_planner_steps || r.primitive_steps > o.reward.max_primitive_steps;
    capped += r.answer_given < 0;
  }
  CHECK(over == 0);
  CHECK(capped == 0);
}
