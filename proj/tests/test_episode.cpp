#include <doctest.h>

#include <set>

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

DatasetItem tiny_item(QuestionType qt = QuestionType::Existence, AgentState start = {{3, 3}, Heading::N, Pitch::Level}) {
  const RoomSpec room = tiny_kitchen();
  SceneConfig cfg = empty_config(room, start);
  cfg.placements = {{{2, 1}, LocationKind::On, {6, 1}}};
  return make_item(room, make_question(qt, 2), cfg);
}

}  // namespace

TEST_CASE("planner action indices form a bijection") {
  std::set<std::string> names;
  for (int i = 0; i < kNumPlannerActions; ++i) {
    CHECK(planner_index(planner_action(i)) == i);
    names.insert(planner_action_name(i));
  }
  CHECK(names.size() == static_cast<std::size_t>(kNumPlannerActions));
  CHECK(kNumNavigateActions == 25);
  CHECK(planner_action(kScanUp).kind == PlannerKind::Scan);
  CHECK(planner_action(kOpenAction).kind == PlannerKind::Open);
  CHECK(planner_action(kCloseAction).kind == PlannerKind::Close);
  CHECK(planner_action(kAnswerAction).kind == PlannerKind::Answer);
  CHECK_THROWS(planner_action(32));
  CHECK_THROWS(planner_action(-1));
}

TEST_CASE("navigation goals are egocentric") {
  const AgentState a{{5, 5}, Heading::E, Pitch::Level};
  CHECK(navigation_goal(a, 1, 0) == Cell{6, 5});
  CHECK(navigation_goal(a, 2, 1) == Cell{7, 6});
  CHECK(navigation_goal(a, 5, -2) == Cell{10, 3});
  const AgentState n{{5, 5}, Heading::N, Pitch::Level};
  CHECK(navigation_goal(n, 1, 2) == Cell{7, 4});
}

TEST_CASE("reward accounting: time cost, coverage gain, answer") {
  const RoomSpec room = tiny_kitchen();
  const DatasetItem item = tiny_item();
  Episode ep(room, item, oracle_options());
  const RewardConfig rc = ep.options().reward;
  double cov = coverage_fraction(ep.world().memory());
  const StepResult r1 = ep.step(kScanLeft);
  const double cov1 = coverage_fraction(ep.world().memory());
  CHECK(r1.was_valid);
  CHECK(r1.reward == doctest::Approx(-rc.c_time + rc.c_coverage * (cov1 - cov)));
  cov = cov1;
  const int expected = ep.readout();
  const StepResult r2 = ep.step(kAnswerAction);
  CHECK(r2.done);
  CHECK(r2.answered);
  CHECK(r2.answer == expected);
  CHECK(r2.correct == (expected == item.answer));
  CHECK(r2.reward == doctest::Approx(-rc.c_time + (r2.correct ? rc.r_answer : -rc.r_answer)));
  CHECK(ep.total_return() == doctest::Approx(r1.reward + r2.reward));
  CHECK_THROWS_AS(ep.step(kScanUp), EpisodeFinished);
  CHECK_THROWS_AS(ep.answer_with(0), EpisodeFinished);
}

TEST_CASE("invalid commands are penalised and counted but the episode continues") {
  const RoomSpec room = tiny_kitchen();
  Episode ep(room, tiny_item(), oracle_options());
  const PlannerMask mask = ep.valid_mask();
  int invalid = -1;
  for (int i = 0; i < kNumPlannerActions; ++i)
    if (!mask[static_cast<std::size_t>(i)]) invalid = i;
  REQUIRE(invalid >= 0);
  const StepResult r = ep.step(invalid);
  CHECK_FALSE(r.was_valid);
  CHECK_FALSE(r.done);
  CHECK(ep.invalid_commands() == 1);
  CHECK(r.reward <= -ep.options().reward.c_invalid - ep.options().reward.c_time + 1e-9 +
                         ep.options().reward.c_coverage * 1.0);
  CHECK_FALSE(ep.steps().back().predicted_valid);
}

TEST_CASE("planner-step cap ends the episode with the wrong-answer penalty") {
  const RoomSpec room = tiny_kitchen();
  EpisodeOptions o = oracle_options();
  o.reward.max_planner_steps = 3;
  Episode ep(room, tiny_item(), o);
  ep.step(kScanLeft);
  ep.step(kScanRight);
  const StepResult r = ep.step(kScanLeft);
  CHECK(r.done);
  CHECK(r.capped);
  CHECK_FALSE(r.answered);
  const EpisodeRecord rec = ep.record("test");
  CHECK_FALSE(rec.correct);
  CHECK(rec.answer_given == -1);
  CHECK(rec.planner_steps == 3);
}

TEST_CASE("primitive budget caps navigation") {
  const RoomSpec room = open_room(20, 20);
  EpisodeOptions o = oracle_options();
  o.reward.max_primitive_steps = 4;
  SceneConfig cfg = empty_config(room, {{2, 18}, Heading::N, Pitch::Level});
  Episode ep(room, make_item(room, make_question(QuestionType::Existence, 0), cfg), o);
  const StepResult r = ep.step(planner_index({PlannerKind::Navigate, 5, 0, ScanDirection::Up}));
  CHECK(r.done);
  CHECK(r.capped);
  CHECK(ep.world().primitive_steps() == 4);
}

TEST_CASE("the validity mask matches execution outcomes") {
  Rng rng(31);
  const auto room = generate_kitchen("mask", 10, 10, 77);
  ConfigConstraints cons;
  int checked = 0, mismatched = 0;
  for (int e = 0; e < 20; ++e) {
    SceneConfig cfg = generate_configuration(room, cons, rng);
    Episode ep(room, make_item(room, make_question(QuestionType::Existence, 0), cfg), oracle_options());
    for (int t = 0; t < 40 && !ep.done(); ++t) {
      const PlannerMask mask = ep.valid_mask();
      const int a = static_cast<int>(rng.index(kAnswerAction));
      ep.step(a);
      ++checked;
      mismatched += mask[static_cast<std::size_t>(a)] != ep.last_succeeded();
    }
  }
  CHECK(checked > 500);
  CHECK(mismatched == 0);
}

TEST_CASE("primitive control and the explicit answer dialog") {
  const RoomSpec room = tiny_kitchen();
  EpisodeOptions o = oracle_options();
  o.control = ControlMode::Primitive;
  Episode ep(room, tiny_item(QuestionType::Counting), o);
  CHECK_THROWS(ep.step(kScanUp));
  const auto mask = ep.valid_primitive_mask();
  CHECK(mask[static_cast<int>(LowLevelAction::RotateLeft)]);
  const StepResult r = ep.step_primitive(static_cast<int>(LowLevelAction::RotateLeft));
  CHECK(r.was_valid);
  CHECK(ep.world().agent().heading == Heading::W);
  CHECK(ep.world().primitive_steps() == 1);
  CHECK_THROWS_AS(ep.answer_with(4), std::out_of_range);
  const StepResult a = ep.answer_with(1);
  CHECK(a.done);
  CHECK(a.correct);
  CHECK(ep.steps().back().action == kNumLowLevelActions + 1);
}

TEST_CASE("current-view answering ignores earlier sightings") {
  const RoomSpec room = tiny_kitchen();
  EpisodeOptions o = oracle_options();
  o.answer_source = AnswerSource::CurrentView;
  const DatasetItem item = tiny_item(QuestionType::Existence, {{4, 3}, Heading::N, Pitch::Level});
  Episode ep(room, item, o);
  CHECK(ep.readout() == 0);
  ep.step(kScanLeft);
  ep.step(kScanLeft);
  CHECK(answer(ep.world().memory(), item.question).choice() == 0);
  CHECK(ep.readout() == 1);
}

TEST_CASE("records replay to identical worlds") {
  const auto room = generate_kitchen("rep", 10, 10, 5);
  Rng rng(8);
  EpisodeOptions o;
  o.controller.detector = DetectorModel::noisy(0.85, 0.005, 0.1);
  for (int e = 0; e < 10; ++e) {
    o.detector_seed = rng.next();
    SceneConfig cfg = generate_configuration(room, {}, rng);
    Episode ep(room, make_item(room, make_question(QuestionType::Counting, 1), cfg), o);
    while (!ep.done()) ep.step(static_cast<int>(rng.index(kNumPlannerActions)));
    const EpisodeRecord rec = ep.record("random");
    const WorldHandle again = replay_world(room, cfg, o.controller, o.detector_seed, rec.events);
    CHECK(again.memory() == ep.world().memory());
    CHECK(state_digest(again.scene(), again.agent()) == rec.final_digest);
  }
}
