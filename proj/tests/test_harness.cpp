#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "iqa/trajectory_log.hpp"
#include "support.hpp"

using namespace iqa;
using namespace iqa::test;

namespace {

EpisodeRecord fake_record(const std::string& room, QuestionType qt, bool correct, int prim, int planner, int invalid) {
  EpisodeRecord r;
  r.room_id = room;
  r.qtype = qt;
  r.correct = correct;
  r.primitive_steps = prim;
  r.planner_steps = planner;
  r.invalid_commands = invalid;
  return r;
}

EpisodeOptions oracle_options() {
  EpisodeOptions o;
  o.controller.detector = DetectorModel::oracle();
  o.controller.memory.alpha = 1.0;
  return o;
}

}  // namespace

TEST_CASE("metrics: accuracy, mean length, invalid percentage, slices") {
  std::vector<EpisodeRecord> recs;
  for (int i = 0; i < 3; ++i) recs.push_back(fake_record("a", QuestionType::Existence, true, 10, 10, 1));
  recs.push_back(fake_record("b", QuestionType::Existence, false, 30, 10, 1));
  const MetricsReport m = compute_metrics(recs, {{"a", Split::Train}, {"b", Split::Test}});
  const QtypeMetrics& e = m.slice("all").per_qtype[0];
  CHECK(e.episodes == 4);
  CHECK(e.accuracy == doctest::Approx(0.75));
  CHECK(e.mean_length == doctest::Approx(15.0));
  CHECK(e.invalid_pct == doctest::Approx(10.0));
  CHECK(m.slice("seen").per_qtype[0].episodes == 3);
  CHECK(m.slice("unseen").per_qtype[0].accuracy == 0.0);
  CHECK(m.slice("all").per_qtype[1].episodes == 0);

  std::vector<EpisodeRecord> few{fake_record("a", QuestionType::Counting, true, 5, 40, 2)};
  CHECK(compute_metrics(few, {}).slice("all").per_qtype[1].invalid_pct == doctest::Approx(5.0));

  const MetricsRows rows{{"x", m}};
  CHECK(format_metrics_table(rows).find("x") != std::string::npos);
  const auto path = std::filesystem::temp_directory_path() / "iqa_test_metrics.csv";
  write_metrics_csv(rows, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.find("invalid_pct") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("most-likely-answer agent answers at once with its fixed choice") {
  const SmallWorld w = small_world(2);
  const auto train = items_of(w.dataset, Split::Train);
  const auto modal = modal_answers(train);
  const AgentSpec mla = AgentSpec::mla(modal);
  RunOptions ro;
  ro.episode = oracle_options();
  const auto recs = run_episodes(mla, w.table, items_of(w.dataset, Split::Test), ro);
  for (const auto& r : recs) {
    CHECK(r.planner_steps == 1);
    CHECK(r.primitive_steps == 0);
    CHECK(r.answer_given == modal[static_cast<std::size_t>(r.qtype)]);
  }
}

TEST_CASE("scripted oracle answers a visible countertop item correctly") {
  const RoomSpec room = tiny_kitchen();
  SceneConfig cfg = empty_config(room, {{3, 4}, Heading::S, Pitch::Level});
  cfg.placements = {{{4, 1}, LocationKind::On, {6, 1}}, {{4, 2}, LocationKind::Inside, {1, 1}}};
  const DatasetItem item = make_item(room, make_question(QuestionType::Counting, 4), cfg);
  REQUIRE(item.answer == 2);
  const EpisodeRecord r = run_episode(AgentSpec::scripted_agent(), room, item, oracle_options(), 0);
  CHECK(r.correct);
  CHECK(r.invalid_commands == 0);
}

TEST_CASE("run_episodes: item order, thread independence, replayable logs") {
  const SmallWorld w = small_world(4);
  const auto test = items_of(w.dataset, Split::Test);
  const auto log_dir = std::filesystem::temp_directory_path() / "iqa_test_logs";
  std::filesystem::remove_all(log_dir);
  EpisodeOptions opts = oracle_options();
  opts.controller.detector = DetectorModel::noisy(0.85, 0.005, 0.1);
  opts.controller.memory.alpha = 0.5;
  Rng rng(3);
  const AgentSpec agent = AgentSpec::learned("probe", PolicyParams::random(feature_spec({}).size(), rng, 0.2), {});
  RunOptions par;
  par.episode = opts;
  par.seed = 11;
  par.log_dir = log_dir;
  RunOptions ser = par;
  ser.parallel = false;
  ser.log_dir.clear();
  const auto a = run_episodes(agent, w.table, test, par);
  const auto b = run_episodes(agent, w.table, test, ser);
  REQUIRE(a.size() == test.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].item_id == test[i].item_id);
    CHECK(a[i].final_digest == b[i].final_digest);
    CHECK(a[i].total_return == b[i].total_return);
    const auto path = log_dir / episode_log_name("probe", test[i].item_id);
    REQUIRE(std::filesystem::is_regular_file(path));
    CHECK(path.parent_path() == log_dir);
    const ReplayReport rep = replay_log(path);
    CHECK_MESSAGE(rep.ok(), rep.detail);
    const EpisodeRecord back = record_from_log(read_episode_log(path));
    CHECK(back.planner_steps == a[i].planner_steps);
    CHECK(back.answer_given == a[i].answer_given);
  }
  std::filesystem::remove_all(log_dir);
}

TEST_CASE("a policy trained for another feature layout is refused") {
  const SmallWorld w = small_world(5);
  const auto test = items_of(w.dataset, Split::Test);
  const AgentSpec agent = AgentSpec::learned("bad", PolicyParams(3), {});
  CHECK_THROWS_AS(run_episode(agent, room_for(w.table, test[0].config.room_id), test[0], oracle_options(), 0), ConfigMismatch);
}

TEST_CASE("tampered logs fail replay") {
  const RoomSpec room = tiny_kitchen();
  SceneConfig cfg = empty_config(room, {{3, 4}, Heading::S, Pitch::Level});
  cfg.placements = {{{4, 1}, LocationKind::On, {6, 1}}};
  const DatasetItem item = make_item(room, make_question(QuestionType::Existence, 4), cfg);
  const EpisodeRecord r = run_episode(AgentSpec::scripted_agent(), room, item, oracle_options(), 0);
  const WorldHandle world = replay_world(room, cfg, oracle_options().controller, r.detector_seed, r.events);
  const auto path = std::filesystem::temp_directory_path() / "iqa_test_tamper.jsonl.gz";
  write_episode_log(path, r, room, item, oracle_options(), world.memory());
  CHECK(replay_log(path).ok());
  EpisodeLog log = read_episode_log(path);
  log.result["total_return"] = log.result["total_return"].get<double>() + 1.0;
  CHECK_FALSE(replay_log(log).totals_match);
  log = read_episode_log(path);
  REQUIRE(log.steps.size() > 1);
  log.steps.pop_back();
  CHECK_FALSE(replay_log(log).ok());
  std::filesystem::remove(path);
}
