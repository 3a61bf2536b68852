#include <doctest.h>

#include <limits>
#include <queue>

#include "support.hpp"

using namespace iqa;
using namespace iqa::test;

namespace {

// Reference shortest path cost: plain Dijkstra over the same cost model.
std::optional<double> dijkstra(const OccupancyGrid& g, Cell s, Cell t, const AStarConfig& cfg) {
  if (!g.in_bounds(s) || !g.in_bounds(t)) return std::nullopt;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<std::size_t>(g.width * g.height), inf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[static_cast<std::size_t>(s.y * g.width + s.x)] = 0.0;
  pq.push({0.0, s.y * g.width + s.x});
  while (!pq.empty()) {
    const auto [d, i] = pq.top();
    pq.pop();
    if (d > dist[static_cast<std::size_t>(i)]) continue;
    const Cell c{i % g.width, i / g.width};
    for (const Cell dlt : {Cell{1, 0}, Cell{-1, 0}, Cell{0, 1}, Cell{0, -1}}) {
      const Cell n = c + dlt;
      if (!g.in_bounds(n)) continue;
      const double p = g.at(n);
      double w = 0.0;
      if (p == 0.5) w = cfg.unknown_cost;
      else if (p > 0.5) w = cfg.known_cost;
      else continue;
      const int j = n.y * g.width + n.x;
      if (d + w < dist[static_cast<std::size_t>(j)]) {
        dist[static_cast<std::size_t>(j)] = d + w;
        pq.push({d + w, j});
      }
    }
  }
  const double d = dist[static_cast<std::size_t>(t.y * g.width + t.x)];
  if (d == inf) return std::nullopt;
  return d;
}

OccupancyGrid random_occupancy(Rng& rng, int w, int h) {
  OccupancyGrid g{w, h, {}};
  for (int i = 0; i < w * h; ++i) {
    const double u = rng.uniform01();
    g.free_prob.push_back(u < 0.25 ? 0.0 : u < 0.45 ? 0.5 : 0.9);
  }
  return g;
}

}  // namespace

TEST_CASE("astar cost equals the Dijkstra oracle on mixed known/unknown grids") {
  Rng rng(2024);
  const AStarConfig cfg;
  int reachable = 0;
  for (int t = 0; t < 300; ++t) {
    const OccupancyGrid g = random_occupancy(rng, 20, 20);
    const Cell s{static_cast<int>(rng.index(20)), static_cast<int>(rng.index(20))};
    const Cell e{static_cast<int>(rng.index(20)), static_cast<int>(rng.index(20))};
    const auto path = astar(g, s, e, cfg);
    const auto oracle = dijkstra(g, s, e, cfg);
    REQUIRE(path.has_value() == oracle.has_value());
    if (!path) continue;
    ++reachable;
    CHECK(path->front() == s);
    CHECK(path->back() == e);
    for (std::size_t i = 1; i < path->size(); ++i) {
      const Cell d = (*path)[i] - (*path)[i - 1];
      CHECK(std::abs(d.x) + std::abs(d.y) == 1);
    }
    CHECK(path_cost(g, *path, cfg) == *oracle);
  }
  CHECK(reachable > 50);
}

TEST_CASE("unknown cells are never treated as confidently free") {
  OccupancyGrid g{3, 1, {1.0, 0.5, 1.0}};
  const AStarConfig cfg;
  CHECK(*step_cost(g, {1, 0}, cfg) == cfg.unknown_cost);
  CHECK(*step_cost(g, {2, 0}, cfg) == cfg.known_cost);
  g.free_prob[1] = 0.2;
  CHECK_FALSE(step_cost(g, {1, 0}, cfg).has_value());
  CHECK_FALSE(astar(g, {0, 0}, {2, 0}, cfg).has_value());
}

TEST_CASE("navigate with full knowledge executes a shortest path") {
  Rng rng(99);
  for (int t = 0; t < 40; ++t) {
    const RoomSpec room = random_grid(rng, 20, 20, 0.2);
    const auto free = room_free_cells(room);
    std::vector<Cell> open;
    for (const Cell& c : free)
      if (std::find(room.walls.begin(), room.walls.end(), c) == room.walls.end()) open.push_back(c);
    const Cell s = open[rng.index(open.size())];
    const Cell e = open[rng.index(open.size())];
    ControllerConfig cc;
    cc.navigator = NavigatorMode::Oracle;
    cc.detector = DetectorModel::oracle();
    cc.memory.alpha = 1.0;
    Scene scene = load_scene(room, empty_config(room, {s, Heading::N, Pitch::Level}));
    const auto oracle = dijkstra(occupancy_from_scene(scene), s, e, {});
    WorldHandle world(std::move(scene), {s, Heading::N, Pitch::Level}, cc, 1);
    const NavResult res = navigate(world, e, 100000);
    REQUIRE(oracle.has_value());
    CHECK(res.outcome == NavOutcome::Arrived);
    CHECK(world.agent().cell == e);
    CHECK(static_cast<double>(res.visited.size()) == *oracle);
  }
}

TEST_CASE("navigate: out-of-bounds goal terminates immediately") {
  const RoomSpec room = tiny_kitchen();
  ControllerConfig cc;
  WorldHandle world(load_scene(room, empty_config(room, {{3, 3}, Heading::N, Pitch::Level})), {{3, 3}, Heading::N, Pitch::Level},
                    cc, 1);
  const NavResult res = navigate(world, {-3, 2}, 100);
  CHECK(res.outcome == NavOutcome::TerminatedUnreachable);
  CHECK(res.primitive_steps == 0);
}

TEST_CASE("navigate on memory replans around discovered obstacles") {
  RoomSpec room = open_room(12, 9);
  for (int y = 1; y <= 6; ++y) room.walls.push_back({6, y});
  ControllerConfig cc;
  cc.detector = DetectorModel::oracle();
  cc.memory.alpha = 1.0;
  const AgentState start{{2, 4}, Heading::E, Pitch::Level};
  WorldHandle world(load_scene(room, empty_config(room, start)), start, cc, 1);
  world.perceive();
  const NavResult res = navigate(world, {9, 4}, 500);
  CHECK(res.outcome == NavOutcome::Arrived);
  CHECK(world.agent().cell == Cell{9, 4});
  CHECK(res.plans.size() >= 1);
  CHECK(res.primitive_steps <= 500);
}

TEST_CASE("navigate respects its primitive budget") {
  const RoomSpec room = open_room(20, 20);
  ControllerConfig cc;
  const AgentState start{{1, 1}, Heading::S, Pitch::Level};
  WorldHandle world(load_scene(room, empty_config(room, start)), start, cc, 1);
  const NavResult res = navigate(world, {18, 18}, 5);
  CHECK(res.outcome == NavOutcome::BudgetExhausted);
  CHECK(res.primitive_steps == 5);
  CHECK(world.primitive_steps() == 5);
}

TEST_CASE("oracle detector reports exactly the visible objects and receptacles") {
  const RoomSpec room = tiny_kitchen();
  SceneConfig c = empty_config(room, {{3, 3}, Heading::N, Pitch::Down});
  c.placements = {{{0, 1}, LocationKind::Floor, {3, 3}}, {{4, 2}, LocationKind::On, {6, 1}}};
  const Scene s = load_scene(room, c);
  Rng rng(1);
  const Observation obs = observe(s, {{4, 5}, Heading::N, Pitch::Down});
  const Detections d = detect(obs, DetectorModel::oracle(), rng, s.width, s.height);
  CHECK(d.cells.size() == obs.cells.size());
  std::size_t objects = 0;
  for (const auto& it : d.items) objects += it.channel < kNumObjectClasses;
  CHECK(objects == obs.objects.size());
}

TEST_CASE("noisy detector recall and false positive rates match their parameters") {
  RoomSpec room = open_room(14, 14);
  room.floor_sites = {{7, 9}};
  SceneConfig c = empty_config(room, {{7, 12}, Heading::N, Pitch::Down});
  c.placements = {{{3, 1}, LocationKind::Floor, {7, 9}}};
  const Scene s = load_scene(room, c);
  const Observation obs = observe(s, c.start);
  REQUIRE(obs.objects.size() == 1);
  Rng rng(7);
  const DetectorModel m = DetectorModel::noisy(0.8, 0.01, 0.0);
  int hits = 0, fps = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const Detections d = detect(obs, m, rng, s.width, s.height);
    for (const auto& it : d.items) {
      if (it.channel >= kNumObjectClasses) continue;
      if (it.channel == 3 && it.cell == Cell{7, 9}) ++hits;
      else ++fps;
    }
  }
  CHECK(static_cast<double>(hits) / n == doctest::Approx(0.8).epsilon(0.03));
  const double expected_fp = 0.01 * static_cast<double>(obs.cells.size()) * kNumObjectClasses;
  CHECK(static_cast<double>(fps) / n == doctest::Approx(expected_fp).epsilon(0.05));
}

TEST_CASE("detector model validation") {
  CHECK_THROWS_AS(DetectorModel::noisy(1.5, 0.0, 0.0), MalformedSpec);
  CHECK_THROWS_AS(DetectorModel::noisy(0.5, -0.1, 0.0), MalformedSpec);
}

TEST_CASE("answerer on ground-truth memory matches answer_of") {
  const RoomSpec room = generate_kitchen("k", 10, 10, 5);
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    const auto qtype = static_cast<QuestionType>(rng.index(3));
    std::optional<ReceptacleClass> container;
    if (qtype == QuestionType::SpatialRelationship)
      container = room.receptacles[rng.index(room.receptacles.size())].class_id;
    const Question q = make_question(qtype, static_cast<int>(rng.index(kNumObjectClasses)), container);
    ConfigConstraints cons;
    cons.distractor_max = 3;
    const SceneConfig cfg = generate_configuration(room, cons, rng);
    const Scene scene = load_scene(room, cfg);
    const AnswerDistribution dist = answer(ground_truth_memory(scene), q);
    CHECK(dist.choice() == answer_of(scene, q));
    double total = 0.0;
    for (double p : dist.probabilities) total += p;
    CHECK(total == doctest::Approx(1.0));
  }
}

TEST_CASE("answer distribution puts 1 - epsilon on the selected choice") {
  SpatialMemory m(4, 4, kNumClasses);
  const Question q = make_question(QuestionType::Counting, 1);
  const AnswerDistribution d = answer(m, q, {0.5, 0.03});
  CHECK(d.choice() == 0);
  CHECK(d.probabilities[0] == doctest::Approx(0.97));
  CHECK(d.probabilities[1] == doctest::Approx(0.01));
}

TEST_CASE("scan moves the camera once and records a detector pass") {
  const RoomSpec room = tiny_kitchen();
  ControllerConfig cc;
  const AgentState start{{3, 3}, Heading::N, Pitch::Level};
  WorldHandle world(load_scene(room, empty_config(room, start)), start, cc, 1);
  const int passes = world.detector_passes();
  CHECK(scan(world, ScanDirection::Up).success);
  CHECK(world.agent().pitch == Pitch::Up);
  CHECK(world.detector_passes() == passes + 1);
  CHECK_FALSE(scan(world, ScanDirection::Up).success);
  CHECK(scan(world, ScanDirection::Left).success);
  CHECK(world.agent().heading == Heading::W);
  CHECK(world.primitive_steps() == 3);
}

TEST_CASE("world events replay to the same state and memory") {
  const RoomSpec room = tiny_kitchen();
  ControllerConfig cc;
  cc.detector = DetectorModel::noisy(0.9, 0.01, 0.2);
  const AgentState start{{3, 3}, Heading::N, Pitch::Level};
  SceneConfig config = empty_config(room, start);
  config.placements = {{{2, 1}, LocationKind::Inside, {1, 1}}};
  WorldHandle world(load_scene(room, config), start, cc, 42);
  world.perceive();
  navigate(world, {2, 4}, 100);
  scan(world, ScanDirection::Left);
  manipulate(world, true);
  navigate(world, {5, 5}, 100);
  const WorldHandle again = replay_world(room, config, cc, 42, world.events());
  CHECK(again.agent() == world.agent());
  CHECK(again.memory() == world.memory());
  CHECK(state_digest(again.scene(), again.agent()) == state_digest(world.scene(), world.agent()));
}
