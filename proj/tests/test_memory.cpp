#include <doctest.h>

#include <cmath>

#include "support.hpp"

using namespace iqa;
using namespace iqa::test;

namespace {

SpatialMemory random_memory(Rng& rng, int h, int w) {
  std::vector<double> v(static_cast<std::size_t>(h * w * (kNumClasses + 3)));
  for (auto& x : v) x = rng.uniform01();
  return memory_from_values(h, w, kNumClasses, v);
}

}  // namespace

TEST_CASE("fresh memory: free prior 0.5, everything else zero, K+3 channels") {
  SpatialMemory m(6, 7, kNumClasses);
  CHECK(m.channels() == kNumClasses + 3);
  CHECK(m.channel_names().size() == static_cast<std::size_t>(kNumClasses + 3));
  CHECK(m.channel_names()[static_cast<std::size_t>(m.free_channel())] == "free");
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 7; ++x) {
      CHECK(m.at({x, y}, m.free_channel()) == 0.5);
      CHECK(m.at({x, y}, m.coverage_channel()) == 0.0);
      CHECK(m.at({x, y}, 0) == 0.0);
    }
  CHECK(coverage_fraction(m) == 0.0);
}

TEST_CASE("ego window rows run ahead, columns run to the right") {
  const EgoWindow w{{5, 5}, Heading::E, 5, 1, {}};
  CHECK(w.world_cell(0, 2) == Cell{5, 5});
  CHECK(w.world_cell(1, 2) == Cell{6, 5});
  CHECK(w.world_cell(0, 3) == Cell{5, 6});  // right of east is south
  CHECK(w.world_cell(4, 0) == Cell{9, 3});
  int row = 0, col = 0;
  CHECK(w.locate({9, 3}, row, col));
  CHECK(row == 4);
  CHECK(col == 0);
  CHECK_FALSE(w.locate({4, 5}, row, col));
}

TEST_CASE("read then write of an unchanged window is the identity") {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    SpatialMemory m = random_memory(rng, 9, 11);
    const SpatialMemory before = m;
    const AgentState pose{{static_cast<int>(rng.index(11)), static_cast<int>(rng.index(9))},
                          static_cast<Heading>(rng.index(4)), Pitch::Level};
    write_window(m, read_window(m, pose, 5));
    CHECK(m == before);
  }
}

TEST_CASE("windowed writes touch only the footprint (locality fuzz)") {
  Rng rng(17);
  int outside_changes = 0;
  for (int t = 0; t < 300; ++t) {
    const int h = 4 + static_cast<int>(rng.index(10)), w = 4 + static_cast<int>(rng.index(10));
    SpatialMemory m = random_memory(rng, h, w);
    const SpatialMemory before = m;
    const int size = 1 + 2 * static_cast<int>(rng.index(4));
    const AgentState pose{{static_cast<int>(rng.index(static_cast<std::uint64_t>(w))),
                           static_cast<int>(rng.index(static_cast<std::uint64_t>(h)))},
                          static_cast<Heading>(rng.index(4)), Pitch::Level};
    EgoWindow win = read_window(m, pose, size);
    for (auto& v : win.values) v = rng.uniform01();
    write_window(m, win);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        int r = 0, c = 0;
        if (win.locate({x, y}, r, c)) continue;
        for (int ch = 0; ch < m.channels(); ++ch) outside_changes += m.at({x, y}, ch) != before.at({x, y}, ch);
      }
  }
  CHECK(outside_changes == 0);
}

TEST_CASE("write_window rejects a channel mismatch and even sizes") {
  SpatialMemory m(5, 5, kNumClasses);
  EgoWindow w = read_window(m, {{2, 2}, Heading::N, Pitch::Level}, 3);
  w.channels = 4;
  CHECK_THROWS_AS(write_window(m, w), DimensionMismatch);
  CHECK_THROWS_AS(read_window(m, {{2, 2}, Heading::N, Pitch::Level}, 4), DimensionMismatch);
  CHECK_THROWS_AS(memory_from_values(2, 2, kNumClasses, {0.1, 0.2}), DimensionMismatch);
}

TEST_CASE("integration follows the moving average recurrence") {
  SpatialMemory m(10, 10, kNumClasses);
  MemoryConfig cfg;
  cfg.alpha = 0.5;
  Detections d;
  d.pose = {{5, 8}, Heading::N, Pitch::Level};
  d.cells = {{{5, 5}, true, true}, {{5, 4}, false, false}};
  d.items = {{2, {5, 5}}};
  integrate_observation(m, d, cfg);
  CHECK(m.at({5, 5}, 2) == doctest::Approx(0.5));
  CHECK(m.at({5, 5}, m.free_channel()) == doctest::Approx(0.75));
  CHECK(m.at({5, 4}, m.free_channel()) == doctest::Approx(0.25));
  CHECK(m.at({5, 5}, m.coverage_channel()) == 1.0);
  CHECK(m.at({5, 4}, m.coverage_channel()) == 0.0);
  integrate_observation(m, d, cfg);
  CHECK(m.at({5, 5}, 2) == doctest::Approx(0.75));
  d.items.clear();
  integrate_observation(m, d, cfg);
  CHECK(m.at({5, 5}, 2) == doctest::Approx(0.375));
  // Untouched cells keep their prior.
  CHECK(m.at({1, 1}, m.free_channel()) == 0.5);
}

TEST_CASE("per-channel rates override alpha") {
  SpatialMemory m(6, 6, kNumClasses);
  MemoryConfig cfg;
  cfg.channel_alpha.assign(static_cast<std::size_t>(m.channels()), 0.25);
  cfg.channel_alpha[3] = 1.0;
  Detections d;
  d.pose = {{3, 4}, Heading::N, Pitch::Level};
  d.cells = {{{3, 2}, true, true}};
  d.items = {{3, {3, 2}}, {4, {3, 2}}};
  integrate_observation(m, d, cfg);
  CHECK(m.at({3, 2}, 3) == 1.0);
  CHECK(m.at({3, 2}, 4) == doctest::Approx(0.25));
}

TEST_CASE("coverage fraction averages over the coverage domain") {
  std::vector<std::uint8_t> domain(16, 0);
  domain[5] = domain[6] = 1;
  SpatialMemory m(4, 4, kNumClasses, domain);
  Detections d;
  d.pose = {{1, 3}, Heading::N, Pitch::Level};
  d.cells = {{{1, 1}, true, true}, {{0, 0}, true, true}};
  integrate_observation(m, d, {});
  CHECK(coverage_fraction(m) == doctest::Approx(0.5));
}

TEST_CASE("memory config validation") {
  MemoryConfig c;
  c.alpha = 0.0;
  CHECK_THROWS_AS(c.validate(), MalformedSpec);
  c.alpha = 0.5;
  c.window_size = 4;
  CHECK_THROWS_AS(c.validate(), MalformedSpec);
}
