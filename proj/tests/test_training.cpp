#include <doctest.h>

#include <cmath>

#include "support.hpp"

using namespace iqa;
using namespace iqa::test;

namespace {

TrainingResult train_small(bool parallel, std::uint64_t seed, int updates = 40) {
  static const SmallWorld w = small_world(3);
  TrainingSlice slice{&w.table, items_of(w.dataset, Split::Train)};
  TrainingConfig cfg;
  cfg.updates = updates;
  cfg.updates_per_epoch = 20;
  cfg.seed = seed;
  cfg.parallel = parallel;
  EpisodeOptions env;
  env.controller.detector = DetectorModel::oracle();
  env.controller.memory.alpha = 1.0;
  return train_actor_critic(slice, env, FeatureOptions{}, cfg);
}

}  // namespace

TEST_CASE("training is deterministic for a fixed seed") {
  const TrainingResult a = train_small(true, 5);
  const TrainingResult b = train_small(true, 5);
  CHECK(a.params == b.params);
  const TrainingResult c = train_small(true, 6);
  CHECK_FALSE(a.params == c.params);
}

TEST_CASE("parallel environment stepping matches the serial reference") {
  const TrainingResult par = train_small(true, 9);
  const TrainingResult ser = train_small(false, 9);
  CHECK(par.params == ser.params);
  REQUIRE(par.curves.size() == ser.curves.size());
  for (std::size_t i = 0; i < par.curves.size(); ++i) CHECK(par.curves[i].mean_loss == ser.curves[i].mean_loss);
}

TEST_CASE("training produces finite parameters and per-epoch curves") {
  const TrainingResult r = train_small(true, 1, 60);
  CHECK(r.curves.size() == 3);
  for (double t : r.params.theta()) CHECK(std::isfinite(t));
  for (const auto& e : r.curves) {
    CHECK(e.updates > 0);
    CHECK(e.mean_entropy <= std::log(32.0) + 1e-9);
    CHECK(e.invalid_pct >= 0.0);
    CHECK(e.invalid_pct <= 100.0);
  }
  const auto path = std::filesystem::temp_directory_path() / "iqa_test_curves.csv";
  write_curves_csv(r.curves, path);
  CHECK(std::filesystem::file_size(path) > 0);
  std::filesystem::remove(path);
}
