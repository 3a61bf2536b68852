#include <benchmark/benchmark.h>

#include "iqa/harness.hpp"
#include "iqa/room_io.hpp"

using namespace iqa;

namespace {

struct Fixture {
  RoomSet rooms;
  RoomTable table;
  Dataset dataset;
  std::vector<DatasetItem> test;

  Fixture() {
    rooms = generate_room_set({"bench", 12, 10, 9, 11, 3});
    for (const auto* set : {&rooms.train, &rooms.test})
      for (const auto& r : *set) table[r.room_id] = r;
    DatasetOptions o;
    o.scale_factor = 1.0 / 64;
    o.test_per_room_qtype = 1024;
    o.seed = 1;
    dataset = generate_dataset(rooms.train, rooms.test, o);
    for (const auto& it : dataset.items)
      if (it.split == Split::Test) test.push_back(it);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

EpisodeOptions noisy_options() {
  RunConfig cfg;
  return cfg.episode_options(DetectorModel::noisy(0.9, 0.001, 0.1));
}

void BM_GenerateDataset(benchmark::State& state) {
  const Fixture& f = fixture();
  DatasetOptions o;
  o.scale_factor = 1.0 / 16;
  o.parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate_dataset(f.rooms.train, f.rooms.test, o).items.size());
}

void BM_ScriptedEpisodes(benchmark::State& state) {
  const Fixture& f = fixture();
  RunOptions ro;
  ro.episode = RunConfig().episode_options(DetectorModel::oracle());
  ro.parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_episodes(AgentSpec::scripted_agent(), f.table, f.test, ro).size());
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.test.size()));
}

void BM_LearnedEpisodes(benchmark::State& state) {
  const Fixture& f = fixture();
  Rng rng(5);
  const AgentSpec agent = AgentSpec::learned("bench", PolicyParams::random(feature_spec({}).size(), rng, 0.1), {});
  RunOptions ro;
  ro.episode = noisy_options();
  ro.parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_episodes(agent, f.table, f.test, ro).size());
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.test.size()));
}

void BM_TrainingUpdates(benchmark::State& state) {
  const Fixture& f = fixture();
  std::vector<DatasetItem> train;
  for (const auto& it : f.dataset.items)
    if (it.split == Split::Train) train.push_back(it);
  const TrainingSlice slice{&f.table, train};
  TrainingConfig tc;
  tc.updates = 200;
  tc.updates_per_epoch = 200;
  tc.parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(train_actor_critic(slice, noisy_options(), {}, tc).params.theta().size());
  state.SetItemsProcessed(state.iterations() * tc.updates);
}

}  // namespace

BENCHMARK(BM_GenerateDataset)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScriptedEpisodes)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LearnedEpisodes)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainingUpdates)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
