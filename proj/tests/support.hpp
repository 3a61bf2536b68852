#pragma once

#include <vector>

#include "iqa/harness.hpp"
#include "iqa/room_io.hpp"

namespace iqa::test {

inline RoomSpec open_room(int width, int height, std::string id = "open") {
  RoomSpec r;
  r.room_id = std::move(id);
  r.width = width;
  r.height = height;
  return r;
}

// 8x7 kitchen: fridge (mid, openable) top-left, countertop (mid) top-right,
// cabinet (high, openable) on the right wall, drawer (low, openable) bottom-left.
inline RoomSpec tiny_kitchen() {
  RoomSpec r = open_room(8, 7, "tiny");
  r.receptacles = {
      {{1, 1}, ReceptacleClass::Fridge, HeightBand::Mid, true},
      {{6, 1}, ReceptacleClass::Countertop, HeightBand::Mid, false},
      {{6, 3}, ReceptacleClass::Cabinet, HeightBand::High, true},
      {{1, 5}, ReceptacleClass::Drawer, HeightBand::Low, true},
  };
  r.floor_sites = {{3, 3}, {4, 5}};
  return r;
}

inline SceneConfig empty_config(const RoomSpec& room, AgentState start) {
  SceneConfig c;
  c.room_id = room.room_id;
  c.start = start;
  return c;
}

// Random fully walled grid with scattered interior walls and a connected floor.
inline RoomSpec random_grid(Rng& rng, int width, int height, double wall_density, std::string id = "grid") {
  for (;;) {
    RoomSpec r = open_room(width, height, id);
    for (int y = 1; y < height - 1; ++y)
      for (int x = 1; x < width - 1; ++x)
        if (rng.bernoulli(wall_density)) r.walls.push_back({x, y});
    std::vector<Cell> free;
    std::vector<std::uint8_t> wall(static_cast<std::size_t>(width * height), 0);
    for (const Cell& c : r.walls) wall[static_cast<std::size_t>(c.y * width + c.x)] = 1;
    for (int y = 1; y < height - 1; ++y)
      for (int x = 1; x < width - 1; ++x)
        if (!wall[static_cast<std::size_t>(y * width + x)]) free.push_back({x, y});
    if (free.empty()) continue;
    try {
      load_scene(r, empty_config(r, {free.front(), Heading::N, Pitch::Level}));
      return r;
    } catch (const UnreachableLayout&) {
    }
  }
}

inline DatasetItem make_item(const RoomSpec& room, Question q, SceneConfig config, std::string id = "item") {
  DatasetItem item;
  item.item_id = std::move(id);
  item.question = std::move(q);
  item.config = std::move(config);
  item.config.room_id = room.room_id;
  item.answer = answer_of(room, item.config, item.question);
  item.split = Split::Test;
  item.config_id = config_digest(item.config);
  return item;
}

struct SmallWorld {
  std::vector<RoomSpec> rooms;
  RoomTable table;
  Dataset dataset;
};

// Two training kitchens and one held-out kitchen with a 1/64-scale dataset.
inline SmallWorld small_world(std::uint64_t seed = 1, bool seen_test = false) {
  SmallWorld w;
  std::vector<RoomSpec> train, test;
  for (int i = 0; i < 2; ++i) train.push_back(generate_kitchen("train" + std::to_string(i), 9, 9, seed * 10 + static_cast<std::uint64_t>(i)));
  test.push_back(generate_kitchen("test0", 9, 9, seed * 10 + 7));
  DatasetOptions opts;
  opts.scale_factor = 1.0 / 64;
  opts.seed = seed;
  opts.seen_test = seen_test;
  w.dataset = generate_dataset(train, test, opts);
  w.rooms = train;
  w.rooms.insert(w.rooms.end(), test.begin(), test.end());
  w.table = make_room_table(w.rooms);
  return w;
}

inline std::vector<DatasetItem> items_of(const Dataset& ds, Split split) {
  std::vector<DatasetItem> out;
  for (const auto& it : ds.items)
    if (it.split == split) out.push_back(it);
  return out;
}

}  // namespace iqa::test
