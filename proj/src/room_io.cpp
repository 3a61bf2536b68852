#include "iqa/room_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "iqa/rng.hpp"

namespace iqa {

using nlohmann::json;

json cell_to_json(Cell c) { return json::array({c.x, c.y}); }

Cell cell_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw MalformedSpec("cell must be [x, y]");
  return {j[0].get<int>(), j[1].get<int>()};
}

json agent_to_json(const AgentState& a) {
  return {{"cell", cell_to_json(a.cell)}, {"heading", heading_name(a.heading)}, {"pitch", static_cast<int>(a.pitch)}};
}

AgentState agent_from_json(const json& j) {
  AgentState a;
  a.cell = cell_from_json(j.at("cell"));
  const auto h = heading_from_name(j.at("heading").get<std::string>());
  if (!h) throw MalformedSpec("bad heading");
  a.heading = *h;
  const int p = j.value("pitch", 0);
  if (p != -30 && p != 0 && p != 30) throw MalformedSpec("pitch must be -30, 0 or 30");
  a.pitch = static_cast<Pitch>(p);
  return a;
}

json room_to_json(const RoomSpec& room) {
  json j;
  j["schema"] = "iqa.room/" + std::to_string(kRoomSchemaVersion);
  j["room_id"] = room.room_id;
  j["width"] = room.width;
  j["height"] = room.height;
  j["seed"] = room.seed;
  j["walls"] = json::array();
  for (const Cell& c : room.walls) j["walls"].push_back(cell_to_json(c));
  j["receptacles"] = json::array();
  for (const auto& r : room.receptacles) {
    j["receptacles"].push_back({{"cell", cell_to_json(r.cell)},
                                {"class", kReceptacleNames[static_cast<std::size_t>(r.class_id)]},
                                {"band", band_name(r.height_band)},
                                {"openable", r.openable}});
  }
  j["floor_sites"] = json::array();
  for (const Cell& c : room.floor_sites) j["floor_sites"].push_back(cell_to_json(c));
  return j;
}

RoomSpec room_from_json(const json& j) {
  try {
    const std::string schema = j.value("schema", std::string("iqa.room/1"));
    if (schema != "iqa.room/" + std::to_string(kRoomSchemaVersion)) throw MalformedSpec("unsupported room schema " + schema);
    RoomSpec room;
    room.room_id = j.at("room_id").get<std::string>();
    room.width = j.at("width").get<int>();
    room.height = j.at("height").get<int>();
    room.seed = j.value("seed", std::uint64_t{0});
    for (const auto& c : j.value("walls", json::array())) room.walls.push_back(cell_from_json(c));
    for (const auto& r : j.value("receptacles", json::array())) {
      ReceptacleSpec rs;
      rs.cell = cell_from_json(r.at("cell"));
      const auto cls = receptacle_class_from_name(r.at("class").get<std::string>());
      if (!cls) throw MalformedSpec("unknown receptacle class " + r.at("class").get<std::string>());
      rs.class_id = *cls;
      const auto band = band_from_name(r.value("band", std::string("mid")));
      if (!band) throw MalformedSpec("unknown height band");
      rs.height_band = *band;
      rs.openable = r.value("openable", default_openable(rs.class_id));
      room.receptacles.push_back(rs);
    }
    for (const auto& c : j.value("floor_sites", json::array())) room.floor_sites.push_back(cell_from_json(c));
    return room;
  } catch (const json::exception& e) {
    throw MalformedSpec(std::string("room spec: ") + e.what());
  }
}

json config_to_json(const SceneConfig& config) {
  json j;
  j["room_id"] = config.room_id;
  j["seed"] = config.seed;
  j["start"] = agent_to_json(config.start);
  j["placements"] = json::array();
  static constexpr std::string_view kinds[] = {"floor", "inside", "on"};
  for (const auto& p : config.placements) {
    j["placements"].push_back({{"class", kObjectNames[static_cast<std::size_t>(p.object.class_id)]},
                               {"id", p.object.instance_id},
                               {"kind", kinds[static_cast<int>(p.kind)]},
                               {"cell", cell_to_json(p.cell)}});
  }
  return j;
}

SceneConfig config_from_json(const json& j) {
  try {
    SceneConfig c;
    c.room_id = j.at("room_id").get<std::string>();
    c.seed = j.value("seed", std::uint64_t{0});
    c.start = agent_from_json(j.at("start"));
    for (const auto& p : j.at("placements")) {
      Placement pl;
      const auto cls = object_class_from_name(p.at("class").get<std::string>());
      if (!cls) throw MalformedSpec("unknown object class " + p.at("class").get<std::string>());
      pl.object = {*cls, p.at("id").get<int>()};
      const std::string kind = p.at("kind").get<std::string>();
      if (kind == "floor") pl.kind = LocationKind::Floor;
      else if (kind == "inside") pl.kind = LocationKind::Inside;
      else if (kind == "on") pl.kind = LocationKind::On;
      else throw MalformedSpec("unknown placement kind " + kind);
      pl.cell = cell_from_json(p.at("cell"));
      c.placements.push_back(pl);
    }
    return c;
  } catch (const json::exception& e) {
    throw MalformedSpec(std::string("scene config: ") + e.what());
  }
}

RoomSpec read_room(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MalformedSpec("cannot open room file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw MalformedSpec(path.string() + ": " + e.what());
  }
  return room_from_json(j);
}

void write_room(const RoomSpec& room, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << room_to_json(room).dump(1) << '\n';
}

std::vector<RoomSpec> read_room_dir(const std::filesystem::path& dir) {
  std::vector<RoomSpec> rooms;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".json" && entry.path().filename() != "split.json") rooms.push_back(read_room(entry.path()));
  }
  std::sort(rooms.begin(), rooms.end(), [](const RoomSpec& a, const RoomSpec& b) { return a.room_id < b.room_id; });
  return rooms;
}

namespace {

// Loads the room with no objects, starting the agent on the first free cell.
std::optional<Scene> load_empty(const RoomSpec& room) {
  SceneConfig empty;
  empty.room_id = room.room_id;
  for (int y = 1; y < room.height - 1; ++y) {
    for (int x = 1; x < room.width - 1; ++x) {
      empty.start.cell = {x, y};
      try {
        return load_scene(room, empty);
      } catch (const MalformedSpec&) {
      } catch (const UnreachableLayout&) {
        return std::nullopt;
      }
    }
  }
  return std::nullopt;
}

}  // namespace

bool receptacles_serviceable(const RoomSpec& room, const VisibilityConfig& vis) {
  const auto loaded = load_empty(room);
  if (!loaded) return false;
  const Scene& scene = *loaded;
  std::vector<std::uint8_t> serviced(scene.receptacles.size(), 0);
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      if (!scene.is_free({x, y})) continue;
      for (int h = 0; h < 4; ++h) {
        for (Pitch p : {Pitch::Down, Pitch::Level, Pitch::Up}) {
          const AgentState a{{x, y}, static_cast<Heading>(h), p};
          for (const auto& r : observe(scene, a, vis).receptacles) {
            if (r.range <= vis.interaction_range + 1e-9) serviced[static_cast<std::size_t>(r.index)] = 1;
          }
        }
      }
    }
  }
  return std::all_of(serviced.begin(), serviced.end(), [](std::uint8_t s) { return s != 0; });
}

RoomSpec generate_kitchen(const std::string& room_id, int width, int height, std::uint64_t seed) {
  if (width < 6 || height < 6) throw MalformedSpec("kitchen needs at least 6x6 cells");
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Rng rng(hash_combine(seed, static_cast<std::uint64_t>(attempt)));
    RoomSpec room;
    room.room_id = room_id;
    room.width = width;
    room.height = height;
    room.seed = seed;

    // Cells along the inside of the wall ring, corners excluded.
    std::vector<Cell> ring;
    for (int x = 2; x < width - 2; ++x) {
      ring.push_back({x, 1});
      ring.push_back({x, height - 2});
    }
    for (int y = 2; y < height - 2; ++y) {
      ring.push_back({1, y});
      ring.push_back({width - 2, y});
    }
    rng.shuffle(std::span<Cell>(ring));

    std::vector<std::pair<ReceptacleClass, HeightBand>> wanted = {
        {ReceptacleClass::Fridge, HeightBand::Mid},
        {ReceptacleClass::Microwave, HeightBand::Mid},
        {ReceptacleClass::Countertop, HeightBand::Mid},
        {ReceptacleClass::Drawer, HeightBand::Low},
        {ReceptacleClass::Cabinet, HeightBand::Low},
    };
    const int extra_cabinets = rng.uniform_int(1, 2);
    for (int i = 0; i < extra_cabinets; ++i)
      wanted.push_back({ReceptacleClass::Cabinet, rng.bernoulli(0.3) ? HeightBand::High : HeightBand::Mid});
    if (rng.bernoulli(0.5)) wanted.push_back({ReceptacleClass::Countertop, HeightBand::Mid});
    if (rng.bernoulli(0.5)) wanted.push_back({ReceptacleClass::Drawer, HeightBand::Low});
    if (wanted.size() > ring.size()) continue;

    for (std::size_t i = 0; i < wanted.size(); ++i) {
      room.receptacles.push_back({ring[i], wanted[i].first, wanted[i].second, default_openable(wanted[i].first)});
    }
    // Table island in the interior.
    const Cell table{rng.uniform_int(3, width - 4), rng.uniform_int(3, height - 4)};
    room.receptacles.push_back({table, ReceptacleClass::Table, HeightBand::Mid, false});

    // A short interior wall stub.
    if (rng.bernoulli(0.6) && width > 7 && height > 7) {
      Cell w{rng.uniform_int(2, width - 3), rng.uniform_int(2, height - 3)};
      const bool horizontal = rng.bernoulli(0.5);
      const int len = rng.uniform_int(1, 2);
      for (int k = 0; k < len; ++k) {
        const Cell c = horizontal ? Cell{w.x + k, w.y} : Cell{w.x, w.y + k};
        if (c.x <= 1 || c.y <= 1 || c.x >= width - 2 || c.y >= height - 2) continue;
        bool clash = false;
        for (const auto& r : room.receptacles) clash = clash || (r.cell == c);
        if (!clash) room.walls.push_back(c);
      }
    }

    const auto loaded = load_empty(room);
    if (!loaded) continue;
    const Scene& scene = *loaded;
    if (!receptacles_serviceable(room)) continue;

    std::vector<Cell> free_cells;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        if (scene.is_free({x, y})) free_cells.push_back({x, y});
    rng.shuffle(std::span<Cell>(free_cells));
    const std::size_t n_sites = std::min<std::size_t>(4, free_cells.size());
    room.floor_sites.assign(free_cells.begin(), free_cells.begin() + static_cast<std::ptrdiff_t>(n_sites));
    std::sort(room.floor_sites.begin(), room.floor_sites.end(),
              [](Cell a, Cell b) { return std::tie(a.y, a.x) < std::tie(b.y, b.x); });
    return room;
  }
  throw UnreachableLayout("could not generate a serviceable kitchen " + room_id);
}

RoomSet generate_room_set(const RoomSetOptions& opts) {
  if (opts.min_size > opts.max_size) throw MalformedSpec("min_size exceeds max_size");
  if (opts.count <= 0) throw MalformedSpec("room count must be positive");
  Rng rng(opts.seed);
  RoomSet set;
  for (int i = 0; i < opts.count; ++i) {
    char id[64];
    std::snprintf(id, sizeof id, "%s_%02d", opts.prefix.c_str(), i + 1);
    const int w = rng.uniform_int(opts.min_size, opts.max_size), h = rng.uniform_int(opts.min_size, opts.max_size);
    (i < opts.train_rooms ? set.train : set.test).push_back(generate_kitchen(id, w, h, rng.next()));
  }
  return set;
}

void write_room_set(const RoomSet& set, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json split = {{"train", json::array()}, {"test", json::array()}};
  for (const auto& r : set.train) {
    write_room(r, dir / (r.room_id + ".json"));
    split["train"].push_back(r.room_id);
  }
  for (const auto& r : set.test) {
    write_room(r, dir / (r.room_id + ".json"));
    split["test"].push_back(r.room_id);
  }
  std::ofstream(dir / "split.json") << split.dump(1) << '\n';
}

RoomSet read_room_set(const std::filesystem::path& dir, int train_rooms) {
  std::vector<RoomSpec> rooms = read_room_dir(dir);
  if (rooms.empty()) throw MalformedSpec("no rooms in " + dir.string());
  RoomSet set;
  if (std::filesystem::exists(dir / "split.json")) {
    json split;
    try {
      std::ifstream(dir / "split.json") >> split;
      std::set<std::string> train;
      for (const auto& r : split.at("train")) train.insert(r.get<std::string>());
      for (auto& r : rooms) (train.count(r.room_id) ? set.train : set.test).push_back(std::move(r));
    } catch (const json::exception& e) {
      throw MalformedSpec("split.json: " + std::string(e.what()));
    }
  } else {
    for (std::size_t i = 0; i < rooms.size(); ++i)
      (static_cast<int>(i) < train_rooms ? set.train : set.test).push_back(std::move(rooms[i]));
  }
  return set;
}

}  // namespace iqa
