#include "iqa/questions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "iqa/room_io.hpp"

namespace iqa {

using nlohmann::json;

std::string_view qtype_name(QuestionType t) {
  static constexpr std::string_view names[] = {"existence", "counting", "spatial"};
  return names[static_cast<int>(t)];
}

std::optional<QuestionType> qtype_from_name(std::string_view name) {
  for (int i = 0; i < kNumQuestionTypes; ++i)
    if (qtype_name(static_cast<QuestionType>(i)) == name) return static_cast<QuestionType>(i);
  return std::nullopt;
}

std::string_view split_name(Split s) { return s == Split::Train ? "train" : "test"; }

Question make_question(QuestionType qtype, int object_class, std::optional<ReceptacleClass> container) {
  if (object_class < 0 || object_class >= kNumObjectClasses) throw MalformedSpec("question object class out of range");
  Question q;
  q.qtype = qtype;
  q.object_class = object_class;
  const std::string obj(kObjectNames[static_cast<std::size_t>(object_class)]);
  switch (qtype) {
    case QuestionType::Existence:
      q.choices = {"yes", "no"};
      q.text = "Is there a " + obj + " in the room?";
      break;
    case QuestionType::Counting:
      q.choices = {"0", "1", "2", "3"};
      q.text = "How many " + obj + "s are in the room?";
      break;
    case QuestionType::SpatialRelationship: {
      if (!container) throw MalformedSpec("spatial question needs a container class");
      q.container = container;
      q.choices = {"yes", "no"};
      const std::string where(kReceptacleNames[static_cast<std::size_t>(*container)]);
      q.text = "Is there a " + obj + (default_openable(*container) ? " in the " : " on the ") + where + "?";
      break;
    }
  }
  return q;
}

int answer_of(const Scene& scene, const Question& q) {
  int count = 0;
  bool in_container = false;
  for (const auto& fo : scene.loose_objects) count += fo.object.class_id == q.object_class ? 1 : 0;
  for (const auto& r : scene.receptacles) {
    int here = 0;
    for (const auto& o : r.contents) here += o.class_id == q.object_class ? 1 : 0;
    for (const auto& o : r.surface) here += o.class_id == q.object_class ? 1 : 0;
    count += here;
    if (here > 0 && q.container && r.class_id == *q.container) in_container = true;
  }
  switch (q.qtype) {
    case QuestionType::Existence: return count > 0 ? 0 : 1;
    case QuestionType::Counting: return std::clamp(count, 0, kMaxCount);
    case QuestionType::SpatialRelationship: return in_container ? 0 : 1;
  }
  return 0;
}

int answer_of(const RoomSpec& room, const SceneConfig& config, const Question& q) {
  return answer_of(load_scene(room, config), q);
}

std::vector<Cell> room_free_cells(const RoomSpec& room) {
  std::set<Cell> blocked(room.walls.begin(), room.walls.end());
  for (const auto& r : room.receptacles) blocked.insert(r.cell);
  std::vector<Cell> out;
  for (int y = 1; y < room.height - 1; ++y)
    for (int x = 1; x < room.width - 1; ++x)
      if (!blocked.count({x, y})) out.push_back({x, y});
  return out;
}

std::vector<Site> placement_sites(const RoomSpec& room) {
  std::vector<Site> sites;
  for (const auto& r : room.receptacles) {
    sites.push_back({r.openable ? LocationKind::Inside : LocationKind::On, r.cell, r.class_id});
  }
  for (const Cell& c : room.floor_sites) sites.push_back({LocationKind::Floor, c, std::nullopt});
  return sites;
}

namespace {

// Draws `n` distinct sites uniformly from `eligible` (indices into sites).
std::vector<std::size_t> draw_sites(std::vector<std::size_t> eligible, int n, Rng& rng) {
  if (n > static_cast<int>(eligible.size())) throw Infeasible("not enough eligible sites");
  std::vector<std::size_t> out;
  for (int i = 0; i < n; ++i) {
    const std::size_t j = static_cast<std::size_t>(i) + rng.index(eligible.size() - static_cast<std::size_t>(i));
    std::swap(eligible[static_cast<std::size_t>(i)], eligible[j]);
    out.push_back(eligible[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace

SceneConfig generate_configuration(const RoomSpec& room, const ConfigConstraints& constraints, Rng& rng) {
  const std::vector<Site> sites = placement_sites(room);
  SceneConfig config;
  config.room_id = room.room_id;
  config.seed = rng.next();
  int next_id = 1;

  auto place = [&](int cls, std::size_t site) {
    config.placements.push_back({{cls, next_id++}, sites[site].kind, sites[site].cell});
  };

  std::set<int> constrained;
  for (const auto& req : constraints.required) {
    if (req.count < 0 || req.count > kMaxCount) throw Infeasible("class count outside [0, 3]");
    if (!constrained.insert(req.object_class).second) throw Infeasible("class constrained twice");
    std::vector<std::size_t> in_container, others;
    for (std::size_t i = 0; i < sites.size(); ++i) {
      const Site& s = sites[i];
      if (req.hidden_only && s.kind != LocationKind::Inside) continue;
      if (req.forbidden_container && s.receptacle == req.forbidden_container) continue;
      if (req.container && s.receptacle == req.container) in_container.push_back(i);
      else others.push_back(i);
    }
    if (req.container) {
      if (req.min_in_container > req.count) throw Infeasible("more container instances than total");
      if (req.min_in_container > static_cast<int>(in_container.size()))
        throw Infeasible("room lacks container sites for the requirement");
      // Split the count between container sites and the rest, uniformly over feasible splits.
      const int max_in = std::min(req.count, static_cast<int>(in_container.size()));
      const int min_in = std::max(req.min_in_container, req.count - static_cast<int>(others.size()));
      if (min_in > max_in) throw Infeasible("constraints exceed site capacity");
      const int n_in = rng.uniform_int(min_in, max_in);
      for (std::size_t s : draw_sites(in_container, n_in, rng)) place(req.object_class, s);
      for (std::size_t s : draw_sites(others, req.count - n_in, rng)) place(req.object_class, s);
    } else {
      for (std::size_t s : draw_sites(others, req.count, rng)) place(req.object_class, s);
    }
  }

  if (constraints.place_distractors) {
    std::vector<std::size_t> all(sites.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    for (int cls = 0; cls < kNumObjectClasses; ++cls) {
      if (constrained.count(cls)) continue;
      const int n = std::min(rng.uniform_int(constraints.distractor_min, constraints.distractor_max),
                             static_cast<int>(sites.size()));
      for (std::size_t s : draw_sites(all, n, rng)) place(cls, s);
    }
  }

  // Random start pose on a free cell.
  std::vector<Cell> free_cells = room_free_cells(room);
  if (free_cells.empty()) throw Infeasible("room has no free cell");
  config.start.cell = free_cells[rng.index(free_cells.size())];
  config.start.heading = static_cast<Heading>(rng.index(4));
  config.start.pitch = Pitch::Level;
  return config;
}

ConfigConstraints constraints_for_answer(const Question& q, int answer, Rng& rng, const RoomSpec& room) {
  ConfigConstraints c;
  ClassRequirement req;
  req.object_class = q.object_class;
  switch (q.qtype) {
    case QuestionType::Existence: req.count = answer == 0 ? rng.uniform_int(1, kMaxCount) : 0; break;
    case QuestionType::Counting: req.count = answer; break;
    case QuestionType::SpatialRelationship: {
      int container_sites = 0;
      for (const auto& r : room.receptacles) container_sites += r.class_id == *q.container ? 1 : 0;
      if (answer == 0) {
        if (container_sites == 0) throw Infeasible("room has no " + std::string(kReceptacleNames[static_cast<std::size_t>(*q.container)]));
        req.count = rng.uniform_int(1, kMaxCount);
        req.container = q.container;
        req.min_in_container = 1;
      } else {
        req.count = rng.uniform_int(0, 2);
        req.forbidden_container = q.container;
      }
      break;
    }
  }
  c.required.push_back(req);
  return c;
}

std::uint64_t config_digest(const SceneConfig& config) {
  std::vector<std::tuple<int, int, int, int>> key;
  for (const auto& p : config.placements) key.emplace_back(p.object.class_id, static_cast<int>(p.kind), p.cell.x, p.cell.y);
  std::sort(key.begin(), key.end());
  std::uint64_t h = hash_string(config.room_id);
  for (const auto& [cls, kind, x, y] : key) {
    h = hash_combine(h, static_cast<std::uint64_t>(cls));
    h = hash_combine(h, static_cast<std::uint64_t>(kind));
    h = hash_combine(h, static_cast<std::uint64_t>(x));
    h = hash_combine(h, static_cast<std::uint64_t>(y));
  }
  h = hash_combine(h, static_cast<std::uint64_t>(config.start.cell.x));
  h = hash_combine(h, static_cast<std::uint64_t>(config.start.cell.y));
  h = hash_combine(h, static_cast<std::uint64_t>(config.start.heading));
  return h;
}

int scaled_item_count(int paper_count, double scale, int num_choices) {
  const int raw = std::max(1, static_cast<int>(std::lround(paper_count * scale)));
  return ((raw + num_choices - 1) / num_choices) * num_choices;
}

int questions_for(int items, int num_choices, int max_q) {
  int q = std::max(1, std::min(max_q, items / num_choices));
  while (q > 1 && items % (q * num_choices) != 0) --q;
  return q;
}

namespace {

struct Block {
  std::size_t room = 0;
  bool test_room = false;
  Question question;
  int question_index = 0;
  int train_per_answer = 0;  // training-room items per answer
  int test_per_answer = 0;   // test items per answer (unseen or seen slice)
};

std::vector<Question> candidate_questions(const RoomSpec& room, QuestionType qtype, std::uint64_t seed) {
  std::vector<Question> out;
  if (qtype == QuestionType::SpatialRelationship) {
    std::set<ReceptacleClass> present;
    for (const auto& r : room.receptacles) present.insert(r.class_id);
    for (int obj = 0; obj < kNumObjectClasses; ++obj)
      for (ReceptacleClass rc : present) out.push_back(make_question(qtype, obj, rc));
  } else {
    for (int obj = 0; obj < kNumObjectClasses; ++obj) out.push_back(make_question(qtype, obj));
  }
  Rng rng(hash_combine(hash_combine(seed, hash_string(room.room_id)), static_cast<std::uint64_t>(qtype) + 101));
  rng.shuffle(std::span<Question>(out));
  return out;
}

std::vector<DatasetItem> run_block(const Block& block, const RoomSpec& room, std::uint64_t dataset_seed) {
  const Question& q = block.question;
  std::uint64_t seed = hash_combine(dataset_seed, hash_string(room.room_id));
  seed = hash_combine(seed, static_cast<std::uint64_t>(q.qtype));
  seed = hash_combine(seed, hash_string(q.text));
  seed = hash_combine(seed, static_cast<std::uint64_t>(block.question_index));
  Rng rng(seed);

  std::vector<DatasetItem> items;
  std::unordered_set<std::uint64_t> seen_configs;
  auto emit = [&](Split split, int answer, int serial) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 200) throw Infeasible("cannot find a fresh configuration for " + room.room_id + ": " + q.text);
      ConfigConstraints constraints;
      try {
        constraints = constraints_for_answer(q, answer, rng, room);
      } catch (const Infeasible& e) {
        throw Infeasible(room.room_id + " / " + q.text + ": " + e.what());
      }
      SceneConfig config;
      try {
        config = generate_configuration(room, constraints, rng);
      } catch (const Infeasible& e) {
        throw Infeasible(room.room_id + " / " + q.text + ": " + e.what());
      }
      const std::uint64_t id = config_digest(config);
      if (!seen_configs.insert(id).second) continue;
      DatasetItem item;
      item.question = q;
      item.config = std::move(config);
      item.answer = answer;
      item.split = split;
      item.config_id = id;
      std::ostringstream name;
      name << room.room_id << '/' << qtype_name(q.qtype) << '/' << block.question_index << '/' << split_name(split)
           << '/' << serial;
      item.item_id = name.str();
      items.push_back(std::move(item));
      return;
    }
  };

  const int n_choices = q.num_choices();
  if (!block.test_room) {
    int serial = 0;
    for (int rep = 0; rep < block.train_per_answer; ++rep)
      for (int a = 0; a < n_choices; ++a) emit(Split::Train, a, serial++);
  }
  int serial = 0;
  for (int rep = 0; rep < block.test_per_answer; ++rep)
    for (int a = 0; a < n_choices; ++a) emit(Split::Test, a, serial++);
  return items;
}

}  // namespace

Dataset generate_dataset(const std::vector<RoomSpec>& train_rooms, const std::vector<RoomSpec>& test_rooms,
                         const DatasetOptions& options) {
  if (train_rooms.empty() || test_rooms.empty()) throw Infeasible("need at least one room per split");
  std::vector<const RoomSpec*> rooms;
  Dataset ds;
  ds.scale_factor = options.scale_factor;
  ds.seed = options.seed;
  for (const auto& r : train_rooms) {
    rooms.push_back(&r);
    ds.room_split[r.room_id] = Split::Train;
  }
  for (const auto& r : test_rooms) {
    if (ds.room_split.count(r.room_id)) throw MalformedSpec("room " + r.room_id + " appears in both splits");
    rooms.push_back(&r);
    ds.room_split[r.room_id] = Split::Test;
  }
  for (const RoomSpec* r : rooms) {
    if (!receptacles_serviceable(*r)) throw Infeasible("room " + r->room_id + " has a receptacle out of reach");
  }

  std::vector<Block> blocks;
  for (std::size_t ri = 0; ri < rooms.size(); ++ri) {
    const bool test_room = ri >= train_rooms.size();
    for (int t = 0; t < kNumQuestionTypes; ++t) {
      const auto qtype = static_cast<QuestionType>(t);
      const int n_choices = qtype == QuestionType::Counting ? 4 : 2;
      const auto candidates = candidate_questions(*rooms[ri], qtype, options.seed);
      const int max_q = std::min<int>(options.max_questions_per_room_qtype, static_cast<int>(candidates.size()));
      const int n_train = scaled_item_count(options.train_per_room_qtype, options.scale_factor, n_choices);
      const int n_test = scaled_item_count(options.test_per_room_qtype, options.scale_factor, n_choices);
      if (!test_room) {
        const int q_train = questions_for(n_train, n_choices, max_q);
        const int q_seen = options.seen_test ? questions_for(n_test, n_choices, q_train) : 0;
        for (int qi = 0; qi < q_train; ++qi) {
          Block b{ri, false, candidates[static_cast<std::size_t>(qi)], qi, n_train / (q_train * n_choices), 0};
          if (qi < q_seen) b.test_per_answer = n_test / (q_seen * n_choices);
          blocks.push_back(b);
        }
      } else {
        const int q_test = questions_for(n_test, n_choices, max_q);
        for (int qi = 0; qi < q_test; ++qi) {
          blocks.push_back({ri, true, candidates[static_cast<std::size_t>(qi)], qi, 0, n_test / (q_test * n_choices)});
        }
      }
    }
  }

  std::vector<std::vector<DatasetItem>> results(blocks.size());
  std::vector<std::string> errors(blocks.size());
  const auto n_blocks = static_cast<std::ptrdiff_t>(blocks.size());
#pragma omp parallel for schedule(dynamic) if (options.parallel)
  for (std::ptrdiff_t i = 0; i < n_blocks; ++i) {
    const auto bi = static_cast<std::size_t>(i);
    try {
      results[bi] = run_block(blocks[bi], *rooms[blocks[bi].room], options.seed);
    } catch (const std::exception& e) {
      errors[bi] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw Infeasible(e);
  for (auto& r : results)
    for (auto& item : r) ds.items.push_back(std::move(item));
  return ds;
}

BalanceReport verify_balance(const Dataset& dataset) {
  BalanceReport report;
  for (Split s : {Split::Train, Split::Test}) {
    report.counts[s] = {0, 0, 0};
    report.totals[s] = 0;
  }
  // (room, question text, split) -> answer histogram
  std::map<std::tuple<std::string, std::string, Split>, std::vector<int>> hist;
  std::map<Split, std::set<std::string>> rooms;
  for (const auto& item : dataset.items) {
    auto& h = hist[{item.config.room_id, item.question.text, item.split}];
    if (h.empty()) h.assign(static_cast<std::size_t>(item.question.num_choices()), 0);
    if (item.answer < 0 || item.answer >= static_cast<int>(h.size()))
      throw ImbalanceFound("answer outside the choice list: " + item.item_id);
    ++h[static_cast<std::size_t>(item.answer)];
    ++report.counts[item.split][static_cast<std::size_t>(item.question.qtype)];
    ++report.totals[item.split];
    rooms[item.split].insert(item.config.room_id);
  }
  for (const auto& [key, h] : hist) {
    if (std::adjacent_find(h.begin(), h.end(), std::not_equal_to<>()) != h.end()) {
      std::ostringstream msg;
      msg << "unbalanced answers for \"" << std::get<1>(key) << "\" in " << std::get<0>(key) << " ("
          << split_name(std::get<2>(key)) << "):";
      for (int c : h) msg << ' ' << c;
      throw ImbalanceFound(msg.str());
    }
    ++report.questions_checked;
  }
  for (const auto& [s, set] : rooms) report.rooms[s] = static_cast<int>(set.size());
  return report;
}

json question_to_json(const Question& q) {
  json j{{"qtype", qtype_name(q.qtype)},
         {"object", kObjectNames[static_cast<std::size_t>(q.object_class)]},
         {"choices", q.choices},
         {"text", q.text}};
  if (q.container) j["container"] = kReceptacleNames[static_cast<std::size_t>(*q.container)];
  return j;
}

Question question_from_json(const json& j) {
  const auto t = qtype_from_name(j.at("qtype").get<std::string>());
  const auto obj = object_class_from_name(j.at("object").get<std::string>());
  if (!t || !obj) throw MalformedSpec("bad question record");
  std::optional<ReceptacleClass> container;
  if (j.contains("container")) {
    container = receptacle_class_from_name(j.at("container").get<std::string>());
    if (!container) throw MalformedSpec("bad container class");
  }
  return make_question(*t, *obj, container);
}

json item_to_json(const DatasetItem& item) {
  return {{"id", item.item_id},
          {"question", question_to_json(item.question)},
          {"config", config_to_json(item.config)},
          {"answer", item.question.choices[static_cast<std::size_t>(item.answer)]},
          {"split", split_name(item.split)},
          {"config_id", item.config_id}};
}

DatasetItem item_from_json(const json& j) {
  DatasetItem item;
  item.item_id = j.at("id").get<std::string>();
  item.question = question_from_json(j.at("question"));
  item.config = config_from_json(j.at("config"));
  const std::string ans = j.at("answer").get<std::string>();
  const auto it = std::find(item.question.choices.begin(), item.question.choices.end(), ans);
  if (it == item.question.choices.end()) throw MalformedSpec("answer not among choices: " + item.item_id);
  item.answer = static_cast<int>(it - item.question.choices.begin());
  item.split = j.at("split").get<std::string>() == "train" ? Split::Train : Split::Test;
  item.config_id = j.value("config_id", config_digest(item.config));
  return item;
}

void write_dataset(const Dataset& dataset, const std::vector<RoomSpec>& rooms, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "rooms");
  {
    std::ofstream out(dir / "dataset.jsonl");
    for (const auto& item : dataset.items) out << item_to_json(item).dump() << '\n';
  }
  for (const auto& r : rooms) write_room(r, dir / "rooms" / (r.room_id + ".json"));
  const BalanceReport report = verify_balance(dataset);
  json manifest;
  manifest["schema_version"] = kDatasetSchemaVersion;
  manifest["seed"] = dataset.seed;
  manifest["scale_factor"] = dataset.scale_factor;
  manifest["num_classes"] = kNumClasses;
  for (Split s : {Split::Train, Split::Test}) {
    json counts;
    for (int t = 0; t < kNumQuestionTypes; ++t)
      counts[std::string(qtype_name(static_cast<QuestionType>(t)))] = report.counts.at(s)[static_cast<std::size_t>(t)];
    counts["total"] = report.totals.at(s);
    manifest["counts"][std::string(split_name(s))] = counts;
  }
  for (const auto& [room, split] : dataset.room_split) manifest["rooms"][std::string(split_name(split))].push_back(room);
  std::ofstream(dir / "manifest.json") << manifest.dump(1) << '\n';
}

Dataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw MalformedSpec("missing manifest.json in " + dir.string());
  json manifest;
  mf >> manifest;
  if (manifest.value("schema_version", 0) != kDatasetSchemaVersion) throw MalformedSpec("unsupported dataset schema");
  if (manifest.value("num_classes", kNumClasses) != kNumClasses)
    throw ConfigMismatch("dataset class count differs from the memory class count");
  Dataset ds;
  ds.seed = manifest.value("seed", std::uint64_t{0});
  ds.scale_factor = manifest.value("scale_factor", 1.0);
  for (Split s : {Split::Train, Split::Test}) {
    const std::string key(split_name(s));
    if (manifest.contains("rooms") && manifest["rooms"].contains(key))
      for (const auto& r : manifest["rooms"][key]) ds.room_split[r.get<std::string>()] = s;
  }
  std::ifstream in(dir / "dataset.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ds.items.push_back(item_from_json(json::parse(line)));
  }
  return ds;
}

}  // namespace iqa
