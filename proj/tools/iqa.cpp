#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "iqa/harness.hpp"
#include "iqa/room_io.hpp"
#include "iqa/server.hpp"
#include "iqa/trajectory_log.hpp"

using namespace iqa;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Global {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out = "out";
};

RunConfig load_config(const Global& g) {
  RunConfig c = g.config.empty() ? RunConfig{} : load_run_config(g.config);
  if (g.seed_set) {
    c.training.seed = g.seed;
    c.eval.seed = g.seed;
  }
  return c;
}

// Room files plus the train/test assignment: split.json if present, otherwise
// the first `train_rooms` rooms in id order are training rooms.
struct LoadedData {
  Dataset dataset;
  RoomTable rooms;
};

LoadedData load_data(const fs::path& dir) {
  LoadedData d;
  d.dataset = read_dataset(dir);
  d.rooms = make_room_table(read_room_dir(dir / "rooms"));
  return d;
}

std::vector<DatasetItem> items_of(const Dataset& ds, const std::string& split) {
  std::vector<DatasetItem> out;
  for (const auto& it : ds.items)
    if (split == "all" || split_name(it.split) == split) out.push_back(it);
  return out;
}

DetectorModel detector_named(const std::string& name, const RunConfig& cfg) {
  if (name == "oracle") return DetectorModel::oracle();
  if (name == "noisy") return cfg.controller.detector.is_oracle() ? DetectorModel::noisy(0.9, 0.001, 0.1) : cfg.controller.detector;
  if (name == "config") return cfg.controller.detector;
  throw MalformedSpec("detector must be oracle, noisy or config");
}

void print_metrics(const MetricsRows& rows, const fs::path& csv) {
  for (const char* slice : {"all", "seen", "unseen"}) {
    bool any = false;
    for (const auto& [_, rep] : rows) any |= rep.slice(slice).overall.episodes > 0;
    if (!any) continue;
    std::cout << "[" << slice << "]\n" << format_metrics_table(rows, slice) << '\n';
  }
  write_metrics_csv(rows, csv);
  std::cout << "metrics written to " << csv.string() << '\n';
}

std::atomic<EpisodeServer*> g_server{nullptr};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive question answering in grid kitchens: data, training, evaluation, serving"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_option("--config", g.config, "Run configuration JSON")->check(CLI::ExistingFile);
  app.add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { g.seed = s; g.seed_set = true; }, "Master seed");
  app.add_option("--out", g.out, "Output directory");

  // gen-rooms
  auto* gen_rooms = app.add_subcommand("gen-rooms", "Generate procedural kitchen layouts");
  int room_count = 30, train_rooms = 25, min_size = 10, max_size = 14;
  std::string room_prefix = "kitchen";
  gen_rooms->add_option("--count", room_count, "Number of rooms")->check(CLI::PositiveNumber);
  gen_rooms->add_option("--train-rooms", train_rooms, "Rooms assigned to the training split");
  gen_rooms->add_option("--min-size", min_size, "Smallest side length in cells")->check(CLI::Range(6, 64));
  gen_rooms->add_option("--max-size", max_size, "Largest side length in cells")->check(CLI::Range(6, 64));
  gen_rooms->add_option("--prefix", room_prefix, "Room id prefix");

  // gen-dataset
  auto* gen_ds = app.add_subcommand("gen-dataset", "Generate a balanced question dataset");
  std::string rooms_dir = "rooms";
  DatasetOptions dopts;
  bool seen_test = false;
  gen_ds->add_option("--rooms", rooms_dir, "Room directory")->check(CLI::ExistingDirectory);
  gen_ds->add_option("--scale", dopts.scale_factor, "Scale factor relative to full size")->check(CLI::PositiveNumber);
  gen_ds->add_option("--train-rooms", train_rooms, "Training rooms when the directory has no split.json");
  gen_ds->add_option("--test-per-room", dopts.test_per_room_qtype, "Full-size test items per room and question type");
  gen_ds->add_option("--train-per-room", dopts.train_per_room_qtype, "Full-size train items per room and question type");
  gen_ds->add_flag("--seen-test", seen_test, "Also emit test items in training rooms");

  // train
  auto* train = app.add_subcommand("train", "Train the actor-critic planner");
  std::string dataset_dir = "data";
  std::string features_mode = "memory", detector_name = "noisy";
  bool question_blind = false, no_validity = false, oracle_nav = false;
  int updates = -1;
  train->add_option("--dataset", dataset_dir, "Dataset directory")->check(CLI::ExistingDirectory);
  train->add_option("--features", features_mode, "memory or memoryless")->check(CLI::IsMember({"memory", "memoryless"}));
  train->add_option("--detector", detector_name, "oracle, noisy or config")->check(CLI::IsMember({"oracle", "noisy", "config"}));
  train->add_flag("--question-blind", question_blind, "Zero question features");
  bool extended_features = false;
  train->add_flag("--extended-features", extended_features, "Add the extended planner features");
  train->add_flag("--no-validity-loss", no_validity, "Disable the auxiliary validity loss");
  train->add_option("--updates", updates, "Override the number of updates");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate an agent on a dataset split");
  std::string agent = "scripted", params_path, split = "test";
  eval->add_option("--dataset", dataset_dir, "Dataset directory")->check(CLI::ExistingDirectory);
  eval->add_option("--agent", agent, "scripted, mla or learned")->check(CLI::IsMember({"scripted", "mla", "learned"}));
  eval->add_option("--params", params_path, "Parameter snapshot for a learned agent");
  eval->add_option("--split", split, "train, test or all")->check(CLI::IsMember({"train", "test", "all"}));
  eval->add_option("--detector", detector_name, "oracle, noisy or config")->check(CLI::IsMember({"oracle", "noisy", "config"}));
  eval->add_flag("--oracle-nav", oracle_nav, "Navigate on the true layout");
  bool write_logs = false;
  eval->add_flag("--logs", write_logs, "Write a gzip trajectory log per episode");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate every ablation arm");
  std::vector<std::string> arms;
  ablate->add_option("--dataset", dataset_dir, "Dataset directory")->check(CLI::ExistingDirectory);
  ablate->add_option("--arms", arms, "Subset of arms");
  ablate->add_option("--updates", updates, "Override the number of updates");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve episodes over the wire protocol");
  int port = 7070, http_port = -1;
  std::string host = "127.0.0.1";
  serve->add_option("--dataset", dataset_dir, "Dataset directory")->check(CLI::ExistingDirectory);
  serve->add_option("--port", port, "Framed TCP port");
  serve->add_option("--http-port", http_port, "Also serve one-request-per-call HTTP on this port");
  serve->add_option("--host", host, "Bind address");

  // replay
  auto* replay = app.add_subcommand("replay", "Replay a trajectory log and verify it");
  std::string log_path;
  replay->add_option("log", log_path, "Episode log (.jsonl.gz)")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = load_config(g);
    const fs::path out(g.out);

    if (*gen_rooms) {
      const RoomSet set = generate_room_set({room_prefix, room_count, train_rooms, min_size, max_size, g.seed});
      write_room_set(set, out);
      std::cout << "wrote " << room_count << " rooms to " << out.string() << '\n';
      return 0;
    }

    if (*gen_ds) {
      dopts.seed = g.seed;
      dopts.seen_test = seen_test;
      const RoomSet set = read_room_set(rooms_dir, train_rooms);
      const Dataset ds = generate_dataset(set.train, set.test, dopts);
      std::vector<RoomSpec> all = set.train;
      all.insert(all.end(), set.test.begin(), set.test.end());
      write_dataset(ds, all, out);
      const BalanceReport rep = verify_balance(ds);
      for (Split s : {Split::Train, Split::Test}) {
        std::cout << split_name(s) << ": " << rep.rooms.at(s) << " rooms";
        for (int q = 0; q < kNumQuestionTypes; ++q)
          std::cout << ", " << qtype_name(static_cast<QuestionType>(q)) << " " << rep.counts.at(s)[static_cast<std::size_t>(q)];
        std::cout << ", total " << rep.totals.at(s) << '\n';
      }
      return 0;
    }

    if (*train) {
      const LoadedData d = load_data(dataset_dir);
      TrainingSlice slice{&d.rooms, items_of(d.dataset, "train")};
      FeatureOptions f;
      f.mode = features_mode == "memory" ? FeatureMode::Memory : FeatureMode::Memoryless;
      f.question_blind = question_blind;
      f.extended = extended_features;
      f.window_size = cfg.eval.window_size;
      f.tau = cfg.answer.tau;
      TrainingConfig tc = cfg.training;
      if (no_validity) tc.loss.validity = 0.0;
      if (updates > 0) tc.updates = updates;
      tc.dump_dir = out;
      const TrainingResult res = train_actor_critic(slice, cfg.episode_options(detector_named(detector_name, cfg)), f, tc);
      save_params(out / "params.iqap", res.params,
                  {{"features", feature_options_to_json(f)},
                   {"feature_names", feature_spec(f).names},
                   {"detector", detector_name},
                   {"config", run_config_to_json(cfg)}});
      write_curves_csv(res.curves, out / "curves.csv");
      if (!res.curves.empty()) {
        const EpochStats& last = res.curves.back();
        std::cout << "final epoch " << last.epoch << ": acc " << last.accuracy[0] << '/' << last.accuracy[1] << '/'
                  << last.accuracy[2] << ", invalid% " << last.invalid_pct << '\n';
      }
      std::cout << "snapshot written to " << (out / "params.iqap").string() << '\n';
      return 0;
    }

    if (*eval) {
      const LoadedData d = load_data(dataset_dir);
      AgentSpec spec;
      if (agent == "scripted") {
        spec = AgentSpec::scripted_agent(cfg.scripted);
        if (detector_name == "noisy" && !eval->count("--detector")) detector_name = "oracle";
      } else if (agent == "mla") {
        spec = AgentSpec::mla(modal_answers(items_of(d.dataset, "train")));
      } else {
        if (params_path.empty()) throw MalformedSpec("--params is required for a learned agent");
        json meta;
        PolicyParams p = load_params(params_path, &meta);
        const FeatureOptions f = feature_options_from_json(meta.value("features", json::object()));
        spec = AgentSpec::learned("learned", std::move(p), f, {cfg.eval.greedy, cfg.eval.mask_predicted_invalid});
      }
      RunOptions ro;
      ro.episode = cfg.episode_options(detector_named(detector_name, cfg));
      if (oracle_nav) ro.episode.controller.navigator = NavigatorMode::Oracle;
      ro.seed = cfg.eval.seed;
      ro.parallel = cfg.eval.parallel;
      if (write_logs || cfg.eval.write_logs) ro.log_dir = out / "logs";
      const auto records = run_episodes(spec, d.rooms, items_of(d.dataset, split), ro);
      {
        fs::create_directories(out);
        std::ofstream os(out / "records.jsonl");
        for (const auto& r : records) os << record_summary_json(r).dump() << '\n';
      }
      print_metrics({{spec.name, compute_metrics(records, d.dataset.room_split)}}, out / "metrics.csv");
      return 0;
    }

    if (*ablate) {
      const LoadedData d = load_data(dataset_dir);
      AblationConfig ac;
      ac.run = cfg;
      if (updates > 0) ac.run.training.updates = updates;
      ac.out_dir = out;
      ac.arms = arms;
      const auto rows = run_ablation_suite(ac, d.rooms, d.dataset);
      MetricsRows mr;
      for (const auto& r : rows) mr.emplace_back(r.name, r.report);
      print_metrics(mr, out / "ablation_metrics.csv");
      return 0;
    }

    if (*serve) {
      const LoadedData d = load_data(dataset_dir);
      auto data = std::make_shared<ServerData>();
      data->rooms = d.rooms;
      for (const auto& it : d.dataset.items) data->items[it.item_id] = it;
      data->room_split = d.dataset.room_split;
      data->options.episode = cfg.episode_options();
      data->options.seed = cfg.eval.seed;
      data->options.log_dir = out / "sessions";
      EpisodeServer server(data);
      const int bound = server.listen(port, host);
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (auto* s = g_server.load()) s->stop();
      });
      std::thread http;
      if (http_port >= 0) {
        http = std::thread([&] { server.serve_http(http_port, host); });
        std::cout << "http on " << host << ':' << http_port << "/api\n";
      }
      std::cout << "serving " << data->items.size() << " items on " << host << ':' << bound << std::endl;
      server.run();
      g_server = nullptr;
      if (http.joinable()) http.detach();
      return 0;
    }

    if (*replay) {
      const EpisodeLog log = read_episode_log(log_path);
      const ReplayReport rep = replay_log(log);
      const EpisodeRecord rec = record_from_log(log);
      std::cout << "item " << rec.item_id << " agent " << rec.agent << ": " << rec.planner_steps << " planner steps, "
                << rec.primitive_steps << " primitive steps, answer " << rec.answer_given << " ("
                << (rec.correct ? "correct" : "incorrect") << ")\n";
      std::cout << (rep.ok() ? "replay matches" : "replay differs: " + rep.detail) << '\n';
      return rep.ok() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
