#include "iqa/harness.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "iqa/trajectory_log.hpp"

namespace iqa {

AgentSpec AgentSpec::scripted_agent(ScriptedOptions opts) {
  AgentSpec a;
  a.kind = AgentKind::Scripted;
  a.name = "scripted";
  a.scripted = opts;
  return a;
}

AgentSpec AgentSpec::mla(std::array<int, kNumQuestionTypes> choices) {
  AgentSpec a;
  a.kind = AgentKind::MLA;
  a.name = "mla";
  a.mla_choice = choices;
  return a;
}

AgentSpec AgentSpec::learned(std::string name, PolicyParams params, FeatureOptions features, SamplingOptions sampling) {
  AgentSpec a;
  a.kind = features.mode == FeatureMode::Memoryless ? AgentKind::Memoryless : AgentKind::ActorCritic;
  a.name = std::move(name);
  a.params = std::move(params);
  a.features = features;
  a.sampling = sampling;
  return a;
}

std::uint64_t detector_seed_for(std::uint64_t seed, const std::string& item_id) {
  return hash_combine(hash_combine(seed, 0xde7ec7), hash_string(item_id));
}

std::uint64_t agent_seed_for(std::uint64_t seed, const std::string& item_id) {
  return hash_combine(hash_combine(seed, 0xa9e47), hash_string(item_id));
}

EpisodeRecord run_episode(const AgentSpec& agent, const RoomSpec& room, const DatasetItem& item, EpisodeOptions options,
                          std::uint64_t agent_seed, std::set<int>* opened) {
  if (agent.kind == AgentKind::Memoryless) options.answer_source = AnswerSource::CurrentView;
  Episode ep(room, item, options);
  switch (agent.kind) {
    case AgentKind::Scripted: {
      ScriptedExplorer explorer(agent.scripted);
      while (!ep.done()) ep.step(explorer.next_action(ep));
      if (opened) *opened = explorer.opened();
      break;
    }
    case AgentKind::ActorCritic:
    case AgentKind::Memoryless: {
      const int dim = feature_spec(agent.features).size();
      if (agent.params.input_dim() != dim) {
        throw ConfigMismatch("policy expects " + std::to_string(agent.params.input_dim()) + " features, extractor gives " +
                             std::to_string(dim));
      }
      Rng rng(agent_seed);
      while (!ep.done()) {
        const std::vector<double> x = extract_features(ep, agent.features);
        ep.step(select_action(policy_forward(agent.params, x), rng, agent.sampling));
      }
      break;
    }
    case AgentKind::MLA:
      ep.answer_with(agent.mla_choice[static_cast<std::size_t>(item.question.qtype)]);
      break;
  }
  return ep.record(agent.name, agent_seed);
}

std::vector<EpisodeRecord> run_episodes(const AgentSpec& agent, const RoomTable& rooms,
                                        const std::vector<DatasetItem>& items, const RunOptions& options) {
  std::vector<EpisodeRecord> records(items.size());
  const int n = static_cast<int>(items.size());
  std::vector<std::string> errors(items.size());
#pragma omp parallel for schedule(dynamic) if (options.parallel)
  for (int i = 0; i < n; ++i) {
    const DatasetItem& item = items[static_cast<std::size_t>(i)];
    try {
      const RoomSpec& room = room_for(rooms, item.config.room_id);
      EpisodeOptions opts = options.episode;
      opts.detector_seed = detector_seed_for(options.seed, item.item_id);
      if (agent.kind == AgentKind::Memoryless) opts.answer_source = AnswerSource::CurrentView;
      EpisodeRecord rec = run_episode(agent, room, item, opts, agent_seed_for(options.seed, item.item_id));
      if (!options.log_dir.empty()) {
        const WorldHandle world = replay_world(room, item.config, opts.controller, rec.detector_seed, rec.events);
        write_episode_log(options.log_dir / episode_log_name(agent.name, item.item_id), rec, room, item, opts,
                          world.memory());
      }
      records[static_cast<std::size_t>(i)] = std::move(rec);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i].empty()) continue;
    if (errors[i].find("policy expects") != std::string::npos) throw ConfigMismatch(errors[i]);
    throw Error("episode " + items[i].item_id + ": " + errors[i]);
  }
  return records;
}

const SliceMetrics& MetricsReport::slice(const std::string& name) const {
  static const SliceMetrics empty{};
  const auto it = slices.find(name);
  return it == slices.end() ? empty : it->second;
}

namespace {

struct Acc {
  int episodes = 0;
  int correct = 0;
  long primitive = 0;
  long planner = 0;
  long invalid = 0;

  void add(const EpisodeRecord& r) {
    ++episodes;
    correct += r.correct;
    primitive += r.primitive_steps;
    planner += r.planner_steps;
    invalid += r.invalid_commands;
  }

  QtypeMetrics finish() const {
    QtypeMetrics m;
    m.episodes = episodes;
    m.correct = correct;
    m.planner_commands = planner;
    m.invalid_commands = invalid;
    if (episodes) {
      m.accuracy = static_cast<double>(correct) / episodes;
      m.mean_length = static_cast<double>(primitive) / episodes;
      m.mean_planner_steps = static_cast<double>(planner) / episodes;
    }
    if (planner) m.invalid_pct = 100.0 * static_cast<double>(invalid) / static_cast<double>(planner);
    return m;
  }
};

struct SliceAcc {
  std::array<Acc, kNumQuestionTypes> per_qtype{};
  Acc overall;
  void add(const EpisodeRecord& r) {
    per_qtype[static_cast<std::size_t>(r.qtype)].add(r);
    overall.add(r);
  }
  SliceMetrics finish() const {
    SliceMetrics s;
    for (std::size_t q = 0; q < per_qtype.size(); ++q) s.per_qtype[q] = per_qtype[q].finish();
    s.overall = overall.finish();
    return s;
  }
};

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

MetricsReport compute_metrics(const std::vector<EpisodeRecord>& records, const std::map<std::string, Split>& room_split) {
  std::map<std::string, SliceAcc> acc;
  acc["all"];
  for (const auto& r : records) {
    acc["all"].add(r);
    const auto it = room_split.find(r.room_id);
    if (it == room_split.end()) continue;
    acc[it->second == Split::Train ? "seen" : "unseen"].add(r);
  }
  MetricsReport rep;
  for (const auto& [name, a] : acc) rep.slices[name] = a.finish();
  return rep;
}

std::string format_metrics_table(const MetricsRows& rows, const std::string& slice) {
  std::size_t width = 5;
  for (const auto& [name, _] : rows) width = std::max(width, name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "agent";
  for (int q = 0; q < kNumQuestionTypes; ++q) os << " | " << std::setw(30) << qtype_name(static_cast<QuestionType>(q));
  os << " | episodes\n";
  os << std::setw(static_cast<int>(width)) << "";
  for (int q = 0; q < kNumQuestionTypes; ++q) os << " | " << std::setw(30) << "acc%    length   invalid%";
  os << " |\n" << std::string(width + 3 * 33 + 11, '-') << '\n';
  for (const auto& [name, rep] : rows) {
    const SliceMetrics& s = rep.slice(slice);
    os << std::setw(static_cast<int>(width)) << name;
    for (const auto& m : s.per_qtype) {
      std::ostringstream cell;
      cell << std::right << std::setw(6) << fixed(100.0 * m.accuracy, 2) << std::setw(10) << fixed(m.mean_length, 1)
           << std::setw(11) << fixed(m.invalid_pct, 2);
      os << " | " << std::setw(30) << cell.str();
    }
    os << " | " << s.overall.episodes << '\n';
  }
  return os.str();
}

void write_metrics_csv(const MetricsRows& rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << "agent,slice,qtype,episodes,correct,accuracy,mean_length,mean_planner_steps,planner_commands,invalid_commands,"
        "invalid_pct\n";
  os << std::setprecision(10);
  for (const auto& [name, rep] : rows) {
    for (const auto& [slice, s] : rep.slices) {
      const auto row = [&](std::string_view qt, const QtypeMetrics& m) {
        os << name << ',' << slice << ',' << qt << ',' << m.episodes << ',' << m.correct << ',' << m.accuracy << ','
           << m.mean_length << ',' << m.mean_planner_steps << ',' << m.planner_commands << ',' << m.invalid_commands
           << ',' << m.invalid_pct << '\n';
      };
      for (int q = 0; q < kNumQuestionTypes; ++q) row(qtype_name(static_cast<QuestionType>(q)), s.per_qtype[q]);
      row("overall", s.overall);
    }
  }
}

std::vector<std::string> ablation_arm_names() {
  return {"full", "gt_detector", "gt_detector_oracle_nav", "question_blind", "no_validity_loss", "memoryless",
          "scripted", "mla"};
}

std::vector<AblationRow> run_ablation_suite(const AblationConfig& cfg, const RoomTable& rooms, const Dataset& dataset) {
  std::vector<std::string> arms = cfg.arms.empty() ? ablation_arm_names() : cfg.arms;
  const auto wanted = [&](const std::string& a) { return std::find(arms.begin(), arms.end(), a) != arms.end(); };
  for (const auto& a : arms) {
    const auto all = ablation_arm_names();
    if (std::find(all.begin(), all.end(), a) == all.end()) throw MalformedSpec("unknown ablation arm " + a);
  }

  TrainingSlice train;
  train.rooms = &rooms;
  std::vector<DatasetItem> test;
  for (const auto& item : dataset.items) (item.split == Split::Train ? train.items : test).push_back(item);

  const RunConfig& run = cfg.run;
  const DetectorModel noisy = run.controller.detector.is_oracle() ? DetectorModel::noisy(0.9, 0.001, 0.1)
                                                                  : run.controller.detector;
  const DetectorModel oracle = DetectorModel::oracle();
  FeatureOptions base_features;
  base_features.window_size = run.eval.window_size;
  base_features.tau = run.answer.tau;
  const SamplingOptions sampling{run.eval.greedy, run.eval.mask_predicted_invalid};

  struct Trained {
    PolicyParams params;
    std::vector<EpochStats> curves;
  };
  std::map<std::string, Trained> trained;
  const auto train_arm = [&](const std::string& name, const EpisodeOptions& env, const FeatureOptions& features,
                             TrainingConfig tc) -> const Trained& {
    if (!cfg.out_dir.empty()) tc.dump_dir = cfg.out_dir / name;
    TrainingResult res = train_actor_critic(train, env, features, tc);
    if (!cfg.out_dir.empty()) {
      save_params(cfg.out_dir / name / "params.iqap", res.params,
                  {{"arm", name},
                   {"features", feature_options_to_json(features)},
                   {"feature_names", feature_spec(features).names},
                   {"config", run_config_to_json(run)}});
      write_curves_csv(res.curves, cfg.out_dir / name / "curves.csv");
    }
    return trained[name] = Trained{std::move(res.params), std::move(res.curves)};
  };

  std::vector<AblationRow> rows;
  const auto evaluate = [&](const std::string& name, const AgentSpec& agent, const EpisodeOptions& opts,
                            std::vector<EpochStats> curves) {
    RunOptions ro;
    ro.episode = opts;
    ro.seed = run.eval.seed;
    ro.parallel = run.eval.parallel;
    if (run.eval.write_logs && !cfg.out_dir.empty()) ro.log_dir = cfg.out_dir / name / "logs";
    AgentSpec a = agent;
    a.name = name;
    const auto records = run_episodes(a, rooms, test, ro);
    rows.push_back({name, compute_metrics(records, dataset.room_split), std::move(curves)});
  };

  const EpisodeOptions noisy_opts = run.episode_options(noisy);
  const EpisodeOptions oracle_opts = run.episode_options(oracle);
  EpisodeOptions oracle_nav_opts = oracle_opts;
  oracle_nav_opts.controller.navigator = NavigatorMode::Oracle;

  for (const auto& arm : ablation_arm_names()) {
    if (!wanted(arm)) continue;
    if (arm == "full") {
      const auto& t = train_arm(arm, noisy_opts, base_features, run.training);
      evaluate(arm, AgentSpec::learned(arm, t.params, base_features, sampling), noisy_opts, t.curves);
    } else if (arm == "gt_detector" || arm == "gt_detector_oracle_nav") {
      const Trained* t = nullptr;
      if (trained.count("gt_detector")) t = &trained.at("gt_detector");
      else t = &train_arm("gt_detector", oracle_opts, base_features, run.training);
      evaluate(arm, AgentSpec::learned(arm, t->params, base_features, sampling),
               arm == "gt_detector" ? oracle_opts : oracle_nav_opts, t->curves);
    } else if (arm == "question_blind") {
      FeatureOptions f = base_features;
      f.question_blind = true;
      const auto& t = train_arm(arm, noisy_opts, f, run.training);
      evaluate(arm, AgentSpec::learned(arm, t.params, f, sampling), noisy_opts, t.curves);
    } else if (arm == "no_validity_loss") {
      TrainingConfig tc = run.training;
      tc.loss.validity = 0.0;
      const auto& t = train_arm(arm, noisy_opts, base_features, tc);
      evaluate(arm, AgentSpec::learned(arm, t.params, base_features, sampling), noisy_opts, t.curves);
    } else if (arm == "memoryless") {
      FeatureOptions f = base_features;
      f.mode = FeatureMode::Memoryless;
      const auto& t = train_arm(arm, noisy_opts, f, run.training);
      evaluate(arm, AgentSpec::learned(arm, t.params, f, sampling), noisy_opts, t.curves);
    } else if (arm == "scripted") {
      evaluate(arm, AgentSpec::scripted_agent(run.scripted), oracle_opts, {});
    } else if (arm == "mla") {
      evaluate(arm, AgentSpec::mla(modal_answers(train.items)), noisy_opts, {});
    }
  }

  if (!cfg.out_dir.empty()) {
    MetricsRows mr;
    for (const auto& r : rows) mr.emplace_back(r.name, r.report);
    write_metrics_csv(mr, cfg.out_dir / "ablation_metrics.csv");
  }
  return rows;
}

}  // namespace iqa
