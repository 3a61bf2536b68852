#include "iqa/training.hpp"

#include <cmath>
#include <fstream>
#include <memory>

namespace iqa {

namespace {

struct Transition {
  Sample sample;
  double reward = 0.0;
  double value = 0.0;
};

struct Finished {
  QuestionType qtype = QuestionType::Existence;
  bool correct = false;
  int primitive_steps = 0;
  int planner_steps = 0;
  int invalid = 0;
  double ret = 0.0;
};

struct Env {
  Rng rng;
  std::unique_ptr<Episode> episode;
  std::vector<Finished> finished;
  std::vector<double> grad;
  double loss = 0.0;
  double entropy = 0.0;
  int samples = 0;
};

void start_episode(Env& env, const TrainingSlice& slice, const EpisodeOptions& base) {
  const DatasetItem& item = slice.items[env.rng.index(slice.items.size())];
  EpisodeOptions opts = base;
  opts.detector_seed = env.rng.next();
  env.episode = std::make_unique<Episode>(room_for(*slice.rooms, item.config.room_id), item, opts);
}

void rollout(Env& env, const PolicyParams& params, const TrainingSlice& slice, const EpisodeOptions& base,
             const FeatureOptions& features, const TrainingConfig& cfg) {
  std::vector<Transition> traj;
  bool done = false;
  for (int t = 0; t < cfg.n_steps && !done; ++t) {
    Transition tr;
    tr.sample.x = extract_features(*env.episode, features);
    const PolicyOutput out = policy_forward(params, tr.sample.x);
    tr.sample.action = select_action(out, env.rng, {});
    tr.sample.valid = env.episode->valid_mask();
    tr.value = out.v;
    const StepResult res = env.episode->step(tr.sample.action);
    tr.reward = res.reward;
    done = res.done;
    traj.push_back(std::move(tr));
  }
  double ret = 0.0;
  if (!done) ret = policy_forward(params, extract_features(*env.episode, features)).v;
  for (auto it = traj.rbegin(); it != traj.rend(); ++it) {
    ret = it->reward + cfg.gamma * ret;
    it->sample.target = ret;
    it->sample.advantage = ret - it->value;
  }
  std::fill(env.grad.begin(), env.grad.end(), 0.0);
  env.loss = 0.0;
  env.entropy = 0.0;
  env.samples = static_cast<int>(traj.size());
  for (const auto& tr : traj) {
    const LossTerms lt = loss_and_gradient(params, tr.sample, cfg.loss, &env.grad);
    env.loss += lt.total;
    env.entropy += lt.entropy;
  }
  if (done) {
    const Episode& ep = *env.episode;
    const EpisodeRecord rec = ep.record("actor-critic");
    env.finished.push_back({ep.question().qtype, rec.correct, rec.primitive_steps, rec.planner_steps,
                            rec.invalid_commands, rec.total_return});
    start_episode(env, slice, base);
  }
}

EpochStats summarize(int epoch, int updates, const std::vector<Finished>& eps, double loss, double ent) {
  EpochStats s;
  s.epoch = epoch;
  s.updates = updates;
  s.episodes = static_cast<int>(eps.size());
  std::array<int, kNumQuestionTypes> correct{};
  long commands = 0, invalid = 0;
  for (const auto& f : eps) {
    const auto q = static_cast<std::size_t>(f.qtype);
    ++s.episodes_per_qtype[q];
    correct[q] += f.correct;
    s.mean_primitive_length += f.primitive_steps;
    s.mean_planner_length += f.planner_steps;
    s.mean_return += f.ret;
    commands += f.planner_steps;
    invalid += f.invalid;
  }
  for (int q = 0; q < kNumQuestionTypes; ++q) {
    const auto qi = static_cast<std::size_t>(q);
    s.accuracy[qi] = s.episodes_per_qtype[qi] ? static_cast<double>(correct[qi]) / s.episodes_per_qtype[qi] : 0.0;
  }
  if (!eps.empty()) {
    s.mean_primitive_length /= static_cast<double>(eps.size());
    s.mean_planner_length /= static_cast<double>(eps.size());
    s.mean_return /= static_cast<double>(eps.size());
  }
  s.invalid_pct = commands ? 100.0 * static_cast<double>(invalid) / static_cast<double>(commands) : 0.0;
  s.mean_loss = loss;
  s.mean_entropy = ent;
  return s;
}

void dump_divergence(const TrainingConfig& cfg, const PolicyParams& params, int update, double loss) {
  std::filesystem::path dir = cfg.dump_dir.empty() ? std::filesystem::temp_directory_path() / "iqa_divergence" : cfg.dump_dir;
  std::filesystem::create_directories(dir);
  save_params(dir / ("diverged_update_" + std::to_string(update) + ".iqap"), params,
              {{"reason", "non-finite loss"}, {"update", update}, {"loss", std::isfinite(loss) ? loss : 0.0}});
}

}  // namespace

TrainingResult train_actor_critic(const TrainingSlice& slice, const EpisodeOptions& env_opts,
                                  const FeatureOptions& features, const TrainingConfig& cfg) {
  if (!slice.rooms || slice.items.empty()) throw MalformedSpec("training slice is empty");
  if (cfg.num_envs <= 0 || cfg.n_steps <= 0 || cfg.updates_per_epoch <= 0) throw MalformedSpec("bad training schedule");
  EpisodeOptions base = env_opts;
  base.answer_source = features.mode == FeatureMode::Memoryless ? AnswerSource::CurrentView : AnswerSource::Memory;

  const int dim = feature_spec(features).size();
  Rng init_rng(hash_combine(cfg.seed, 0x1d17));
  TrainingResult result;
  result.params = PolicyParams::random(dim, init_rng, cfg.init_scale);
  Adam adam(result.params.theta().size(), cfg.adam);

  std::vector<Env> envs(static_cast<std::size_t>(cfg.num_envs));
  for (int e = 0; e < cfg.num_envs; ++e) {
    Env& env = envs[static_cast<std::size_t>(e)];
    env.rng = Rng(hash_combine(cfg.seed, static_cast<std::uint64_t>(e) + 1));
    env.grad.assign(result.params.theta().size(), 0.0);
    start_episode(env, slice, base);
  }

  std::vector<Finished> epoch_eps;
  double epoch_loss = 0.0, epoch_ent = 0.0;
  long epoch_samples = 0;
  for (int u = 1; u <= cfg.updates; ++u) {
    const PolicyParams& params = result.params;
#pragma omp parallel for schedule(static) if (cfg.parallel)
    for (int e = 0; e < cfg.num_envs; ++e) {
      rollout(envs[static_cast<std::size_t>(e)], params, slice, base, features, cfg);
    }
    std::vector<double> grad(result.params.theta().size(), 0.0);
    int samples = 0;
    double loss = 0.0;
    for (auto& env : envs) {
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += env.grad[i];
      samples += env.samples;
      loss += env.loss;
      epoch_ent += env.entropy;
      for (const auto& f : env.finished) epoch_eps.push_back(f);
      env.finished.clear();
    }
    if (!std::isfinite(loss)) {
      dump_divergence(cfg, result.params, u, loss);
      throw DivergenceDetected("non-finite loss at update " + std::to_string(u));
    }
    for (auto& g : grad) g /= samples;
    adam.step(result.params.theta(), std::move(grad));
    epoch_loss += loss;
    epoch_samples += samples;
    if (u % cfg.updates_per_epoch == 0 || u == cfg.updates) {
      const double n = epoch_samples ? static_cast<double>(epoch_samples) : 1.0;
      result.curves.push_back(summarize(static_cast<int>(result.curves.size()) + 1, u, epoch_eps, epoch_loss / n,
                                        epoch_ent / n));
      epoch_eps.clear();
      epoch_loss = epoch_ent = 0.0;
      epoch_samples = 0;
    }
  }
  return result;
}

void write_curves_csv(const std::vector<EpochStats>& curves, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  os << "epoch,updates,episodes,acc_existence,acc_counting,acc_spatial,mean_length,mean_planner_steps,invalid_pct,"
        "mean_return,mean_loss,mean_entropy\n";
  for (const auto& c : curves) {
    os << c.epoch << ',' << c.updates << ',' << c.episodes << ',' << c.accuracy[0] << ',' << c.accuracy[1] << ','
       << c.accuracy[2] << ',' << c.mean_primitive_length << ',' << c.mean_planner_length << ',' << c.invalid_pct << ','
       << c.mean_return << ',' << c.mean_loss << ',' << c.mean_entropy << '\n';
  }
}

}  // namespace iqa
