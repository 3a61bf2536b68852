#include "iqa/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace iqa {

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

std::array<double, kNumPlannerActions> log_softmax(const std::array<double, kNumPlannerActions>& l) {
  const double mx = *std::max_element(l.begin(), l.end());
  double sum = 0.0;
  for (double v : l) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  std::array<double, kNumPlannerActions> out{};
  for (int i = 0; i < kNumPlannerActions; ++i) out[static_cast<std::size_t>(i)] = l[static_cast<std::size_t>(i)] - lse;
  return out;
}

}  // namespace

PolicyParams::PolicyParams(int input_dim) : n_(input_dim) {
  if (input_dim <= 0) throw DimensionMismatch("policy input dimension must be positive");
  theta_.assign(static_cast<std::size_t>(kNumPlannerActions * (2 * n_ + 2) + n_ + 1), 0.0);
}

PolicyParams PolicyParams::random(int input_dim, Rng& rng, double scale) {
  PolicyParams p(input_dim);
  for (auto& t : p.theta_) t = scale * (2.0 * rng.uniform01() - 1.0);
  return p;
}

PolicyOutput policy_forward(const PolicyParams& params, std::span<const double> x) {
  const int n = params.input_dim();
  if (static_cast<int>(x.size()) != n) throw DimensionMismatch("feature vector does not match policy input size");
  const auto& th = params.theta();
  PolicyOutput out;
  for (int a = 0; a < kNumPlannerActions; ++a) {
    double u = th[params.b_pi(a)];
    double z = th[params.b_val(a)];
    const double* wp = th.data() + params.w_pi(a, 0);
    const double* wz = th.data() + params.w_val(a, 0);
    for (int i = 0; i < n; ++i) {
      u += wp[i] * x[static_cast<std::size_t>(i)];
      z += wz[i] * x[static_cast<std::size_t>(i)];
    }
    out.validity_logits[static_cast<std::size_t>(a)] = z;
    out.logits[static_cast<std::size_t>(a)] = u - softplus(-z);
  }
  const auto lp = log_softmax(out.logits);
  for (int a = 0; a < kNumPlannerActions; ++a) out.pi[static_cast<std::size_t>(a)] = std::exp(lp[static_cast<std::size_t>(a)]);
  double v = th[params.b_v()];
  for (int i = 0; i < n; ++i) v += th[params.w_v(i)] * x[static_cast<std::size_t>(i)];
  out.v = v;
  return out;
}

double entropy(const PolicyOutput& out) {
  const auto lp = log_softmax(out.logits);
  double h = 0.0;
  for (int a = 0; a < kNumPlannerActions; ++a) h -= out.pi[static_cast<std::size_t>(a)] * lp[static_cast<std::size_t>(a)];
  return h;
}

LossTerms loss_and_gradient(const PolicyParams& params, const Sample& s, const LossWeights& w,
                            std::vector<double>* grad) {
  if (s.action < 0 || s.action >= kNumPlannerActions) throw DimensionMismatch("sample action out of range");
  const PolicyOutput out = policy_forward(params, s.x);
  const auto lp = log_softmax(out.logits);
  const double h = entropy(out);

  LossTerms t;
  t.policy = -s.advantage * lp[static_cast<std::size_t>(s.action)];
  t.value = 0.5 * (out.v - s.target) * (out.v - s.target);
  t.entropy = h;
  for (int a = 0; a < kNumPlannerActions; ++a) {
    const double z = out.validity_logits[static_cast<std::size_t>(a)];
    const double m = s.valid[static_cast<std::size_t>(a)] ? 1.0 : 0.0;
    t.validity += (softplus(z) - m * z) / kNumPlannerActions;
  }
  t.total = t.policy + w.value * t.value - w.entropy * h + w.validity * t.validity;
  if (!grad) return t;

  const int n = params.input_dim();
  auto& g = *grad;
  if (g.size() != params.theta().size()) throw DimensionMismatch("gradient buffer size mismatch");
  for (int a = 0; a < kNumPlannerActions; ++a) {
    const auto ai = static_cast<std::size_t>(a);
    const double pi = out.pi[ai];
    double gl = s.advantage * (pi - (a == s.action ? 1.0 : 0.0));
    gl += w.entropy * pi * (lp[ai] + h);
    const double z = out.validity_logits[ai];
    const double m = s.valid[ai] ? 1.0 : 0.0;
    const double gz = gl * sigmoid(-z) + w.validity * (sigmoid(z) - m) / kNumPlannerActions;
    g[params.b_pi(a)] += gl;
    g[params.b_val(a)] += gz;
    double* wp = g.data() + params.w_pi(a, 0);
    double* wz = g.data() + params.w_val(a, 0);
    for (int i = 0; i < n; ++i) {
      wp[i] += gl * s.x[static_cast<std::size_t>(i)];
      wz[i] += gz * s.x[static_cast<std::size_t>(i)];
    }
  }
  const double gv = w.value * (out.v - s.target);
  g[params.b_v()] += gv;
  for (int i = 0; i < n; ++i) g[params.w_v(i)] += gv * s.x[static_cast<std::size_t>(i)];
  return t;
}

void Adam::step(std::vector<double>& theta, std::vector<double> grad) {
  if (grad.size() != theta.size() || m_.size() != theta.size()) throw DimensionMismatch("optimizer size mismatch");
  double norm = 0.0;
  for (double g : grad) norm += g * g;
  norm = std::sqrt(norm);
  if (cfg_.max_grad_norm > 0 && norm > cfg_.max_grad_norm) {
    for (auto& g : grad) g *= cfg_.max_grad_norm / norm;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1 - cfg_.beta2) * grad[i] * grad[i];
    theta[i] -= cfg_.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps);
  }
}

int select_action(const PolicyOutput& out, Rng& rng, const SamplingOptions& opts) {
  std::array<double, kNumPlannerActions> p = out.pi;
  if (opts.mask_predicted_invalid) {
    double kept = 0.0;
    for (int a = 0; a < kNumPlannerActions; ++a) {
      if (out.validity_logits[static_cast<std::size_t>(a)] < 0.0) p[static_cast<std::size_t>(a)] = 0.0;
      kept += p[static_cast<std::size_t>(a)];
    }
    if (kept <= 0.0) p = out.pi;
  }
  if (opts.greedy) return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
  double total = 0.0;
  for (double v : p) total += v;
  double r = rng.uniform01() * total;
  for (int a = 0; a < kNumPlannerActions; ++a) {
    r -= p[static_cast<std::size_t>(a)];
    if (r < 0.0) return a;
  }
  for (int a = kNumPlannerActions - 1; a >= 0; --a)
    if (p[static_cast<std::size_t>(a)] > 0.0) return a;
  return kAnswerAction;
}

namespace {

static_assert(std::endian::native == std::endian::little, "snapshot writer assumes a little-endian host");

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }
std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

void save_params(const std::filesystem::path& path, const PolicyParams& params, const nlohmann::json& meta) {
  nlohmann::json header = meta;
  header["input_dim"] = params.input_dim();
  header["num_actions"] = kNumPlannerActions;
  header["num_params"] = params.theta().size();
  header["layout"] = "w_pi,b_pi,w_val,b_val,w_v,b_v";
  const std::string text = header.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write snapshot " + path.string());
  os.write("IQAP", 4);
  put_u32(os, kSnapshotVersion);
  put_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  os.write(reinterpret_cast<const char*>(params.theta().data()),
           static_cast<std::streamsize>(params.theta().size() * sizeof(double)));
}

PolicyParams load_params(const std::filesystem::path& path, nlohmann::json* meta) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read snapshot " + path.string());
  char magic[4] = {};
  is.read(magic, 4);
  if (std::memcmp(magic, "IQAP", 4) != 0) throw MalformedSpec("not a parameter snapshot: " + path.string());
  if (get_u32(is) != kSnapshotVersion) throw ConfigMismatch("unsupported snapshot version");
  std::string text(get_u32(is), '\0');
  is.read(text.data(), static_cast<std::streamsize>(text.size()));
  const auto header = nlohmann::json::parse(text);
  PolicyParams p(header.at("input_dim").get<int>());
  if (header.at("num_params").get<std::size_t>() != p.theta().size()) throw DimensionMismatch("snapshot size mismatch");
  is.read(reinterpret_cast<char*>(p.theta().data()), static_cast<std::streamsize>(p.theta().size() * sizeof(double)));
  if (!is) throw MalformedSpec("truncated snapshot " + path.string());
  if (meta) *meta = header;
  return p;
}

}  // namespace iqa
