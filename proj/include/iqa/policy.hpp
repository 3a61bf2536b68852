#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "iqa/episode.hpp"
#include "iqa/rng.hpp"

namespace iqa {

// Linear heads over a feature vector x:
//   policy logits   l = W_pi x + b_pi + log sigmoid(z)
//   validity logits z = W_val x + b_val
//   value           v = w_v . x + b_v
// The log-sigmoid coupling lets the validity head shape action preferences.
class PolicyParams {
 public:
  PolicyParams() = default;
  explicit PolicyParams(int input_dim);

  static PolicyParams random(int input_dim, Rng& rng, double scale);

  int input_dim() const { return n_; }
  std::vector<double>& theta() { return theta_; }
  const std::vector<double>& theta() const { return theta_; }

  std::size_t w_pi(int action, int i) const { return static_cast<std::size_t>(action * n_ + i); }
  std::size_t b_pi(int action) const { return static_cast<std::size_t>(kNumPlannerActions * n_ + action); }
  std::size_t w_val(int action, int i) const {
    return static_cast<std::size_t>(kNumPlannerActions * (n_ + 1) + action * n_ + i);
  }
  std::size_t b_val(int action) const { return static_cast<std::size_t>(kNumPlannerActions * (2 * n_ + 1) + action); }
  std::size_t w_v(int i) const { return static_cast<std::size_t>(kNumPlannerActions * (2 * n_ + 2) + i); }
  std::size_t b_v() const { return static_cast<std::size_t>(kNumPlannerActions * (2 * n_ + 2) + n_); }

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;

 private:
  int n_ = 0;
  std::vector<double> theta_;
};

struct PolicyOutput {
  std::array<double, kNumPlannerActions> pi{};
  std::array<double, kNumPlannerActions> logits{};
  std::array<double, kNumPlannerActions> validity_logits{};
  double v = 0.0;
};

PolicyOutput policy_forward(const PolicyParams& params, std::span<const double> x);

double entropy(const PolicyOutput& out);

struct LossWeights {
  double value = 0.5;
  double entropy = 0.01;   // beta
  double validity = 1.0;   // eta; 0 disables the auxiliary loss
};

struct Sample {
  std::vector<double> x;
  int action = 0;
  double advantage = 0.0;  // treated as a constant
  double target = 0.0;     // n-step return for the value head
  PlannerMask valid{};
};

struct LossTerms {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double validity = 0.0;
  double total = 0.0;
};

// Loss of one sample; when grad is non-null the gradient is added to it.
LossTerms loss_and_gradient(const PolicyParams& params, const Sample& s, const LossWeights& w,
                            std::vector<double>* grad);

struct AdamConfig {
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double max_grad_norm = 5.0;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}
  void step(std::vector<double>& theta, std::vector<double> grad);
  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

struct SamplingOptions {
  bool greedy = false;
  // Drop actions the validity head predicts to be invalid (evaluation only).
  bool mask_predicted_invalid = false;
};

int select_action(const PolicyOutput& out, Rng& rng, const SamplingOptions& opts);

// Flat binary snapshot: "IQAP", u32 version, u32 header length, JSON header,
// then the parameters as little-endian float64.
inline constexpr std::uint32_t kSnapshotVersion = 1;
void save_params(const std::filesystem::path& path, const PolicyParams& params, const nlohmann::json& meta);
PolicyParams load_params(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

}  // namespace iqa
