#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "support.hpp"

using namespace iqa;
using namespace iqa::test;

namespace {

// Direct re-derivation of the loss from the head definitions.
long double reference_loss(const PolicyParams& p, const Sample& s, const LossWeights& w) {
  const int n = p.input_dim();
  const auto& th = p.theta();
  std::array<long double, kNumPlannerActions> logit{}, z{};
  for (int a = 0; a < kNumPlannerActions; ++a) {
    long double u = th[p.b_pi(a)], zz = th[p.b_val(a)];
    for (int i = 0; i < n; ++i) {
      u += static_cast<long double>(th[p.w_pi(a, i)]) * s.x[static_cast<std::size_t>(i)];
      zz += static_cast<long double>(th[p.w_val(a, i)]) * s.x[static_cast<std::size_t>(i)];
    }
    z[static_cast<std::size_t>(a)] = zz;
    logit[static_cast<std::size_t>(a)] = u + std::log(1.0L / (1.0L + std::exp(-zz)));
  }
  long double norm = 0.0L;
  for (auto l : logit) norm += std::exp(l);
  long double h = 0.0L;
  for (auto l : logit) {
    const long double pr = std::exp(l) / norm;
    h -= pr * std::log(pr);
  }
  const long double logp = logit[static_cast<std::size_t>(s.action)] - std::log(norm);
  long double v = th[p.b_v()];
  for (int i = 0; i < n; ++i) v += static_cast<long double>(th[p.w_v(i)]) * s.x[static_cast<std::size_t>(i)];
  long double val = 0.0L;
  for (int a = 0; a < kNumPlannerActions; ++a) {
    const long double sig = 1.0L / (1.0L + std::exp(-z[static_cast<std::size_t>(a)]));
    const long double m = s.valid[static_cast<std::size_t>(a)] ? 1.0L : 0.0L;
    val += -(m * std::log(sig) + (1 - m) * std::log(1 - sig)) / kNumPlannerActions;
  }
  return -s.advantage * logp + w.value * 0.5L * (v - s.target) * (v - s.target) - w.entropy * h + w.validity * val;
}

Sample random_sample(Rng& rng, int n) {
  Sample s;
  for (int i = 0; i < n; ++i) s.x.push_back(2.0 * rng.uniform01() - 1.0);
  s.action = static_cast<int>(rng.index(kNumPlannerActions));
  s.advantage = 2.0 * rng.uniform01() - 1.0;
  s.target = 3.0 * rng.uniform01();
  for (auto& m : s.valid) m = rng.bernoulli(0.6);
  return s;
}

}  // namespace

TEST_CASE("loss matches a direct evaluation of its definition") {
  Rng rng(1);
  const LossWeights w{0.5, 0.02, 1.0};
  for (int t = 0; t < 20; ++t) {
    const PolicyParams p = PolicyParams::random(9, rng, 0.5);
    const Sample s = random_sample(rng, 9);
    const LossTerms terms = loss_and_gradient(p, s, w, nullptr);
    CHECK(terms.total == doctest::Approx(static_cast<double>(reference_loss(p, s, w))).epsilon(1e-10));
  }
}

TEST_CASE("analytic gradient agrees with central differences") {
  Rng rng(2);
  const LossWeights w{0.5, 0.02, 1.0};
  const int n = 11;
  const PolicyParams p = PolicyParams::random(n, rng, 0.3);
  const Sample s = random_sample(rng, n);
  std::vector<double> g(p.theta().size(), 0.0);
  loss_and_gradient(p, s, w, &g);
  double worst = 0.0;
  for (int probe = 0; probe < 64; ++probe) {
    const std::size_t k = rng.index(p.theta().size());
    const double eps = 1e-5;
    PolicyParams plus = p, minus = p;
    plus.theta()[k] += eps;
    minus.theta()[k] -= eps;
    const double num = static_cast<double>((reference_loss(plus, s, w) - reference_loss(minus, s, w)) / (2.0L * eps));
    const double denom = std::max({std::abs(num), std::abs(g[k]), 1e-6});
    worst = std::max(worst, std::abs(num - g[k]) / denom);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("policy output is a finite distribution with bounded entropy") {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const PolicyParams p = PolicyParams::random(7, rng, 5.0);
    std::vector<double> x(7);
    for (auto& v : x) v = 10.0 * (2.0 * rng.uniform01() - 1.0);
    const PolicyOutput out = policy_forward(p, x);
    double total = 0.0;
    for (double pi : out.pi) {
      CHECK(std::isfinite(pi));
      CHECK(pi >= 0.0);
      total += pi;
    }
    CHECK(total == doctest::Approx(1.0));
    CHECK(entropy(out) <= std::log(32.0) + 1e-12);
    CHECK(entropy(out) >= 0.0);
  }
  const PolicyParams zero(4);
  CHECK(entropy(policy_forward(zero, std::vector<double>(4, 0.0))) == doctest::Approx(std::log(32.0)));
  CHECK_THROWS_AS(policy_forward(zero, std::vector<double>(3, 0.0)), DimensionMismatch);
}

TEST_CASE("invalid-logit coupling suppresses actions the validity head rejects") {
  PolicyParams p(1);
  p.theta()[p.b_val(5)] = -20.0;
  const PolicyOutput out = policy_forward(p, std::vector<double>{0.0});
  CHECK(out.pi[5] < 1e-6);
  Rng rng(4);
  SamplingOptions masked;
  masked.mask_predicted_invalid = true;
  for (int i = 0; i < 200; ++i) CHECK(select_action(out, rng, masked) != 5);
}

TEST_CASE("greedy selection picks the argmax") {
  PolicyParams p(1);
  p.theta()[p.b_pi(17)] = 3.0;
  Rng rng(5);
  CHECK(select_action(policy_forward(p, std::vector<double>{1.0}), rng, {true, false}) == 17);
}

TEST_CASE("Adam clips the gradient norm and takes bias-corrected steps") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.max_grad_norm = 1.0;
  Adam adam(2, cfg);
  std::vector<double> theta{0.0, 0.0};
  adam.step(theta, {30.0, 40.0});
  CHECK(theta[0] == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(theta[1] == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(adam.steps() == 1);
  CHECK_THROWS_AS(adam.step(theta, {1.0}), DimensionMismatch);
}

TEST_CASE("snapshots round-trip bit-exactly with metadata") {
  Rng rng(6);
  const PolicyParams p = PolicyParams::random(13, rng, 1.0);
  const auto path = std::filesystem::temp_directory_path() / "iqa_test_params.iqap";
  save_params(path, p, {{"arm", "full"}, {"features", 13}});
  nlohmann::json meta;
  const PolicyParams back = load_params(path, &meta);
  CHECK(back == p);
  CHECK(meta.at("arm") == "full");
  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << "junk";
  }
  CHECK_THROWS(load_params(path));
  std::filesystem::remove(path);
}
