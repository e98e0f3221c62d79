#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "petrirl/jssp_env.hpp"
#include "petrirl/policy.hpp"

using namespace petrirl;
using Catch::Approx;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

std::vector<bool> random_mask(int n, std::mt19937_64& rng) {
  std::vector<bool> m(n);
  for (int i = 0; i < n; ++i) m[i] = rng() % 3 != 0;
  m[rng() % n] = true;
  return m;
}

Vec random_vec(int n, std::mt19937_64& rng, double spread = 2.0) {
  std::normal_distribution<double> normal(0.0, spread);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

// Small network with non-trivial weights so that every gradient component is
// well away from zero.
PolicyParams small_policy(std::uint64_t seed) {
  PolicyParams p = make_policy(5, 4, {6, 6}, seed);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> normal(0.0, 0.4);
  for_each_parameter(p.actor.layers(), [&](double& w) { w += normal(rng); });
  for_each_parameter(p.critic.layers(), [&](double& w) { w += normal(rng); });
  return p;
}

struct Batch {
  Mat x;
  std::vector<std::vector<bool>> masks;
  std::vector<int> actions;
  std::vector<double> targets;
};

Batch random_batch(int size, std::mt19937_64& rng) {
  Batch b;
  b.x.resize(5, size);
  for (int k = 0; k < size; ++k) {
    b.x.col(k) = random_vec(5, rng, 1.0);
    b.masks.push_back(random_mask(4, rng));
    int a = static_cast<int>(rng() % 4);
    while (!b.masks.back()[a]) a = (a + 1) % 4;
    b.actions.push_back(a);
    b.targets.push_back(random_vec(1, rng, 3.0)(0));
  }
  return b;
}

// Loss functionals composed from the public building blocks; gradient_check
// compares them against central differences.
LossFunctional critic_mse(const Batch& b) {
  return [&b](const PolicyParams& p) {
    Mlp::Cache cache;
    const Mat v = p.critic.forward(b.x, &cache);
    Mat dv(1, v.cols());
    double loss = 0.0;
    for (Eigen::Index k = 0; k < v.cols(); ++k) {
      const double e = v(0, k) - b.targets[k];
      loss += e * e / v.cols();
      dv(0, k) = 2.0 * e / v.cols();
    }
    PolicyGrad g = zero_grad(p);
    g.critic = p.critic.backward(cache, dv);
    return std::pair{loss, g};
  };
}

enum class ActorTerm { log_prob, entropy, invalid };

LossFunctional actor_loss(const Batch& b, ActorTerm term) {
  return [&b, term](const PolicyParams& p) {
    Mlp::Cache cache;
    const Mat z = p.actor.forward(b.x, &cache);
    Mat dz = Mat::Zero(z.rows(), z.cols());
    double loss = 0.0;
    for (Eigen::Index k = 0; k < z.cols(); ++k) {
      const MaskedDistribution d(z.col(k), b.masks[k]);
      switch (term) {
        case ActorTerm::log_prob:
          loss += log_prob_and_entropy(d, b.actions[k]).log_prob;
          dz.col(k) = policy_gradient_logits(d, b.actions[k], 1.0);
          break;
        case ActorTerm::entropy:
          loss += log_prob_and_entropy(d, b.actions[k]).entropy;
          dz.col(k) = entropy_gradient_logits(d);
          break;
        case ActorTerm::invalid: {
          const PenaltyResult r = invalid_penalty(z.col(k), b.masks[k], 0.5);
          loss += r.loss;
          dz.col(k) = r.grad;
          break;
        }
      }
    }
    PolicyGrad g = zero_grad(p);
    g.actor = p.actor.backward(cache, dz);
    return std::pair{loss, g};
  };
}

}  // namespace

TEST_CASE("forward pass") {
  PolicyParams p = make_policy(7, 3, {8, 8}, 1);
  const std::vector<double> obs{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  const auto [z1, v1] = forward(p, obs);
  const auto [z2, v2] = forward(p, obs);
  CHECK(z1 == z2);
  CHECK(v1 == v2);
  CHECK(z1.size() == 3);

  for (auto& l : p.actor.layers()) l.weight.setZero(), l.bias.setZero();
  for (auto& l : p.critic.layers()) l.weight.setZero(), l.bias.setZero();
  const auto [z0, v0] = forward(p, obs);
  CHECK(z0.isZero(0.0));
  CHECK(v0 == 0.0);

  CHECK_THROWS_AS(forward(p, {0.0, 1.0}), StructuralError);

  const JsspInstance inst = JsspInstance::from_ops({{{0, 2}, {1, 3}}, {{1, 1}}, {{0, 4}}, {{1, 2}, {0, 2}}});
  const PolicyParams q = make_policy(observation_size(inst), inst.n_jobs, {16, 16}, 3);
  CHECK(forward(q, JsspEnv(inst).observe()).first.size() == inst.n_jobs);
}

TEST_CASE("orthogonal initialization") {
  const PolicyParams p = make_policy(10, 4, {16, 12}, 7);
  const Mat& w0 = p.actor.layers()[0].weight;  // 16 x 10: orthonormal columns times sqrt(2)
  CHECK((w0.transpose() * w0).isApprox(2.0 * Mat::Identity(10, 10), 1e-10));
  const Mat& w2 = p.actor.layers()[2].weight;  // 4 x 12: orthonormal rows times 0.01
  CHECK((w2 * w2.transpose()).isApprox(1e-4 * Mat::Identity(4, 4), 1e-10));
  const Mat& c2 = p.critic.layers()[2].weight;
  CHECK(c2.norm() == Approx(1.0));
  CHECK(p.actor.layers()[1].bias.isZero(0.0));
  CHECK(make_policy(10, 4, {16, 12}, 7) == p);
  CHECK_FALSE(make_policy(10, 4, {16, 12}, 8) == p);
}

TEST_CASE("mask_logits examples") {
  CHECK(MaskedDistribution(vec({0, 0}), {true, false}).probs == vec({1, 0}));
  const Vec uniform = MaskedDistribution(vec({1, 1, 1}), {true, true, true}).probs;
  for (int i = 0; i < 3; ++i) CHECK(uniform(i) == Approx(1.0 / 3.0).epsilon(1e-14));
  const Vec p = MaskedDistribution(vec({std::log(2.0), 0.0, 0.0}), {true, true, false}).probs;
  CHECK(p(0) == Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(p(1) == Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(p(2) == 0.0);

  const Vec masked = mask_logits(vec({3, -2, 5}), {true, false, true});
  CHECK(masked == vec({3, kMaskedLogit, 5}));
  CHECK_THROWS_AS(mask_logits(vec({1, 2}), {false, false}), ContractError);
  CHECK_THROWS_AS(mask_logits(vec({1, 2}), {true}), StructuralError);
}

TEST_CASE("masked probabilities equal the softmax restricted to valid logits") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 8);
    const Vec z = random_vec(n, rng, 10.0);
    const std::vector<bool> mask = random_mask(n, rng);
    const MaskedDistribution d(z, mask);
    double norm = 0.0;
    for (int i = 0; i < n; ++i)
      if (mask[i]) norm += std::exp(z(i));
    double invalid = 0.0;
    double valid = 0.0;
    for (int i = 0; i < n; ++i) {
      if (mask[i]) {
        valid += d.probs(i);
        CHECK(d.probs(i) == Approx(std::exp(z(i)) / norm).epsilon(1e-12));
      } else {
        invalid += d.probs(i);
      }
    }
    CHECK(invalid < 1e-12);
    CHECK(std::abs(valid - 1.0) < 1e-9);
    CHECK(mask[d.sample(rng)]);
    CHECK(mask[d.argmax()]);
  }
}

TEST_CASE("log-probability and entropy") {
  const MaskedDistribution uniform4(vec({0.3, 0.3, 0.3, 0.3}), {true, true, true, true});
  CHECK(log_prob_and_entropy(uniform4, 2).entropy == Approx(std::log(4.0)));
  CHECK(log_prob_and_entropy(uniform4, 2).log_prob == Approx(-std::log(4.0)));

  const MaskedDistribution only(vec({0.1, 4.0, -2.0}), {false, true, false});
  const LogProbEntropy one = log_prob_and_entropy(only, 1);
  CHECK(one.log_prob == 0.0);
  CHECK(one.entropy == 0.0);

  // Masked-out entries do not contribute to the entropy.
  const MaskedDistribution half(vec({0.0, 0.0, 50.0}), {true, true, false});
  CHECK(log_prob_and_entropy(half, 0).entropy == Approx(std::log(2.0)));
  CHECK_THROWS_AS(log_prob_and_entropy(half, 2), ContractError);
}

TEST_CASE("policy gradient with respect to logits") {
  const MaskedDistribution d(vec({0.5, -1.0, 2.0, 0.0}), {true, true, false, true});
  const Vec g = policy_gradient_logits(d, 0, 1.3);
  CHECK(std::abs(g(2)) < 1e-12);
  CHECK(policy_gradient_logits(d, 1, -2.0)(1) < 0.0);
  CHECK(policy_gradient_logits(d, 3, 0.0).isZero(0.0));
  CHECK(g.sum() == Approx(0.0).margin(1e-12));
}

TEST_CASE("invalid-action penalty") {
  const PenaltyResult none = invalid_penalty(vec({1, 2, 3}), {true, true, true}, 0.7);
  CHECK(none.loss == 0.0);
  CHECK(none.grad.isZero(0.0));

  const PenaltyResult quarter = invalid_penalty(vec({0, 0, 0, 0}), {true, false, true, true}, 1.0);
  CHECK(quarter.loss == Approx(0.25));

  // Central-difference oracle on the raw logits.
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 7);
    const Vec z = random_vec(n, rng);
    const std::vector<bool> mask = random_mask(n, rng);
    const double lambda = 0.5;
    const PenaltyResult r = invalid_penalty(z, mask, lambda);
    for (int j = 0; j < n; ++j) {
      const double h = 1e-5;
      Vec up = z;
      Vec down = z;
      up(j) += h;
      down(j) -= h;
      const double numeric =
          (invalid_penalty(up, mask, lambda).loss - invalid_penalty(down, mask, lambda).loss) / (2.0 * h);
      const double denom = std::max({std::abs(numeric), std::abs(r.grad(j)), 1e-8});
      worst = std::max(worst, std::abs(numeric - r.grad(j)) / denom);
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("analytic parameter gradients agree with finite differences") {
  std::mt19937_64 rng(23);
  const PolicyParams p = small_policy(11);
  const Batch b = random_batch(6, rng);
  CHECK(gradient_check(p, critic_mse(b)) < 1e-4);
  CHECK(gradient_check(p, actor_loss(b, ActorTerm::log_prob)) < 1e-4);
  CHECK(gradient_check(p, actor_loss(b, ActorTerm::entropy)) < 1e-4);
  CHECK(gradient_check(p, actor_loss(b, ActorTerm::invalid)) < 1e-4);
}

TEST_CASE("zero loss has exactly zero gradients") {
  std::mt19937_64 rng(2);
  const PolicyParams p = small_policy(4);
  Batch b = random_batch(5, rng);
  const Mat v = p.critic.forward(b.x);
  for (int k = 0; k < 5; ++k) b.targets[k] = v(0, k);
  const auto [loss, g] = critic_mse(b)(p);
  CHECK(loss == 0.0);
  for_each_parameter(g.critic, [](double x) { CHECK(x == 0.0); });
  for_each_parameter(g.actor, [](double x) { CHECK(x == 0.0); });
}

TEST_CASE("Adam descends a quadratic and gradient clipping rescales") {
  PolicyParams p = small_policy(9);
  std::mt19937_64 rng(1);
  Batch b = random_batch(8, rng);
  const LossFunctional loss = critic_mse(b);
  const double before = loss(p).first;
  Adam opt(p, 1e-2);
  for (int i = 0; i < 200; ++i) opt.step(p, loss(p).second);
  CHECK(loss(p).first < 0.5 * before);
  CHECK(all_finite(p.critic.layers()));

  PolicyGrad g = loss(p).second;
  const double n = global_norm(g);
  scale(g, 0.5);
  CHECK(global_norm(g) == Approx(0.5 * n));
}

TEST_CASE("checkpoints round-trip bit for bit") {
  const PolicyParams p = small_policy(21);
  const auto path = std::filesystem::temp_directory_path() / "petrirl_policy_roundtrip.json";
  save_policy(p, path.string());
  const PolicyParams q = load_policy(path.string());
  CHECK(q == p);
  std::filesystem::remove(path);

  nlohmann::json j = policy_to_json(p);
  j["version"] = 99;
  CHECK_THROWS_AS(policy_from_json(j), StructuralError);
  j = policy_to_json(p);
  j["actor"][0]["bias"].push_back(1.0);
  CHECK_THROWS_AS(policy_from_json(j), StructuralError);
}
