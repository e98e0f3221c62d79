#pragma once

// Actor-critic networks with hand-written backpropagation, masked categorical
// distributions and the invalid-action penalty.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "petrirl/error.hpp"

namespace petrirl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct DenseLayer {
  Mat weight;  // out x in
  Vec bias;    // out

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() && a.weight == b.weight &&
           a.bias == b.bias;
  }
};

/// Same shape as an Mlp's layers; holds gradients or optimizer moments.
using LayerStack = std::vector<DenseLayer>;

inline LayerStack zeros_like(const LayerStack& layers) {
  LayerStack out;
  for (const DenseLayer& l : layers) {
    out.push_back({Mat::Zero(l.weight.rows(), l.weight.cols()), Vec::Zero(l.bias.size())});
  }
  return out;
}

inline std::size_t parameter_count(const LayerStack& layers) {
  std::size_t n = 0;
  for (const DenseLayer& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

/// Visits every scalar parameter in a fixed order: per layer, weights
/// row-major then biases.
template <typename F>
void for_each_parameter(LayerStack& layers, F&& f) {
  for (DenseLayer& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) f(l.weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) f(l.bias(r));
  }
}

template <typename F>
void for_each_parameter(const LayerStack& layers, F&& f) {
  for (const DenseLayer& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) f(l.weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) f(l.bias(r));
  }
}

inline bool all_finite(const LayerStack& layers) {
  for (const DenseLayer& l : layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

/// Multilayer perceptron with tanh hidden activations and a linear output.
class Mlp {
 public:
  struct Cache {
    std::vector<Mat> activations;  // activations[0] = input, activations[i] = output of layer i-1
  };

  Mlp() = default;

  /// Orthogonal initialization: gain sqrt(2) for hidden layers, `output_gain`
  /// for the last layer; zero biases.
  Mlp(const std::vector<int>& sizes, double output_gain, std::uint64_t seed) {
    if (sizes.size() < 2) throw StructuralError("Mlp needs at least an input and an output size");
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      const bool last = i + 2 == sizes.size();
      layers_.push_back({orthogonal(sizes[i + 1], sizes[i], last ? output_gain : std::sqrt(2.0), rng),
                         Vec::Zero(sizes[i + 1])});
    }
  }

  explicit Mlp(LayerStack layers) : layers_(std::move(layers)) {}

  int input_size() const { return static_cast<int>(layers_.front().weight.cols()); }
  int output_size() const { return static_cast<int>(layers_.back().weight.rows()); }

  /// Column-batched forward pass: x is (input x batch).
  Mat forward(const Mat& x, Cache* cache = nullptr) const {
    if (x.rows() != input_size()) {
      throw StructuralError("Mlp: input has " + std::to_string(x.rows()) + " rows, expected " +
                            std::to_string(input_size()));
    }
    if (cache) {
      cache->activations.clear();
      cache->activations.push_back(x);
    }
    Mat h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Mat z = layers_[i].weight * h;
      z.colwise() += layers_[i].bias;
      if (i + 1 < layers_.size()) z = z.array().tanh().matrix();
      h = std::move(z);
      if (cache) cache->activations.push_back(h);
    }
    return h;
  }

  Vec forward(const Vec& x) const { return forward(Mat(x), nullptr).col(0); }

  /// Gradient of sum(d_out .* output) with respect to every parameter.
  LayerStack backward(const Cache& cache, const Mat& d_out) const {
    LayerStack grads = zeros_like(layers_);
    Mat delta = d_out;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      if (i + 1 < layers_.size()) {
        const Mat& a = cache.activations[i + 1];
        delta = delta.cwiseProduct((1.0 - a.array().square()).matrix());
      }
      grads[i].weight = delta * cache.activations[i].transpose();
      grads[i].bias = delta.rowwise().sum();
      if (i > 0) delta = layers_[i].weight.transpose() * delta;
    }
    return grads;
  }

  LayerStack& layers() noexcept { return layers_; }
  const LayerStack& layers() const noexcept { return layers_; }

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  static Mat orthogonal(int rows, int cols, double gain, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const int big = std::max(rows, cols);
    const int small = std::min(rows, cols);
    Mat a(big, small);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
    Eigen::HouseholderQR<Mat> qr(a);
    Mat q = qr.householderQ() * Mat::Identity(big, small);
    // Sign fix makes the distribution uniform over orthogonal matrices.
    const Mat r = qr.matrixQR().topRows(small);
    for (int k = 0; k < small; ++k)
      if (r(k, k) < 0) q.col(k) *= -1.0;
    Mat w = rows >= cols ? q : Mat(q.transpose());
    return gain * w;
  }

  LayerStack layers_;
};

struct PolicyParams {
  Mlp actor;
  Mlp critic;

  int observation_size() const { return actor.input_size(); }
  int action_count() const { return actor.output_size(); }

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

struct PolicyGrad {
  LayerStack actor;
  LayerStack critic;
};

inline PolicyGrad zero_grad(const PolicyParams& p) {
  return {zeros_like(p.actor.layers()), zeros_like(p.critic.layers())};
}

/// Separate actor and critic, each with `hidden` tanh layers.
inline PolicyParams make_policy(int observation_size, int action_count, std::vector<int> hidden = {128, 128},
                                std::uint64_t seed = 0) {
  std::vector<int> actor_sizes{observation_size};
  actor_sizes.insert(actor_sizes.end(), hidden.begin(), hidden.end());
  std::vector<int> critic_sizes = actor_sizes;
  actor_sizes.push_back(action_count);
  critic_sizes.push_back(1);
  return {Mlp(actor_sizes, 0.01, seed), Mlp(critic_sizes, 1.0, seed ^ 0x9e3779b97f4a7c15ull)};
}

/// Logits and state value for one observation.
inline std::pair<Vec, double> forward(const PolicyParams& params, const std::vector<double>& observation) {
  const Vec x = Eigen::Map<const Vec>(observation.data(), static_cast<Eigen::Index>(observation.size()));
  return {params.actor.forward(x), params.critic.forward(x)(0)};
}

inline constexpr double kMaskedLogit = -1e8;

inline Vec mask_logits(const Vec& z, const std::vector<bool>& mask) {
  if (static_cast<std::size_t>(z.size()) != mask.size()) throw StructuralError("mask_logits: length mismatch");
  if (std::find(mask.begin(), mask.end(), true) == mask.end()) throw ContractError("mask_logits: no valid action");
  Vec out = z;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    if (!mask[i]) out(i) = kMaskedLogit;
  return out;
}

// Scalar std::exp: Eigen's packet exp clamps its argument and returns a
// denormal instead of 0 for masked logits.
inline Vec softmax(const Vec& z) {
  const double top = z.maxCoeff();
  Vec e(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) e(i) = std::exp(z(i) - top);
  return e / e.sum();
}

/// Categorical distribution over the valid entries of a mask.
struct MaskedDistribution {
  Vec logits;  // masked
  Vec probs;
  std::vector<bool> mask;

  MaskedDistribution(const Vec& raw_logits, std::vector<bool> m)
      : logits(mask_logits(raw_logits, m)), probs(softmax(logits)), mask(std::move(m)) {}

  int size() const { return static_cast<int>(probs.size()); }

  int argmax() const {
    int best = -1;
    for (int i = 0; i < size(); ++i)
      if (mask[i] && (best < 0 || probs(i) > probs(best))) best = i;
    return best;
  }

  template <typename Gen>
  int sample(Gen& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r = u(rng);
    double acc = 0.0;
    int last_valid = -1;
    for (int i = 0; i < size(); ++i) {
      if (!mask[i]) continue;
      last_valid = i;
      acc += probs(i);
      if (r < acc) return i;
    }
    return last_valid;
  }

  double invalid_mass() const {
    double s = 0.0;
    for (int i = 0; i < size(); ++i)
      if (!mask[i]) s += probs(i);
    return s;
  }
};

struct LogProbEntropy {
  double log_prob;
  double entropy;
};

inline LogProbEntropy log_prob_and_entropy(const MaskedDistribution& d, int action) {
  if (action < 0 || action >= d.size() || !d.mask[action]) {
    throw ContractError("log_prob_and_entropy: action is not valid under the mask");
  }
  const double max_logit = d.logits.maxCoeff();
  double log_norm = 0.0;
  for (int i = 0; i < d.size(); ++i)
    if (d.mask[i]) log_norm += std::exp(d.logits(i) - max_logit);
  log_norm = max_logit + std::log(log_norm);
  double entropy = 0.0;
  for (int i = 0; i < d.size(); ++i) {
    if (!d.mask[i] || d.probs(i) <= 0.0) continue;
    entropy -= d.probs(i) * (d.logits(i) - log_norm);
  }
  return {d.logits(action) - log_norm, entropy};
}

/// d(advantage * log pi(action)) / dz_j = advantage * (1[j == action] - pi_j).
inline Vec policy_gradient_logits(const MaskedDistribution& d, int action, double advantage) {
  Vec g = -advantage * d.probs;
  g(action) += advantage;
  return g;
}

/// dH/dz for the entropy over the valid support.
inline Vec entropy_gradient_logits(const MaskedDistribution& d) {
  const double h = log_prob_and_entropy(d, d.argmax()).entropy;
  Vec g = Vec::Zero(d.size());
  for (int j = 0; j < d.size(); ++j) {
    if (!d.mask[j] || d.probs(j) <= 0.0) continue;
    g(j) = -d.probs(j) * (std::log(d.probs(j)) + h);
  }
  return g;
}

struct PenaltyResult {
  double loss;
  Vec grad;  // with respect to the raw logits
};

/// lambda * sum of unmasked softmax probability on invalid actions, with its
/// gradient through the softmax Jacobian.
inline PenaltyResult invalid_penalty(const Vec& raw_logits, const std::vector<bool>& mask, double lambda) {
  if (static_cast<std::size_t>(raw_logits.size()) != mask.size()) {
    throw StructuralError("invalid_penalty: length mismatch");
  }
  const Vec p = softmax(raw_logits);
  double invalid = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (!mask[i]) invalid += p(i);
  Vec g(p.size());
  for (Eigen::Index j = 0; j < p.size(); ++j) g(j) = lambda * p(j) * ((mask[j] ? 0.0 : 1.0) - invalid);
  return {lambda * invalid, g};
}

/// Raw (unmasked) probability mass on invalid actions.
inline double raw_invalid_mass(const Vec& raw_logits, const std::vector<bool>& mask) {
  return invalid_penalty(raw_logits, mask, 1.0).loss;
}

using LossFunctional = std::function<std::pair<double, PolicyGrad>(const PolicyParams&)>;

/// Largest relative disagreement between the analytic gradient and central
/// differences (step 1e-4) over every parameter. Components are compared
/// relative to max(|analytic|, |numeric|, floor).
inline double gradient_check(const PolicyParams& params, const LossFunctional& loss, double step = 1e-4,
                             double floor = 1e-6) {
  const PolicyGrad analytic = loss(params).second;
  PolicyParams probe = params;
  double worst = 0.0;
  auto check_stack = [&](LayerStack& target, const LayerStack& grads) {
    std::vector<double> g;
    for_each_parameter(grads, [&](double v) { g.push_back(v); });
    std::size_t k = 0;
    for_each_parameter(target, [&](double& theta) {
      const double saved = theta;
      theta = saved + step;
      const double up = loss(probe).first;
      theta = saved - step;
      const double down = loss(probe).first;
      theta = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = g[k++];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    });
  };
  check_stack(probe.actor.layers(), analytic.actor);
  check_stack(probe.critic.layers(), analytic.critic);
  return worst;
}

/// Adam over both networks.
class Adam {
 public:
  Adam() = default;
  Adam(const PolicyParams& p, double lr) : lr_(lr), m_(zero_grad(p)), v_(zero_grad(p)) {}

  void set_learning_rate(double lr) { lr_ = lr; }
  double learning_rate() const { return lr_; }

  void step(PolicyParams& p, const PolicyGrad& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    apply(p.actor.layers(), g.actor, m_.actor, v_.actor, c1, c2);
    apply(p.critic.layers(), g.critic, m_.critic, v_.critic, c1, c2);
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  void apply(LayerStack& w, const LayerStack& g, LayerStack& m, LayerStack& v, double c1, double c2) const {
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i].weight = kBeta1 * m[i].weight + (1.0 - kBeta1) * g[i].weight;
      m[i].bias = kBeta1 * m[i].bias + (1.0 - kBeta1) * g[i].bias;
      v[i].weight = kBeta2 * v[i].weight + (1.0 - kBeta2) * g[i].weight.cwiseAbs2();
      v[i].bias = kBeta2 * v[i].bias + (1.0 - kBeta2) * g[i].bias.cwiseAbs2();
      w[i].weight.array() -= lr_ * (m[i].weight.array() / c1) / ((v[i].weight.array() / c2).sqrt() + kEps);
      w[i].bias.array() -= lr_ * (m[i].bias.array() / c1) / ((v[i].bias.array() / c2).sqrt() + kEps);
    }
  }

  double lr_ = 3e-4;
  long t_ = 0;
  PolicyGrad m_;
  PolicyGrad v_;
};

inline double global_norm(const PolicyGrad& g) {
  double s = 0.0;
  for (const auto* stack : {&g.actor, &g.critic})
    for (const DenseLayer& l : *stack) s += l.weight.squaredNorm() + l.bias.squaredNorm();
  return std::sqrt(s);
}

inline void scale(PolicyGrad& g, double factor) {
  for (auto* stack : {&g.actor, &g.critic})
    for (DenseLayer& l : *stack) {
      l.weight *= factor;
      l.bias *= factor;
    }
}

// Checkpoint format (JSON):
//   {"format": "petrirl-policy", "version": 1,
//    "actor":  [{"rows": R, "cols": C, "weight": [R*C values, row-major], "bias": [R values]}, ...],
//    "critic": [...]}
// Doubles are written with round-trip precision, so load(save(p)) == p bit for bit.
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json layers_to_json(const LayerStack& layers) {
  nlohmann::json arr = nlohmann::json::array();
  for (const DenseLayer& l : layers) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weight.size()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    arr.push_back({{"rows", l.weight.rows()},
                   {"cols", l.weight.cols()},
                   {"weight", w},
                   {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return arr;
}

inline LayerStack layers_from_json(const nlohmann::json& arr) {
  LayerStack layers;
  for (const auto& jl : arr) {
    const auto rows = jl.at("rows").get<Eigen::Index>();
    const auto cols = jl.at("cols").get<Eigen::Index>();
    const auto w = jl.at("weight").get<std::vector<double>>();
    const auto b = jl.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows) {
      throw StructuralError("checkpoint layer payload does not match its shape");
    }
    DenseLayer l{Mat(rows, cols), Vec(rows)};
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) l.weight(r, c) = w[static_cast<std::size_t>(r * cols + c)];
    for (Eigen::Index r = 0; r < rows; ++r) l.bias(r) = b[static_cast<std::size_t>(r)];
    if (!layers.empty() && layers.back().weight.rows() != cols) {
      throw StructuralError("checkpoint layers are not chained");
    }
    layers.push_back(std::move(l));
  }
  if (layers.empty()) throw StructuralError("checkpoint network has no layers");
  return layers;
}

inline nlohmann::json policy_to_json(const PolicyParams& p) {
  return {{"format", "petrirl-policy"},
          {"version", kCheckpointVersion},
          {"actor", layers_to_json(p.actor.layers())},
          {"critic", layers_to_json(p.critic.layers())}};
}

inline PolicyParams policy_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "petrirl-policy") throw StructuralError("not a policy checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) throw StructuralError("unsupported checkpoint version");
  return {Mlp(layers_from_json(j.at("actor"))), Mlp(layers_from_json(j.at("critic")))};
}

inline void save_policy(const PolicyParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw StructuralError("cannot write checkpoint " + path);
  out << policy_to_json(p).dump();
}

inline PolicyParams load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StructuralError("cannot read checkpoint " + path);
  return policy_from_json(nlohmann::json::parse(in));
}

}  // namespace petrirl
