#pragma once

// Maskable PPO: rollout collection, GAE, clipped-surrogate updates with value
// regression, entropy bonus and the optional invalid-action penalty.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "petrirl/disruptions.hpp"
#include "petrirl/error.hpp"
#include "petrirl/jssp_env.hpp"
#include "petrirl/policy.hpp"

namespace petrirl {

enum class MaskingMode { masked, unmasked_fallback };

struct TrainConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_epsilon = 0.2;
  bool clip_decay = false;  // linear decay of clip_epsilon to 0 over training
  double learning_rate = 3e-4;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double invalid_lambda = 0.0;  // 0 disables the invalid-action penalty
  double max_grad_norm = 0.5;
  int rollout_length = 2048;
  int n_envs = 1;
  int epochs_per_update = 10;
  int minibatch_size = 256;
  long total_steps = 100'000;
  int eval_interval = 0;  // iterations between greedy evaluations; 0 disables
  int eval_episodes = 5;
  std::vector<int> hidden = {128, 128};
  std::uint64_t seed = 0;
  MaskingMode masking_mode = MaskingMode::masked;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in [0, 1)");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw DomainError("gae_lambda must lie in [0, 1]");
    if (!(clip_epsilon > 0.0)) throw DomainError("clip_epsilon must be > 0");
    if (!(learning_rate > 0.0)) throw DomainError("learning_rate must be > 0");
    if (!(value_coef >= 0.0) || !(entropy_coef >= 0.0) || !(invalid_lambda >= 0.0)) {
      throw DomainError("loss coefficients must be >= 0");
    }
    if (rollout_length <= 0 || n_envs <= 0 || rollout_length % n_envs != 0) {
      throw DomainError("rollout_length must be a positive multiple of n_envs");
    }
    if (epochs_per_update <= 0) throw DomainError("epochs_per_update must be > 0");
    if (minibatch_size <= 0 || minibatch_size > rollout_length) {
      throw DomainError("minibatch_size must lie in [1, rollout_length]");
    }
    if (total_steps <= 0) throw DomainError("total_steps must be > 0");
    if (hidden.empty()) throw DomainError("at least one hidden layer is required");
  }
};

/// Transitions stored step-major: index = t * n_envs + env.
struct RolloutBatch {
  int n_envs = 1;
  int steps_per_env = 0;
  Mat observations;                        // obs_size x N
  std::vector<std::vector<bool>> masks;    // guard masks from the net
  std::vector<std::vector<bool>> sample_masks;  // support the action was sampled from
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<bool> dones;  // episode ended after this transition
  std::vector<double> bootstrap_values;  // per env, value of the state after the last step
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<double> episode_rewards;  // episodes that finished during collection
  double invalid_mass = 0.0;            // mean raw invalid probability over collected states

  int size() const { return static_cast<int>(actions.size()); }
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// GAE over `n_envs` interleaved sequences (index t * n_envs + e).
inline GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                             const std::vector<bool>& dones, const std::vector<double>& bootstrap, double gamma,
                             double lambda, int n_envs = 1) {
  const int n = static_cast<int>(rewards.size());
  if (values.size() != rewards.size() || dones.size() != rewards.size() || n % n_envs != 0 ||
      static_cast<int>(bootstrap.size()) != n_envs) {
    throw StructuralError("compute_gae: inconsistent batch shapes");
  }
  const int steps = n / n_envs;
  GaeResult out{std::vector<double>(n), std::vector<double>(n)};
  for (int e = 0; e < n_envs; ++e) {
    double running = 0.0;
    for (int t = steps - 1; t >= 0; --t) {
      const int i = t * n_envs + e;
      const double next_value = t + 1 < steps ? values[(t + 1) * n_envs + e] : bootstrap[e];
      const double live = dones[i] ? 0.0 : 1.0;
      const double delta = rewards[i] + gamma * next_value * live - values[i];
      running = delta + gamma * lambda * live * running;
      out.advantages[i] = running;
      out.returns[i] = running + values[i];
    }
  }
  return out;
}

inline void compute_gae(RolloutBatch& batch, double gamma, double lambda) {
  GaeResult r = compute_gae(batch.rewards, batch.values, batch.dones, batch.bootstrap_values, gamma, lambda,
                            batch.n_envs);
  batch.advantages = std::move(r.advantages);
  batch.returns = std::move(r.returns);
}

inline std::vector<bool> all_valid(int n) { return std::vector<bool>(n, true); }

/// Runs `n_envs` environments, restarting each finished episode on a fresh
/// seeded scenario. Episodes continue across calls to collect().
class RolloutCollector {
 public:
  RolloutCollector(JsspInstance inst, ScenarioConfig scenario, const TrainConfig& cfg)
      : inst_(std::move(inst)),
        scenario_cfg_(std::move(scenario)),
        masking_(cfg.masking_mode),
        seed_(cfg.seed),
        horizon_(JsspEnv::estimate_horizon(inst_)),
        policy_rng_(make_stream(cfg.seed, StreamKind::policy, 0)),
        fallback_rng_(make_stream(cfg.seed, StreamKind::fallback, 0)) {
    for (int e = 0; e < cfg.n_envs; ++e) {
      episode_index_.push_back(0);
      envs_.push_back(fresh_env(e));
      running_reward_.push_back(0.0);
    }
  }

  RolloutBatch collect(const PolicyParams& params, int rollout_length) {
    const int n_envs = static_cast<int>(envs_.size());
    if (rollout_length % n_envs != 0) throw StructuralError("rollout_length must be a multiple of n_envs");
    RolloutBatch b;
    b.n_envs = n_envs;
    b.steps_per_env = rollout_length / n_envs;
    b.observations.resize(params.observation_size(), rollout_length);
    double invalid_sum = 0.0;
    for (int t = 0; t < b.steps_per_env; ++t) {
      for (int e = 0; e < n_envs; ++e) {
        JsspEnv& env = envs_[e];
        const std::vector<double> obs = env.observe();
        const std::vector<bool> guard = env.mask();
        const auto [logits, value] = forward(params, obs);
        const std::vector<bool> support =
            masking_ == MaskingMode::masked ? guard : all_valid(static_cast<int>(guard.size()));
        const MaskedDistribution dist(logits, support);
        const int action = dist.sample(policy_rng_);
        const int effective = masking_ == MaskingMode::masked ? action : unmasked_fallback(guard, action, fallback_rng_);
        invalid_sum += raw_invalid_mass(logits, guard);

        const int i = t * n_envs + e;
        b.observations.col(i) = Eigen::Map<const Vec>(obs.data(), static_cast<Eigen::Index>(obs.size()));
        b.masks.push_back(guard);
        b.sample_masks.push_back(support);
        b.actions.push_back(action);
        b.log_probs.push_back(log_prob_and_entropy(dist, action).log_prob);
        b.values.push_back(value);

        const StepResult r = env.step(effective);
        b.rewards.push_back(r.reward);
        b.dones.push_back(r.done);
        running_reward_[e] += r.reward;
        if (r.done) {
          b.episode_rewards.push_back(running_reward_[e]);
          running_reward_[e] = 0.0;
          ++episode_index_[e];
          envs_[e] = fresh_env(e);
        }
      }
    }
    for (int e = 0; e < n_envs; ++e) {
      b.bootstrap_values.push_back(forward(params, envs_[e].observe()).second);
    }
    b.invalid_mass = invalid_sum / rollout_length;
    return b;
  }

  Step horizon() const noexcept { return horizon_; }

 private:
  JsspEnv fresh_env(int e) {
    ScenarioConfig cfg = scenario_cfg_;
    Rng seeder = make_stream(seed_, StreamKind::episode,
                             (static_cast<std::uint64_t>(e) << 40) | static_cast<std::uint64_t>(episode_index_[e]));
    cfg.seed = seeder();
    return JsspEnv(inst_, build_scenario(inst_, cfg, horizon_));
  }

  JsspInstance inst_;
  ScenarioConfig scenario_cfg_;
  MaskingMode masking_;
  std::uint64_t seed_;
  Step horizon_;
  Rng policy_rng_;
  Rng fallback_rng_;
  std::vector<JsspEnv> envs_;
  std::vector<long> episode_index_;
  std::vector<double> running_reward_;
};

struct Surrogate {
  double value;    // min(ratio * A, clip(ratio) * A)
  bool unclipped;  // the unclipped branch is the active one
};

inline Surrogate clipped_surrogate(double ratio, double advantage, double clip_eps) {
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  const double a = ratio * advantage;
  const double b = clipped * advantage;
  return a <= b ? Surrogate{a, true} : Surrogate{b, false};
}

struct LossTerms {
  double policy_loss = 0.0;  // negated clipped surrogate
  double value_loss = 0.0;   // mean (V - R)^2
  double entropy = 0.0;      // mean entropy over the sampled support
  double invalid_penalty = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;

  double total(const TrainConfig& cfg) const {
    return policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy + invalid_penalty;
  }
};

/// Per-batch mean/std normalization of advantages (std floor 1e-8).
inline std::vector<double> normalized_advantages(const std::vector<double>& adv) {
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::max(std::sqrt(var / n), 1e-8);
  std::vector<double> out(adv.size());
  for (std::size_t i = 0; i < adv.size(); ++i) out[i] = (adv[i] - mean) / sd;
  return out;
}

/// Loss terms on the transitions `idx` and, when `grad` is given, the
/// gradient of the total loss with respect to both networks.
inline LossTerms ppo_loss(const PolicyParams& params, const RolloutBatch& batch, const std::vector<double>& adv,
                          const std::vector<int>& idx, const TrainConfig& cfg, double clip_eps,
                          PolicyGrad* grad = nullptr) {
  const int bsz = static_cast<int>(idx.size());
  Mat x(params.observation_size(), bsz);
  for (int k = 0; k < bsz; ++k) x.col(k) = batch.observations.col(idx[k]);
  Mlp::Cache actor_cache;
  Mlp::Cache critic_cache;
  const Mat logits = params.actor.forward(x, grad ? &actor_cache : nullptr);
  const Mat values = params.critic.forward(x, grad ? &critic_cache : nullptr);
  Mat d_logits = Mat::Zero(logits.rows(), bsz);
  Mat d_values = Mat::Zero(1, bsz);
  LossTerms t;
  const double inv_b = 1.0 / bsz;
  for (int k = 0; k < bsz; ++k) {
    const int i = idx[k];
    const Vec z = logits.col(k);
    const MaskedDistribution dist(z, batch.sample_masks[i]);
    const auto [log_prob, entropy] = log_prob_and_entropy(dist, batch.actions[i]);
    const double log_ratio = log_prob - batch.log_probs[i];
    const double ratio = std::exp(log_ratio);
    const double a = adv[i];
    const Surrogate sur = clipped_surrogate(ratio, a, clip_eps);
    t.policy_loss -= inv_b * sur.value;
    t.entropy += inv_b * entropy;
    t.clip_fraction += inv_b * (std::abs(ratio - 1.0) > clip_eps ? 1.0 : 0.0);
    t.approx_kl += inv_b * ((ratio - 1.0) - log_ratio);
    const double v_err = values(0, k) - batch.returns[i];
    t.value_loss += inv_b * v_err * v_err;
    PenaltyResult pen{0.0, Vec::Zero(z.size())};
    if (cfg.invalid_lambda > 0.0) {
      pen = invalid_penalty(z, batch.masks[i], cfg.invalid_lambda);
      t.invalid_penalty += inv_b * pen.loss;
    }
    if (grad) {
      // d(-ratio * A)/dz = -A * ratio * dlogp/dz on the active (unclipped) branch.
      if (sur.unclipped) d_logits.col(k) -= inv_b * policy_gradient_logits(dist, batch.actions[i], a * ratio);
      if (cfg.entropy_coef > 0.0) d_logits.col(k) -= inv_b * cfg.entropy_coef * entropy_gradient_logits(dist);
      if (cfg.invalid_lambda > 0.0) d_logits.col(k) += inv_b * pen.grad;
      d_values(0, k) = inv_b * cfg.value_coef * 2.0 * v_err;
    }
  }
  if (grad) {
    grad->actor = params.actor.backward(actor_cache, d_logits);
    grad->critic = params.critic.backward(critic_cache, d_values);
  }
  return t;
}

struct UpdateMetrics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double invalid_penalty = 0.0;
  double total_loss = 0.0;
};

/// Epochs of shuffled minibatch updates on one batch. Throws NumericError
/// on a non-finite loss before touching the parameters.
inline UpdateMetrics ppo_update(PolicyParams& params, Adam& opt, const RolloutBatch& batch, const TrainConfig& cfg,
                                Rng& rng, double clip_eps) {
  if (batch.advantages.size() != batch.actions.size()) throw ContractError("ppo_update: advantages not computed");
  const std::vector<double> adv = normalized_advantages(batch.advantages);
  std::vector<int> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  UpdateMetrics m;
  int count = 0;
  for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < batch.size(); start += cfg.minibatch_size) {
      const int end = std::min(start + cfg.minibatch_size, batch.size());
      const std::vector<int> idx(order.begin() + start, order.begin() + end);
      PolicyGrad g;
      const LossTerms t = ppo_loss(params, batch, adv, idx, cfg, clip_eps, &g);
      const double total = t.total(cfg);
      if (!std::isfinite(total)) {
        std::ostringstream os;
        os << "non-finite PPO loss (policy " << t.policy_loss << ", value " << t.value_loss << ", entropy "
           << t.entropy << ", invalid " << t.invalid_penalty << ") at epoch " << epoch;
        throw NumericError(os.str());
      }
      if (cfg.max_grad_norm > 0.0) {
        const double norm = global_norm(g);
        if (norm > cfg.max_grad_norm) scale(g, cfg.max_grad_norm / (norm + 1e-12));
      }
      opt.step(params, g);
      m.policy_loss += t.policy_loss;
      m.value_loss += t.value_loss;
      m.entropy += t.entropy;
      m.clip_fraction += t.clip_fraction;
      m.approx_kl += t.approx_kl;
      m.invalid_penalty += t.invalid_penalty;
      m.total_loss += total;
      ++count;
    }
  }
  for (double* v : {&m.policy_loss, &m.value_loss, &m.entropy, &m.clip_fraction, &m.approx_kl, &m.invalid_penalty,
                    &m.total_loss}) {
    *v /= count;
  }
  if (!all_finite(params.actor.layers()) || !all_finite(params.critic.layers())) {
    throw NumericError("parameters became non-finite after the update");
  }
  return m;
}

/// Argmax rollout under the masked distribution; returns the finished env.
inline JsspEnv greedy_rollout(const PolicyParams& params, JsspEnv env) {
  while (!env.done()) {
    const MaskedDistribution dist(forward(params, env.observe()).first, env.mask());
    env.step(dist.argmax());
  }
  return env;
}

/// One greedy run per seed (seed r drives scenario r). Every schedule is
/// validated; a violation is a bug and throws.
inline std::vector<Step> evaluate_greedy(const PolicyParams& params, const JsspInstance& inst,
                                         const ScenarioConfig& scenario, const std::vector<std::uint64_t>& seeds,
                                         int n_runs) {
  if (n_runs > static_cast<int>(seeds.size())) throw ContractError("evaluate_greedy: more runs than seeds");
  const Step horizon = JsspEnv::estimate_horizon(inst);
  std::vector<Step> out;
  for (int r = 0; r < n_runs; ++r) {
    ScenarioConfig cfg = scenario;
    cfg.seed = seeds[r];
    const ScenarioTrace trace = build_scenario(inst, cfg, horizon);
    const JsspEnv done = greedy_rollout(params, JsspEnv(inst, trace));
    if (!validate_schedule(done.schedule_trace(), inst, trace).empty()) {
      throw StructuralError("evaluate_greedy: environment produced an invalid schedule");
    }
    out.push_back(done.makespan());
  }
  return out;
}

struct TrainLogRow {
  int iteration = 0;
  long steps = 0;
  double ep_reward_mean = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double invalid_prob_mass = 0.0;
  double total_loss = 0.0;
};

inline constexpr const char* kTrainLogHeader =
    "iteration,steps,ep_reward_mean,policy_loss,value_loss,entropy,clip_fraction,approx_kl,invalid_prob_mass";

inline std::string to_csv(const std::vector<TrainLogRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << kTrainLogHeader << '\n';
  for (const TrainLogRow& r : rows) {
    os << r.iteration << ',' << r.steps << ',' << r.ep_reward_mean << ',' << r.policy_loss << ',' << r.value_loss
       << ',' << r.entropy << ',' << r.clip_fraction << ',' << r.approx_kl << ',' << r.invalid_prob_mass << '\n';
  }
  return os.str();
}

struct TrainResult {
  PolicyParams params;       // after the last update
  PolicyParams best_params;  // best greedy evaluation seen (== params when evaluation is off)
  double best_eval_makespan = std::numeric_limits<double>::infinity();
  std::vector<TrainLogRow> log;
};

/// Seeds for periodic greedy evaluation; disjoint from the episode streams.
inline std::vector<std::uint64_t> evaluation_seeds(std::uint64_t seed, int n) {
  Rng rng = make_stream(seed, StreamKind::episode, 0xEEEEEEEEull);
  std::vector<std::uint64_t> out(n);
  for (auto& s : out) s = rng();
  return out;
}

/// Alternates collection and updates until total_steps transitions were
/// gathered. When `out_dir` is set, writes checkpoint_<iter>.json every
/// eval_interval iterations, final.json, best.json and train_log.csv.
inline TrainResult train(const JsspInstance& inst, const ScenarioConfig& scenario, const TrainConfig& cfg,
                         const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
  cfg.validate();
  scenario.validate();
  TrainResult result;
  result.params = make_policy(observation_size(inst), inst.n_jobs, cfg.hidden, cfg.seed);
  result.best_params = result.params;
  Adam opt(result.params, cfg.learning_rate);
  RolloutCollector collector(inst, scenario, cfg);
  Rng shuffle_rng = make_stream(cfg.seed, StreamKind::policy, 1);
  const std::vector<std::uint64_t> eval_seeds = evaluation_seeds(cfg.seed, cfg.eval_episodes);
  if (out_dir) std::filesystem::create_directories(*out_dir);

  const int iterations = static_cast<int>((cfg.total_steps + cfg.rollout_length - 1) / cfg.rollout_length);
  double last_reward = std::numeric_limits<double>::quiet_NaN();
  long steps = 0;
  for (int it = 1; it <= iterations; ++it) {
    const double progress = static_cast<double>(it - 1) / iterations;
    const double clip_eps = cfg.clip_decay ? cfg.clip_epsilon * (1.0 - progress) + 1e-8 : cfg.clip_epsilon;
    RolloutBatch batch = collector.collect(result.params, cfg.rollout_length);
    compute_gae(batch, cfg.gamma, cfg.gae_lambda);
    steps += batch.size();
    const UpdateMetrics m = ppo_update(result.params, opt, batch, cfg, shuffle_rng, clip_eps);
    if (!batch.episode_rewards.empty()) {
      last_reward = std::accumulate(batch.episode_rewards.begin(), batch.episode_rewards.end(), 0.0) /
                    static_cast<double>(batch.episode_rewards.size());
    }
    result.log.push_back({it, steps, last_reward, m.policy_loss, m.value_loss, m.entropy, m.clip_fraction,
                          m.approx_kl, batch.invalid_mass, m.total_loss});

    const bool evaluate = cfg.eval_interval > 0 && (it % cfg.eval_interval == 0 || it == iterations);
    if (evaluate) {
      const auto spans = evaluate_greedy(result.params, inst, scenario, eval_seeds, cfg.eval_episodes);
      const double mean = std::accumulate(spans.begin(), spans.end(), 0.0) / static_cast<double>(spans.size());
      if (mean < result.best_eval_makespan) {
        result.best_eval_makespan = mean;
        result.best_params = result.params;
        if (out_dir) save_policy(result.best_params, (*out_dir / "best.json").string());
      }
      if (out_dir) save_policy(result.params, (*out_dir / ("checkpoint_" + std::to_string(it) + ".json")).string());
    }
  }
  if (cfg.eval_interval <= 0) result.best_params = result.params;
  if (out_dir) {
    save_policy(result.params, (*out_dir / "final.json").string());
    if (cfg.eval_interval <= 0) save_policy(result.best_params, (*out_dir / "best.json").string());
    std::ofstream(*out_dir / "train_log.csv") << to_csv(result.log);
  }
  return result;
}

}  // namespace petrirl
