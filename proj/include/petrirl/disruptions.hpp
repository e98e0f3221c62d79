#pragma once

// Seeded stochastic scenarios: Weibull breakdowns with Normal repairs and
// Gamma-distributed operation releases.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "petrirl/error.hpp"
#include "petrirl/instance.hpp"
#include "petrirl/petri_net.hpp"

namespace petrirl {

using Rng = std::mt19937_64;

inline double weibull_pdf(double t, double shape, double scale) {
  if (!(t >= 0.0) || !(shape > 0.0) || !(scale > 0.0)) throw DomainError("weibull_pdf: domain violation");
  if (t == 0.0) {
    if (shape < 1.0) return std::numeric_limits<double>::infinity();
    return shape == 1.0 ? 1.0 / scale : 0.0;
  }
  const double z = t / scale;
  return (shape / scale) * std::pow(z, shape - 1.0) * std::exp(-std::pow(z, shape));
}

inline double weibull_hazard(double t, double shape, double scale) {
  if (!(t >= 0.0) || !(shape > 0.0) || !(scale > 0.0)) throw DomainError("weibull_hazard: domain violation");
  if (t == 0.0) {
    if (shape < 1.0) return std::numeric_limits<double>::infinity();
    return shape == 1.0 ? 1.0 / scale : 0.0;
  }
  return (shape / scale) * std::pow(t / scale, shape - 1.0);
}

inline double gamma_pdf(double t, double shape, double scale) {
  if (!(t >= 0.0) || !(shape > 0.0) || !(scale > 0.0)) throw DomainError("gamma_pdf: domain violation");
  if (t == 0.0) {
    if (shape < 1.0) return std::numeric_limits<double>::infinity();
    return shape == 1.0 ? 1.0 / scale : 0.0;
  }
  const double log_density =
      (shape - 1.0) * std::log(t) - t / scale - shape * std::log(scale) - std::lgamma(shape);
  return std::exp(log_density);
}

struct ScenarioConfig {
  bool breakdowns_enabled = false;
  double weibull_shape = 2.0;
  double weibull_scale_factor = 5.0;
  std::optional<double> repair_mean;  // defaults to the mean operation duration
  std::optional<double> repair_std;   // defaults to 0.25 * repair mean
  bool arrivals_enabled = false;
  double skew_min = 0.0;
  double skew_max = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(weibull_shape > 0.0)) throw DomainError("weibull_shape must be > 0");
    if (!(weibull_scale_factor > 0.0)) throw DomainError("weibull_scale_factor must be > 0");
    if (repair_mean && !(*repair_mean > 0.0)) throw DomainError("repair_mean must be > 0");
    if (repair_std && !(*repair_std >= 0.0)) throw DomainError("repair_std must be >= 0");
    if (!(skew_min >= 0.0 && skew_max <= 1.0 && skew_min <= skew_max)) {
      throw DomainError("skew range must be a sub-interval of [0, 1]");
    }
  }
};

/// Half-open unavailability window [start, end) on the integer clock.
struct Interval {
  Step start = 0;
  Step end = 0;

  Step length() const noexcept { return end - start; }
  bool contains(Step t) const noexcept { return start <= t && t < end; }

  friend bool operator==(const Interval&, const Interval&) = default;
};

struct ScenarioTrace {
  std::vector<std::vector<Interval>> breakdowns;  // per machine, sorted, disjoint
  std::vector<std::vector<Step>> releases;        // per job, per op
  std::vector<double> skews;                      // per job; empty when arrivals are off
  Step horizon = 0;                               // H used for arrival scaling

  friend bool operator==(const ScenarioTrace&, const ScenarioTrace&) = default;

  /// All operations released at 0, no breakdowns.
  static ScenarioTrace static_for(const JsspInstance& inst, Step horizon = 0) {
    ScenarioTrace s;
    s.breakdowns.assign(inst.n_machines, {});
    s.releases.resize(inst.n_jobs);
    for (int j = 0; j < inst.n_jobs; ++j) s.releases[j].assign(inst.job_length(j), 0);
    s.horizon = horizon;
    return s;
  }

  bool is_broken(int machine, Step t) const {
    if (machine >= static_cast<int>(breakdowns.size())) return false;
    const auto& iv = breakdowns[machine];
    auto it = std::upper_bound(iv.begin(), iv.end(), t,
                               [](Step v, const Interval& b) { return v < b.start; });
    return it != iv.begin() && std::prev(it)->contains(t);
  }

  Step release(int job, int op) const {
    if (job >= static_cast<int>(releases.size()) || op >= static_cast<int>(releases[job].size())) return 0;
    return releases[job][op];
  }

  /// Count of unavailable steps of `machine` inside [from, to).
  Step broken_steps(int machine, Step from, Step to) const {
    Step n = 0;
    if (machine >= static_cast<int>(breakdowns.size())) return 0;
    for (const Interval& b : breakdowns[machine]) {
      const Step lo = std::max(from, b.start);
      const Step hi = std::min(to, b.end);
      if (hi > lo) n += hi - lo;
    }
    return n;
  }

  /// Checks shape against the instance plus sortedness/disjointness.
  void check(const JsspInstance& inst) const {
    if (static_cast<int>(breakdowns.size()) != inst.n_machines ||
        static_cast<int>(releases.size()) != inst.n_jobs) {
      throw StructuralError("scenario trace does not match the instance shape");
    }
    for (int j = 0; j < inst.n_jobs; ++j) {
      if (static_cast<int>(releases[j].size()) != inst.job_length(j)) {
        throw StructuralError("scenario release list does not match job " + std::to_string(j));
      }
      if (!std::is_sorted(releases[j].begin(), releases[j].end())) {
        throw StructuralError("scenario releases of job " + std::to_string(j) + " are not sorted");
      }
    }
    for (const auto& iv : breakdowns) {
      for (std::size_t i = 0; i < iv.size(); ++i) {
        if (iv[i].length() <= 0) throw StructuralError("empty breakdown interval");
        if (i > 0 && iv[i].start < iv[i - 1].end) throw StructuralError("overlapping breakdown intervals");
      }
    }
  }
};

inline void to_json(nlohmann::json& j, const Interval& iv) { j = nlohmann::json::array({iv.start, iv.end}); }
inline void from_json(const nlohmann::json& j, Interval& iv) {
  iv.start = j.at(0).get<Step>();
  iv.end = j.at(1).get<Step>();
}

inline void to_json(nlohmann::json& j, const ScenarioTrace& s) {
  j = nlohmann::json{{"horizon", s.horizon},
                     {"breakdowns", s.breakdowns},
                     {"releases", s.releases},
                     {"skews", s.skews}};
}
inline void from_json(const nlohmann::json& j, ScenarioTrace& s) {
  j.at("horizon").get_to(s.horizon);
  j.at("breakdowns").get_to(s.breakdowns);
  j.at("releases").get_to(s.releases);
  if (j.contains("skews")) j.at("skews").get_to(s.skews);
}

/// FNV-1a over the canonical JSON dump; stable across runs and builds.
inline std::uint64_t scenario_hash(const ScenarioTrace& s) {
  const std::string text = nlohmann::json(s).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

enum class StreamKind : std::uint32_t { breakdown = 1, arrival = 2, episode = 3, policy = 4, fallback = 5 };

/// Independent generator per (seed, kind, index); adding machines or jobs
/// leaves the other streams untouched.
inline Rng make_stream(std::uint64_t seed, StreamKind kind, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(kind), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

inline double repair_mean_for(const ScenarioConfig& cfg, double mean_duration) {
  return cfg.repair_mean.value_or(mean_duration);
}

inline double repair_std_for(const ScenarioConfig& cfg, double mean_duration) {
  return cfg.repair_std.value_or(0.25 * repair_mean_for(cfg, mean_duration));
}

inline double draw_weibull(double shape, double scale, Rng& rng) {
  return std::weibull_distribution<double>(shape, scale)(rng);
}

inline double draw_gamma(double shape, double scale, Rng& rng) {
  return std::gamma_distribution<double>(shape, scale)(rng);
}

/// Normal(mean, std) conditioned on >= 1, rounded up to whole steps.
inline Step sample_repair(double mean, double std, Rng& rng) {
  double x = mean;
  if (std > 0.0) {
    std::normal_distribution<double> normal(mean, std);
    x = normal(rng);
    for (int tries = 0; x < 1.0 && tries < 256; ++tries) x = normal(rng);
  }
  return std::max<Step>(1, static_cast<Step>(std::ceil(x)));
}

/// Breakdown windows for one machine on the absolute clock up to `horizon`.
/// Inter-failure gaps ~ Weibull(shape, factor * mean_duration); the gap is
/// measured from the end of the previous repair.
inline std::vector<Interval> sample_breakdowns(Step horizon, const ScenarioConfig& cfg, double mean_duration,
                                               Rng& rng) {
  if (horizon <= 0) throw DomainError("sample_breakdowns: horizon must be > 0");
  std::vector<Interval> out;
  if (!cfg.breakdowns_enabled) return out;
  const double eta = cfg.weibull_scale_factor * mean_duration;
  const double mu = repair_mean_for(cfg, mean_duration);
  const double sigma = repair_std_for(cfg, mean_duration);
  Step cursor = 0;
  while (true) {
    const Step gap = std::max<Step>(1, static_cast<Step>(std::floor(draw_weibull(cfg.weibull_shape, eta, rng))));
    const Step start = cursor + gap;
    if (start >= horizon) break;
    const Step end = start + sample_repair(mu, sigma, rng);
    out.push_back({start, end});
    cursor = end;
  }
  return out;
}

struct ArrivalDraw {
  double skew = 0.0;
  std::vector<Step> releases;
};

inline constexpr double kMinSkew = 0.05;

/// Release times of one job's operations: sorted Gamma(10 s, 0.1 H) draws.
inline ArrivalDraw sample_arrivals(int job_length, Step horizon, const ScenarioConfig& cfg, Rng& rng) {
  if (job_length < 1) throw DomainError("sample_arrivals: job_length must be >= 1");
  if (horizon <= 0) throw DomainError("sample_arrivals: horizon must be > 0");
  ArrivalDraw draw;
  draw.releases.assign(job_length, 0);
  if (!cfg.arrivals_enabled) return draw;
  std::uniform_real_distribution<double> skew_dist(cfg.skew_min, cfg.skew_max);
  draw.skew = std::clamp(skew_dist(rng), kMinSkew, 1.0);
  const double shape = 10.0 * draw.skew;
  const double scale = 0.1 * static_cast<double>(horizon);
  std::vector<double> t(job_length);
  for (double& v : t) v = draw_gamma(shape, scale, rng);
  std::sort(t.begin(), t.end());
  for (int k = 0; k < job_length; ++k) draw.releases[k] = static_cast<Step>(std::floor(t[k]));
  return draw;
}

/// Breakdowns are sampled over this multiple of H so long disrupted runs stay covered.
inline constexpr Step kBreakdownHorizonFactor = 4;

inline ScenarioTrace build_scenario(const JsspInstance& inst, const ScenarioConfig& cfg, Step horizon) {
  cfg.validate();
  inst.validate();
  if (horizon <= 0) throw DomainError("build_scenario: horizon must be > 0");
  ScenarioTrace s = ScenarioTrace::static_for(inst, horizon);
  const double mean_duration = inst.mean_duration();
  for (int m = 0; m < inst.n_machines; ++m) {
    Rng rng = make_stream(cfg.seed, StreamKind::breakdown, static_cast<std::uint64_t>(m));
    s.breakdowns[m] = sample_breakdowns(kBreakdownHorizonFactor * horizon, cfg, mean_duration, rng);
  }
  if (cfg.arrivals_enabled) {
    s.skews.resize(inst.n_jobs);
    for (int j = 0; j < inst.n_jobs; ++j) {
      Rng rng = make_stream(cfg.seed, StreamKind::arrival, static_cast<std::uint64_t>(j));
      ArrivalDraw d = sample_arrivals(inst.job_length(j), horizon, cfg, rng);
      s.skews[j] = d.skew;
      s.releases[j] = std::move(d.releases);
    }
  }
  return s;
}

}  // namespace petrirl
