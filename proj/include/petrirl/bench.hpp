#pragma once

// Seeded comparison protocol: every algorithm's run r faces the scenario
// built from seed r. Also statistics, result tables and the exhaustive-search
// oracle used on desk-scale instances.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "petrirl/disruptions.hpp"
#include "petrirl/error.hpp"
#include "petrirl/heuristics.hpp"
#include "petrirl/instance_io.hpp"
#include "petrirl/jssp_env.hpp"
#include "petrirl/policy.hpp"
#include "petrirl/ppo.hpp"

namespace petrirl {

struct SeedBank {
  std::vector<std::uint64_t> seeds;
  std::string source;
};

/// One decimal seed per line; '#' comments allowed. Seeds must be unique.
inline SeedBank parse_seed_bank(const std::string& text, std::string source = {}) {
  SeedBank bank{{}, std::move(source)};
  std::set<std::uint64_t> seen;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    std::istringstream fields(hash == std::string::npos ? raw : raw.substr(0, hash));
    std::string tok;
    if (!(fields >> tok)) continue;
    std::uint64_t seed = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), seed);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) throw ParseError("'" + tok + "' is not a seed", line);
    if (fields >> tok) throw ParseError("one seed per line", line);
    if (!seen.insert(seed).second) throw ParseError("duplicate seed " + std::to_string(seed), line);
    bank.seeds.push_back(seed);
  }
  if (bank.seeds.empty()) throw ParseError("seed bank is empty", line);
  return bank;
}

inline SeedBank load_seed_bank(const std::string& path) { return parse_seed_bank(detail::read_file(path), path); }

/// Deterministic bank of `n` unique seeds (used to produce the committed file).
inline SeedBank generate_seed_bank(int n, std::uint64_t master) {
  Rng rng(master);
  SeedBank bank;
  std::set<std::uint64_t> seen;
  while (static_cast<int>(bank.seeds.size()) < n) {
    const std::uint64_t s = rng();
    if (seen.insert(s).second) bank.seeds.push_back(s);
  }
  return bank;
}

struct RunStats {
  std::string algorithm;
  std::vector<Step> makespans;
  double mean = 0.0;
  double variance = 0.0;  // sample variance (n - 1)
  double ci95 = 0.0;      // 1.96 * s / sqrt(n)

  friend bool operator==(const RunStats&, const RunStats&) = default;
};

/// Welford accumulation; n = 1 gives variance 0.
inline RunStats summarize(std::string algorithm, std::vector<Step> makespans) {
  RunStats s{std::move(algorithm), std::move(makespans)};
  const std::size_t n = s.makespans.size();
  if (n == 0) throw ContractError("summarize: no runs");
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(s.makespans[i]);
    const double d = x - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (x - mean);
  }
  s.mean = mean;
  s.variance = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
  s.ci95 = n > 1 ? 1.96 * std::sqrt(s.variance) / std::sqrt(static_cast<double>(n)) : 0.0;
  return s;
}

struct TableSummary {
  double heuristic_average = 0.0;
  double best_heuristic = 0.0;
  std::optional<double> ours;
  std::optional<double> gap_percent;  // (heuristic_average - ours) / heuristic_average * 100
};

inline TableSummary summarize_table(const std::vector<double>& rule_means, std::optional<double> ours) {
  if (rule_means.empty()) throw ContractError("summarize_table: no heuristic results");
  TableSummary t;
  t.heuristic_average = std::accumulate(rule_means.begin(), rule_means.end(), 0.0) / rule_means.size();
  t.best_heuristic = *std::min_element(rule_means.begin(), rule_means.end());
  if (ours) {
    t.ours = ours;
    t.gap_percent = (t.heuristic_average - *ours) / t.heuristic_average * 100.0;
  }
  return t;
}

/// A dispatching rule or a trained policy acting greedily.
struct Algorithm {
  std::string name;
  std::optional<RuleId> rule;
  std::shared_ptr<const PolicyParams> policy;

  static Algorithm from_rule(RuleId r) { return {std::string(rule_name(r)), r, nullptr}; }
  static Algorithm from_policy(std::string name, PolicyParams p) {
    return {std::move(name), std::nullopt, std::make_shared<const PolicyParams>(std::move(p))};
  }

  JsspEnv run(JsspEnv env) const {
    if (rule) return rollout_rule(*rule, std::move(env));
    if (!policy) throw ContractError("algorithm '" + name + "' has neither a rule nor a policy");
    return greedy_rollout(*policy, std::move(env));
  }

  bool is_rule() const { return rule.has_value(); }
};

/// Parses "FIFO,SPT,agent:path.json" style lists; "all" expands to the 12 rules.
inline std::vector<Algorithm> parse_algorithms(const std::string& list) {
  std::vector<Algorithm> out;
  std::istringstream in(list);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = detail::trim(tok);
    if (tok.empty()) continue;
    if (tok == "all" || tok == "ALL") {
      for (RuleId r : kTableRuleOrder) out.push_back(Algorithm::from_rule(r));
    } else if (tok.rfind("agent:", 0) == 0) {
      out.push_back(Algorithm::from_policy("Ours", load_policy(tok.substr(6))));
    } else if (const auto r = parse_rule(tok)) {
      out.push_back(Algorithm::from_rule(*r));
    } else {
      throw ParseError("unknown algorithm '" + tok + "'", 0);
    }
  }
  if (out.empty()) throw ParseError("no algorithms given", 0);
  return out;
}

struct RunRecord {
  std::uint64_t seed = 0;
  std::uint64_t scenario_hash = 0;
  Step makespan = 0;
  std::vector<GanttEntry> schedule;
};

struct BenchmarkResult {
  std::string instance;
  std::vector<RunStats> stats;                     // one per algorithm, input order
  std::vector<std::vector<RunRecord>> runs;        // [algorithm][run]
  std::vector<ScenarioTrace> scenarios;            // per run
};

inline std::string format_violations(const std::vector<Violation>& vs) {
  std::ostringstream os;
  for (const Violation& v : vs) {
    os << to_string(v.kind) << " job " << v.job_id << " op " << v.op_index << ": " << v.detail << '\n';
  }
  return os.str();
}

/// Runs every algorithm on the scenarios of seeds[0..runs). Schedules are
/// validated; a violation throws StructuralError with the report.
inline BenchmarkResult run_benchmark(const JsspInstance& inst, const std::string& name,
                                     const std::vector<Algorithm>& algorithms, const ScenarioConfig& scenario,
                                     const SeedBank& bank, int runs, bool keep_schedules = false) {
  if (runs <= 0 || runs > static_cast<int>(bank.seeds.size())) {
    throw ContractError("run_benchmark: runs must lie in [1, seed bank size]");
  }
  inst.validate();
  scenario.validate();
  for (const Algorithm& a : algorithms) {
    if (a.policy && (a.policy->observation_size() != observation_size(inst) ||
                     a.policy->action_count() != inst.n_jobs)) {
      throw ContractError("policy '" + a.name + "' was built for " + std::to_string(a.policy->action_count()) +
                          " jobs and " + std::to_string(a.policy->observation_size()) +
                          " observations; the instance has " + std::to_string(inst.n_jobs) + " jobs and " +
                          std::to_string(observation_size(inst)));
    }
  }
  const Step horizon = JsspEnv::estimate_horizon(inst);
  BenchmarkResult result;
  result.instance = name;
  for (int r = 0; r < runs; ++r) {
    ScenarioConfig cfg = scenario;
    cfg.seed = bank.seeds[r];
    result.scenarios.push_back(build_scenario(inst, cfg, horizon));
  }
  for (const Algorithm& alg : algorithms) {
    std::vector<RunRecord> records;
    std::vector<Step> spans;
    for (int r = 0; r < runs; ++r) {
      const JsspEnv done = alg.run(JsspEnv(inst, result.scenarios[r]));
      const auto schedule = done.schedule_trace();
      const auto violations = validate_schedule(schedule, inst, done.scenario());
      if (!violations.empty()) {
        throw StructuralError("invalid schedule from " + alg.name + " on run " + std::to_string(r) + ":\n" +
                              format_violations(violations));
      }
      RunRecord rec{bank.seeds[r], scenario_hash(done.scenario()), done.makespan(), {}};
      if (keep_schedules) rec.schedule = schedule;
      records.push_back(std::move(rec));
      spans.push_back(done.makespan());
    }
    result.stats.push_back(summarize(alg.name, spans));
    result.runs.push_back(std::move(records));
  }
  return result;
}

/// Table summary of a benchmark: heuristics are the rule algorithms, "ours"
/// the first policy algorithm if present.
inline TableSummary summarize_table(const BenchmarkResult& r, const std::vector<Algorithm>& algorithms) {
  std::vector<double> rule_means;
  std::optional<double> ours;
  for (std::size_t i = 0; i < algorithms.size(); ++i) {
    if (algorithms[i].is_rule()) rule_means.push_back(r.stats[i].mean);
    else if (!ours) ours = r.stats[i].mean;
  }
  return summarize_table(rule_means, ours);
}

inline void to_json(nlohmann::json& j, const RunStats& s) {
  j = {{"algorithm", s.algorithm},
       {"makespans", s.makespans},
       {"mean", s.mean},
       {"variance", s.variance},
       {"ci95", s.ci95}};
}

inline void from_json(const nlohmann::json& j, RunStats& s) {
  j.at("algorithm").get_to(s.algorithm);
  j.at("makespans").get_to(s.makespans);
  j.at("mean").get_to(s.mean);
  j.at("variance").get_to(s.variance);
  j.at("ci95").get_to(s.ci95);
}

/// One table row: per-rule means in the published column order (FIFO ... LWT), then the summary.
struct ResultRow {
  std::string instance;
  std::vector<RunStats> stats;
  TableSummary summary;

  friend bool operator==(const ResultRow& a, const ResultRow& b) {
    return a.instance == b.instance && a.stats == b.stats &&
           a.summary.heuristic_average == b.summary.heuristic_average &&
           a.summary.best_heuristic == b.summary.best_heuristic && a.summary.ours == b.summary.ours &&
           a.summary.gap_percent == b.summary.gap_percent;
  }
};

inline std::vector<std::string> table_columns() {
  std::vector<std::string> cols{"instance"};
  for (RuleId r : kTableRuleOrder) cols.emplace_back(rule_name(r));
  for (const char* c : {"Heur.Avg", "Best Heur.", "Ours", "Gap%"}) cols.emplace_back(c);
  return cols;
}

inline const RunStats* find_stats(const ResultRow& row, std::string_view name) {
  for (const RunStats& s : row.stats)
    if (s.algorithm == name) return &s;
  return nullptr;
}

inline std::string fixed1(double x) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(1);
  os << x;
  return os.str();
}

/// Published results layout; means rounded to one decimal, missing cells left empty.
inline std::string results_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  const auto cols = table_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const ResultRow& row : rows) {
    os << row.instance;
    for (RuleId r : kTableRuleOrder) {
      os << ',';
      if (const RunStats* s = find_stats(row, rule_name(r))) os << fixed1(s->mean);
    }
    os << ',' << fixed1(row.summary.heuristic_average) << ',' << fixed1(row.summary.best_heuristic) << ',';
    if (row.summary.ours) os << fixed1(*row.summary.ours);
    os << ',';
    if (row.summary.gap_percent) os << fixed1(*row.summary.gap_percent);
    os << '\n';
  }
  return os.str();
}

inline nlohmann::json results_json(const std::vector<ResultRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const ResultRow& row : rows) {
    nlohmann::json j{{"instance", row.instance},
                     {"algorithms", row.stats},
                     {"heuristic_average", row.summary.heuristic_average},
                     {"best_heuristic", row.summary.best_heuristic},
                     {"ours", nullptr},
                     {"gap_percent", nullptr}};
    if (row.summary.ours) j["ours"] = *row.summary.ours;
    if (row.summary.gap_percent) j["gap_percent"] = *row.summary.gap_percent;
    out.push_back(std::move(j));
  }
  return out;
}

inline std::vector<ResultRow> results_from_json(const nlohmann::json& arr) {
  std::vector<ResultRow> rows;
  for (const auto& j : arr) {
    ResultRow row;
    row.instance = j.at("instance").get<std::string>();
    row.stats = j.at("algorithms").get<std::vector<RunStats>>();
    row.summary.heuristic_average = j.at("heuristic_average").get<double>();
    row.summary.best_heuristic = j.at("best_heuristic").get<double>();
    if (!j.at("ours").is_null()) row.summary.ours = j["ours"].get<double>();
    if (!j.at("gap_percent").is_null()) row.summary.gap_percent = j["gap_percent"].get<double>();
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ResultRow make_row(const BenchmarkResult& r, const std::vector<Algorithm>& algorithms) {
  return {r.instance, r.stats, summarize_table(r, algorithms)};
}

inline constexpr int kBruteForceMaxOps = 12;

/// Minimum terminal makespan over every valid action sequence of the
/// environment (depth-first, pruned by a lower bound). Refuses instances
/// with more than 12 operations.
inline Step brute_force_optimum(const JsspInstance& inst, const ScenarioTrace& scenario) {
  if (inst.total_ops() > kBruteForceMaxOps) {
    throw ContractError("brute_force_optimum: " + std::to_string(inst.total_ops()) + " operations exceed the limit of " +
                        std::to_string(kBruteForceMaxOps));
  }
  Step best = std::numeric_limits<Step>::max();
  // No job can finish before the clock plus its unselected work.
  auto lower_bound = [&](const JsspEnv& env) {
    Step lb = std::max(env.makespan(), env.clock());
    for (int j = 0; j < inst.n_jobs; ++j) lb = std::max(lb, env.clock() + static_cast<Step>(env.remaining_work(j)));
    return lb;
  };
  auto search = [&](auto&& self, const JsspEnv& env) -> void {
    if (env.done()) {
      best = std::min(best, env.makespan());
      return;
    }
    if (lower_bound(env) >= best) return;
    const std::vector<bool> mask = env.mask();
    for (int a = 0; a < static_cast<int>(mask.size()); ++a) {
      if (!mask[a]) continue;
      JsspEnv next = env;
      next.step(a);
      self(self, next);
    }
  };
  search(search, JsspEnv(inst, scenario));
  return best;
}

inline Step brute_force_optimum(const JsspInstance& inst) {
  return brute_force_optimum(inst, ScenarioTrace::static_for(inst));
}

}  // namespace petrirl
