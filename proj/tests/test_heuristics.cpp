#include <catch_amalgamated.hpp>

#include <random>

#include "petrirl/heuristics.hpp"

using namespace petrirl;

namespace {

JobView uniform_view(int n, double value = 1.0) {
  JobView v;
  for (auto* col : {&v.entry_time, &v.total_ops, &v.remaining_ops, &v.next_duration, &v.total_work,
                    &v.remaining_work, &v.waiting_time}) {
    col->assign(n, value);
  }
  return v;
}

// Disruption-free list scheduler written independently of the Petri net:
// selecting a job queues its next operation on the machine (FIFO), the job is
// blocked until that operation ends, and time jumps to the next completion
// whenever no job can be selected.
Step hand_schedule(const JsspInstance& inst, RuleId rule) {
  const int n = inst.n_jobs;
  std::vector<int> next(n, 0);
  std::vector<Step> busy_until(n, 0);
  std::vector<Step> machine_free(inst.n_machines, 0);
  Step t = 0;
  Step makespan = 0;
  int remaining = inst.total_ops();
  while (remaining > 0) {
    std::vector<bool> mask(n);
    bool any = false;
    for (int j = 0; j < n; ++j) {
      mask[j] = next[j] < inst.job_length(j) && busy_until[j] <= t;
      any = any || mask[j];
    }
    if (!any) {
      Step soonest = std::numeric_limits<Step>::max();
      for (int j = 0; j < n; ++j)
        if (busy_until[j] > t) soonest = std::min(soonest, busy_until[j]);
      t = soonest;
      continue;
    }
    JobView v = uniform_view(n, 0.0);
    for (int j = 0; j < n; ++j) {
      v.entry_time[j] = 0;
      v.total_ops[j] = inst.job_length(j);
      v.remaining_ops[j] = inst.job_length(j) - next[j];
      v.next_duration[j] = next[j] < inst.job_length(j) ? inst.ops[j][next[j]].duration : 0;
      v.total_work[j] = 0;
      for (const auto& op : inst.ops[j]) v.total_work[j] += op.duration;
      v.remaining_work[j] = 0;
      for (int k = next[j]; k < inst.job_length(j); ++k) v.remaining_work[j] += inst.ops[j][k].duration;
      v.waiting_time[j] = static_cast<double>(t);
    }
    const int j = dispatch(rule, v, mask);
    const Operation& op = inst.ops[j][next[j]];
    const Step start = std::max(t, machine_free[op.machine]);
    const Step end = start + op.duration;
    machine_free[op.machine] = end;
    busy_until[j] = end;
    makespan = std::max(makespan, end);
    ++next[j];
    --remaining;
  }
  return makespan;
}

}  // namespace

TEST_CASE("rule names round-trip case-insensitively") {
  CHECK(kAllRules.size() == 12);
  for (RuleId r : kAllRules) {
    CHECK(parse_rule(rule_name(r)) == r);
    std::string lower(rule_name(r));
    for (char& c : lower) c = static_cast<char>(std::tolower(c));
    CHECK(parse_rule(lower) == r);
  }
  CHECK_FALSE(parse_rule("EDD").has_value());
}

TEST_CASE("remaining-work rules") {
  JobView v = uniform_view(2);
  v.remaining_work = {30, 45};
  const std::vector<bool> mask{true, true};
  CHECK(dispatch(RuleId::MTWR, v, mask) == 1);
  CHECK(dispatch(RuleId::LTWR, v, mask) == 0);
}

TEST_CASE("ties go to the lowest valid index") {
  const JobView v = uniform_view(4);
  for (RuleId r : kAllRules) CHECK(dispatch(r, v, {false, true, true, true}) == 1);
}

TEST_CASE("single valid job is chosen by every rule") {
  JobView v = uniform_view(3);
  v.remaining_work = {1, 100, 5};
  v.next_duration = {9, 1, 4};
  for (RuleId r : kAllRules) CHECK(dispatch(r, v, {false, false, true}) == 2);
  CHECK_THROWS_AS(dispatch(RuleId::FIFO, v, {false, false, false}), ContractError);
}

TEST_CASE("next-operation duration rules on a hand instance") {
  // Next-op durations 4, 2, 7 at the first decision point.
  const JsspInstance inst = JsspInstance::from_ops({{{0, 4}, {1, 1}}, {{1, 2}, {0, 3}}, {{2, 7}}});
  JsspEnv env(inst);
  const JobView v = make_job_view(env);
  CHECK(v.next_duration == std::vector<double>{4, 2, 7});
  CHECK(dispatch(RuleId::SPTN, env) == 1);
  CHECK(dispatch(RuleId::LPTN, env) == 2);
  CHECK(v.total_ops == std::vector<double>{2, 2, 1});
  CHECK(v.total_work == std::vector<double>{5, 5, 7});
}

TEST_CASE("FIFO follows first-operation release times") {
  const JsspInstance inst = JsspInstance::from_ops({{{0, 1}}, {{1, 1}}, {{2, 1}}});
  ScenarioTrace scenario = ScenarioTrace::static_for(inst);
  scenario.releases = {{4}, {2}, {2}};
  JsspEnv env(inst, scenario);
  CHECK(env.clock() == 2);
  CHECK(dispatch(RuleId::FIFO, env) == 1);
}

TEST_CASE("dispatch returns valid, deterministic choices and dual rules disagree on strict orders") {
  std::mt19937_64 rng(31);
  const std::vector<std::pair<RuleId, RuleId>> duals{{RuleId::SPS, RuleId::LPS},
                                                     {RuleId::SPTN, RuleId::LPTN},
                                                     {RuleId::MTWR, RuleId::LTWR},
                                                     {RuleId::SPT, RuleId::LPT},
                                                     {RuleId::SPSR, RuleId::LPSR}};
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 6);
    JobView v = uniform_view(n);
    for (auto* col : {&v.entry_time, &v.total_ops, &v.remaining_ops, &v.next_duration, &v.total_work,
                      &v.remaining_work, &v.waiting_time}) {
      for (double& x : *col) x = static_cast<double>(rng() % 5);
    }
    std::vector<bool> mask(n);
    int valid = 0;
    for (int j = 0; j < n; ++j) valid += (mask[j] = rng() % 3 != 0);
    if (valid == 0) mask[0] = true, valid = 1;
    for (RuleId r : kAllRules) {
      const int a = dispatch(r, v, mask);
      CHECK(mask[a]);
      CHECK(dispatch(r, v, mask) == a);
    }
    if (valid < 2) continue;
    for (auto [lo, hi] : duals) {
      const JobView& view = v;
      const std::vector<double>* key = nullptr;
      switch (lo) {
        case RuleId::SPS: key = &view.total_ops; break;
        case RuleId::SPTN: key = &view.next_duration; break;
        case RuleId::LTWR: key = &view.remaining_work; break;
        case RuleId::MTWR: key = &view.remaining_work; break;
        case RuleId::SPT: key = &view.total_work; break;
        default: key = &view.remaining_ops; break;
      }
      std::vector<double> vals;
      for (int j = 0; j < n; ++j)
        if (mask[j]) vals.push_back((*key)[j]);
      const double mn = *std::min_element(vals.begin(), vals.end());
      const double mx = *std::max_element(vals.begin(), vals.end());
      if (std::count(vals.begin(), vals.end(), mn) == 1 && std::count(vals.begin(), vals.end(), mx) == 1) {
        CHECK(dispatch(lo, v, mask) != dispatch(hi, v, mask));
      }
    }
  }
}

TEST_CASE("disruption-free rollouts match an independent hand scheduler") {
  const std::vector<JsspInstance> fixtures{
      JsspInstance::from_ops({{{0, 3}, {1, 2}}, {{1, 4}, {0, 1}}, {{0, 2}, {1, 5}}}),
      JsspInstance::from_ops({{{1, 6}, {0, 2}}, {{0, 3}, {1, 3}}, {{0, 1}, {1, 1}}}),
      JsspInstance::from_ops({{{0, 2}, {1, 7}}, {{0, 5}}, {{1, 3}, {0, 4}}}),
  };
  for (const JsspInstance& inst : fixtures) {
    for (RuleId r : kAllRules) {
      const JsspEnv done = rollout_rule(r, JsspEnv(inst));
      INFO("rule " << rule_name(r));
      CHECK(done.makespan() == hand_schedule(inst, r));
      CHECK(rollout_rule(r, JsspEnv(inst)).makespan() == done.makespan());
    }
  }
}
