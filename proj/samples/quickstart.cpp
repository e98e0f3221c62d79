// Builds a 3x3 job shop with breakdowns, runs every dispatching rule on the
// same scenario, trains a small PPO agent and compares its greedy schedule.

#include <iostream>

#include "petrirl/bench.hpp"
#include "petrirl/gantt_io.hpp"
#include "petrirl/heuristics.hpp"
#include "petrirl/ppo.hpp"

using namespace petrirl;

int main() {
  const JsspInstance inst = JsspInstance::from_ops({
      {{0, 3}, {1, 2}, {2, 2}},
      {{0, 2}, {2, 1}, {1, 4}},
      {{1, 4}, {2, 3}},
  });

  ScenarioConfig scenario;
  scenario.breakdowns_enabled = true;
  scenario.seed = 7;
  const ScenarioTrace trace = build_scenario(inst, scenario);

  for (RuleId r : kTableRuleOrder) {
    const JsspEnv done = rollout_rule(r, JsspEnv(inst, trace));
    std::cout << rule_name(r) << ": makespan " << done.makespan() << '\n';
  }

  TrainConfig cfg;
  cfg.hidden = {32, 32};
  cfg.rollout_length = 256;
  cfg.minibatch_size = 64;
  cfg.total_steps = 10'000;
  const TrainResult trained = train(inst, scenario, cfg);

  const JsspEnv agent = greedy_rollout(trained.params, JsspEnv(inst, trace));
  std::cout << "agent: makespan " << agent.makespan() << "\n\n" << gantt_csv(agent.schedule_trace());
  std::cout << "optimum for this scenario: " << brute_force_optimum(inst, trace) << '\n';
}
