#pragma once

// Dispatching rules for job selection.

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "petrirl/error.hpp"
#include "petrirl/jssp_env.hpp"

namespace petrirl {

enum class RuleId { FIFO, SPS, LPS, SPTN, LPTN, MTWR, LTWR, LWT, SPT, LPT, SPSR, LPSR };

inline constexpr std::array<RuleId, 12> kAllRules = {RuleId::FIFO, RuleId::SPS,  RuleId::LPS,  RuleId::SPTN,
                                                      RuleId::LPTN, RuleId::MTWR, RuleId::LTWR, RuleId::LWT,
                                                      RuleId::SPT,  RuleId::LPT,  RuleId::SPSR, RuleId::LPSR};

/// Column order of the published results tables.
inline constexpr std::array<RuleId, 12> kTableRuleOrder = {RuleId::FIFO, RuleId::SPT,  RuleId::LPT,  RuleId::SPS,
                                                           RuleId::LPS,  RuleId::LTWR, RuleId::MTWR, RuleId::SPSR,
                                                           RuleId::LPSR, RuleId::SPTN, RuleId::LPTN, RuleId::LWT};

inline std::string_view rule_name(RuleId r) {
  switch (r) {
    case RuleId::FIFO: return "FIFO";
    case RuleId::SPS: return "SPS";
    case RuleId::LPS: return "LPS";
    case RuleId::SPTN: return "SPTN";
    case RuleId::LPTN: return "LPTN";
    case RuleId::MTWR: return "MTWR";
    case RuleId::LTWR: return "LTWR";
    case RuleId::LWT: return "LWT";
    case RuleId::SPT: return "SPT";
    case RuleId::LPT: return "LPT";
    case RuleId::SPSR: return "SPSR";
    case RuleId::LPSR: return "LPSR";
  }
  return "?";
}

/// Case-insensitive lookup of a rule abbreviation.
inline std::optional<RuleId> parse_rule(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (RuleId r : kAllRules)
    if (rule_name(r) == upper) return r;
  return std::nullopt;
}

/// Per-job attributes the rules score on. Static attributes (total ops,
/// total work) cover every operation of the job, released or not.
struct JobView {
  std::vector<double> entry_time;  // release time of the job's first operation
  std::vector<double> total_ops;
  std::vector<double> remaining_ops;
  std::vector<double> next_duration;
  std::vector<double> total_work;
  std::vector<double> remaining_work;
  std::vector<double> waiting_time;  // clock - entered_at of the head token in the job place

  std::size_t size() const { return total_ops.size(); }
};

inline JobView make_job_view(const JsspEnv& env) {
  const JsspInstance& inst = env.instance();
  JobView v;
  const int n = inst.n_jobs;
  for (auto* col : {&v.entry_time, &v.total_ops, &v.remaining_ops, &v.next_duration, &v.total_work,
                    &v.remaining_work, &v.waiting_time}) {
    col->assign(n, 0.0);
  }
  for (int j = 0; j < n; ++j) {
    const int next = env.selected_ops(j);
    v.entry_time[j] = static_cast<double>(env.scenario().release(j, 0));
    v.total_ops[j] = inst.job_length(j);
    v.remaining_ops[j] = inst.job_length(j) - next;
    v.next_duration[j] = next < inst.job_length(j) ? inst.ops[j][next].duration : 0.0;
    v.total_work[j] = static_cast<double>(inst.job_work(j));
    v.remaining_work[j] = static_cast<double>(env.remaining_work(j));
    const auto& q = env.net().place(env.index().job_place[j]).queue;
    v.waiting_time[j] = q.empty() ? 0.0 : static_cast<double>(env.clock() - q.front().entered_at);
  }
  return v;
}

/// Picks the valid job with the best key; ties go to the lowest index.
inline int dispatch(RuleId rule, const JobView& view, const std::vector<bool>& mask) {
  if (mask.size() != view.size()) throw StructuralError("dispatch: mask and view sizes differ");
  const std::vector<double>* key = nullptr;
  bool maximize = false;
  switch (rule) {
    case RuleId::FIFO: key = &view.entry_time; break;
    case RuleId::SPS: key = &view.total_ops; break;
    case RuleId::LPS: key = &view.total_ops; maximize = true; break;
    case RuleId::SPTN: key = &view.next_duration; break;
    case RuleId::LPTN: key = &view.next_duration; maximize = true; break;
    case RuleId::MTWR: key = &view.remaining_work; maximize = true; break;
    case RuleId::LTWR: key = &view.remaining_work; break;
    case RuleId::LWT: key = &view.waiting_time; maximize = true; break;
    case RuleId::SPT: key = &view.total_work; break;
    case RuleId::LPT: key = &view.total_work; maximize = true; break;
    case RuleId::SPSR: key = &view.remaining_ops; break;
    case RuleId::LPSR: key = &view.remaining_ops; maximize = true; break;
  }
  int best = -1;
  for (int j = 0; j < static_cast<int>(mask.size()); ++j) {
    if (!mask[j]) continue;
    if (best < 0) {
      best = j;
      continue;
    }
    const double a = (*key)[j];
    const double b = (*key)[best];
    if (maximize ? a > b : a < b) best = j;
  }
  if (best < 0) throw ContractError("dispatch: empty mask");
  return best;
}

inline int dispatch(RuleId rule, const JsspEnv& env) { return dispatch(rule, make_job_view(env), env.mask()); }

/// Runs one rule to termination; returns the finished environment.
inline JsspEnv rollout_rule(RuleId rule, JsspEnv env) {
  while (!env.done()) env.step(dispatch(rule, env));
  return env;
}

}  // namespace petrirl
