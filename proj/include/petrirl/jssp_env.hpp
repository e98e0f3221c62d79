#pragma once

// Dynamic job-shop environment on top of the colored-timed Petri net.
//
// Net layout per job j: planned_jobs[j] --release[j]--> job[j] --select[j]--> routing
// buffer. Per machine m: routing --route[m] (color m)--> buffer[m];
// buffer[m] + idle[m] --start[m]--> proc[m] --finish[m] (timed)--> delivery[m] + idle[m].
//
// Forced-flag overlays driven by the environment:
//   select[j]  disabled while job j has an operation between selection and delivery
//   release[j] disabled until the head planned token's release time
//   start[m]   disabled while machine m is inside a breakdown window

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "petrirl/disruptions.hpp"
#include "petrirl/error.hpp"
#include "petrirl/instance.hpp"
#include "petrirl/petri_net.hpp"

namespace petrirl {

struct GanttEntry {
  int job_id = 0;
  int op_index = 0;
  int machine = 0;
  Step start = 0;
  Step end = 0;
  std::vector<Interval> pauses;

  Step pause_total() const {
    Step n = 0;
    for (const Interval& p : pauses) n += p.length();
    return n;
  }

  friend bool operator==(const GanttEntry&, const GanttEntry&) = default;
};

struct StepInfo {
  Step clock = 0;
  std::vector<int> fired;
  Step makespan_so_far = 0;
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
  std::vector<bool> mask;
  StepInfo info;
};

/// Transition and place ids of the built net, indexed by job or machine.
struct NetIndex {
  std::vector<int> planned, job_place, select, release;
  int routing = -1;
  std::vector<int> route, buffer, idle, start, proc, finish, delivery;
};

/// Builds the job-shop net with all operation tokens in planned_jobs.
inline NetIndex build_net(const JsspInstance& inst, PetriNet& net) {
  inst.validate();
  net = PetriNet{};
  NetIndex ix;
  const int n = inst.n_jobs;
  const int m = inst.n_machines;
  for (int j = 0; j < n; ++j) {
    ix.planned.push_back(net.add_place(PlaceRole::planned_jobs, "planned_" + std::to_string(j)));
    ix.job_place.push_back(net.add_place(PlaceRole::job, "job_" + std::to_string(j)));
  }
  ix.routing = net.add_place(PlaceRole::routing_buffer, "routing");
  for (int k = 0; k < m; ++k) {
    const std::string s = std::to_string(k);
    ix.buffer.push_back(net.add_place(PlaceRole::machine_buffer, "buffer_" + s));
    ix.idle.push_back(net.add_place(PlaceRole::machine_idle, "idle_" + s));
    ix.proc.push_back(net.add_place(PlaceRole::machine_proc, "proc_" + s));
    ix.delivery.push_back(net.add_place(PlaceRole::delivery, "delivery_" + s));
  }
  // Selection transitions come first so that action index == job index ==
  // rank among controllable transitions.
  for (int j = 0; j < n; ++j) {
    ix.select.push_back(net.add_transition(TransitionKind::controllable, "select_" + std::to_string(j),
                                           {ix.job_place[j]}, {ix.routing}));
  }
  for (int j = 0; j < n; ++j) {
    ix.release.push_back(net.add_transition(TransitionKind::autonomous, "release_" + std::to_string(j),
                                            {ix.planned[j]}, {ix.job_place[j]}));
  }
  for (int k = 0; k < m; ++k) {
    const std::string s = std::to_string(k);
    ix.finish.push_back(
        net.add_transition(TransitionKind::timed, "finish_" + s, {ix.proc[k]}, {ix.delivery[k], ix.idle[k]}));
  }
  for (int k = 0; k < m; ++k) {
    ix.route.push_back(
        net.add_transition(TransitionKind::colored, "route_" + std::to_string(k), {ix.routing}, {ix.buffer[k]}, k));
  }
  for (int k = 0; k < m; ++k) {
    ix.start.push_back(net.add_transition(TransitionKind::autonomous, "start_" + std::to_string(k),
                                          {ix.buffer[k], ix.idle[k]}, {ix.proc[k]}));
  }
  for (int k = 0; k < m; ++k) net.put(ix.idle[k], Token::resource(k));
  for (int j = 0; j < n; ++j) {
    for (int op = 0; op < inst.job_length(j); ++op) {
      const Operation& o = inst.ops[j][op];
      net.put(ix.planned[j], Token{j, op, o.machine, o.duration, 0, 0});
    }
  }
  return ix;
}

/// Layout: 6 features per job, 4 per machine, 1 global.
inline int observation_size(const JsspInstance& inst) { return 6 * inst.n_jobs + 4 * inst.n_machines + 1; }

class JsspEnv {
 public:
  /// `horizon` normalizes the clock feature; when absent the scenario's
  /// horizon is used, else the FIFO disruption-free makespan.
  JsspEnv(JsspInstance inst, ScenarioTrace scenario, std::optional<Step> horizon = std::nullopt)
      : inst_(std::move(inst)), scenario_(std::move(scenario)) {
    inst_.validate();
    scenario_.check(inst_);
    if (horizon) {
      horizon_ = *horizon;
    } else if (scenario_.horizon > 0) {
      horizon_ = scenario_.horizon;
    } else {
      horizon_ = estimate_horizon(inst_);
    }
    horizon_ = std::max<Step>(horizon_, 1);
    reset();
  }

  explicit JsspEnv(JsspInstance inst) : JsspEnv(inst, ScenarioTrace::static_for(inst)) {}

  /// FIFO makespan on the disruption-free instance.
  static Step estimate_horizon(const JsspInstance& inst) {
    JsspEnv env(inst, ScenarioTrace::static_for(inst), Step{1});
    while (!env.done()) {
      const auto mask = env.mask();
      const int a = static_cast<int>(std::find(mask.begin(), mask.end(), true) - mask.begin());
      env.step(a);
    }
    return env.makespan();
  }

  StepResult reset() {
    ix_ = build_net(inst_, net_);
    in_flight_.assign(inst_.n_jobs, false);
    selected_.assign(inst_.n_jobs, 0);
    gantt_.assign(inst_.n_jobs, {});
    for (int j = 0; j < inst_.n_jobs; ++j) {
      gantt_[j].resize(inst_.job_length(j));
      for (int k = 0; k < inst_.job_length(j); ++k) {
        gantt_[j][k] = GanttEntry{j, k, inst_.ops[j][k].machine, -1, -1, {}};
      }
    }
    delivered_ = 0;
    makespan_ = 0;
    done_ = false;
    step_limit_ = compute_step_limit();
    for (int j = 0; j < inst_.n_jobs; ++j) update_release_flag(j);
    update_machine_flags();
    std::vector<int> fired;
    advance_until_decision(fired);
    return result(fired);
  }

  StepResult step(int action) {
    if (done_) throw ContractError("step: episode already terminated");
    if (action < 0 || action >= inst_.n_jobs) throw ContractError("step: action index out of range");
    if (!net_.is_enabled(ix_.select[action])) throw ContractError("step: action is masked out");
    std::vector<int> fired;
    net_.fire(ix_.select[action]);
    fired.push_back(ix_.select[action]);
    on_fire(ix_.select[action]);
    advance_until_decision(fired);
    return result(fired);
  }

  bool terminal() const {
    if (delivered_ != inst_.total_ops()) return false;
    for (const Place& p : net_.places()) {
      if (p.role == PlaceRole::delivery || p.role == PlaceRole::machine_idle) continue;
      if (!p.queue.empty()) return false;
    }
    return true;
  }

  bool done() const noexcept { return done_; }

  std::vector<bool> mask() const { return net_.controllable_mask(); }

  std::vector<double> observe() const {
    std::vector<double> obs;
    obs.reserve(observation_size(inst_));
    const Step clock = net_.clock();
    const double max_dur = inst_.max_duration();
    const double max_len = inst_.max_job_length();
    const double total_work = static_cast<double>(inst_.total_work());
    auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
    for (int j = 0; j < inst_.n_jobs; ++j) {
      const int next = selected_[j];
      const bool has_next = next < inst_.job_length(j);
      const auto& q = net_.place(ix_.job_place[j]).queue;
      obs.push_back(has_next ? (inst_.ops[j][next].machine + 1.0) / inst_.n_machines : 0.0);
      obs.push_back(has_next ? inst_.ops[j][next].duration / max_dur : 0.0);
      obs.push_back(clamp01((inst_.job_length(j) - next) / max_len));
      obs.push_back(clamp01(remaining_work(j) / total_work));
      obs.push_back(clamp01(static_cast<double>(q.size()) / inst_.job_length(j)));
      obs.push_back(q.empty() ? 0.0 : clamp01(static_cast<double>(clock - q.front().entered_at) / (clock + 1.0)));
    }
    for (int m = 0; m < inst_.n_machines; ++m) {
      const auto& proc = net_.place(ix_.proc[m]).queue;
      obs.push_back(proc.empty() ? 0.0 : 1.0);
      obs.push_back(scenario_.is_broken(m, clock) ? 1.0 : 0.0);
      obs.push_back(proc.empty() ? 0.0 : clamp01((proc.front().proc_time - proc.front().elapsed) / max_dur));
      obs.push_back(clamp01(static_cast<double>(net_.place(ix_.buffer[m]).queue.size()) / inst_.n_jobs));
    }
    obs.push_back(clamp01(static_cast<double>(clock) / static_cast<double>(horizon_)));
    return obs;
  }

  /// One entry per operation, in (job, op) order.
  std::vector<GanttEntry> schedule_trace() const {
    if (!done_) throw ContractError("schedule_trace: episode has not terminated");
    std::vector<GanttEntry> out;
    out.reserve(inst_.total_ops());
    for (const auto& job : gantt_) out.insert(out.end(), job.begin(), job.end());
    return out;
  }

  /// Sum of durations of operations not yet selected.
  long remaining_work(int j) const {
    long w = 0;
    for (int k = selected_[j]; k < inst_.job_length(j); ++k) w += inst_.ops[j][k].duration;
    return w;
  }

  /// Number of operations of job j already handed to the routing buffer.
  int selected_ops(int j) const { return selected_[j]; }

  Step clock() const noexcept { return net_.clock(); }
  Step makespan() const noexcept { return makespan_; }
  Step horizon() const noexcept { return horizon_; }
  const JsspInstance& instance() const noexcept { return inst_; }
  const ScenarioTrace& scenario() const noexcept { return scenario_; }
  const PetriNet& net() const noexcept { return net_; }
  const NetIndex& index() const noexcept { return ix_; }
  int action_count() const noexcept { return inst_.n_jobs; }
  int observation_length() const { return observation_size(inst_); }

 private:
  Step compute_step_limit() const {
    Step last_release = 0;
    for (const auto& r : scenario_.releases)
      for (Step t : r) last_release = std::max(last_release, t);
    Step broken = 0;
    for (const auto& iv : scenario_.breakdowns)
      for (const Interval& b : iv) broken += b.length();
    return last_release + inst_.total_work() + broken + 1;
  }

  void update_release_flag(int j) {
    const auto& q = net_.place(ix_.planned[j]).queue;
    const bool blocked = !q.empty() && scenario_.release(j, q.front().op_index) > net_.clock();
    net_.set_forced(ix_.release[j], blocked);
  }

  void update_machine_flags() {
    for (int m = 0; m < inst_.n_machines; ++m) {
      net_.set_forced(ix_.start[m], scenario_.is_broken(m, net_.clock()));
    }
  }

  void on_fire(int t) {
    const Transition& tr = net_.transition(t);
    const Step clock = net_.clock();
    switch (net_.place(tr.outputs.front()).role) {
      case PlaceRole::routing_buffer: {
        const Token& tok = net_.place(ix_.routing).queue.back();
        in_flight_[tok.job_id] = true;
        ++selected_[tok.job_id];
        net_.set_forced(ix_.select[tok.job_id], true);
        break;
      }
      case PlaceRole::job: {
        update_release_flag(net_.place(tr.outputs.front()).queue.back().job_id);
        break;
      }
      case PlaceRole::machine_proc: {
        const Token& tok = net_.place(tr.outputs.front()).queue.back();
        gantt_[tok.job_id][tok.op_index].start = clock;
        break;
      }
      case PlaceRole::delivery: {
        const Token& tok = net_.place(tr.outputs.front()).queue.back();
        gantt_[tok.job_id][tok.op_index].end = clock;
        in_flight_[tok.job_id] = false;
        net_.set_forced(ix_.select[tok.job_id], false);
        ++delivered_;
        makespan_ = std::max(makespan_, clock);
        break;
      }
      default:
        break;
    }
  }

  void cascade(std::vector<int>& fired) {
    auto ids = net_.fire_until_quiescent([this](int t) { on_fire(t); });
    fired.insert(fired.end(), ids.begin(), ids.end());
  }

  /// One unit of time: tokens on available machines progress, tokens on
  /// broken machines accumulate a pause step.
  void tick() {
    const Step clock = net_.clock();
    for (int m = 0; m < inst_.n_machines; ++m) {
      const auto& q = net_.place(ix_.proc[m]).queue;
      if (q.empty()) continue;
      if (scenario_.is_broken(m, clock)) {
        auto& pauses = gantt_[q.front().job_id][q.front().op_index].pauses;
        if (!pauses.empty() && pauses.back().end == clock) {
          ++pauses.back().end;
        } else {
          pauses.push_back({clock, clock + 1});
        }
      } else {
        net_.progress_head(ix_.proc[m]);
      }
    }
    net_.advance_clock(1);
    update_machine_flags();
    for (int j = 0; j < inst_.n_jobs; ++j) update_release_flag(j);
  }

  void advance_until_decision(std::vector<int>& fired) {
    cascade(fired);
    while (!terminal()) {
      const auto m = mask();
      if (std::find(m.begin(), m.end(), true) != m.end()) return;
      if (net_.clock() > step_limit_) throw StructuralError("environment failed to make progress");
      tick();
      cascade(fired);
    }
    done_ = true;
  }

  StepResult result(std::vector<int> fired) const {
    StepResult r;
    r.observation = observe();
    r.done = done_;
    r.reward = done_ ? -static_cast<double>(makespan_) : 0.0;
    r.mask = mask();
    r.info = StepInfo{net_.clock(), std::move(fired), makespan_};
    return r;
  }

  JsspInstance inst_;
  ScenarioTrace scenario_;
  Step horizon_ = 1;
  PetriNet net_;
  NetIndex ix_;
  std::vector<bool> in_flight_;
  std::vector<int> selected_;
  std::vector<std::vector<GanttEntry>> gantt_;
  int delivered_ = 0;
  Step makespan_ = 0;
  Step step_limit_ = 0;
  bool done_ = false;
};

/// Scenario for `cfg` with H taken from the FIFO disruption-free makespan.
inline ScenarioTrace build_scenario(const JsspInstance& inst, const ScenarioConfig& cfg) {
  return build_scenario(inst, cfg, JsspEnv::estimate_horizon(inst));
}

/// Ablation mode: keep a valid raw action, otherwise draw uniformly among the
/// valid ones.
inline int unmasked_fallback(const std::vector<bool>& mask, int raw_action, Rng& rng) {
  std::vector<int> valid;
  for (int i = 0; i < static_cast<int>(mask.size()); ++i)
    if (mask[i]) valid.push_back(i);
  if (valid.empty()) throw ContractError("unmasked_fallback: no valid action");
  if (raw_action >= 0 && raw_action < static_cast<int>(mask.size()) && mask[raw_action]) return raw_action;
  std::uniform_int_distribution<std::size_t> pick(0, valid.size() - 1);
  return valid[pick(rng)];
}

enum class ViolationKind { precedence, machine_conflict, breakdown_start, effective_time, arrival, malformed_entry };

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::precedence: return "precedence";
    case ViolationKind::machine_conflict: return "machine_conflict";
    case ViolationKind::breakdown_start: return "breakdown_start";
    case ViolationKind::effective_time: return "effective_time";
    case ViolationKind::arrival: return "arrival";
    case ViolationKind::malformed_entry: return "malformed_entry";
  }
  return "unknown";
}

struct Violation {
  ViolationKind kind;
  int job_id;
  int op_index;
  std::string detail;
};

/// Checks a complete schedule against precedence, machine exclusivity,
/// breakdown start blocking, breakdown-extended durations and releases.
inline std::vector<Violation> validate_schedule(const std::vector<GanttEntry>& trace, const JsspInstance& inst,
                                                const ScenarioTrace& scenario) {
  inst.validate();
  scenario.check(inst);
  if (static_cast<int>(trace.size()) != inst.total_ops()) {
    throw StructuralError("trace has " + std::to_string(trace.size()) + " entries, instance has " +
                          std::to_string(inst.total_ops()) + " operations");
  }
  std::vector<std::vector<const GanttEntry*>> by_job(inst.n_jobs);
  for (int j = 0; j < inst.n_jobs; ++j) by_job[j].assign(inst.job_length(j), nullptr);
  for (const GanttEntry& e : trace) {
    if (e.job_id < 0 || e.job_id >= inst.n_jobs || e.op_index < 0 || e.op_index >= inst.job_length(e.job_id)) {
      throw StructuralError("trace entry references an unknown operation");
    }
    if (by_job[e.job_id][e.op_index]) throw StructuralError("trace lists an operation twice");
    if (e.machine != inst.ops[e.job_id][e.op_index].machine) {
      throw StructuralError("trace entry machine differs from the instance");
    }
    by_job[e.job_id][e.op_index] = &e;
  }

  std::vector<Violation> out;
  auto flag = [&](ViolationKind k, const GanttEntry& e, std::string detail) {
    out.push_back({k, e.job_id, e.op_index, std::move(detail)});
  };

  for (const GanttEntry& e : trace) {
    const int duration = inst.ops[e.job_id][e.op_index].duration;
    bool well_formed = e.start >= 0 && e.end >= e.start;
    for (std::size_t i = 0; i < e.pauses.size(); ++i) {
      const Interval& p = e.pauses[i];
      if (p.length() <= 0 || p.start < e.start || p.end > e.end) well_formed = false;
      if (i > 0 && p.start < e.pauses[i - 1].end) well_formed = false;
    }
    if (!well_formed || e.end - e.start - e.pause_total() != duration) {
      flag(ViolationKind::malformed_entry, e, "pauses or processing length inconsistent with duration");
    }
    if (scenario.is_broken(e.machine, e.start)) {
      flag(ViolationKind::breakdown_start, e, "starts at " + std::to_string(e.start) + " inside a breakdown");
    }
    const Step overlap = scenario.broken_steps(e.machine, e.start, e.end);
    if (e.end != e.start + duration + overlap) {
      flag(ViolationKind::effective_time, e,
           "end " + std::to_string(e.end) + " != start + duration + overlapped breakdown " + std::to_string(overlap));
    }
    if (e.start < scenario.release(e.job_id, e.op_index)) {
      flag(ViolationKind::arrival, e, "starts before its release time");
    }
    if (e.op_index > 0) {
      const GanttEntry& prev = *by_job[e.job_id][e.op_index - 1];
      if (e.start < prev.end) flag(ViolationKind::precedence, e, "starts before the previous operation ends");
    }
  }

  // Active processing segments (window minus pauses) per machine.
  struct Segment {
    Step start, end;
    const GanttEntry* entry;
  };
  std::vector<std::vector<Segment>> segments(inst.n_machines);
  for (const GanttEntry& e : trace) {
    Step cursor = e.start;
    for (const Interval& p : e.pauses) {
      if (p.start > cursor) segments[e.machine].push_back({cursor, p.start, &e});
      cursor = std::max(cursor, p.end);
    }
    if (e.end > cursor) segments[e.machine].push_back({cursor, e.end, &e});
  }
  for (auto& segs : segments) {
    std::sort(segs.begin(), segs.end(), [](const Segment& a, const Segment& b) {
      return a.start != b.start ? a.start < b.start : a.end < b.end;
    });
    for (std::size_t i = 1; i < segs.size(); ++i) {
      for (std::size_t k = 0; k < i; ++k) {
        if (segs[k].entry != segs[i].entry && segs[k].end > segs[i].start) {
          flag(ViolationKind::machine_conflict, *segs[i].entry,
               "overlaps job " + std::to_string(segs[k].entry->job_id) + " op " +
                   std::to_string(segs[k].entry->op_index) + " on machine " + std::to_string(segs[i].entry->machine));
          break;
        }
      }
    }
  }
  return out;
}

}  // namespace petrirl
