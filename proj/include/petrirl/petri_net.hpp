#pragma once

// Colored-timed Petri net with FIFO places, identity arc expressions and
// unit arc weights. Time is an integer step counter owned by the net.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "petrirl/error.hpp"

namespace petrirl {

using Step = std::int64_t;

/// A job operation in flight, or a machine resource token (job_id < 0).
struct Token {
  int job_id = -1;
  int op_index = 0;
  int color = 0;  // machine index the operation requires
  int proc_time = 0;
  int elapsed = 0;
  Step entered_at = 0;

  bool is_resource() const noexcept { return job_id < 0; }
  bool finished() const noexcept { return elapsed == proc_time; }

  static Token resource(int machine) { return Token{-1, 0, machine, 0, 0, 0}; }

  friend bool operator==(const Token&, const Token&) = default;
};

enum class PlaceRole {
  planned_jobs,
  job,
  routing_buffer,
  machine_buffer,
  machine_idle,
  machine_proc,
  delivery,
};

struct Place {
  int id = 0;
  PlaceRole role = PlaceRole::job;
  std::string name;
  std::deque<Token> queue;

  friend bool operator==(const Place&, const Place&) = default;
};

enum class TransitionKind { controllable, autonomous, colored, timed };

struct Transition {
  int id = 0;
  TransitionKind kind = TransitionKind::autonomous;
  std::string name;
  std::vector<int> inputs;
  std::vector<int> outputs;
  std::optional<int> color_filter;
  bool force_disabled = false;

  friend bool operator==(const Transition&, const Transition&) = default;
};

/// The marking, clock and transition flags of a net. Value type: copying a
/// PetriNet snapshots the whole simulation state.
class PetriNet {
 public:
  int add_place(PlaceRole role, std::string name) {
    const int id = static_cast<int>(places_.size());
    places_.push_back(Place{id, role, std::move(name), {}});
    return id;
  }

  int add_transition(TransitionKind kind, std::string name, std::vector<int> inputs,
                     std::vector<int> outputs, std::optional<int> color_filter = std::nullopt) {
    if (inputs.empty() || outputs.empty()) {
      throw StructuralError("transition '" + name + "' needs at least one input and one output");
    }
    for (int p : inputs) {
      check_place(p);
      if (std::find(outputs.begin(), outputs.end(), p) != outputs.end()) {
        throw StructuralError("transition '" + name + "' has overlapping inputs and outputs");
      }
    }
    for (int p : outputs) check_place(p);
    if ((kind == TransitionKind::colored) != color_filter.has_value()) {
      throw StructuralError("transition '" + name +
                            "': exactly the colored kind carries a color filter");
    }
    const int id = static_cast<int>(transitions_.size());
    transitions_.push_back(
        Transition{id, kind, std::move(name), std::move(inputs), std::move(outputs), color_filter, false});
    if (kind == TransitionKind::controllable) controllable_.push_back(id);
    return id;
  }

  bool is_enabled(int t) const {
    const Transition& tr = transition(t);
    if (tr.force_disabled) return false;
    for (int p : tr.inputs) {
      const auto& q = places_[p].queue;
      if (q.empty()) return false;
      const Token& head = q.front();
      if (tr.color_filter && !head.is_resource() && head.color != *tr.color_filter) return false;
      if (tr.kind == TransitionKind::timed && !head.is_resource() && !head.finished()) return false;
    }
    return true;
  }

  /// Consumes the head of every input place and produces one token per output
  /// place. Machine-idle outputs receive a resource token; every other output
  /// receives the carried operation token stamped with the current clock.
  void fire(int t) {
    if (!is_enabled(t)) {
      throw ContractError("fire: transition '" + transition(t).name + "' is not enabled");
    }
    const Transition& tr = transitions_[t];
    std::optional<Token> carried;
    std::optional<Token> resource;
    for (int p : tr.inputs) {
      Token tok = places_[p].queue.front();
      places_[p].queue.pop_front();
      if (tok.is_resource()) {
        if (!resource) resource = tok;
      } else if (!carried) {
        carried = tok;
      }
    }
    for (int p : tr.outputs) {
      Place& out = places_[p];
      Token tok;
      if (out.role == PlaceRole::machine_idle) {
        tok = resource ? *resource : Token::resource(carried ? carried->color : 0);
      } else {
        tok = carried ? *carried : *resource;
      }
      tok.entered_at = clock_;
      out.queue.push_back(tok);
    }
  }

  /// Enabling state of every controllable transition, in ascending id order.
  std::vector<bool> controllable_mask() const {
    std::vector<bool> mask(controllable_.size());
    for (std::size_t i = 0; i < controllable_.size(); ++i) mask[i] = is_enabled(controllable_[i]);
    return mask;
  }

  void set_forced(int t, bool disabled) { transition_mut(t).force_disabled = disabled; }

  /// Fires enabled non-controllable transitions in ascending id order, pass
  /// after pass, until none is enabled. `on_fire(id)` runs after each firing
  /// so callers can update forced flags mid-cascade.
  template <typename OnFire>
  std::vector<int> fire_until_quiescent(OnFire&& on_fire) {
    std::vector<int> fired;
    constexpr std::size_t kMaxFirings = 10'000'000;
    bool progress = true;
    while (progress) {
      progress = false;
      for (const Transition& tr : transitions_) {
        if (tr.kind == TransitionKind::controllable || !is_enabled(tr.id)) continue;
        fire(tr.id);
        fired.push_back(tr.id);
        on_fire(tr.id);
        progress = true;
        if (fired.size() > kMaxFirings) {
          throw StructuralError("autonomous cascade did not reach quiescence");
        }
      }
    }
    return fired;
  }

  std::vector<int> fire_until_quiescent() {
    return fire_until_quiescent([](int) {});
  }

  Step clock() const noexcept { return clock_; }

  void advance_clock(Step by = 1) {
    if (by < 0) throw ContractError("advance_clock: the clock never moves backwards");
    clock_ += by;
  }

  /// One step of processing for the head token of `p`.
  void progress_head(int p) {
    auto& q = place_mut(p).queue;
    if (q.empty() || q.front().is_resource()) {
      throw ContractError("progress_head: no operation token in place '" + places_[p].name + "'");
    }
    Token& head = q.front();
    if (head.finished()) throw ContractError("progress_head: token already complete");
    ++head.elapsed;
  }

  const Place& place(int p) const {
    check_place(p);
    return places_[p];
  }

  const Transition& transition(int t) const {
    if (t < 0 || t >= static_cast<int>(transitions_.size())) {
      throw StructuralError("unknown transition id " + std::to_string(t));
    }
    return transitions_[t];
  }

  /// Appends a token to a place's tail; used to populate the initial marking.
  void put(int p, Token tok) {
    tok.entered_at = clock_;
    place_mut(p).queue.push_back(tok);
  }

  const std::vector<Place>& places() const noexcept { return places_; }
  const std::vector<Transition>& transitions() const noexcept { return transitions_; }
  const std::vector<int>& controllable_ids() const noexcept { return controllable_; }

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const Place& p : places_) n += p.queue.size();
    return n;
  }

  friend bool operator==(const PetriNet&, const PetriNet&) = default;

 private:
  void check_place(int p) const {
    if (p < 0 || p >= static_cast<int>(places_.size())) {
      throw StructuralError("unknown place id " + std::to_string(p));
    }
  }

  Place& place_mut(int p) {
    check_place(p);
    return places_[p];
  }

  Transition& transition_mut(int t) {
    transition(t);
    return transitions_[t];
  }

  Step clock_ = 0;
  std::vector<Place> places_;
  std::vector<Transition> transitions_;
  std::vector<int> controllable_;
};

}  // namespace petrirl
