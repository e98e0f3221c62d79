#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "petrirl/error.hpp"

namespace petrirl {

struct Operation {
  int machine = 0;
  int duration = 0;

  friend bool operator==(const Operation&, const Operation&) = default;
};

/// Jobs x machines problem data. ops[j][k] is the k-th operation of job j.
struct JsspInstance {
  int n_jobs = 0;
  int n_machines = 0;
  std::vector<std::vector<Operation>> ops;

  friend bool operator==(const JsspInstance&, const JsspInstance&) = default;

  /// Throws StructuralError unless the shape and values are consistent.
  void validate() const {
    if (n_jobs <= 0 || n_machines <= 0) throw StructuralError("instance has no jobs or no machines");
    if (static_cast<int>(ops.size()) != n_jobs) throw StructuralError("ops size differs from n_jobs");
    for (int j = 0; j < n_jobs; ++j) {
      if (ops[j].empty()) throw StructuralError("job " + std::to_string(j) + " has no operations");
      for (const Operation& op : ops[j]) {
        if (op.duration <= 0) throw StructuralError("job " + std::to_string(j) + " has a non-positive duration");
        if (op.machine < 0 || op.machine >= n_machines) {
          throw StructuralError("job " + std::to_string(j) + " references machine " +
                                std::to_string(op.machine));
        }
      }
    }
  }

  int job_length(int j) const { return static_cast<int>(ops[j].size()); }

  int total_ops() const {
    int n = 0;
    for (const auto& job : ops) n += static_cast<int>(job.size());
    return n;
  }

  int max_job_length() const {
    int n = 0;
    for (const auto& job : ops) n = std::max(n, static_cast<int>(job.size()));
    return n;
  }

  int max_duration() const {
    int d = 0;
    for (const auto& job : ops)
      for (const Operation& op : job) d = std::max(d, op.duration);
    return d;
  }

  long total_work() const {
    long w = 0;
    for (const auto& job : ops)
      for (const Operation& op : job) w += op.duration;
    return w;
  }

  long job_work(int j) const {
    return std::accumulate(ops[j].begin(), ops[j].end(), 0L,
                           [](long acc, const Operation& op) { return acc + op.duration; });
  }

  double mean_duration() const { return static_cast<double>(total_work()) / total_ops(); }

  /// Builds an instance from per-job operation lists; n_machines is inferred.
  static JsspInstance from_ops(std::vector<std::vector<Operation>> ops) {
    JsspInstance inst;
    inst.n_jobs = static_cast<int>(ops.size());
    for (const auto& job : ops)
      for (const Operation& op : job) inst.n_machines = std::max(inst.n_machines, op.machine + 1);
    inst.ops = std::move(ops);
    inst.validate();
    return inst;
  }
};

}  // namespace petrirl
