#pragma once

// Instance files.
//
// Taillard text: first line "n m", then n lines of m processing times (job
// order), then n lines of m machine indices, 1-based. Blank lines and lines
// starting with '#' are ignored.
//
// Small-instance JSON: {"jobs": [[[machine, duration], ...], ...]} with
// 0-based machines; jobs may have different lengths.

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "petrirl/error.hpp"
#include "petrirl/instance.hpp"

namespace petrirl {

namespace detail {

struct NumberedLine {
  int line;
  std::vector<long long> values;
};

inline std::vector<NumberedLine> numeric_lines(const std::string& text) {
  std::vector<NumberedLine> out;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto first = raw.find_first_not_of(" \t\r");
    if (first == std::string::npos || raw[first] == '#') continue;
    std::istringstream fields(raw);
    NumberedLine nl{line, {}};
    std::string tok;
    while (fields >> tok) {
      std::size_t used = 0;
      long long v = 0;
      try {
        v = std::stoll(tok, &used);
      } catch (const std::exception&) {
        throw ParseError("'" + tok + "' is not an integer", line);
      }
      if (used != tok.size()) throw ParseError("'" + tok + "' is not an integer", line);
      nl.values.push_back(v);
    }
    out.push_back(std::move(nl));
  }
  return out;
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StructuralError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline JsspInstance parse_taillard(const std::string& text) {
  const auto lines = detail::numeric_lines(text);
  if (lines.empty()) throw ParseError("empty instance", 1);
  const auto& header = lines.front();
  if (header.values.size() != 2) throw ParseError("header must be 'n m'", header.line);
  const long long n = header.values[0];
  const long long m = header.values[1];
  if (n <= 0 || m <= 0) throw ParseError("job and machine counts must be positive", header.line);
  const std::size_t expected = 1 + 2 * static_cast<std::size_t>(n);
  if (lines.size() != expected) {
    const int where = lines.size() < expected ? lines.back().line : lines[expected].line;
    throw ParseError("expected " + std::to_string(2 * n) + " matrix rows, found " +
                         std::to_string(lines.size() - 1),
                     where);
  }
  JsspInstance inst;
  inst.n_jobs = static_cast<int>(n);
  inst.n_machines = static_cast<int>(m);
  inst.ops.assign(inst.n_jobs, std::vector<Operation>(inst.n_machines));
  for (int j = 0; j < inst.n_jobs; ++j) {
    const auto& times = lines[1 + j];
    const auto& machines = lines[1 + inst.n_jobs + j];
    for (const auto* row : {&times, &machines}) {
      if (row->values.size() != static_cast<std::size_t>(m)) {
        throw ParseError("expected " + std::to_string(m) + " values, found " + std::to_string(row->values.size()),
                         row->line);
      }
    }
    for (int k = 0; k < inst.n_machines; ++k) {
      if (times.values[k] <= 0) throw ParseError("processing times must be positive", times.line);
      if (machines.values[k] < 1 || machines.values[k] > m) {
        throw ParseError("machine index " + std::to_string(machines.values[k]) + " outside 1.." + std::to_string(m),
                         machines.line);
      }
      inst.ops[j][k] = {static_cast<int>(machines.values[k] - 1), static_cast<int>(times.values[k])};
    }
  }
  return inst;
}

/// Inverse of parse_taillard; every job must have exactly n_machines operations.
inline std::string to_taillard(const JsspInstance& inst) {
  inst.validate();
  std::ostringstream os;
  os << inst.n_jobs << ' ' << inst.n_machines << '\n';
  for (const auto& job : inst.ops) {
    if (static_cast<int>(job.size()) != inst.n_machines) {
      throw StructuralError("Taillard format needs n_machines operations per job");
    }
  }
  for (const auto& job : inst.ops)
    for (std::size_t k = 0; k < job.size(); ++k) os << job[k].duration << (k + 1 < job.size() ? ' ' : '\n');
  for (const auto& job : inst.ops)
    for (std::size_t k = 0; k < job.size(); ++k) os << job[k].machine + 1 << (k + 1 < job.size() ? ' ' : '\n');
  return os.str();
}

namespace detail {

// Line of every [machine, duration] pair in document order, found by bracket
// depth (outside strings). Used only to report semantic errors.
inline std::vector<int> pair_lines(const std::string& text) {
  std::vector<int> out;
  int depth = 0;
  int line = 1;
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') ++line;
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '[' || c == '{') {
      ++depth;
      if (c == '[' && depth == 4) out.push_back(line);
    } else if (c == ']' || c == '}') {
      --depth;
    }
  }
  return out;
}

inline int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

}  // namespace detail

inline JsspInstance parse_small_instance(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), detail::line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0));
  }
  if (!doc.is_object() || !doc.contains("jobs") || !doc["jobs"].is_array() || doc["jobs"].empty()) {
    throw ParseError("expected an object with a non-empty \"jobs\" array", 1);
  }
  const std::vector<int> lines = detail::pair_lines(text);
  std::size_t pair_index = 0;
  auto line_here = [&] { return pair_index < lines.size() ? lines[pair_index] : 0; };
  JsspInstance inst;
  int max_machine = -1;
  for (const auto& job : doc["jobs"]) {
    if (!job.is_array() || job.empty()) throw ParseError("every job must be a non-empty array", line_here());
    std::vector<Operation> ops;
    for (const auto& op : job) {
      const int line = line_here();
      if (!op.is_array() || op.size() != 2 || !op[0].is_number_integer() || !op[1].is_number_integer()) {
        throw ParseError("operations must be [machine, duration] integer pairs", line);
      }
      const long long machine = op[0].get<long long>();
      const long long duration = op[1].get<long long>();
      if (machine < 0) throw ParseError("machine indices must be >= 0", line);
      if (duration <= 0) throw ParseError("durations must be positive", line);
      ops.push_back({static_cast<int>(machine), static_cast<int>(duration)});
      max_machine = std::max(max_machine, static_cast<int>(machine));
      ++pair_index;
    }
    inst.ops.push_back(std::move(ops));
  }
  inst.n_jobs = static_cast<int>(inst.ops.size());
  inst.n_machines = max_machine + 1;
  if (doc.contains("machines")) {
    const int declared = doc["machines"].get<int>();
    if (declared <= max_machine) throw ParseError("\"machines\" is smaller than the largest machine index", 1);
    inst.n_machines = declared;
  }
  return inst;
}

inline std::string to_small_instance(const JsspInstance& inst) {
  inst.validate();
  std::ostringstream os;
  os << "{\"machines\": " << inst.n_machines << ", \"jobs\": [\n";
  for (std::size_t j = 0; j < inst.ops.size(); ++j) {
    os << "  [";
    for (std::size_t k = 0; k < inst.ops[j].size(); ++k) {
      os << '[' << inst.ops[j][k].machine << ", " << inst.ops[j][k].duration << ']'
         << (k + 1 < inst.ops[j].size() ? ", " : "");
    }
    os << ']' << (j + 1 < inst.ops.size() ? ",\n" : "\n");
  }
  os << "]}\n";
  return os.str();
}

/// Dispatches on the extension: ".json" is the small-instance format,
/// anything else is Taillard text.
inline JsspInstance load_instance(const std::string& path) {
  const std::string text = detail::read_file(path);
  const bool json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  JsspInstance inst = json ? parse_small_instance(text) : parse_taillard(text);
  inst.validate();
  return inst;
}

}  // namespace petrirl
