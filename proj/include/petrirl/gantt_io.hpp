#pragma once

// Schedule export: CSV (job,op,machine,start,end,pauses with pauses written
// as "a-b;c-d"), a run JSON bundling schedule, scenario and makespan, and an
// SVG Gantt chart with breakdown windows hatched.

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "petrirl/disruptions.hpp"
#include "petrirl/error.hpp"
#include "petrirl/instance_io.hpp"
#include "petrirl/jssp_env.hpp"

namespace petrirl {

inline void to_json(nlohmann::json& j, const GanttEntry& e) {
  j = {{"job", e.job_id}, {"op", e.op_index}, {"machine", e.machine},
       {"start", e.start}, {"end", e.end},    {"pauses", e.pauses}};
}

inline void from_json(const nlohmann::json& j, GanttEntry& e) {
  j.at("job").get_to(e.job_id);
  j.at("op").get_to(e.op_index);
  j.at("machine").get_to(e.machine);
  j.at("start").get_to(e.start);
  j.at("end").get_to(e.end);
  e.pauses = j.value("pauses", std::vector<Interval>{});
}

inline constexpr const char* kGanttCsvHeader = "job,op,machine,start,end,pauses";

inline std::string gantt_csv(const std::vector<GanttEntry>& schedule) {
  std::ostringstream os;
  os << kGanttCsvHeader << '\n';
  for (const GanttEntry& e : schedule) {
    os << e.job_id << ',' << e.op_index << ',' << e.machine << ',' << e.start << ',' << e.end << ',';
    for (std::size_t i = 0; i < e.pauses.size(); ++i) {
      os << (i ? ";" : "") << e.pauses[i].start << '-' << e.pauses[i].end;
    }
    os << '\n';
  }
  return os.str();
}

inline std::vector<GanttEntry> parse_gantt_csv(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  std::vector<GanttEntry> out;
  auto integer = [&](const std::string& s) -> Step {
    std::size_t used = 0;
    try {
      const Step v = std::stoll(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ParseError("'" + s + "' is not an integer", line);
  };
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) continue;
    if (line == 1) {
      if (raw != kGanttCsvHeader) throw ParseError(std::string("expected header '") + kGanttCsvHeader + "'", line);
      continue;
    }
    std::vector<std::string> fields;
    std::istringstream row(raw);
    std::string f;
    while (std::getline(row, f, ',')) fields.push_back(f);
    if (raw.back() == ',') fields.emplace_back();
    if (fields.size() != 6) throw ParseError("expected 6 fields", line);
    GanttEntry e;
    e.job_id = static_cast<int>(integer(fields[0]));
    e.op_index = static_cast<int>(integer(fields[1]));
    e.machine = static_cast<int>(integer(fields[2]));
    e.start = integer(fields[3]);
    e.end = integer(fields[4]);
    std::istringstream pauses(fields[5]);
    std::string p;
    while (std::getline(pauses, p, ';')) {
      const auto dash = p.find('-', 1);
      if (dash == std::string::npos) throw ParseError("pause '" + p + "' is not 'a-b'", line);
      e.pauses.push_back({integer(p.substr(0, dash)), integer(p.substr(dash + 1))});
    }
    out.push_back(std::move(e));
  }
  return out;
}

struct RunArtifact {
  std::string instance;
  std::string algorithm;
  std::uint64_t seed = 0;
  Step makespan = 0;
  std::vector<GanttEntry> schedule;
  ScenarioTrace scenario;
};

inline nlohmann::json run_to_json(const RunArtifact& r) {
  return {{"instance", r.instance},   {"algorithm", r.algorithm}, {"seed", r.seed},
          {"makespan", r.makespan},   {"schedule", r.schedule},   {"scenario", r.scenario},
          {"scenario_hash", scenario_hash(r.scenario)}};
}

inline RunArtifact run_from_json(const nlohmann::json& j) {
  RunArtifact r;
  r.instance = j.value("instance", "");
  r.algorithm = j.value("algorithm", "");
  r.seed = j.value("seed", std::uint64_t{0});
  r.makespan = j.at("makespan").get<Step>();
  r.schedule = j.at("schedule").get<std::vector<GanttEntry>>();
  r.scenario = j.at("scenario").get<ScenarioTrace>();
  return r;
}

/// Reads a schedule from a run JSON (its "schedule" field) or a Gantt CSV.
inline std::vector<GanttEntry> load_schedule(const std::string& path) {
  const std::string text = detail::read_file(path);
  const bool json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  if (!json) return parse_gantt_csv(text);
  const auto j = nlohmann::json::parse(text);
  return j.is_array() ? j.get<std::vector<GanttEntry>>() : j.at("schedule").get<std::vector<GanttEntry>>();
}

/// Machine rows, one colored bar per operation; pauses and breakdowns are
/// drawn as hatched overlays.
inline std::string gantt_svg(const std::vector<GanttEntry>& schedule, const ScenarioTrace* scenario = nullptr,
                             const std::string& title = "") {
  int machines = 0;
  int jobs = 0;
  Step horizon = 1;
  for (const GanttEntry& e : schedule) {
    machines = std::max(machines, e.machine + 1);
    jobs = std::max(jobs, e.job_id + 1);
    horizon = std::max(horizon, e.end);
  }
  if (scenario) machines = std::max(machines, static_cast<int>(scenario->breakdowns.size()));
  const double left = 60.0;
  const double top = title.empty() ? 20.0 : 40.0;
  const double row = 28.0;
  const double width = 900.0;
  const double scale = (width - left - 20.0) / static_cast<double>(horizon);
  const double height = top + row * machines + 40.0;
  auto color = [&](int job) {
    std::ostringstream c;
    c << "hsl(" << (jobs > 0 ? job * 360 / jobs : 0) << ",65%,60%)";
    return c.str();
  };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\" "
     << "font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<defs><pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" "
     << "patternTransform=\"rotate(45)\"><rect width=\"3\" height=\"6\" fill=\"#444\" fill-opacity=\"0.5\"/>"
     << "</pattern></defs>\n";
  if (!title.empty()) os << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
  for (int m = 0; m < machines; ++m) {
    const double y = top + row * m;
    os << "<text x=\"5\" y=\"" << y + row * 0.65 << "\">M" << m << "</text>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << y + row << "\" x2=\"" << width - 20 << "\" y2=\"" << y + row
       << "\" stroke=\"#ddd\"/>\n";
    if (scenario && m < static_cast<int>(scenario->breakdowns.size())) {
      for (const Interval& b : scenario->breakdowns[m]) {
        if (b.start >= horizon) break;
        const Step end = std::min(b.end, horizon);
        os << "<rect x=\"" << left + b.start * scale << "\" y=\"" << y + 2 << "\" width=\""
           << (end - b.start) * scale << "\" height=\"" << row - 4 << "\" fill=\"url(#hatch)\"/>\n";
      }
    }
  }
  for (const GanttEntry& e : schedule) {
    const double y = top + row * e.machine;
    os << "<rect x=\"" << left + e.start * scale << "\" y=\"" << y + 4 << "\" width=\"" << (e.end - e.start) * scale
       << "\" height=\"" << row - 8 << "\" fill=\"" << color(e.job_id) << "\" stroke=\"#333\">"
       << "<title>J" << e.job_id << " op " << e.op_index << " [" << e.start << ", " << e.end << ")</title></rect>\n";
    for (const Interval& p : e.pauses) {
      os << "<rect x=\"" << left + p.start * scale << "\" y=\"" << y + 4 << "\" width=\""
         << (p.end - p.start) * scale << "\" height=\"" << row - 8 << "\" fill=\"url(#hatch)\"/>\n";
    }
    os << "<text x=\"" << left + e.start * scale + 2 << "\" y=\"" << y + row * 0.65 << "\">" << e.job_id
       << "</text>\n";
  }
  const double axis_y = top + row * machines + 15;
  const Step tick = std::max<Step>(1, horizon / 10);
  for (Step t = 0; t <= horizon; t += tick) {
    os << "<text x=\"" << left + t * scale << "\" y=\"" << axis_y << "\" text-anchor=\"middle\">" << t
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace petrirl
