// petrirl: train, evaluate and benchmark job-shop schedulers on the
// colored-timed Petri net environment.
//
// Every subcommand prints a JSON summary on success. Failures print
// {"error": ..., "message": ..., "line": ...} to stderr with a nonzero exit.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "petrirl/bench.hpp"
#include "petrirl/config_io.hpp"
#include "petrirl/gantt_io.hpp"
#include "petrirl/instance_io.hpp"
#include "petrirl/ppo.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace petrirl;

namespace {

ScenarioConfig load_scenario_config(const std::string& path) {
  if (path.empty()) return {};
  return scenario_from_kv(load_key_values(path));
}

std::string stem(const std::string& path) { return fs::path(path).stem().string(); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw StructuralError("cannot write " + path.string());
  out << text;
}

// A materialized trace from JSON (a bare trace or a run file holding
// "scenario"), or a scenario config file built with its seed.
ScenarioTrace load_trace(const std::string& path, const JsspInstance& inst) {
  if (path.empty()) return ScenarioTrace::static_for(inst);
  if (fs::path(path).extension() == ".json") {
    const json j = json::parse(detail::read_file(path));
    return j.contains("scenario") ? j["scenario"].get<ScenarioTrace>() : j.get<ScenarioTrace>();
  }
  return build_scenario(inst, load_scenario_config(path));
}

int cmd_train(const std::string& instance_path, const std::string& scenario_path, const std::string& config_path,
              const std::string& out_dir, std::optional<std::uint64_t> seed) {
  const JsspInstance inst = load_instance(instance_path);
  const ScenarioConfig scenario = load_scenario_config(scenario_path);
  TrainConfig cfg = config_path.empty() ? TrainConfig{} : train_from_kv(load_key_values(config_path));
  if (seed) cfg.seed = *seed;
  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "train.cfg", to_key_values(cfg));
  write_text(fs::path(out_dir) / "scenario.cfg", to_key_values(scenario));
  const TrainResult r = train(inst, scenario, cfg, fs::path(out_dir));
  json summary{{"instance", stem(instance_path)},
               {"iterations", r.log.size()},
               {"steps", r.log.empty() ? 0 : r.log.back().steps},
               {"final_checkpoint", (fs::path(out_dir) / "final.json").string()},
               {"best_checkpoint", (fs::path(out_dir) / "best.json").string()},
               {"log", (fs::path(out_dir) / "train_log.csv").string()}};
  if (std::isfinite(r.best_eval_makespan)) summary["best_eval_makespan"] = r.best_eval_makespan;
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_evaluate(const std::string& instance_path, const std::string& scenario_path, const std::string& checkpoint,
                 const std::string& seeds_path, int runs, const std::string& out_dir) {
  const JsspInstance inst = load_instance(instance_path);
  const ScenarioConfig scenario = load_scenario_config(scenario_path);
  const SeedBank bank = load_seed_bank(seeds_path);
  const std::vector<Algorithm> algs{Algorithm::from_policy("Ours", load_policy(checkpoint))};
  const BenchmarkResult r = run_benchmark(inst, stem(instance_path), algs, scenario, bank, runs, true);
  for (int i = 0; i < runs; ++i) {
    const RunRecord& rec = r.runs[0][i];
    const RunArtifact art{r.instance, "Ours", rec.seed, rec.makespan, rec.schedule, r.scenarios[i]};
    char name[32];
    std::snprintf(name, sizeof name, "run_%03d.json", i);
    write_text(fs::path(out_dir) / "runs" / name, run_to_json(art).dump());
  }
  const json summary{{"instance", r.instance}, {"checkpoint", checkpoint}, {"stats", r.stats[0]}};
  write_text(fs::path(out_dir) / "evaluation.json", summary.dump(2));
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_bench(const std::string& instance_path, const std::string& scenario_path, const std::string& algos,
              const std::string& seeds_path, int runs, const std::string& out_dir, bool save_runs) {
  const JsspInstance inst = load_instance(instance_path);
  const ScenarioConfig scenario = load_scenario_config(scenario_path);
  const SeedBank bank = load_seed_bank(seeds_path);
  const std::vector<Algorithm> algs = parse_algorithms(algos);
  const BenchmarkResult r = run_benchmark(inst, stem(instance_path), algs, scenario, bank, runs, save_runs);
  const ResultRow row = make_row(r, algs);
  write_text(fs::path(out_dir) / "results.csv", results_csv({row}));
  write_text(fs::path(out_dir) / "results.json", results_json({row}).dump(2));
  json hashes = json::array();
  for (int i = 0; i < runs; ++i) hashes.push_back(scenario_hash(r.scenarios[i]));
  write_text(fs::path(out_dir) / "scenario_hashes.json", hashes.dump());
  if (save_runs) {
    for (std::size_t a = 0; a < algs.size(); ++a) {
      for (int i = 0; i < runs; ++i) {
        const RunRecord& rec = r.runs[a][i];
        const RunArtifact art{r.instance, algs[a].name, rec.seed, rec.makespan, rec.schedule, r.scenarios[i]};
        char name[64];
        std::snprintf(name, sizeof name, "%s_run_%03d.json", algs[a].name.c_str(), i);
        write_text(fs::path(out_dir) / "runs" / name, run_to_json(art).dump());
      }
    }
  }
  std::cout << results_json({row}).dump(2) << '\n';
  return 0;
}

int cmd_gantt(const std::string& run_json, const std::string& out) {
  const RunArtifact run = run_from_json(json::parse(detail::read_file(run_json)));
  const std::string ext = fs::path(out).extension().string();
  if (ext == ".svg") {
    write_text(out, gantt_svg(run.schedule, &run.scenario,
                              run.instance + " " + run.algorithm + " (makespan " + std::to_string(run.makespan) + ")"));
  } else if (ext == ".csv") {
    write_text(out, gantt_csv(run.schedule));
  } else {
    throw ContractError("--out must end in .svg or .csv");
  }
  std::cout << json{{"written", out}, {"operations", run.schedule.size()}, {"makespan", run.makespan}}.dump(2)
            << '\n';
  return 0;
}

int cmd_validate(const std::string& trace_path, const std::string& instance_path, const std::string& scenario_path) {
  const JsspInstance inst = load_instance(instance_path);
  const ScenarioTrace scenario = load_trace(scenario_path, inst);
  const std::vector<GanttEntry> schedule = load_schedule(trace_path);
  const std::vector<Violation> violations = validate_schedule(schedule, inst, scenario);
  json report{{"valid", violations.empty()}, {"operations", schedule.size()}, {"violations", json::array()}};
  for (const Violation& v : violations) {
    report["violations"].push_back(
        {{"kind", to_string(v.kind)}, {"job", v.job_id}, {"op", v.op_index}, {"detail", v.detail}});
  }
  (violations.empty() ? std::cout : std::cerr) << report.dump(2) << '\n';
  return violations.empty() ? 0 : 1;
}

int report_error(const char* kind, const std::string& message, int line = 0) {
  json err{{"error", kind}, {"message", message}};
  if (line > 0) err["line"] = line;
  std::cerr << err.dump() << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Petri-net job-shop scheduling: PPO training, dispatching-rule benchmarks and schedule tools"};
  app.require_subcommand(1);

  std::string instance, scenario, config, out, checkpoint, seeds, algos, run_json, trace;
  std::optional<std::uint64_t> seed;
  int runs = 100;
  bool save_runs = false;

  auto* train = app.add_subcommand("train", "Train a masked PPO agent on one instance");
  train->add_option("--instance", instance, "Instance file (.txt Taillard or .json)")->required();
  train->add_option("--scenario", scenario, "Scenario config (key = value)");
  train->add_option("--config", config, "Training config (key = value)");
  train->add_option("--out", out, "Output directory")->required();
  train->add_option("--seed", seed, "Override the training seed");

  auto* evaluate = app.add_subcommand("evaluate", "Greedy evaluation of a checkpoint over seeded scenarios");
  evaluate->add_option("--instance", instance)->required();
  evaluate->add_option("--scenario", scenario);
  evaluate->add_option("--checkpoint", checkpoint)->required();
  evaluate->add_option("--seeds", seeds, "Seed bank, one seed per line")->required();
  evaluate->add_option("--runs", runs)->check(CLI::PositiveNumber);
  evaluate->add_option("--out", out)->required();

  auto* bench = app.add_subcommand("bench", "Compare rules and agents on identical seeded scenarios");
  bench->add_option("--instance", instance)->required();
  bench->add_option("--scenario", scenario);
  bench->add_option("--algos", algos, "Comma list of rule names, 'all', or agent:CHECKPOINT")->required();
  bench->add_option("--seeds", seeds)->required();
  bench->add_option("--runs", runs)->check(CLI::PositiveNumber);
  bench->add_option("--out", out)->required();
  bench->add_flag("--save-runs", save_runs, "Write every run's schedule as JSON");

  auto* gantt = app.add_subcommand("gantt", "Render a run JSON as SVG or CSV");
  gantt->add_option("--run-json", run_json)->required();
  gantt->add_option("--out", out, "Output .svg or .csv")->required();

  auto* validate = app.add_subcommand("validate", "Check a schedule against the instance and scenario");
  validate->add_option("--trace", trace, "Schedule (.csv or run .json)")->required();
  validate->add_option("--instance", instance)->required();
  validate->add_option("--scenario", scenario, "Scenario trace JSON, run JSON, or scenario config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what());
  }

  try {
    if (*train) return cmd_train(instance, scenario, config, out, seed);
    if (*evaluate) return cmd_evaluate(instance, scenario, checkpoint, seeds, runs, out);
    if (*bench) return cmd_bench(instance, scenario, algos, seeds, runs, out, save_runs);
    if (*gantt) return cmd_gantt(run_json, out);
    if (*validate) return cmd_validate(trace, instance, scenario);
  } catch (const ParseError& e) {
    return report_error("parse", e.what(), e.line());
  } catch (const StructuralError& e) {
    return report_error("structural", e.what());
  } catch (const ContractError& e) {
    return report_error("contract", e.what());
  } catch (const DomainError& e) {
    return report_error("domain", e.what());
  } catch (const NumericError& e) {
    return report_error("numeric", e.what());
  } catch (const nlohmann::json::exception& e) {
    return report_error("json", e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
  return 0;
}
