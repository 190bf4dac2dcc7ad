// Copyright 2026 The mcd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. Exit codes: 0 success, 1 infeasible design or
// plan, 2 configuration or input error.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "mcd/report.hpp"

namespace fs = std::filesystem;
using namespace mcd;

namespace {

constexpr int kOk = 0;
constexpr int kInfeasible = 1;
constexpr int kConfigError = 2;

struct Overrides {
  std::optional<int> seed;
  std::optional<int> generations;
  std::optional<double> dt;
};

Scenario load_with(const std::string& path, const Overrides& o) {
  Scenario sc = load_scenario(path);
  if (o.dt) {
    if (!(*o.dt > 0)) throw ConfigError("--dt must be positive");
    sc.dt = *o.dt;
  }
  if (o.seed) {
    sc.seed = *o.seed;
    sc.cmaes.seed = *o.seed;
    sc.ga.seed = *o.seed;
  }
  if (o.generations) {
    if (*o.generations < 1) throw ConfigError("--generations must be at least 1");
    sc.cmaes.generations = sc.cmaes.max_generations = *o.generations;
    sc.ga.generations = *o.generations;
  }
  return sc;
}

/// Accepts a bare design object or an artifact wrapping one under "design".
Candidate load_design(const std::string& path, const Catalog& cat) {
  const nlohmann::json j = read_json_file(path);
  return candidate_from_json(j.contains("design") ? j["design"] : j, cat);
}

void write_plan_outputs(const fs::path& out, const Evaluation& ev, const PreparedScenario& ps) {
  write_text(out / "trajectory.csv", ev.assembled ? trajectory_csv(ev, ps) : std::string());
  write_text(out / "plan_summary.json", plan_summary_json(ev, ps.sc.catalog).dump(2) + "\n");
  write_text(out / "summary.csv", summary_csv(summarize(ev, ps.sc.catalog)));
  if (ev.assembled && !ev.plan.error.empty()) write_text(out / "tracking.svg", tracking_svg(ev, ps));
}

int cmd_catalog_validate(const std::string& path) {
  const Catalog cat = path == "default" ? default_catalog() : load_catalog(path);
  std::cout << "catalog '" << cat.name() << "': " << cat.m() << " physical modules, end effector id "
            << cat.eom_id() << ", encoding length " << cat.encoding_size() << "\n";
  return kOk;
}

int cmd_plan(const std::string& scenario, const std::string& design, const Overrides& o,
             const fs::path& out) {
  const PreparedScenario ps = prepare(load_with(scenario, o));
  const Candidate cand = load_design(design, ps.sc.catalog);
  const Evaluation ev = evaluate_candidate(cand, ps);
  write_plan_outputs(out, ev, ps);
  std::cout << summary_table(summarize(ev, ps.sc.catalog));
  if (!ev.cost.delta) {
    std::cout << "infeasible: " << ev.cost.reason << "\n";
    return kInfeasible;
  }
  std::cout << "plan written to " << out.string() << "\n";
  return kOk;
}

int cmd_optimize(const std::string& scenario, const std::string& algo, const Overrides& o,
                 const fs::path& out, bool quiet) {
  if (algo != "cmaes" && algo != "ga") throw ConfigError("--algo must be cmaes or ga");
  Scenario sc = load_with(scenario, o);
  const PreparedScenario ps = prepare(sc);
  const std::optional<Candidate> guess = scenario_initial_guess(ps);

  RunOptions ro;
  ro.keep_history = false;
  if (!quiet)
    ro.on_generation = [](const GenerationRecord& g) {
      if (g.generation % 10 == 0)
        std::cerr << "generation " << g.generation << "  best " << g.best_so_far << "\n";
    };
  const RunResult r = algo == "cmaes" ? cmaes_run(ps, ps.sc.cmaes, guess, ro)
                                      : ga_baseline_run(ps, ps.sc.ga, guess, ro);

  // The run directory carries its own scenario and catalog copies.
  fs::create_directories(out);
  Scenario copy = ps.sc;
  copy.catalog_ref = "catalog.json";
  write_text(out / "catalog.json", catalog_to_json(ps.sc.catalog).dump(2) + "\n");
  write_text(out / "scenario.json", scenario_to_json(copy).dump(2) + "\n");
  write_text(out / "evolution.csv", evolution_report(r, ps.sc.catalog));
  write_text(out / "best_design.json", artifact_json(r, ps).dump(2) + "\n");
  write_text(out / "convergence.svg", convergence_svg(r));
  const Evaluation ev = evaluate_candidate(r.best, ps);
  write_plan_outputs(out, ev, ps);

  nlohmann::json m;
  m["tool"] = "mcd";
  m["command"] = "optimize";
  m["scenario_source"] = fs::absolute(scenario).string();
  m["algo"] = r.algo;
  m["seed"] = r.seed;
  m["generations"] = r.log.empty() ? 0 : r.log.back().generation;
  m["evaluations"] = r.evaluations;
  m["stop"] = r.stop;
  m["seconds"] = r.seconds;
  m["workers"] = ro.workers;
  m["config"] = scenario_to_json(copy);
  m["files"] = {"scenario.json", "catalog.json",  "evolution.csv",   "best_design.json",
                "trajectory.csv", "plan_summary.json", "summary.csv", "convergence.svg",
                "tracking.svg"};
  write_text(out / "manifest.json", m.dump(2) + "\n");

  std::cout << summary_table(summarize(ev, ps.sc.catalog)) << "run written to " << out.string()
            << "\n";
  return r.best_cost.delta ? kOk : kInfeasible;
}

/// Reads a finished run directory; max torque comes from the stored
/// trajectory, the other columns from the plan summary.
int cmd_report(const fs::path& dir) {
  const nlohmann::json ps = read_json_file((dir / "plan_summary.json").string());
  const Catalog cat = load_catalog((dir / "catalog.json").string());
  DesignSummary s;
  const Candidate c = candidate_from_json(ps.at("design"), cat);
  s.morphology = morphology_label(c, cat);
  s.main_dof = ps.at("main_dof").get<int>();
  s.assist_dof = ps.at("assist_dof").get<int>();
  const auto& cost = ps.at("cost");
  s.F_eff = cost.at("F_eff").get<double>();
  s.M_man = cost.at("M_man").get<double>();
  s.modules = cost.at("modules").get<int>();
  s.E_total = cost.at("E_total").get<double>();
  s.delta = cost.at("delta").get<int>();
  const CsvTable traj = parse_numeric_csv(read_text(dir / "trajectory.csv"));
  for (std::size_t k = 0; k < traj.header.size(); ++k)
    if (traj.header[k].rfind("tau", 0) == 0)
      for (const auto& row : traj.rows) s.max_torque = std::max(s.max_torque, std::abs(row[k]));
  write_text(dir / "report.csv", summary_csv(s));
  std::cout << summary_table(s);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modular manipulator co-design: plan, optimize and report"};
  app.require_subcommand(1);

  Overrides o;
  std::string out = "mcd_out";
  auto add_common = [&](CLI::App* c) {
    c->add_option("--dt", o.dt, "planner time step [s], overrides the scenario");
    c->add_option("--out", out, "output directory");
  };

  std::string catalog_path;
  auto* cv = app.add_subcommand("catalog-validate", "check a catalog file ('default' for the built-in)");
  cv->add_option("catalog", catalog_path)->required();

  std::string scenario, design;
  auto* plan = app.add_subcommand("plan", "plan and check a fixed design");
  plan->add_option("scenario", scenario)->required();
  plan->add_option("design", design, "design artifact or {C_v, S, pose} object")->required();
  add_common(plan);

  std::string algo = "cmaes";
  bool quiet = false;
  auto* opt = app.add_subcommand("optimize", "search designs for a scenario");
  opt->add_option("scenario", scenario)->required();
  opt->add_option("--algo", algo, "cmaes or ga");
  opt->add_option("--seed", o.seed, "random seed, overrides the scenario");
  opt->add_option("--generations", o.generations, "generation count, overrides the scenario");
  opt->add_flag("--quiet", quiet, "no progress output");
  add_common(opt);

  std::string run_dir;
  auto* rep = app.add_subcommand("report", "metric table of a finished run");
  rep->add_option("run_dir", run_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*cv) return cmd_catalog_validate(catalog_path);
    if (*plan) return cmd_plan(scenario, design, o, out);
    if (*opt) return cmd_optimize(scenario, algo, o, out, quiet);
    if (*rep) return cmd_report(run_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}
