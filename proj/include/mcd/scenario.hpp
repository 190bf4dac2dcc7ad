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

#pragma once

// Scenario description: task, environment, search space and solver settings.
// Loaded from JSON; see docs/formats.md for the schema.

#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "mcd/assist.hpp"
#include "mcd/catalog.hpp"
#include "mcd/collision.hpp"
#include "mcd/hmpc.hpp"
#include "mcd/morphology.hpp"
#include "mcd/tolerance.hpp"
#include "mcd/trajectory.hpp"

namespace mcd {

struct CostWeights {
  double w = 1.0;
  double w_f = 0.01;
  double w_m = 5.0;
  double w_l = 0.001;
};

/// Graded penalties for violated constraint classes: base + kappa * amount.
struct PenaltyConfig {
  double base = 1e3;
  double kappa_red = 100.0;    // per missing joint
  double kappa_tra = 10.0;     // per unit of IK error over tolerance, or per failed fraction
  double kappa_track = 100.0;  // per unit of bound ratio above 1
  double kappa_col = 1e3;      // per metre of penetration
  double kappa_dyn = 1.0;      // per N m above the limit
  double time_cap = 10.0;      // s per design
};

struct CMAESConfig {
  int population = 40;
  double sigma0 = 0.25;
  int generations = 100;      // minimum before the sigma rule applies
  int max_generations = 200;  // hard cap when extending
  double sigma_stop = 0.005;
  int seed = 1;
};

struct GridAxis {
  double lo = 0.0, hi = 0.0, step = 1.0;
  std::vector<double> values() const {
    std::vector<double> v;
    if (!(step > 0)) throw ConfigError("pose grid: step must be positive");
    const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (int i = 0; i < n; ++i) v.push_back(lo + i * step);
    return v;
  }
};

struct GAConfig {
  int population = 40;
  int generations = 100;
  double mutation = 0.5;
  double crossover = 0.9;
  int early_stop = 0;  // generations without improvement; 0 disables
  GridAxis x{-1.2, 1.2, 0.2};
  GridAxis y{-1.2, 1.2, 0.2};
  GridAxis yaw{-M_PI, M_PI, M_PI / 2};
  int seed = 1;

  void validate() const {
    if (population < 2) throw ConfigError("ga: population must be at least 2");
    if (generations < 1) throw ConfigError("ga: generations must be at least 1");
    if (mutation < 0 || mutation > 1 || crossover < 0 || crossover > 1)
      throw ConfigError("ga: probabilities must lie in [0, 1]");
    if (x.values().empty() || y.values().empty() || yaw.values().empty())
      throw ConfigError("ga: empty pose grid");
  }
};

/// Mount pose search box. Components not marked free stay at `lo`.
struct MountRange {
  Vec6 lo = Vec6::Zero();
  Vec6 hi = Vec6::Zero();
  std::array<bool, 6> free = {true, true, false, false, false, true};

  int free_count() const {
    int n = 0;
    for (bool f : free) n += f;
    return n;
  }
};

struct Scenario {
  std::string name = "scenario";
  std::string catalog_ref = "default";
  Catalog catalog = default_catalog();
  double dt = 0.01;
  std::vector<Waypoint> waypoints;
  double hold = 0.3;  // duration of a single-waypoint task, s
  PriorityPartition partition{AxisSet::position(), AxisSet{}};
  std::vector<Box> obstacles;
  Vec3 workspace_lo = Vec3(-1.5, -1.5, -0.5);
  Vec3 workspace_hi = Vec3(1.5, 1.5, 2.0);
  double sdf_resolution = 0.02;
  double d_safe = 0.02;
  int capsule_samples = 5;
  MountRange mount;
  double payload = 0.0;
  Vec6 wrench = Vec6::Zero();
  double shared_torque_limit = 0.0;  // > 0 caps every shared-joint limit
  CostWeights weights;
  PlannerOptions planner;
  MPCConfig mpc;
  AssistOptions assist;
  CMAESConfig cmaes;
  GAConfig ga;
  PenaltyConfig penalty;
  int seed = 1;
  nlohmann::json initial_guess;  // optional design {C_v, S, pose}; null if absent

  void validate() const {
    if (waypoints.empty()) throw ConfigError("scenario: no waypoints");
    if (!(dt > 0)) throw ConfigError("scenario: dt must be positive");
    if (partition.high.empty()) throw ConfigError("scenario: high-priority axis set is empty");
    if ((partition.high & partition.low).bits() != 0)
      throw ConfigError("scenario: priority axis sets overlap");
    for (std::size_t k = 0; k < waypoints.size(); ++k)
      if ((waypoints[k].tol_p.array() <= 0).any() || (waypoints[k].tol_o.array() <= 0).any())
        throw ConfigError("scenario: waypoint " + std::to_string(k) + " has a nonpositive tolerance");
    for (int i = 0; i < 6; ++i)
      if (mount.free[i] && !(mount.hi[i] >= mount.lo[i]))
        throw ConfigError("scenario: mount range hi < lo");
    for (const auto& b : obstacles)
      if ((b.size.array() <= 0).any()) throw ConfigError("scenario: degenerate obstacle box");
    if (cmaes.population < 4) throw ConfigError("cmaes: population must be at least 4");
    if (!(cmaes.sigma0 > 0)) throw ConfigError("cmaes: sigma0 must be positive");
    if (cmaes.generations < 1) throw ConfigError("cmaes: generations must be at least 1");
    ga.validate();
  }
};

namespace detail {

inline const std::array<const char*, 6> kPoseNames = {"x", "y", "z", "roll", "pitch", "yaw"};

inline Vec6 vec6_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 6) throw ConfigError(what + ": expected 6 numbers");
  Vec6 v;
  for (int i = 0; i < 6; ++i) v[i] = j[i].get<double>();
  return v;
}

inline nlohmann::json to_json6(const Vec6& v) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < 6; ++i) a.push_back(v[i]);
  return a;
}

inline Vec3 tol_from_json(const nlohmann::json& j, const std::string& what) {
  if (j.is_number()) return Vec3::Constant(j.get<double>());
  return vec3_from_json(j, what);
}

inline AxisSet axes_from_json(const nlohmann::json& j) {
  AxisSet s;
  if (j.is_string()) return AxisSet::parse(j.get<std::string>());
  for (const auto& a : j) s = s | AxisSet::parse(a.get<std::string>());
  return s;
}

inline nlohmann::json axes_to_json(AxisSet s) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < 6; ++i)
    if (s.contains(i)) a.push_back(kTaskAxisNames[i]);
  return a;
}

inline GridAxis grid_from_json(const nlohmann::json& j, GridAxis def) {
  if (j.is_null()) return def;
  if (!j.is_array() || j.size() != 3) throw ConfigError("pose grid: expected [lo, hi, step]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  Scenario s;
  try {
    s.name = j.value("name", s.name);
    s.catalog_ref = j.value("catalog", std::string("default"));
    if (s.catalog_ref == "default") {
      s.catalog = default_catalog();
    } else {
      std::filesystem::path p = s.catalog_ref;
      if (p.is_relative()) p = base_dir / p;
      s.catalog = load_catalog(p.string());
    }
    s.dt = j.value("dt", s.dt);
    s.seed = j.value("seed", s.seed);

    const auto& task = j.at("task");
    for (const auto& w : task.at("waypoints")) {
      Waypoint wp;
      if (w.contains("t") && !w["t"].is_null()) wp.t = w["t"].get<double>();
      wp.p = detail::vec3_from_json(w.at("p"), "waypoint p");
      if (w.contains("rpy")) {
        const Vec3 rpy = detail::vec3_from_json(w["rpy"], "waypoint rpy");
        wp.R = so3::from_rpy(rpy[0], rpy[1], rpy[2]);
      }
      if (w.contains("tol_p")) wp.tol_p = detail::tol_from_json(w["tol_p"], "waypoint tol_p");
      if (w.contains("tol_o")) wp.tol_o = detail::tol_from_json(w["tol_o"], "waypoint tol_o");
      s.waypoints.push_back(wp);
    }
    s.hold = task.value("hold", s.hold);
    if (task.contains("high")) s.partition.high = detail::axes_from_json(task["high"]);
    if (task.contains("low")) s.partition.low = detail::axes_from_json(task["low"]);

    if (j.contains("obstacles"))
      for (const auto& b : j["obstacles"])
        s.obstacles.push_back({detail::vec3_from_json(b.at("center"), "obstacle center"),
                               detail::vec3_from_json(b.at("size"), "obstacle size")});
    if (j.contains("workspace")) {
      const auto& w = j["workspace"];
      if (w.contains("lo")) s.workspace_lo = detail::vec3_from_json(w["lo"], "workspace lo");
      if (w.contains("hi")) s.workspace_hi = detail::vec3_from_json(w["hi"], "workspace hi");
      s.sdf_resolution = w.value("resolution", s.sdf_resolution);
    }
    if (j.contains("collision")) {
      s.d_safe = j["collision"].value("d_safe", s.d_safe);
      s.capsule_samples = j["collision"].value("samples", s.capsule_samples);
    }
    if (j.contains("mount")) {
      const auto& m = j["mount"];
      if (m.contains("lo")) s.mount.lo = detail::vec6_from_json(m["lo"], "mount lo");
      s.mount.hi = m.contains("hi") ? detail::vec6_from_json(m["hi"], "mount hi") : s.mount.lo;
      if (m.contains("free")) {
        s.mount.free.fill(false);
        for (const auto& f : m["free"]) {
          const std::string name = f.get<std::string>();
          bool found = false;
          for (int i = 0; i < 6; ++i)
            if (name == detail::kPoseNames[i]) {
              s.mount.free[i] = true;
              found = true;
            }
          if (!found) throw ConfigError("mount: unknown pose component '" + name + "'");
        }
      }
    }
    s.payload = j.value("payload", s.payload);
    if (j.contains("external_wrench"))
      s.wrench = detail::vec6_from_json(j["external_wrench"], "external_wrench");
    s.shared_torque_limit = j.value("shared_torque_limit", s.shared_torque_limit);
    if (j.contains("initial_guess")) s.initial_guess = j["initial_guess"];
    if (j.contains("weights")) {
      const auto& w = j["weights"];
      s.weights.w = w.value("w", s.weights.w);
      s.weights.w_f = w.value("w_f", s.weights.w_f);
      s.weights.w_m = w.value("w_m", s.weights.w_m);
      s.weights.w_l = w.value("w_l", s.weights.w_l);
    }
    if (j.contains("planner")) {
      const auto& p = j["planner"];
      s.planner.v_max = p.value("v_max", s.planner.v_max);
      s.planner.a_max = p.value("a_max", s.planner.a_max);
      s.planner.w_max = p.value("w_max", s.planner.w_max);
      s.planner.order = p.value("order", s.planner.order);
      s.planner.clearance = p.value("clearance", s.planner.clearance);
      const std::string b = p.value("boundary", std::string("rest"));
      if (b != "rest" && b != "free") throw ConfigError("planner: boundary must be rest or free");
      s.planner.boundary = b == "rest" ? Boundary::kRest : Boundary::kFree;
    }
    if (j.contains("mpc")) {
      const auto& m = j["mpc"];
      s.mpc.N_h = m.value("horizon_high", s.mpc.N_h);
      s.mpc.N_l = m.value("horizon_low", s.mpc.N_l);
      s.mpc.Q_pos = m.value("Q_pos", s.mpc.Q_pos);
      s.mpc.Q_ori = m.value("Q_ori", s.mpc.Q_ori);
      s.mpc.R = m.value("R", s.mpc.R);
      s.mpc.feedback_gain = m.value("feedback_gain", s.mpc.feedback_gain);
    }
    if (j.contains("assist")) {
      const auto& a = j["assist"];
      s.assist.lambda = a.value("lambda", s.assist.lambda);
      s.assist.mu = a.value("mu", s.assist.mu);
      s.assist.alpha = a.value("alpha", s.assist.alpha);
      s.assist.degree = a.value("degree", s.assist.degree);
    }
    if (j.contains("cmaes")) {
      const auto& c = j["cmaes"];
      s.cmaes.population = c.value("population", s.cmaes.population);
      s.cmaes.sigma0 = c.value("sigma0", s.cmaes.sigma0);
      s.cmaes.generations = c.value("generations", s.cmaes.generations);
      s.cmaes.max_generations = c.value("max_generations", s.cmaes.max_generations);
      s.cmaes.sigma_stop = c.value("sigma_stop", s.cmaes.sigma_stop);
    }
    if (j.contains("ga")) {
      const auto& g = j["ga"];
      s.ga.population = g.value("population", s.ga.population);
      s.ga.generations = g.value("generations", s.ga.generations);
      s.ga.mutation = g.value("mutation", s.ga.mutation);
      s.ga.crossover = g.value("crossover", s.ga.crossover);
      s.ga.early_stop = g.value("early_stop", s.ga.early_stop);
      if (g.contains("grid")) {
        const auto& gr = g["grid"];
        s.ga.x = detail::grid_from_json(gr.value("x", nlohmann::json()), s.ga.x);
        s.ga.y = detail::grid_from_json(gr.value("y", nlohmann::json()), s.ga.y);
        s.ga.yaw = detail::grid_from_json(gr.value("yaw", nlohmann::json()), s.ga.yaw);
      }
    }
    if (j.contains("penalty")) {
      const auto& p = j["penalty"];
      s.penalty.base = p.value("base", s.penalty.base);
      s.penalty.time_cap = p.value("time_cap", s.penalty.time_cap);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario '" + s.name + "': " + e.what());
  }
  s.cmaes.seed = s.seed;
  s.ga.seed = s.seed;
  s.mpc.dt = s.dt;
  s.validate();
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  const nlohmann::json j = read_json_file(path);
  return scenario_from_json(j, std::filesystem::path(path).parent_path());
}

/// Echo of the effective settings, written into run manifests.
inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["catalog"] = s.catalog_ref;
  j["dt"] = s.dt;
  j["seed"] = s.seed;
  nlohmann::json wps = nlohmann::json::array();
  for (const auto& w : s.waypoints) {
    nlohmann::json o;
    if (!std::isnan(w.t)) o["t"] = w.t;
    o["p"] = detail::to_json(w.p);
    const Vec3 rpy = w.R.eulerAngles(2, 1, 0).reverse();
    o["rpy"] = detail::to_json(rpy);
    o["tol_p"] = detail::to_json(w.tol_p);
    o["tol_o"] = detail::to_json(w.tol_o);
    wps.push_back(o);
  }
  j["task"] = {{"waypoints", wps},
               {"hold", s.hold},
               {"high", detail::axes_to_json(s.partition.high)},
               {"low", detail::axes_to_json(s.partition.low)}};
  nlohmann::json obs = nlohmann::json::array();
  for (const auto& b : s.obstacles)
    obs.push_back({{"center", detail::to_json(b.center)}, {"size", detail::to_json(b.size)}});
  j["obstacles"] = obs;
  j["workspace"] = {{"lo", detail::to_json(s.workspace_lo)},
                    {"hi", detail::to_json(s.workspace_hi)},
                    {"resolution", s.sdf_resolution}};
  j["collision"] = {{"d_safe", s.d_safe}, {"samples", s.capsule_samples}};
  nlohmann::json free = nlohmann::json::array();
  for (int i = 0; i < 6; ++i)
    if (s.mount.free[i]) free.push_back(detail::kPoseNames[i]);
  j["mount"] = {{"lo", detail::to_json6(s.mount.lo)}, {"hi", detail::to_json6(s.mount.hi)},
                {"free", free}};
  j["payload"] = s.payload;
  j["external_wrench"] = detail::to_json6(s.wrench);
  j["shared_torque_limit"] = s.shared_torque_limit;
  if (!s.initial_guess.is_null()) j["initial_guess"] = s.initial_guess;
  j["weights"] = {{"w", s.weights.w}, {"w_f", s.weights.w_f}, {"w_m", s.weights.w_m},
                  {"w_l", s.weights.w_l}};
  j["planner"] = {{"v_max", s.planner.v_max}, {"a_max", s.planner.a_max},
                  {"w_max", s.planner.w_max}, {"order", s.planner.order},
                  {"clearance", s.planner.clearance},
                  {"boundary", s.planner.boundary == Boundary::kRest ? "rest" : "free"}};
  j["mpc"] = {{"horizon_high", s.mpc.N_h}, {"horizon_low", s.mpc.N_l}, {"Q_pos", s.mpc.Q_pos},
              {"Q_ori", s.mpc.Q_ori}, {"R", s.mpc.R}, {"feedback_gain", s.mpc.feedback_gain}};
  j["assist"] = {{"lambda", s.assist.lambda}, {"mu", s.assist.mu}, {"alpha", s.assist.alpha},
                 {"degree", s.assist.degree}};
  j["cmaes"] = {{"population", s.cmaes.population}, {"sigma0", s.cmaes.sigma0},
                {"generations", s.cmaes.generations},
                {"max_generations", s.cmaes.max_generations},
                {"sigma_stop", s.cmaes.sigma_stop}};
  j["ga"] = {{"population", s.ga.population}, {"generations", s.ga.generations},
             {"mutation", s.ga.mutation}, {"crossover", s.ga.crossover},
             {"early_stop", s.ga.early_stop},
             {"grid", {{"x", {s.ga.x.lo, s.ga.x.hi, s.ga.x.step}},
                       {"y", {s.ga.y.lo, s.ga.y.hi, s.ga.y.step}},
                       {"yaw", {s.ga.yaw.lo, s.ga.yaw.hi, s.ga.yaw.step}}}}};
  j["penalty"] = {{"base", s.penalty.base}, {"time_cap", s.penalty.time_cap}};
  return j;
}

}  // namespace mcd
