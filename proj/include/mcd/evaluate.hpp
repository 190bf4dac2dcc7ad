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

// Planner-in-the-loop design evaluation: decode, assemble, plan, check and
// score one candidate design.

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "mcd/scenario.hpp"

namespace mcd {

/// A concrete design: module order, Y port order and mount pose.
struct Candidate {
  std::vector<int> C_v;
  std::array<int, 2> S = {1, 2};
  Vec6 pose = Vec6::Zero();

  bool operator==(const Candidate&) const = default;
};

/// Maps the normalized search vector [M | h1 h2 | free pose components] to
/// candidates.
struct DesignLayout {
  int m = 0;
  MountRange mount;

  int size() const { return m + 3 + 2 + mount.free_count(); }

  Candidate decode(const VecX& x_in) const {
    if (x_in.size() != size())
      throw DimensionError("design vector has " + std::to_string(x_in.size()) +
                           " entries, expected " + std::to_string(size()));
    const VecX x = x_in.cwiseMax(0.0).cwiseMin(1.0);
    Candidate c;
    c.C_v = sort_map(x.head(m + 3));
    c.S = mount_map(x[m + 3], x[m + 4]);
    c.pose = mount.lo;
    int k = m + 5;
    for (int i = 0; i < 6; ++i)
      if (mount.free[i]) {
        c.pose[i] = mount.lo[i] + x[k] * (mount.hi[i] - mount.lo[i]);
        ++k;
      }
    return c;
  }

  /// A vector that decodes to `c` (pose clamped into the range).
  VecX encode(const Candidate& c) const {
    if (static_cast<int>(c.C_v.size()) != m + 3)
      throw DimensionError("candidate order must list all " + std::to_string(m + 3) + " ids");
    VecX x(size());
    const int n = m + 3;
    for (int k = 0; k < n; ++k) x[c.C_v[k] - 1] = 1.0 - (k + 0.5) / n;
    x[m + 3] = c.S[0] == 1 ? 0.75 : 0.25;
    x[m + 4] = c.S[0] == 1 ? 0.25 : 0.75;
    int k = m + 5;
    for (int i = 0; i < 6; ++i)
      if (mount.free[i]) {
        const double span = mount.hi[i] - mount.lo[i];
        x[k++] = span > 0 ? std::clamp((c.pose[i] - mount.lo[i]) / span, 0.0, 1.0) : 0.0;
      }
    return x;
  }
};

/// Scenario plus everything derived from it once: the task-space reference,
/// the distance field and the tolerance profile.
struct PreparedScenario {
  Scenario sc;
  ReferencePlan reference;
  SDFGrid sdf;
  BoundProfile bounds;
  DesignLayout layout;
};

inline PreparedScenario prepare(const Scenario& sc) {
  sc.validate();
  PreparedScenario p;
  p.sc = sc;
  p.sc.mpc.dt = sc.dt;
  std::vector<Waypoint> wps = sc.waypoints;
  if (wps.size() == 1) {
    // A single target is held for `hold` seconds.
    Waypoint w = wps.front();
    if (std::isnan(wps[0].t)) wps[0].t = 0.0;
    w.t = wps[0].t + sc.hold;
    wps.push_back(w);
  }
  p.reference = plan_reference(wps, sc.planner, sc.obstacles, sc.dt);
  if (!p.reference.feasible)
    throw ConfigError("scenario '" + sc.name + "': task trajectory infeasible: " +
                      p.reference.reason);
  p.sdf = build_sdf(sc.obstacles, sc.workspace_lo, sc.workspace_hi, sc.sdf_resolution);
  std::vector<ToleranceAnchor> anchors;
  for (const auto& w : p.reference.reference.waypoints) {
    ToleranceAnchor a;
    a.t = w.t;
    a.xi << w.tol_p, w.tol_o;
    anchors.push_back(a);
  }
  p.bounds = BoundProfile(anchors);
  p.layout.m = sc.catalog.m();
  p.layout.mount = sc.mount;
  return p;
}

struct CostBreakdown {
  double E_track = 0.0, E_tra = 0.0, E_col = 0.0, E_dyn = 0.0, E_red = 0.0;
  double F_eff = 0.0;
  double M_man = 0.0;
  int modules = 0;  // len(C_v): physical modules before the end effector
  int delta = 0;
  double E_total = 0.0;
  double tracking_mse = 0.0;  // mean squared task-axis error, metric only
  std::string stage = "decode";  // last stage reached
  std::string reason;            // first failure, empty when accepted
};

/// Everything computed for one design; trajectories are whole-body joint
/// vectors after assist optimization.
struct Evaluation {
  Candidate candidate;
  SegmentedMorphology seg;
  bool assembled = false;
  KinematicModel model;
  HMPCResult plan;
  bool assist_active = false;
  int assist_stalled = 0;
  std::vector<double> t;
  std::vector<VecX> q, qd, qdd;
  TorqueCheck torque;
  CollisionReport self_collision, env_collision;
  int self_collision_step = -1, env_collision_step = -1;
  TrackingCheck tracking;
  CostBreakdown cost;
  double seconds = 0.0;
};

/// Same morphology without its assist branch; the Y splitter stays.
inline SegmentedMorphology without_assist(SegmentedMorphology seg) {
  seg.assist_branch.clear();
  seg.assist_port = 0;
  seg.is_bi_branch = false;
  return seg;
}

namespace detail {

inline void finish_cost(CostBreakdown& c, const CostWeights& w) {
  const bool ok = c.E_track == 0 && c.E_tra == 0 && c.E_col == 0 && c.E_dyn == 0 && c.E_red == 0;
  c.delta = ok ? 1 : 0;
  if (ok) {
    c.E_total = -w.w * std::exp(-w.w_f * c.F_eff + w.w_m * c.M_man) + w.w_l * c.modules;
  } else {
    c.E_total = c.E_track + c.E_tra + c.E_col + c.E_dyn + c.E_red + w.w_l * c.modules;
  }
}

}  // namespace detail

/// Evaluates a segmented morphology at a mount pose. Failures never throw;
/// they become penalties. Classes a failure prevents from being checked
/// count as violated at the base penalty so that progress through the
/// pipeline ranks better.
inline Evaluation evaluate_morphology(const SegmentedMorphology& seg, const Vec6& pose,
                                      const PreparedScenario& ps) {
  const auto start = std::chrono::steady_clock::now();
  const Scenario& sc = ps.sc;
  const PenaltyConfig& pen = sc.penalty;
  Evaluation ev;
  ev.seg = seg;
  ev.candidate.pose = pose;
  CostBreakdown& c = ev.cost;
  c.modules = seg.feasible ? module_count(seg) : 0;
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  auto done = [&](Evaluation& e) -> Evaluation& {
    detail::finish_cost(e.cost, sc.weights);
    e.seconds = elapsed();
    return e;
  };

  // Structure and redundancy.
  const int n_high = sc.partition.high.size();
  const int n_low = sc.partition.low.size();
  Assembly asmb;
  if (seg.feasible) {
    MountedPose mp;
    mp.P = pose;
    asmb = assemble(seg, mp, sc.catalog, sc.payload);
  } else {
    asmb.feasible = false;
    asmb.reason = seg.reason;
  }
  if (!asmb.feasible) {
    c.E_red = pen.base + pen.kappa_red * (n_high + 1);
    c.E_tra = c.E_track = c.E_col = c.E_dyn = pen.base;
    c.reason = "structure: " + asmb.reason;
    return done(ev);
  }
  ev.assembled = true;
  ev.model = std::move(asmb.model);
  KinematicModel& model = ev.model;
  if (sc.shared_torque_limit > 0)
    for (auto& j : model.joints)
      if (j.branch == Branch::kShared) j.torque_limit = std::min(j.torque_limit, sc.shared_torque_limit);
  c.stage = "redundancy";
  if (const std::string why = redundancy_violation(model, sc.partition); !why.empty()) {
    const int n = model.main_dof();
    const int deficit = std::max({n_high - n + 1, n_low - n + 1, 1});
    c.E_red = pen.base + pen.kappa_red * deficit;
    c.E_tra = c.E_track = c.E_col = c.E_dyn = pen.base;
    c.reason = "redundancy: " + why;
    return done(ev);
  }

  // Motion planning.
  c.stage = "plan";
  const ReferenceTrajectory& ref = ps.reference.reference;
  ev.plan = hmpc_plan(model, ref, sc.partition, sc.mpc);
  if (!ev.plan.feasible) {
    const double steps = static_cast<double>(ref.size());
    const double amount = ev.plan.failed_step <= 0
                              ? 1.0 + std::min(std::log1p(ev.plan.ik_error), 20.0)
                              : 1.0 - ev.plan.failed_step / steps;
    c.E_tra = pen.base + pen.kappa_tra * amount;
    c.E_track = c.E_col = c.E_dyn = pen.base;
    c.reason = "plan: " + ev.plan.reason;
    return done(ev);
  }
  if (elapsed() > pen.time_cap) {
    c.E_tra = pen.base + pen.kappa_tra;
    c.E_track = c.E_col = c.E_dyn = pen.base;
    c.reason = "plan: time cap exceeded";
    return done(ev);
  }

  // Tracking against the tolerance profile on the high-priority axes.
  c.stage = "checks";
  ev.t = ev.plan.t;
  ev.tracking = check_tracking(ev.plan.t, ev.plan.error, ps.bounds, sc.partition.high);
  const AxisSet task = sc.partition.high | sc.partition.low;
  double mse = 0.0;
  for (const auto& e : ev.plan.error)
    for (int ax = 0; ax < 6; ++ax)
      if (task.contains(ax)) mse += e[ax] * e[ax];
  c.tracking_mse = mse / static_cast<double>(ev.plan.error.size());
  if (!ev.tracking.pass) {
    c.E_track = pen.base + pen.kappa_track * std::max(ev.tracking.worst_ratio - 1.0, 0.0);
    if (c.reason.empty())
      c.reason = "tracking: bound exceeded at sample " +
                 std::to_string(ev.tracking.first_violation);
  }

  // Assist optimization and whole-body torques.
  if (model.is_bi_branch() && model.assist_dof() > 0) {
    AssistProblem ap;
    ap.model = &model;
    ap.dt = sc.dt;
    ap.t = ev.plan.t;
    ap.q = ev.plan.q;
    ap.qd = ev.plan.qd;
    ap.qdd = ev.plan.qdd;
    ap.q0 = VecX::Zero(model.assist_dof());
    ap.F_ext = sc.wrench;
    ap.opt = sc.assist;
    AssistResult ar = optimize_assist(ap);
    ev.assist_active = ar.active;
    ev.assist_stalled = ar.stalled_steps;
    ev.q = std::move(ar.q);
    ev.qd = std::move(ar.qd);
    ev.qdd = std::move(ar.qdd);
    ev.torque = std::move(ar.check);
  } else {
    ev.q = ev.plan.q;
    ev.qd = ev.plan.qd;
    ev.qdd = ev.plan.qdd;
    ev.torque = recheck(model, ev.q, ev.qd, ev.qdd, sc.wrench, sc.assist.gravity);
  }
  if (!ev.torque.report.feasible) {
    c.E_dyn = pen.base + pen.kappa_dyn * ev.torque.report.worst_excess;
    if (c.reason.empty()) c.reason = "torque: limit exceeded";
  }

  // Collisions along the final joint trajectory.
  double penetration = 0.0;
  for (std::size_t i = 0; i < ev.q.size(); ++i) {
    const auto caps = capsules_from_state(model, ev.q[i]);
    const CollisionReport self = self_collision_check(caps, model.adjacent, sc.d_safe);
    const CollisionReport env =
        environment_clearance(caps, ps.sdf, sc.capsule_samples, sc.d_safe);
    if (self.clearance < ev.self_collision.clearance) {
      ev.self_collision = self;
      ev.self_collision_step = static_cast<int>(i);
    }
    if (env.clearance < ev.env_collision.clearance) {
      ev.env_collision = env;
      ev.env_collision_step = static_cast<int>(i);
    }
  }
  if (!ev.self_collision.pass) penetration += -ev.self_collision.clearance;
  if (!ev.env_collision.pass) penetration += -ev.env_collision.clearance;
  if (!ev.self_collision.pass || !ev.env_collision.pass) {
    c.E_col = pen.base + pen.kappa_col * penetration;
    if (c.reason.empty())
      c.reason = !ev.self_collision.pass ? "collision: self contact" : "collision: environment";
  }

  c.F_eff = effort_metric(ev.torque.profile);
  c.M_man = manipulability_metric(model, ev.q, sc.partition.high);
  c.stage = "done";
  if (elapsed() > pen.time_cap && c.E_tra == 0) {
    c.E_tra = pen.base + pen.kappa_tra;
    if (c.reason.empty()) c.reason = "time cap exceeded";
  }
  return done(ev);
}

inline Evaluation evaluate_candidate(const Candidate& cand, const PreparedScenario& ps) {
  const SegmentedMorphology seg = segment(cand.C_v, cand.S, ps.sc.catalog);
  Evaluation ev = evaluate_morphology(seg, cand.pose, ps);
  ev.candidate = cand;
  return ev;
}

inline Evaluation evaluate_design(const VecX& x, const PreparedScenario& ps) {
  return evaluate_candidate(ps.layout.decode(x), ps);
}

}  // namespace mcd
