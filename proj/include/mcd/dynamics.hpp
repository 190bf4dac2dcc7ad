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

// Rigid-body dynamics over the body tree: recursive Newton-Euler in the
// world frame, mass matrix by unit-acceleration probes, torque checks and
// the effort/manipulability metrics.

#include <cmath>
#include <vector>

#include "mcd/kinematics.hpp"

namespace mcd {

struct DynamicsState {
  VecX q, qd, qdd;
  Vec6 F_ext = Vec6::Zero();  // wrench on the EE by the environment, world frame
};

/// Recursive Newton-Euler. `gravity` toggles the base acceleration that
/// models g = 9.81 m/s^2 along world -z. The payload is a point mass at the
/// EE frame. No external wrench here.
inline VecX rnea(const KinematicModel& model, const VecX& q, const VecX& qd, const VecX& qdd,
                 bool gravity, const FKResult& fk) {
  model.check_dim(qd, "rnea qd");
  model.check_dim(qdd, "rnea qdd");
  const std::size_t nb = model.bodies.size();
  std::vector<Vec3> w(nb), wd(nb), a(nb);  // a: linear acc of body origin
  std::vector<Vec3> f(nb), n(nb);          // force and moment about body origin
  const Vec3 a0 = gravity ? Vec3(0.0, 0.0, kGravity) : Vec3::Zero();
  for (std::size_t i = 0; i < nb; ++i) {
    const Body& b = model.bodies[i];
    Vec3 wp = Vec3::Zero(), wdp = Vec3::Zero(), ap = a0;
    Vec3 op = model.base.translation();
    if (b.parent >= 0) {
      wp = w[b.parent];
      wdp = wd[b.parent];
      ap = a[b.parent];
      op = fk.bodies[b.parent].translation();
    }
    const Vec3 r = fk.bodies[i].translation() - op;
    a[i] = ap + wdp.cross(r) + wp.cross(wp.cross(r));
    w[i] = wp;
    wd[i] = wdp;
    if (b.joint >= 0) {
      const Vec3 z = fk.bodies[i].linear() * b.axis;
      w[i] += z * qd[b.joint];
      wd[i] += z * qdd[b.joint] + wp.cross(z * qd[b.joint]);
    }
  }
  for (std::size_t i = 0; i < nb; ++i) {
    const Body& b = model.bodies[i];
    const Mat3& R = fk.bodies[i].linear();
    const Vec3 c = R * b.com;
    const Vec3 ac = a[i] + wd[i].cross(c) + w[i].cross(w[i].cross(c));
    const Mat3 I = R * b.inertia * R.transpose();
    f[i] = b.mass * ac;
    n[i] = I * wd[i] + w[i].cross(I * w[i]) + c.cross(f[i]);
    if (static_cast<int>(i) == model.ee_body && model.payload > 0.0) {
      const Vec3 pe = R * model.ee_offset.translation();
      const Vec3 ape = a[i] + wd[i].cross(pe) + w[i].cross(w[i].cross(pe));
      const Vec3 fp = model.payload * ape;
      f[i] += fp;
      n[i] += pe.cross(fp);
    }
  }
  VecX tau = VecX::Zero(model.dof());
  for (int i = static_cast<int>(nb) - 1; i >= 0; --i) {
    const Body& b = model.bodies[i];
    if (b.joint >= 0) tau[b.joint] = (fk.bodies[i].linear() * b.axis).dot(n[i]);
    if (b.parent >= 0) {
      const Vec3 r = fk.bodies[i].translation() - fk.bodies[b.parent].translation();
      f[b.parent] += f[i];
      n[b.parent] += n[i] + r.cross(f[i]);
    }
  }
  (void)q;
  return tau;
}

inline VecX rnea(const KinematicModel& model, const VecX& q, const VecX& qd, const VecX& qdd,
                 bool gravity = true) {
  return rnea(model, q, qd, qdd, gravity, forward_kinematics(model, q));
}

inline MatX mass_matrix(const KinematicModel& model, const VecX& q, const FKResult& fk) {
  const int n = model.dof();
  MatX M(n, n);
  const VecX zero = VecX::Zero(n);
  for (int j = 0; j < n; ++j) M.col(j) = rnea(model, q, zero, VecX::Unit(n, j), false, fk);
  return 0.5 * (M + M.transpose());
}

inline MatX mass_matrix(const KinematicModel& model, const VecX& q) {
  return mass_matrix(model, q, forward_kinematics(model, q));
}

struct BiasTerms {
  VecX coriolis;  // C(q, qd) qd
  VecX gravity;   // G(q)
};

inline BiasTerms bias_terms(const KinematicModel& model, const VecX& q, const VecX& qd) {
  const FKResult fk = forward_kinematics(model, q);
  const VecX zero = VecX::Zero(model.dof());
  return {rnea(model, q, qd, zero, false, fk), rnea(model, q, zero, zero, true, fk)};
}

/// tau = M qdd + C qd + G - J^T F_ext.
inline VecX inverse_dynamics(const KinematicModel& model, const DynamicsState& s) {
  const FKResult fk = forward_kinematics(model, s.q);
  VecX tau = rnea(model, s.q, s.qd, s.qdd, true, fk);
  if (!s.F_ext.isZero(0.0)) tau -= jacobian(model, s.q, fk).transpose() * s.F_ext;
  return tau;
}

struct TorqueProfile {
  std::vector<VecX> tau;  // per step
  VecX tau_max;
};

struct TorqueReport {
  bool feasible = true;
  VecX max_abs;  // per joint
  std::vector<std::pair<int, int>> violations;  // (step, joint)
  double worst_excess = 0.0;  // max over entries of |tau| - tau_max, clipped at 0
};

inline TorqueReport torque_feasible(const TorqueProfile& p) {
  TorqueReport r;
  const int n = static_cast<int>(p.tau_max.size());
  r.max_abs = VecX::Zero(n);
  for (std::size_t i = 0; i < p.tau.size(); ++i) {
    if (p.tau[i].size() != n) throw DimensionError("torque profile: step width mismatch");
    for (int j = 0; j < n; ++j) {
      const double t = std::abs(p.tau[i][j]);
      r.max_abs[j] = std::max(r.max_abs[j], t);
      if (t > p.tau_max[j]) {
        r.feasible = false;
        r.violations.emplace_back(static_cast<int>(i), j);
        r.worst_excess = std::max(r.worst_excess, t - p.tau_max[j]);
      }
    }
  }
  return r;
}

/// Mean over steps of the summed squared joint torques.
inline double effort_metric(const TorqueProfile& p) {
  if (p.tau.empty()) throw Error("effort_metric: empty profile");
  double s = 0.0;
  for (const auto& t : p.tau) s += t.squaredNorm();
  return s / static_cast<double>(p.tau.size());
}

/// Mean over the trajectory of det(J_sub J_sub^T) for the EE Jacobian.
inline double manipulability_metric(const KinematicModel& model, const std::vector<VecX>& qs,
                                    AxisSet axes) {
  if (qs.empty()) throw Error("manipulability_metric: empty trajectory");
  double s = 0.0;
  for (const auto& q : qs) {
    const MatX Js = sub_jacobian(jacobian(model, q), axes);
    s += (Js * Js.transpose()).determinant();
  }
  return s / static_cast<double>(qs.size());
}

}  // namespace mcd
