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

// Forward and differential kinematics over the body tree.

#include <algorithm>
#include <vector>

#include "mcd/model.hpp"

namespace mcd {

struct EEPose {
  Vec3 p = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  Eigen::Vector4d quat() const { return so3::quat_from_matrix(R); }
};

struct FKResult {
  std::vector<Pose> bodies;  // world pose of every body frame
  EEPose ee;
};

inline Pose joint_rotation(const Vec3& axis, double q) {
  Pose T = Pose::Identity();
  T.linear() = Eigen::AngleAxisd(q, axis).toRotationMatrix();
  return T;
}

inline FKResult forward_kinematics(const KinematicModel& model, const VecX& q) {
  model.check_dim(q, "forward_kinematics");
  FKResult out;
  out.bodies.resize(model.bodies.size());
  for (std::size_t i = 0; i < model.bodies.size(); ++i) {
    const Body& b = model.bodies[i];
    const Pose& parent = b.parent < 0 ? model.base : out.bodies[b.parent];
    Pose T = parent * b.T_parent;
    if (b.joint >= 0) T = T * joint_rotation(b.axis, q[b.joint]);
    out.bodies[i] = T;
  }
  if (model.ee_body >= 0) {
    const Pose ee = out.bodies[model.ee_body] * model.ee_offset;
    out.ee.p = ee.translation();
    out.ee.R = ee.linear();
  } else {
    out.ee.p = model.base.translation();
    out.ee.R = model.base.linear();
  }
  return out;
}

/// Joint indices on the path from the base to `body`, base first.
inline std::vector<int> ancestor_joints(const KinematicModel& model, int body) {
  std::vector<int> out;
  for (int b = body; b >= 0; b = model.bodies[b].parent)
    if (model.bodies[b].joint >= 0) out.push_back(b);
  std::reverse(out.begin(), out.end());
  return out;  // body indices carrying joints
}

/// Geometric Jacobian of the main-branch EE, world frame, rows [v; omega].
inline Mat6X jacobian(const KinematicModel& model, const VecX& q, const FKResult& fk) {
  Mat6X J = Mat6X::Zero(6, model.dof());
  if (model.ee_body < 0) return J;
  for (int b : ancestor_joints(model, model.ee_body)) {
    const Body& body = model.bodies[b];
    const Vec3 z = fk.bodies[b].linear() * body.axis;
    const Vec3 o = fk.bodies[b].translation();
    J.block<3, 1>(0, body.joint) = z.cross(fk.ee.p - o);
    J.block<3, 1>(3, body.joint) = z;
  }
  (void)q;
  return J;
}

inline Mat6X jacobian(const KinematicModel& model, const VecX& q) {
  return jacobian(model, q, forward_kinematics(model, q));
}

/// Time derivative of the Jacobian along (q, qd).
inline Mat6X jacobian_dot(const KinematicModel& model, const VecX& q, const VecX& qd,
                          const FKResult& fk) {
  model.check_dim(qd, "jacobian_dot");
  const std::size_t nb = model.bodies.size();
  std::vector<Vec3> omega(nb), vel(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    const Body& b = model.bodies[i];
    Vec3 w_parent = Vec3::Zero(), v_parent = Vec3::Zero(), o_parent = model.base.translation();
    if (b.parent >= 0) {
      w_parent = omega[b.parent];
      v_parent = vel[b.parent];
      o_parent = fk.bodies[b.parent].translation();
    }
    const Vec3 o = fk.bodies[i].translation();
    vel[i] = v_parent + w_parent.cross(o - o_parent);
    omega[i] = w_parent;
    if (b.joint >= 0) omega[i] += fk.bodies[i].linear() * b.axis * qd[b.joint];
  }
  Mat6X Jd = Mat6X::Zero(6, model.dof());
  if (model.ee_body < 0) return Jd;
  const Vec3 o_ee = fk.bodies[model.ee_body].translation();
  const Vec3 v_ee = vel[model.ee_body] + omega[model.ee_body].cross(fk.ee.p - o_ee);
  for (int b : ancestor_joints(model, model.ee_body)) {
    const Body& body = model.bodies[b];
    const Vec3 z = fk.bodies[b].linear() * body.axis;
    const Vec3 zd = omega[b].cross(z);
    const Vec3 o = fk.bodies[b].translation();
    Jd.block<3, 1>(0, body.joint) = zd.cross(fk.ee.p - o) + z.cross(v_ee - vel[b]);
    Jd.block<3, 1>(3, body.joint) = zd;
  }
  (void)q;
  return Jd;
}

inline Mat6X jacobian_dot(const KinematicModel& model, const VecX& q, const VecX& qd) {
  return jacobian_dot(model, q, qd, forward_kinematics(model, q));
}

/// Rows of J for the listed task axes, ascending axis order.
inline MatX sub_jacobian(const MatX& J, AxisSet axes) {
  if (axes.empty()) throw ConfigError("sub_jacobian: empty axis set");
  if (J.rows() != 6) throw DimensionError("sub_jacobian: J must have 6 rows");
  int n = 0;
  const auto idx = axes.indices(&n);
  MatX out(n, J.cols());
  for (int r = 0; r < n; ++r) out.row(r) = J.row(idx[r]);
  return out;
}

/// Selection matrix S with S * x = x restricted to the listed axes.
inline MatX selection_matrix(AxisSet axes) {
  int n = 0;
  const auto idx = axes.indices(&n);
  MatX S = MatX::Zero(n, 6);
  for (int r = 0; r < n; ++r) S(r, idx[r]) = 1.0;
  return S;
}

}  // namespace mcd
