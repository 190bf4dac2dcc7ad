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

// Assembled kinematic/dynamic tree and its forward/differential kinematics.

#include <string>
#include <vector>

#include "mcd/catalog.hpp"
#include "mcd/so3.hpp"
#include "mcd/types.hpp"

namespace mcd {

enum class Branch { kShared, kMain, kAssist };

inline const char* to_string(Branch b) {
  switch (b) {
    case Branch::kShared: return "shared";
    case Branch::kMain: return "main";
    case Branch::kAssist: return "assist";
  }
  return "?";
}

/// One rigid body of the tree. Its frame sits on the joint axis for joint
/// modules and on the input flange otherwise. Pose relative to the parent's
/// frame is T_parent * Rot(axis, q).
struct Body {
  int parent = -1;  // -1: attached to the base frame
  Pose T_parent = Pose::Identity();
  int joint = -1;  // joint index or -1
  Vec3 axis = Vec3::UnitZ();
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();  // about com, body frame
  int module_id = 0;
  ModuleKind kind = ModuleKind::kPassiveLink;
  Branch branch = Branch::kShared;
  std::vector<Pose> ports;  // output flange frames, body frame
  Vec3 flange_in = Vec3::Zero();  // input flange, body frame
  double radius = 0.0;
};

struct JointInfo {
  int body = -1;
  Branch branch = Branch::kShared;
  double q_min = 0.0, q_max = 0.0;
  double v_max = 0.0, a_max = 0.0;
  double torque_limit = 0.0;
};

/// Capsule axis endpoints, each fixed in some body frame (-1: base frame).
/// The axis is inset by the radius at both ends when evaluated.
struct CapsuleDef {
  int body_a = -1;
  Vec3 a = Vec3::Zero();
  int body_b = -1;
  Vec3 b = Vec3::Zero();
  double radius = 0.0;
  int module_id = 0;
};

class KinematicModel {
 public:
  Pose base = Pose::Identity();
  std::vector<Body> bodies;  // topological: parent index < own index
  std::vector<JointInfo> joints;
  int ee_body = -1;
  Pose ee_offset = Pose::Identity();  // EE tool frame in ee_body frame
  std::vector<CapsuleDef> capsules;
  std::vector<std::pair<int, int>> adjacent;  // exempt capsule index pairs
  double payload = 0.0;  // point mass at the EE frame, kg
  bool has_assist_bodies = false;

  int dof() const { return static_cast<int>(joints.size()); }
  int dof(Branch b) const {
    int n = 0;
    for (const auto& j : joints) n += j.branch == b;
    return n;
  }
  /// Joints the EE depends on: shared + main.
  int main_dof() const { return dof(Branch::kShared) + dof(Branch::kMain); }
  int assist_dof() const { return dof(Branch::kAssist); }
  bool is_bi_branch() const { return has_assist_bodies; }

  std::vector<int> joint_indices(Branch b) const {
    std::vector<int> out;
    for (int i = 0; i < dof(); ++i)
      if (joints[i].branch == b) out.push_back(i);
    return out;
  }
  std::vector<int> main_joint_indices() const {
    std::vector<int> out;
    for (int i = 0; i < dof(); ++i)
      if (joints[i].branch != Branch::kAssist) out.push_back(i);
    return out;
  }

  VecX q_lower() const { return collect([](const JointInfo& j) { return j.q_min; }); }
  VecX q_upper() const { return collect([](const JointInfo& j) { return j.q_max; }); }
  VecX v_limit() const { return collect([](const JointInfo& j) { return j.v_max; }); }
  VecX a_limit() const { return collect([](const JointInfo& j) { return j.a_max; }); }
  VecX torque_limits() const {
    return collect([](const JointInfo& j) { return j.torque_limit; });
  }

  void check_dim(const VecX& q, const char* what) const {
    if (q.size() != dof())
      throw DimensionError(std::string(what) + ": expected " + std::to_string(dof()) +
                           " entries, got " + std::to_string(q.size()));
  }

  /// Structural equality: same tree, modules, transforms (to 1e-12) and
  /// joint data.
  bool same_structure(const KinematicModel& o) const;

 private:
  template <class F>
  VecX collect(F f) const {
    VecX v(dof());
    for (int i = 0; i < dof(); ++i) v[i] = f(joints[i]);
    return v;
  }
};

inline bool KinematicModel::same_structure(const KinematicModel& o) const {
  auto close = [](const Pose& a, const Pose& b) {
    return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff() < 1e-12;
  };
  if (bodies.size() != o.bodies.size() || joints.size() != o.joints.size()) return false;
  if (!close(base, o.base) || ee_body != o.ee_body || !close(ee_offset, o.ee_offset))
    return false;
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    const Body& a = bodies[i];
    const Body& b = o.bodies[i];
    if (a.parent != b.parent || a.joint != b.joint || a.kind != b.kind ||
        a.branch != b.branch || a.mass != b.mass || !close(a.T_parent, b.T_parent) ||
        (a.axis - b.axis).norm() > 1e-12 || (a.com - b.com).norm() > 1e-12 ||
        a.ports.size() != b.ports.size())
      return false;
    // Module ids may differ between catalog duplicates; compare the physics.
    if ((a.inertia - b.inertia).norm() > 1e-12) return false;
  }
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const JointInfo& a = joints[i];
    const JointInfo& b = o.joints[i];
    if (a.body != b.body || a.branch != b.branch || a.torque_limit != b.torque_limit ||
        a.q_min != b.q_min || a.q_max != b.q_max)
      return false;
  }
  if (capsules.size() != o.capsules.size()) return false;
  for (std::size_t i = 0; i < capsules.size(); ++i) {
    const CapsuleDef& a = capsules[i];
    const CapsuleDef& b = o.capsules[i];
    if (a.body_a != b.body_a || a.body_b != b.body_b || a.radius != b.radius ||
        (a.a - b.a).norm() > 1e-12 || (a.b - b.b).norm() > 1e-12)
      return false;
  }
  return adjacent == o.adjacent;
}

}  // namespace mcd
