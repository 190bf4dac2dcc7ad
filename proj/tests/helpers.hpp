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

// Model builders shared by the tests.

#include <random>

#include "mcd/morphology.hpp"

namespace mcd::testing {

inline Mat3 random_rotation(std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector4d q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return Quat(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

inline Vec3 random_unit(std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Vec3(n(rng), n(rng), n(rng)).normalized();
}

inline Mat3 random_inertia(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.01, 0.1);
  const Mat3 R = random_rotation(rng);
  return R * Vec3(u(rng), u(rng), u(rng)).asDiagonal() * R.transpose();
}

/// Serial chain of n revolute bodies with random geometry and inertia.
inline KinematicModel random_chain(std::mt19937& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> len(0.1, 0.4);
  std::uniform_real_distribution<double> mass(0.5, 3.0);
  KinematicModel m;
  m.base.linear() = random_rotation(rng);
  m.base.translation() = Vec3(u(rng), u(rng), u(rng));
  for (int i = 0; i < n; ++i) {
    Body b;
    b.parent = i - 1;
    b.T_parent.linear() = random_rotation(rng);
    b.T_parent.translation() = len(rng) * random_unit(rng);
    b.joint = i;
    b.axis = random_unit(rng);
    b.mass = mass(rng);
    b.com = 0.1 * Vec3(u(rng), u(rng), u(rng));
    b.inertia = random_inertia(rng);
    b.ports = {Pose::Identity()};
    m.bodies.push_back(b);
    JointInfo j;
    j.body = i;
    j.branch = Branch::kMain;
    j.q_min = -2.4;
    j.q_max = 2.4;
    j.v_max = 2.0;
    j.a_max = 0.5;
    j.torque_limit = 100.0;
    m.joints.push_back(j);
  }
  m.ee_body = n - 1;
  m.ee_offset.translation() = Vec3(0.1, 0.05, 0.2);
  return m;
}

/// Random decodable morphology over the default catalog with at least one
/// main-branch joint.
inline KinematicModel random_catalog_model(std::mt19937& rng, bool want_bi) {
  const Catalog cat = default_catalog();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int tries = 0; tries < 100000; ++tries) {
    VecX M(cat.encoding_size());
    for (int i = 0; i < M.size(); ++i) M[i] = u(rng);
    const Decoded d = decode(M, u(rng), u(rng), cat);
    if (!d.seg.feasible || d.seg.is_bi_branch != want_bi) continue;
    MountedPose pose;
    pose.P << u(rng) - 0.5, u(rng) - 0.5, 0.0, 0.0, 0.0, 2.0 * M_PI * u(rng);
    Assembly a = assemble(d.seg, pose, cat);
    if (a.feasible) return a.model;
  }
  throw Error("no random model found");
}

/// Point-mass pendulum of mass m at distance l; q = 0 is horizontal along
/// world +x and positive q raises the mass.
inline KinematicModel pendulum(double m, double l) {
  KinematicModel model;
  Body b;
  b.joint = 0;
  b.axis = -Vec3::UnitY();
  b.mass = m;
  b.com = Vec3(l, 0.0, 0.0);
  model.bodies.push_back(b);
  JointInfo j;
  j.body = 0;
  j.branch = Branch::kMain;
  j.q_min = -3.0;
  j.q_max = 3.0;
  j.v_max = 2.0;
  j.a_max = 1.0;
  j.torque_limit = 100.0;
  model.joints.push_back(j);
  model.ee_body = 0;
  model.ee_offset.translation() = Vec3(l, 0.0, 0.0);
  return model;
}

/// Planar chain in the world x-y plane with joints about world z.
inline KinematicModel planar_chain(const std::vector<double>& lengths, double mass = 1.0) {
  KinematicModel model;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    Body b;
    b.parent = static_cast<int>(i) - 1;
    if (i > 0) b.T_parent.translation() = Vec3(lengths[i - 1], 0.0, 0.0);
    b.joint = static_cast<int>(i);
    b.axis = Vec3::UnitZ();
    b.mass = mass;
    b.com = Vec3(0.5 * lengths[i], 0.0, 0.0);
    b.inertia = Vec3(1e-3, 1e-3, 1e-3).asDiagonal();
    b.ports = {Pose::Identity()};
    model.bodies.push_back(b);
    JointInfo j;
    j.body = static_cast<int>(i);
    j.branch = Branch::kMain;
    j.q_min = -3.0;
    j.q_max = 3.0;
    j.v_max = 2.0;
    j.a_max = 1.0;
    j.torque_limit = 100.0;
    model.joints.push_back(j);
  }
  model.ee_body = static_cast<int>(lengths.size()) - 1;
  model.ee_offset.translation() = Vec3(lengths.back(), 0.0, 0.0);
  return model;
}

/// Spatial arm with alternating z / y joint axes and links along z, using
/// the catalog joint limits. Straight up at q = 0.
inline KinematicModel arm(int n, double link = 0.25) {
  static const int pattern[7] = {2, 1, 1, 2, 1, 2, 1};
  const JointLimits lim;
  KinematicModel model;
  for (int i = 0; i < n; ++i) {
    Body b;
    b.parent = i - 1;
    b.T_parent.translation() = Vec3(0.0, 0.0, i == 0 ? 0.1 : link);
    b.joint = i;
    b.axis = Vec3::Unit(pattern[i % 7]);
    b.mass = 1.0;
    b.com = Vec3(0.0, 0.0, 0.5 * link);
    b.inertia = Vec3(5e-3, 5e-3, 2e-3).asDiagonal();
    b.ports = {Pose::Identity()};
    model.bodies.push_back(b);
    JointInfo j;
    j.body = i;
    j.branch = Branch::kMain;
    j.q_min = -lim.position;
    j.q_max = lim.position;
    j.v_max = lim.velocity;
    j.a_max = lim.acceleration;
    j.torque_limit = 100.0;
    model.joints.push_back(j);
  }
  model.ee_body = n - 1;
  model.ee_offset.translation() = Vec3(0.0, 0.0, link);
  return model;
}

/// Bi-branch desk arm from the default catalog: base yaw + pitch joints, a
/// Y splitter, a main branch reaching forward (small elbow, 0.6 m link, tool)
/// and a 2-DoF assist branch (large elbow, 0.6 m link) on the other port.
inline KinematicModel cantilever(double payload = 5.0) {
  const Catalog cat = default_catalog();
  SegmentedMorphology seg;
  seg.base_segment = {1, 2};
  seg.main_branch = {5, 11};
  seg.assist_branch = {6, 3, 12};
  seg.is_bi_branch = true;
  seg.uses_y_module = true;
  seg.main_port = 1;
  seg.assist_port = 2;
  Assembly a = assemble(seg, MountedPose{}, cat, payload);
  if (!a.feasible) throw Error(a.reason);
  return a.model;
}

}  // namespace mcd::testing
