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

// Morphology encoding: continuous scores -> ordered module ids -> segments
// -> assembled body tree.

#include <algorithm>
#include <array>
#include <numeric>
#include <string>
#include <vector>

#include "mcd/catalog.hpp"
#include "mcd/model.hpp"

namespace mcd {

/// Ids 1..size sorted by descending score; ties keep ascending id.
inline std::vector<int> sort_map(const VecX& M) {
  std::vector<int> ids(M.size());
  std::iota(ids.begin(), ids.end(), 1);
  std::stable_sort(ids.begin(), ids.end(),
                   [&](int a, int b) { return M[a - 1] > M[b - 1]; });
  return ids;
}

/// Port order S from the two mount-hole scores.
inline std::array<int, 2> mount_map(double h1, double h2) {
  return h2 > h1 ? std::array<int, 2>{2, 1} : std::array<int, 2>{1, 2};
}

/// Base pose [x, y, z, roll, pitch, yaw] and the components a search may vary.
struct MountedPose {
  Vec6 P = Vec6::Zero();
  std::array<bool, 6> free = {true, true, true, true, true, true};

  Pose transform() const { return so3::pose_from_xyzrpy(P); }
  int free_count() const {
    return static_cast<int>(std::count(free.begin(), free.end(), true));
  }
};

struct SegmentedMorphology {
  std::vector<int> base_segment;
  std::vector<int> main_branch;    // excludes the end-effector id
  std::vector<int> assist_branch;
  bool is_bi_branch = false;
  bool uses_y_module = false;
  int main_port = 0;    // Y port of the main branch (1 or 2), 0 without Y
  int assist_port = 0;  // Y port of the assist branch, 0 if none
  bool feasible = true;
  std::string reason;

  bool operator==(const SegmentedMorphology&) const = default;
};

/// Applies the EoM truncation and SoM partition rules.
inline SegmentedMorphology segment(const std::vector<int>& C_v, std::array<int, 2> S,
                                   const Catalog& catalog) {
  SegmentedMorphology out;
  const auto eom = std::find(C_v.begin(), C_v.end(), catalog.eom_id());
  if (eom == C_v.end()) {
    out.feasible = false;
    out.reason = "end effector missing from the encoding";
    return out;
  }
  if (eom == C_v.begin()) {
    out.feasible = false;
    out.reason = "end effector first: empty morphology";
    return out;
  }
  std::array<std::vector<int>, 3> segs;
  int cur = 0;
  int soms = 0;
  for (auto it = C_v.begin(); it != eom; ++it) {
    if (!catalog.contains(*it)) {
      out.feasible = false;
      out.reason = "unknown module id " + std::to_string(*it);
      return out;
    }
    if (catalog.is_som(*it)) {
      ++soms;
      cur = std::min(cur + 1, 2);
      continue;
    }
    segs[cur].push_back(*it);
  }
  out.base_segment = segs[0];
  if (soms == 0 || (segs[1].empty() && segs[2].empty())) {
    // Plain chain; the end effector follows the base segment.
    return out;
  }
  out.uses_y_module = true;
  if (!segs[1].empty() && !segs[2].empty()) {
    out.is_bi_branch = true;
    out.main_branch = segs[1];
    out.main_port = S[0];
    out.assist_branch = segs[2];
    out.assist_port = S[1];
  } else if (!segs[1].empty()) {
    out.main_branch = segs[1];
    out.main_port = S[0];
  } else {
    out.main_branch = segs[2];
    out.main_port = S[1];
  }
  return out;
}

/// Result of decoding; `model` is meaningful only when feasible.
struct Assembly {
  KinematicModel model;
  bool feasible = true;
  std::string reason;
};

namespace detail {

inline Pose translate_z(double z) {
  Pose T = Pose::Identity();
  T.translation() = Vec3(0.0, 0.0, z);
  return T;
}

/// Output port k (1 or 2) of a Y splitter in its own frame: ports lean
/// +/-45 degrees about local y, port 1 towards +x.
inline Pose y_port(const ModuleSpec& y, int k) {
  const double s = k == 1 ? 1.0 : -1.0;
  Pose T = Pose::Identity();
  T.translation() = Vec3(s * 0.5 * y.radius, 0.0, y.length);
  T.linear() = Eigen::AngleAxisd(s * M_PI / 4.0, Vec3::UnitY()).toRotationMatrix();
  return T;
}

class TreeBuilder {
 public:
  TreeBuilder(KinematicModel& m, const Catalog& c) : model_(m), catalog_(c) {}

  /// Attaches `spec` at `port` of body `parent` (-1: base). Returns the new
  /// body index.
  int add(const ModuleSpec& spec, int parent, const Pose& port, Branch branch) {
    Body b;
    b.parent = parent;
    b.module_id = spec.id;
    b.kind = spec.kind;
    b.branch = branch;
    b.mass = spec.mass;
    b.inertia = spec.inertia;
    b.radius = spec.radius;
    const double L = spec.length;
    CapsuleDef cap;
    cap.radius = spec.radius;
    cap.module_id = spec.id;
    cap.body_a = parent;
    cap.a = port.translation();
    const int index = static_cast<int>(model_.bodies.size());
    cap.body_b = index;
    if (spec.has_joint()) {
      b.T_parent = port * translate_z(0.5 * L);
      b.joint = static_cast<int>(model_.joints.size());
      b.axis = spec.joint_axis;
      b.com = spec.com_offset - Vec3(0.0, 0.0, 0.5 * L);
      b.flange_in = Vec3(0.0, 0.0, -0.5 * L);
      b.ports = {translate_z(0.5 * L)};
      cap.b = Vec3(0.0, 0.0, 0.5 * L);
      JointInfo j;
      j.body = index;
      j.branch = branch;
      const JointLimits& lim = catalog_.joint_limits();
      j.q_min = -lim.position;
      j.q_max = lim.position;
      j.v_max = lim.velocity;
      j.a_max = lim.acceleration;
      j.torque_limit = spec.torque_limit.value_or(0.0);
      model_.joints.push_back(j);
    } else {
      b.T_parent = port;
      b.com = spec.com_offset;
      if (spec.kind == ModuleKind::kYSplitter) {
        b.ports = {y_port(spec, 1), y_port(spec, 2)};
      } else if (spec.kind != ModuleKind::kEndEffector) {
        b.ports = {translate_z(L)};
      }
      cap.b = Vec3(0.0, 0.0, L);
    }
    // Module-level adjacency: the capsule of the nearest physical ancestor.
    const int cap_index = static_cast<int>(model_.capsules.size());
    if (parent >= 0) model_.adjacent.emplace_back(body_capsule_[parent], cap_index);
    model_.capsules.push_back(cap);
    body_capsule_.push_back(cap_index);
    model_.bodies.push_back(b);
    return index;
  }

  /// Appends a chain of modules starting at (parent, port); returns the last
  /// body and its output port, unchanged for an empty chain.
  std::pair<int, Pose> chain(const std::vector<int>& ids, int parent, Pose port,
                             Branch branch) {
    for (int id : ids) {
      const int b = add(catalog_.module(id), parent, port, branch);
      parent = b;
      port = model_.bodies[b].ports.front();
    }
    return {parent, port};
  }

  int capsule_of(int body) const { return body_capsule_[body]; }

 private:
  KinematicModel& model_;
  const Catalog& catalog_;
  std::vector<int> body_capsule_;
};

}  // namespace detail

/// Builds the body tree for a segmented morphology mounted at `pose`.
inline Assembly assemble(const SegmentedMorphology& seg, const MountedPose& pose,
                         const Catalog& catalog, double payload = 0.0) {
  Assembly out;
  if (!seg.feasible) {
    out.feasible = false;
    out.reason = seg.reason;
    return out;
  }
  KinematicModel& m = out.model;
  m.base = pose.transform();
  m.payload = payload;
  detail::TreeBuilder tb(m, catalog);
  auto [tip, port] = tb.chain(seg.base_segment, -1, Pose::Identity(), Branch::kShared);
  int ee_parent = tip;
  Pose ee_port = port;
  if (seg.uses_y_module) {
    if (!catalog.splitter()) {
      out.feasible = false;
      out.reason = "morphology needs a Y splitter but the catalog has none";
      return out;
    }
    const ModuleSpec& y = *catalog.splitter();
    const int yb = tb.add(y, tip, port, Branch::kShared);
    const Pose main_port = m.bodies[yb].ports[seg.main_port - 1];
    auto [mtip, mport] = tb.chain(seg.main_branch, yb, main_port, Branch::kMain);
    ee_parent = mtip;
    ee_port = mport;
  }
  const int ee = tb.add(catalog.module(catalog.eom_id()), ee_parent, ee_port,
                        seg.uses_y_module ? Branch::kMain : Branch::kShared);
  m.ee_body = ee;
  m.ee_offset = detail::translate_z(catalog.module(catalog.eom_id()).length);
  if (seg.is_bi_branch) {
    int yb = -1;
    for (std::size_t i = 0; i < m.bodies.size(); ++i)
      if (m.bodies[i].kind == ModuleKind::kYSplitter) yb = static_cast<int>(i);
    const int main_child = yb + 1;
    const Pose assist_port = m.bodies[yb].ports[seg.assist_port - 1];
    const int assist_child = static_cast<int>(m.bodies.size());
    tb.chain(seg.assist_branch, yb, assist_port, Branch::kAssist);
    m.has_assist_bodies = true;
    m.adjacent.emplace_back(tb.capsule_of(main_child), tb.capsule_of(assist_child));
  }
  if (m.main_dof() == 0) {
    out.feasible = false;
    out.reason = "main branch has no joints";
  }
  return out;
}

/// Full decode of scores and mount-hole scores.
struct Decoded {
  std::vector<int> C_v;
  std::array<int, 2> S = {1, 2};
  SegmentedMorphology seg;
};

inline Decoded decode(const VecX& M, double h1, double h2, const Catalog& catalog) {
  if (M.size() != catalog.encoding_size())
    throw DimensionError("score vector has " + std::to_string(M.size()) +
                         " entries, catalog needs " +
                         std::to_string(catalog.encoding_size()));
  Decoded d;
  d.C_v = sort_map(M.cwiseMax(0.0).cwiseMin(1.0));
  d.S = mount_map(h1, h2);
  d.seg = segment(d.C_v, d.S, catalog);
  return d;
}

/// Physical modules listed before the end effector, markers excluded.
inline int module_count(const SegmentedMorphology& s) {
  return static_cast<int>(s.base_segment.size() + s.main_branch.size() +
                          s.assist_branch.size());
}

}  // namespace mcd
