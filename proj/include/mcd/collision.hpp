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

// Capsule self-collision and signed-distance environment clearance.

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <tuple>
#include <vector>

#include "mcd/kinematics.hpp"

namespace mcd {

struct Capsule {
  Vec3 p1 = Vec3::Zero();
  Vec3 p2 = Vec3::Zero();
  double r = 0.0;
};

/// World capsules for every physical module at configuration q.
inline std::vector<Capsule> capsules_from_state(const KinematicModel& model, const FKResult& fk) {
  std::vector<Capsule> out;
  out.reserve(model.capsules.size());
  auto frame = [&](int b) -> const Pose& { return b < 0 ? model.base : fk.bodies[b]; };
  for (const auto& c : model.capsules) {
    Vec3 a = frame(c.body_a) * c.a;
    Vec3 b = frame(c.body_b) * c.b;
    const double len = (b - a).norm();
    if (len > 2.0 * c.radius) {
      const Vec3 d = (b - a) / len;
      a += c.radius * d;
      b -= c.radius * d;
    } else {
      a = b = 0.5 * (a + b);
    }
    out.push_back({a, b, c.radius});
  }
  return out;
}

inline std::vector<Capsule> capsules_from_state(const KinematicModel& model, const VecX& q) {
  return capsules_from_state(model, forward_kinematics(model, q));
}

/// Minimum distance between the axes of two capsules, clamped closest points.
inline double segment_distance(const Capsule& A, const Capsule& B) {
  // Order the pair canonically so d(a, b) and d(b, a) run identical arithmetic.
  const auto key = [](const Capsule& c) {
    return std::make_tuple(c.p1.x(), c.p1.y(), c.p1.z(), c.p2.x(), c.p2.y(), c.p2.z());
  };
  const Capsule& a = key(A) <= key(B) ? A : B;
  const Capsule& b = key(A) <= key(B) ? B : A;
  const Vec3 d1 = a.p2 - a.p1;
  const Vec3 d2 = b.p2 - b.p1;
  const Vec3 r = a.p1 - b.p1;
  const double aa = d1.squaredNorm();
  const double ee = d2.squaredNorm();
  const double f = d2.dot(r);
  constexpr double eps = 1e-14;
  double s = 0.0, t = 0.0;
  if (aa <= eps && ee <= eps) {
    return r.norm();
  }
  if (aa <= eps) {
    t = std::clamp(f / ee, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (ee <= eps) {
      s = std::clamp(-c / aa, 0.0, 1.0);
    } else {
      const double bb = d1.dot(d2);
      const double denom = aa * ee - bb * bb;
      s = denom > eps * aa * ee ? std::clamp((bb * f - c * ee) / denom, 0.0, 1.0) : 0.0;
      t = (bb * s + f) / ee;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / aa, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((bb - c) / aa, 0.0, 1.0);
      }
    }
  }
  return ((a.p1 + s * d1) - (b.p1 + t * d2)).norm();
}

struct CollisionReport {
  bool pass = true;
  int i = -1, j = -1;  // worst pair or capsule/sample
  double clearance = std::numeric_limits<double>::infinity();  // worst margin
};

/// All non-exempt pairs must satisfy d_min > r_i + r_j + d_safe.
inline CollisionReport self_collision_check(const std::vector<Capsule>& caps,
                                            const std::vector<std::pair<int, int>>& adjacency,
                                            double d_safe) {
  std::set<std::pair<int, int>> exempt;
  for (auto [a, b] : adjacency) exempt.insert({std::min(a, b), std::max(a, b)});
  CollisionReport rep;
  const int n = static_cast<int>(caps.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (exempt.count({i, j})) continue;
      const double m = segment_distance(caps[i], caps[j]) - caps[i].r - caps[j].r - d_safe;
      if (m < rep.clearance) {
        rep.clearance = m;
        rep.i = i;
        rep.j = j;
      }
    }
  rep.pass = !(rep.clearance <= 0.0);
  return rep;
}

/// Axis-aligned box given by center and full edge lengths.
struct Box {
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();
};

inline double box_sdf(const Box& b, const Vec3& p) {
  const Vec3 q = (p - b.center).cwiseAbs() - 0.5 * b.size;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

inline double boxes_sdf(const std::vector<Box>& boxes, const Vec3& p) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& b : boxes) d = std::min(d, box_sdf(b, p));
  return d;
}

/// Sampled signed distance to a set of boxes, trilinear between nodes. Queries
/// outside the grid fall back to the analytic distance.
class SDFGrid {
 public:
  SDFGrid() = default;
  SDFGrid(std::vector<Box> boxes, Vec3 lo, Vec3 hi, double resolution)
      : boxes_(std::move(boxes)), lo_(lo), res_(resolution) {
    if (!(resolution > 0.0)) throw ConfigError("sdf: resolution must be positive");
    for (const auto& b : boxes_)
      if ((b.size.array() <= 0.0).any()) throw ConfigError("sdf: degenerate obstacle box");
    if ((hi.array() <= lo.array()).any()) throw ConfigError("sdf: empty bounds");
    for (int k = 0; k < 3; ++k) n_[k] = static_cast<int>(std::ceil((hi[k] - lo[k]) / res_)) + 1;
    values_.resize(static_cast<std::size_t>(n_[0]) * n_[1] * n_[2]);
    for (int i = 0; i < n_[0]; ++i)
      for (int j = 0; j < n_[1]; ++j)
        for (int k = 0; k < n_[2]; ++k)
          values_[idx(i, j, k)] = boxes_sdf(boxes_, lo_ + res_ * Vec3(i, j, k));
  }

  bool empty() const { return boxes_.empty(); }
  double resolution() const { return res_; }
  const std::vector<Box>& boxes() const { return boxes_; }

  double operator()(const Vec3& p) const {
    if (boxes_.empty()) return std::numeric_limits<double>::infinity();
    const Vec3 u = (p - lo_) / res_;
    int i0[3];
    double t[3];
    for (int k = 0; k < 3; ++k) {
      if (u[k] < 0.0 || u[k] > n_[k] - 1) return boxes_sdf(boxes_, p);
      i0[k] = std::min(static_cast<int>(std::floor(u[k])), n_[k] - 2);
      i0[k] = std::max(i0[k], 0);
      t[k] = u[k] - i0[k];
    }
    double v = 0.0;
    for (int c = 0; c < 8; ++c) {
      const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
      const double w = (dx ? t[0] : 1 - t[0]) * (dy ? t[1] : 1 - t[1]) * (dz ? t[2] : 1 - t[2]);
      v += w * values_[idx(i0[0] + dx, i0[1] + dy, i0[2] + dz)];
    }
    return v;
  }

  Vec3 gradient(const Vec3& p) const {
    Vec3 g;
    for (int k = 0; k < 3; ++k) {
      const Vec3 e = Vec3::Unit(k) * res_;
      g[k] = ((*this)(p + e) - (*this)(p - e)) / (2.0 * res_);
    }
    return g;
  }

 private:
  std::size_t idx(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * n_[1] + j) * n_[2] + k;
  }

  std::vector<Box> boxes_;
  Vec3 lo_ = Vec3::Zero();
  double res_ = 0.02;
  int n_[3] = {0, 0, 0};
  std::vector<double> values_;
};

inline SDFGrid build_sdf(const std::vector<Box>& boxes, const Vec3& lo, const Vec3& hi,
                         double resolution) {
  return SDFGrid(boxes, lo, hi, resolution);
}

/// Samples each capsule axis at both endpoints plus `samples` interior points
/// and requires SDF >= r + d_safe. Reports (capsule, sample) of the worst.
inline CollisionReport environment_clearance(const std::vector<Capsule>& caps, const SDFGrid& sdf,
                                             int samples, double d_safe) {
  CollisionReport rep;
  if (sdf.empty()) return rep;
  const int total = std::max(samples, 0) + 2;
  for (int c = 0; c < static_cast<int>(caps.size()); ++c)
    for (int s = 0; s < total; ++s) {
      const double u = static_cast<double>(s) / (total - 1);
      const Vec3 p = caps[c].p1 + u * (caps[c].p2 - caps[c].p1);
      const double m = sdf(p) - caps[c].r - d_safe;
      if (m < rep.clearance) {
        rep.clearance = m;
        rep.i = c;
        rep.j = s;
      }
    }
  rep.pass = rep.clearance >= 0.0;
  return rep;
}

}  // namespace mcd
