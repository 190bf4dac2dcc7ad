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

// Rotation helpers on SO(3) and unit quaternions. Quaternions are stored
// scalar-first as 4-vectors [w, x, y, z] wherever they appear in plain
// vectors (state vectors, CSV rows).

#include <algorithm>
#include <cmath>

#include "mcd/types.hpp"

namespace mcd::so3 {

inline Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

inline Vec3 vee(const Mat3& m) {
  return Vec3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)) * 0.5;
}

/// Rodrigues' formula.
inline Mat3 exp(const Vec3& w) {
  const double theta = w.norm();
  const Mat3 W = hat(w);
  if (theta < 1e-8) return Mat3::Identity() + W + 0.5 * W * W;
  return Mat3::Identity() + std::sin(theta) / theta * W +
         (1.0 - std::cos(theta)) / (theta * theta) * W * W;
}

/// Rotation vector of R. Large angles go through the unit quaternion, which
/// stays well conditioned up to theta = pi.
inline Vec3 log(const Mat3& R) {
  const double c = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(c);
  if (theta < 1e-8) return vee(R - R.transpose());
  if (theta > 0.5 * M_PI) {
    Quat q(R);
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    const Vec3 v = q.vec();
    const double sv = v.norm();
    return 2.0 * std::atan2(sv, q.w()) / sv * v;
  }
  return theta / (2.0 * std::sin(theta)) * vee(R - R.transpose());
}

/// Roll-pitch-yaw (x, y, z fixed-axis) to rotation: Rz(yaw) Ry(pitch) Rx(roll).
inline Mat3 from_rpy(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
          Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

inline Pose pose_from_xyzrpy(const Eigen::Matrix<double, 6, 1>& p) {
  Pose T = Pose::Identity();
  T.linear() = from_rpy(p[3], p[4], p[5]);
  T.translation() = p.head<3>();
  return T;
}

/// Scalar-first 4-vector from a rotation matrix.
inline Eigen::Vector4d quat_from_matrix(const Mat3& R) {
  Quat q(R);
  q.normalize();
  return {q.w(), q.x(), q.y(), q.z()};
}

inline Mat3 matrix_from_quat(const Eigen::Vector4d& o) {
  return Quat(o[0], o[1], o[2], o[3]).normalized().toRotationMatrix();
}

/// Matrix form of left multiplication: a (x) b = left(a) * b.
inline Eigen::Matrix4d quat_left(const Eigen::Vector4d& a) {
  Eigen::Matrix4d L;
  L << a[0], -a[1], -a[2], -a[3],  //
      a[1], a[0], -a[3], a[2],     //
      a[2], a[3], a[0], -a[1],     //
      a[3], -a[2], a[1], a[0];
  return L;
}

/// Matrix form of right multiplication: a (x) b = right(b) * a.
inline Eigen::Matrix4d quat_right(const Eigen::Vector4d& b) {
  Eigen::Matrix4d Rm;
  Rm << b[0], -b[1], -b[2], -b[3],  //
      b[1], b[0], b[3], -b[2],      //
      b[2], -b[3], b[0], b[1],      //
      b[3], b[2], -b[1], b[0];
  return Rm;
}

inline Eigen::Vector4d quat_conj(const Eigen::Vector4d& q) {
  return {q[0], -q[1], -q[2], -q[3]};
}

/// Rate matrix G(o) with o_dot = 0.5 * G(o) * omega, omega in the world frame.
inline Eigen::Matrix<double, 4, 3> quat_rate_matrix(const Eigen::Vector4d& o) {
  const double eta = o[0];
  const Vec3 eps = o.tail<3>();
  Eigen::Matrix<double, 4, 3> G;
  G.row(0) = -eps.transpose();
  G.bottomRows<3>() = eta * Mat3::Identity() - hat(eps);
  return G;
}

/// World-frame orientation error log(R R_d^T) as a rotation vector.
inline Vec3 orientation_error(const Mat3& R, const Mat3& R_d) {
  return log(R * R_d.transpose());
}

}  // namespace mcd::so3
