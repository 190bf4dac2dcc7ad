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

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <array>
#include <stdexcept>
#include <string>

namespace mcd {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using VecX = Eigen::VectorXd;
using Mat3 = Eigen::Matrix3d;
using Mat6X = Eigen::Matrix<double, 6, Eigen::Dynamic>;
using MatX = Eigen::MatrixXd;
using Quat = Eigen::Quaterniond;
using Pose = Eigen::Isometry3d;

inline constexpr double kGravity = 9.81;

/// Base error for everything the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: files, schemas, dimensions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// The six end-effector task axes: position x,y,z then orientation x,y,z
/// (world frame).
enum class TaskAxis : int { kPx = 0, kPy, kPz, kOx, kOy, kOz };

inline constexpr std::array<const char*, 6> kTaskAxisNames = {"px", "py", "pz",
                                                             "ox", "oy", "oz"};

/// Bit set over the six task axes.
class AxisSet {
 public:
  constexpr AxisSet() = default;
  constexpr explicit AxisSet(unsigned bits) : bits_(bits & 0x3Fu) {}

  static constexpr AxisSet all() { return AxisSet(0x3Fu); }
  static constexpr AxisSet position() { return AxisSet(0x07u); }
  static constexpr AxisSet orientation() { return AxisSet(0x38u); }

  static AxisSet parse(const std::string& name);

  constexpr bool contains(int axis) const { return (bits_ >> axis) & 1u; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr unsigned bits() const { return bits_; }
  constexpr int size() const {
    int n = 0;
    for (int i = 0; i < 6; ++i) n += contains(i) ? 1 : 0;
    return n;
  }
  constexpr AxisSet with(int axis) const { return AxisSet(bits_ | (1u << axis)); }
  constexpr AxisSet operator|(AxisSet o) const { return AxisSet(bits_ | o.bits_); }
  constexpr AxisSet operator&(AxisSet o) const { return AxisSet(bits_ & o.bits_); }
  constexpr bool operator==(const AxisSet&) const = default;

  /// Indices of the contained axes in ascending order.
  std::array<int, 6> indices(int* count) const {
    std::array<int, 6> out{};
    int n = 0;
    for (int i = 0; i < 6; ++i)
      if (contains(i)) out[n++] = i;
    *count = n;
    return out;
  }

 private:
  unsigned bits_ = 0;
};

inline AxisSet AxisSet::parse(const std::string& name) {
  for (int i = 0; i < 6; ++i)
    if (name == kTaskAxisNames[i]) return AxisSet(1u << i);
  if (name == "position") return position();
  if (name == "orientation") return orientation();
  if (name == "all") return all();
  throw ConfigError("unknown task axis '" + name + "'");
}

}  // namespace mcd
