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

// Module catalog: the pre-manufactured building blocks a morphology is
// assembled from, plus the JSON catalog file format.

#include <algorithm>
#include <array>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcd/types.hpp"

namespace mcd {

enum class ModuleKind {
  kStraightJoint,
  kElbowJoint,
  kPassiveLink,
  kYSplitter,
  kEndEffector,
  kSomVirtual,
};

inline const char* to_string(ModuleKind k) {
  switch (k) {
    case ModuleKind::kStraightJoint: return "straight_joint";
    case ModuleKind::kElbowJoint: return "elbow_joint";
    case ModuleKind::kPassiveLink: return "passive_link";
    case ModuleKind::kYSplitter: return "y_splitter";
    case ModuleKind::kEndEffector: return "end_effector";
    case ModuleKind::kSomVirtual: return "som_virtual";
  }
  return "?";
}

inline ModuleKind module_kind_from_string(const std::string& s) {
  for (auto k : {ModuleKind::kStraightJoint, ModuleKind::kElbowJoint,
                 ModuleKind::kPassiveLink, ModuleKind::kYSplitter,
                 ModuleKind::kEndEffector, ModuleKind::kSomVirtual})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown module kind '" + s + "'");
}

inline bool is_joint(ModuleKind k) {
  return k == ModuleKind::kStraightJoint || k == ModuleKind::kElbowJoint;
}

/// Physical parameters of one catalog module. The module frame has its input
/// flange at the origin and its output flange at +length along local z; a
/// joint rotates about joint_axis through the module midpoint.
struct ModuleSpec {
  int id = 0;
  ModuleKind kind = ModuleKind::kPassiveLink;
  std::string name;
  double mass = 0.0;
  double length = 0.0;
  Vec3 com_offset = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();  // about the CoM, module frame
  Vec3 joint_axis = Vec3::Zero();
  std::optional<double> torque_limit;
  double radius = 0.0;

  int output_ports() const {
    switch (kind) {
      case ModuleKind::kYSplitter: return 2;
      case ModuleKind::kEndEffector: return 0;
      default: return 1;
    }
  }
  bool has_joint() const { return is_joint(kind); }

  bool operator==(const ModuleSpec& o) const {
    return id == o.id && kind == o.kind && name == o.name && mass == o.mass &&
           length == o.length && com_offset == o.com_offset &&
           inertia == o.inertia && joint_axis == o.joint_axis &&
           torque_limit == o.torque_limit && radius == o.radius;
  }
};

/// Symmetric joint limits shared by every joint module of a catalog.
struct JointLimits {
  double position = 2.4;      // rad
  double velocity = 2.0;      // rad/s
  double acceleration = 0.5;  // rad/s^2
  bool operator==(const JointLimits&) const = default;
};

/// Immutable module set. Physical modules carry ids 1..m, the end effector
/// m+1 and the two virtual segment markers m+2, m+3. The Y splitter is not
/// part of the encoding; it is inserted by the decoder and kept separately
/// with id 0.
class Catalog {
 public:
  Catalog() = default;

  /// Builds and validates; throws ConfigError naming the failed rule.
  Catalog(std::string name, std::vector<ModuleSpec> modules,
          std::optional<ModuleSpec> splitter, JointLimits limits);

  const std::string& name() const { return name_; }
  const std::vector<ModuleSpec>& modules() const { return modules_; }
  const std::optional<ModuleSpec>& splitter() const { return splitter_; }
  const JointLimits& joint_limits() const { return limits_; }

  int m() const { return m_; }
  int eom_id() const { return m_ + 1; }
  std::array<int, 2> som_ids() const { return {m_ + 2, m_ + 3}; }
  /// Length of a score vector over this catalog.
  int encoding_size() const { return m_ + 3; }
  bool is_som(int id) const { return id == m_ + 2 || id == m_ + 3; }

  /// Module by id (1..m+3). Throws ConfigError for unknown ids.
  const ModuleSpec& module(int id) const;
  bool contains(int id) const { return id >= 1 && id <= m_ + 3; }

  bool operator==(const Catalog& o) const {
    return name_ == o.name_ && modules_ == o.modules_ &&
           splitter_ == o.splitter_ && limits_ == o.limits_;
  }

 private:
  void validate() const;

  std::string name_;
  std::vector<ModuleSpec> modules_;  // sorted by id, index = id - 1
  std::optional<ModuleSpec> splitter_;
  JointLimits limits_;
  int m_ = 0;
};

/// Solid-cylinder inertia about the centroid, axis along z.
inline Mat3 cylinder_inertia(double mass, double length, double radius) {
  const double ixx = mass * (3.0 * radius * radius + length * length) / 12.0;
  const double izz = 0.5 * mass * radius * radius;
  return Eigen::Vector3d(ixx, ixx, izz).asDiagonal();
}

/// Convenience constructor for physical modules with cylinder inertia.
inline ModuleSpec make_module(int id, ModuleKind kind, std::string name,
                              double mass, double length, double radius,
                              std::optional<double> torque_limit = {}) {
  ModuleSpec s;
  s.id = id;
  s.kind = kind;
  s.name = std::move(name);
  s.mass = mass;
  s.length = length;
  s.radius = radius;
  s.com_offset = Vec3(0.0, 0.0, 0.5 * length);
  s.inertia = cylinder_inertia(mass, length, radius);
  if (kind == ModuleKind::kStraightJoint) s.joint_axis = Vec3::UnitZ();
  if (kind == ModuleKind::kElbowJoint) s.joint_axis = Vec3::UnitY();
  s.torque_limit = torque_limit;
  return s;
}

inline ModuleSpec make_som(int id) {
  ModuleSpec s;
  s.id = id;
  s.kind = ModuleKind::kSomVirtual;
  s.name = "som_" + std::to_string(id);
  return s;
}

inline Catalog::Catalog(std::string name, std::vector<ModuleSpec> modules,
                        std::optional<ModuleSpec> splitter, JointLimits limits)
    : name_(std::move(name)),
      modules_(std::move(modules)),
      splitter_(std::move(splitter)),
      limits_(limits) {
  std::sort(modules_.begin(), modules_.end(),
            [](const ModuleSpec& a, const ModuleSpec& b) { return a.id < b.id; });
  int physical = 0;
  for (const auto& s : modules_)
    if (s.kind != ModuleKind::kEndEffector && s.kind != ModuleKind::kSomVirtual)
      ++physical;
  m_ = physical;
  // Virtual markers are implied by the encoding; add them when a file omits
  // them.
  int soms = 0;
  for (const auto& s : modules_) soms += s.kind == ModuleKind::kSomVirtual;
  if (soms == 0) {
    modules_.push_back(make_som(m_ + 2));
    modules_.push_back(make_som(m_ + 3));
  }
  validate();
}

inline void Catalog::validate() const {
  auto fail = [](int id, const std::string& rule) {
    throw ConfigError("catalog: module " + std::to_string(id) + ": " + rule);
  };
  int eoms = 0;
  int soms = 0;
  for (const auto& s : modules_) eoms += s.kind == ModuleKind::kEndEffector;
  if (eoms != 1) throw ConfigError("catalog: exactly one end_effector entry is required");
  eoms = 0;
  for (std::size_t i = 0; i < modules_.size(); ++i) {
    const ModuleSpec& s = modules_[i];
    if (s.id != static_cast<int>(i) + 1)
      fail(s.id, "ids must be distinct and contiguous starting at 1");
    if (s.kind == ModuleKind::kYSplitter)
      fail(s.id, "y_splitter belongs in the 'splitter' entry, not the module list");
    if (s.kind == ModuleKind::kEndEffector) {
      ++eoms;
      if (s.id != m_ + 1) fail(s.id, "end_effector must have id m+1");
    }
    if (s.kind == ModuleKind::kSomVirtual) {
      ++soms;
      if (s.id != m_ + 2 && s.id != m_ + 3) fail(s.id, "som_virtual must have id m+2 or m+3");
      if (s.mass != 0.0 || s.length != 0.0 || s.radius != 0.0)
        fail(s.id, "som_virtual must have zero mass, length and radius");
      continue;
    }
    if (s.kind != ModuleKind::kEndEffector && s.id > m_)
      fail(s.id, "physical modules must occupy ids 1..m");
    if (!(s.mass > 0.0)) fail(s.id, "mass must be positive");
    if (s.length < 0.0) fail(s.id, "length must be nonnegative");
    if (!(s.radius > 0.0)) fail(s.id, "capsule radius must be positive");
    if (s.has_joint()) {
      if (!s.torque_limit || !(*s.torque_limit > 0.0))
        fail(s.id, "joint modules need a positive torque_limit");
      if (std::abs(s.joint_axis.norm() - 1.0) > 1e-9)
        fail(s.id, "joint_axis must have unit norm");
    } else if (s.torque_limit) {
      fail(s.id, "torque_limit is only allowed on joint modules");
    }
  }
  if (eoms != 1) throw ConfigError("catalog: exactly one end_effector entry is required");
  if (soms != 2) throw ConfigError("catalog: exactly two som_virtual entries are required");
  if (m_ < 1) throw ConfigError("catalog: at least one physical module is required");
  if (splitter_) {
    if (splitter_->kind != ModuleKind::kYSplitter)
      throw ConfigError("catalog: splitter entry must have kind y_splitter");
    if (!(splitter_->mass > 0.0) || !(splitter_->radius > 0.0) || splitter_->length <= 0.0)
      throw ConfigError("catalog: splitter needs positive mass, length and radius");
  }
  if (!(limits_.position > 0.0 && limits_.velocity > 0.0 && limits_.acceleration > 0.0))
    throw ConfigError("catalog: joint limits must be positive");
}

inline const ModuleSpec& Catalog::module(int id) const {
  if (id < 1 || id > static_cast<int>(modules_.size()))
    throw ConfigError("catalog: unknown module id " + std::to_string(id));
  return modules_[id - 1];
}

/// Built-in 14-module catalog (end effector 15, markers 16 and 17).
/// Torque limits follow the hardware: 120 N*m for modules 1, 2, 4, 5 and
/// 160 N*m for modules 3 and 6. Masses and inertias are plausible stand-ins.
inline Catalog default_catalog() {
  using K = ModuleKind;
  std::vector<ModuleSpec> mods = {
      make_module(1, K::kStraightJoint, "straight_s", 3.2, 0.14, 0.08, 120.0),
      make_module(2, K::kElbowJoint, "elbow_s", 3.6, 0.18, 0.08, 120.0),
      make_module(3, K::kElbowJoint, "elbow_l", 4.8, 0.20, 0.08, 160.0),
      make_module(4, K::kStraightJoint, "straight_s", 3.2, 0.14, 0.08, 120.0),
      make_module(5, K::kElbowJoint, "elbow_s", 3.6, 0.18, 0.08, 120.0),
      make_module(6, K::kStraightJoint, "straight_l", 4.5, 0.16, 0.08, 160.0),
      make_module(7, K::kPassiveLink, "link_0.3", 1.0, 0.30, 0.05),
      make_module(8, K::kPassiveLink, "link_0.3", 1.0, 0.30, 0.05),
      make_module(9, K::kPassiveLink, "link_0.4", 1.3, 0.40, 0.05),
      make_module(10, K::kPassiveLink, "link_0.4", 1.3, 0.40, 0.05),
      make_module(11, K::kPassiveLink, "link_0.6", 1.8, 0.60, 0.05),
      make_module(12, K::kPassiveLink, "link_0.6", 1.8, 0.60, 0.05),
      make_module(13, K::kPassiveLink, "link_0.3", 1.0, 0.30, 0.05),
      make_module(14, K::kPassiveLink, "link_0.4", 1.3, 0.40, 0.05),
      make_module(15, K::kEndEffector, "tool", 0.5, 0.10, 0.04),
      make_som(16),
      make_som(17),
  };
  ModuleSpec y = make_module(0, K::kYSplitter, "y_splitter", 2.0, 0.16, 0.08);
  return Catalog("default", std::move(mods), y, JointLimits{});
}

// ---------------------------------------------------------------------------
// JSON format

namespace detail {

inline nlohmann::json to_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

inline Vec3 vec3_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(what + ": expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline nlohmann::json module_to_json(const ModuleSpec& s) {
  nlohmann::json j;
  j["id"] = s.id;
  j["kind"] = to_string(s.kind);
  j["name"] = s.name;
  if (s.kind == ModuleKind::kSomVirtual) return j;
  j["mass"] = s.mass;
  j["length"] = s.length;
  j["radius"] = s.radius;
  j["com_offset"] = to_json(s.com_offset);
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({s.inertia(r, 0), s.inertia(r, 1), s.inertia(r, 2)});
  j["inertia"] = rows;
  if (s.has_joint()) j["joint_axis"] = to_json(s.joint_axis);
  if (s.torque_limit) j["torque_limit"] = *s.torque_limit;
  return j;
}

inline ModuleSpec module_from_json(const nlohmann::json& j) {
  const int id = j.value("id", -1);
  const std::string where = "catalog: module " + std::to_string(id);
  try {
    ModuleSpec s;
    s.id = id;
    s.kind = module_kind_from_string(j.at("kind").get<std::string>());
    s.name = j.value("name", std::string(to_string(s.kind)));
    if (s.kind == ModuleKind::kSomVirtual) {
      s.mass = j.value("mass", 0.0);
      s.length = j.value("length", 0.0);
      s.radius = j.value("radius", 0.0);
      return s;
    }
    s.mass = j.at("mass").get<double>();
    s.length = j.at("length").get<double>();
    s.radius = j.at("radius").get<double>();
    s = [&] {
      ModuleSpec d = make_module(s.id, s.kind, s.name, s.mass, s.length, s.radius);
      return d;
    }();
    if (j.contains("com_offset")) s.com_offset = vec3_from_json(j["com_offset"], where + " com_offset");
    if (j.contains("inertia")) {
      const auto& in = j["inertia"];
      if (in.is_array() && in.size() == 3 && in[0].is_number()) {
        s.inertia = Vec3(in[0].get<double>(), in[1].get<double>(), in[2].get<double>()).asDiagonal();
      } else if (in.is_array() && in.size() == 3) {
        for (int r = 0; r < 3; ++r) s.inertia.row(r) = vec3_from_json(in[r], where + " inertia").transpose();
      } else {
        throw ConfigError(where + ": inertia must be a 3x3 matrix or a diagonal 3-vector");
      }
    }
    if (j.contains("joint_axis")) s.joint_axis = vec3_from_json(j["joint_axis"], where + " joint_axis");
    if (j.contains("torque_limit")) s.torque_limit = j["torque_limit"].get<double>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace detail

inline nlohmann::json catalog_to_json(const Catalog& c) {
  nlohmann::json j;
  j["name"] = c.name();
  j["joint_limits"] = {{"position", c.joint_limits().position},
                       {"velocity", c.joint_limits().velocity},
                       {"acceleration", c.joint_limits().acceleration}};
  nlohmann::json mods = nlohmann::json::array();
  for (const auto& s : c.modules()) mods.push_back(detail::module_to_json(s));
  j["modules"] = mods;
  if (c.splitter()) j["splitter"] = detail::module_to_json(*c.splitter());
  return j;
}

inline Catalog catalog_from_json(const nlohmann::json& j) {
  try {
    std::vector<ModuleSpec> mods;
    for (const auto& m : j.at("modules")) mods.push_back(detail::module_from_json(m));
    std::optional<ModuleSpec> splitter;
    if (j.contains("splitter") && !j["splitter"].is_null()) {
      nlohmann::json sj = j["splitter"];
      if (!sj.contains("id")) sj["id"] = 0;
      splitter = detail::module_from_json(sj);
    }
    JointLimits lim;
    if (j.contains("joint_limits")) {
      const auto& l = j["joint_limits"];
      lim.position = l.value("position", lim.position);
      lim.velocity = l.value("velocity", lim.velocity);
      lim.acceleration = l.value("acceleration", lim.acceleration);
    }
    return Catalog(j.value("name", std::string("catalog")), std::move(mods), splitter, lim);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("catalog: ") + e.what());
  }
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("parse error in '" + path + "': " + e.what());
  }
}

inline Catalog load_catalog(const std::string& path) {
  return catalog_from_json(read_json_file(path));
}

inline void save_catalog(const Catalog& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << catalog_to_json(c).dump(2) << '\n';
}

}  // namespace mcd
