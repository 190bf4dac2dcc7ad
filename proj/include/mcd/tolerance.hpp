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

// Time-varying tracking tolerance from per-waypoint anchors: one zero-mean
// scalar Gaussian process per task axis, queried for its posterior spread.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "mcd/types.hpp"

namespace mcd {

struct GPParams {
  double sigma_f2 = 0.005;  // prior signal variance
  double length = 1.0;      // kernel length scale, s
  double jitter = 1e-12;
};

inline constexpr GPParams kPositionGP{0.005, 1.0, 1e-12};
inline constexpr GPParams kOrientationGP{0.015, 1.0, 1e-12};

/// Scalar GP with observations y = 0 at the anchor times. Anchor tolerance xi
/// enters as noise standard deviation xi / 2.
class GPBoundModel {
 public:
  GPBoundModel() = default;

  static GPBoundModel fit(const std::vector<double>& times, const std::vector<double>& xi,
                          GPParams params) {
    if (times.empty()) throw ConfigError("tolerance: at least one anchor is required");
    if (times.size() != xi.size()) throw DimensionError("tolerance: times/xi length mismatch");
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (!(xi[i] > 0.0)) throw ConfigError("tolerance: anchor tolerances must be positive");
      for (std::size_t j = i + 1; j < times.size(); ++j)
        if (times[i] == times[j])
          throw ConfigError("tolerance: duplicate anchor time " + std::to_string(times[i]) +
                            " (anchors " + std::to_string(i) + " and " + std::to_string(j) + ")");
    }
    GPBoundModel m;
    m.t_ = times;
    m.xi_ = xi;
    m.p_ = params;
    const int n = static_cast<int>(times.size());
    MatX A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = m.kernel(times[i], times[j]);
    for (int i = 0; i < n; ++i) A(i, i) += 0.25 * xi[i] * xi[i] + params.jitter;
    m.llt_.compute(A);
    if (m.llt_.info() != Eigen::Success)
      throw ConfigError("tolerance: anchor covariance is not positive definite");
    return m;
  }

  double kernel(double a, double b) const {
    const double d = (a - b) / p_.length;
    return p_.sigma_f2 * std::exp(-d * d);
  }

  double prior_variance() const { return p_.sigma_f2; }

  double posterior_variance(double t) const {
    VecX k(t_.size());
    for (std::size_t i = 0; i < t_.size(); ++i) k[i] = kernel(t, t_[i]);
    const double v = p_.sigma_f2 - k.dot(llt_.solve(k));
    return std::max(v, 0.0);
  }

  /// Interpolated tolerance 2 * posterior std.
  double bound(double t) const { return 2.0 * std::sqrt(posterior_variance(t)); }

  const std::vector<double>& anchor_times() const { return t_; }
  const std::vector<double>& anchor_xi() const { return xi_; }
  const GPParams& params() const { return p_; }

 private:
  std::vector<double> t_;
  std::vector<double> xi_;
  GPParams p_;
  Eigen::LLT<MatX> llt_;
};

/// One anchor: time and the six-axis tolerance (3 position m, 3 orientation rad).
struct ToleranceAnchor {
  double t = 0.0;
  Vec6 xi = Vec6::Constant(0.01);
};

/// Six independent axis GPs sharing the anchor times.
class BoundProfile {
 public:
  BoundProfile() = default;
  BoundProfile(const std::vector<ToleranceAnchor>& anchors, GPParams pos = kPositionGP,
               GPParams ori = kOrientationGP) {
    std::vector<double> times;
    for (const auto& a : anchors) times.push_back(a.t);
    for (int ax = 0; ax < 6; ++ax) {
      std::vector<double> xi;
      for (const auto& a : anchors) xi.push_back(a.xi[ax]);
      axes_[ax] = GPBoundModel::fit(times, xi, ax < 3 ? pos : ori);
    }
    anchors_ = anchors;
  }

  Vec6 bounds(double t) const {
    Vec6 b;
    for (int ax = 0; ax < 6; ++ax) b[ax] = axes_[ax].bound(t);
    return b;
  }
  const GPBoundModel& axis(int ax) const { return axes_[ax]; }
  const std::vector<ToleranceAnchor>& anchors() const { return anchors_; }

 private:
  std::array<GPBoundModel, 6> axes_;
  std::vector<ToleranceAnchor> anchors_;
};

struct TrackingCheck {
  bool pass = true;
  int first_violation = -1;  // sample index
  int axis = -1;
  double worst_ratio = 0.0;  // max |e| / bound over checked entries
  bool anchors_pass = true;
  int anchor_violation = -1;
};

/// Per-sample errors e_i (6-vectors: position, rotation vector) against the
/// bound profile on the listed axes, plus the raw anchor tolerance at the
/// anchor samples.
inline TrackingCheck check_tracking(const std::vector<double>& times,
                                    const std::vector<Vec6>& errors, const BoundProfile& profile,
                                    AxisSet axes) {
  if (times.size() != errors.size()) throw DimensionError("check_tracking: length mismatch");
  TrackingCheck c;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const Vec6 b = profile.bounds(times[i]);
    for (int ax = 0; ax < 6; ++ax) {
      if (!axes.contains(ax)) continue;
      const double r = std::abs(errors[i][ax]) / b[ax];
      c.worst_ratio = std::max(c.worst_ratio, r);
      if (r > 1.0 && c.pass) {
        c.pass = false;
        c.first_violation = static_cast<int>(i);
        c.axis = ax;
      }
    }
  }
  const auto& anchors = profile.anchors();
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    // Nearest sample to the anchor time.
    std::size_t best = 0;
    for (std::size_t i = 1; i < times.size(); ++i)
      if (std::abs(times[i] - anchors[k].t) < std::abs(times[best] - anchors[k].t)) best = i;
    if (times.empty()) break;
    for (int ax = 0; ax < 6; ++ax)
      if (axes.contains(ax) && std::abs(errors[best][ax]) > anchors[k].xi[ax]) {
        c.anchors_pass = false;
        if (c.anchor_violation < 0) c.anchor_violation = static_cast<int>(k);
      }
  }
  c.pass = c.pass && c.anchors_pass;
  return c;
}

}  // namespace mcd
