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

// Task-space reference generation. Positions are piecewise polynomials
// minimizing integrated squared acceleration through the waypoints; speed,
// acceleration and obstacle limits are imposed by iterated cutting planes on
// a collocation grid. Orientations follow the geodesic between waypoints.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mcd/collision.hpp"
#include "mcd/qp.hpp"
#include "mcd/so3.hpp"
#include "mcd/types.hpp"

namespace mcd {

struct Waypoint {
  double t = std::numeric_limits<double>::quiet_NaN();  // NaN: timed by the planner
  Vec3 p = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  Vec3 tol_p = Vec3::Constant(0.0005);
  Vec3 tol_o = Vec3::Constant(0.001);
};

enum class Boundary { kRest, kFree };

struct PlannerOptions {
  double v_max = 0.25;     // m/s
  double a_max = 0.5;      // m/s^2
  double w_max = 0.5;      // rad/s, used only for automatic timing
  int order = 5;           // polynomial order per segment, >= 5
  Boundary boundary = Boundary::kRest;
  double clearance = 0.05;  // obstacle inflation, m
  int collocation = 200;    // samples per segment for the cutting planes
  int max_cuts = 60;
  int max_retries = 3;
};

/// Piecewise polynomial in normalized segment time s in [0, 1].
struct PositionTrajectory {
  std::vector<double> knots;                        // segment boundary times
  std::vector<std::array<VecX, 3>> coeffs;          // per segment, per axis, ascending powers of s
  double objective = 0.0;                           // integral of |p''|^2

  int segments() const { return static_cast<int>(coeffs.size()); }
  double duration() const { return knots.back() - knots.front(); }

  int segment_of(double t) const {
    const auto it = std::upper_bound(knots.begin() + 1, knots.end() - 1, t);
    return static_cast<int>(it - knots.begin()) - 1;
  }

  /// d-th time derivative at t (0 <= d <= 2).
  Vec3 eval(double t, int d) const {
    const int k = segment_of(t);
    const double T = knots[k + 1] - knots[k];
    const double s = std::clamp((t - knots[k]) / T, 0.0, 1.0);
    Vec3 out;
    for (int ax = 0; ax < 3; ++ax) {
      const VecX& c = coeffs[k][ax];
      double acc = 0.0;
      for (int i = static_cast<int>(c.size()) - 1; i >= d; --i) {
        double f = 1.0;
        for (int j = 0; j < d; ++j) f *= i - j;
        acc = acc * s + f * c[i];
      }
      out[ax] = acc / std::pow(T, d);
    }
    return out;
  }
  Vec3 position(double t) const { return eval(t, 0); }
  Vec3 velocity(double t) const { return eval(t, 1); }
  Vec3 acceleration(double t) const { return eval(t, 2); }
};

struct PositionPlan {
  bool feasible = false;
  std::string reason;
  int retries = 0;
  int cuts = 0;
  std::vector<Waypoint> waypoints;  // including any inserted via-points
  PositionTrajectory traj;
};

namespace detail {

// Monomial weights of the d-th s-derivative at s.
inline VecX monomial_row(int n, double s, int d) {
  VecX w = VecX::Zero(n + 1);
  for (int i = d; i <= n; ++i) {
    double f = 1.0;
    for (int j = 0; j < d; ++j) f *= i - j;
    w[i] = f * std::pow(s, i - d);
  }
  return w;
}

// Gram matrix of second derivatives of monomials over [0, 1].
inline MatX accel_gram(int n) {
  MatX Q = MatX::Zero(n + 1, n + 1);
  for (int i = 2; i <= n; ++i)
    for (int j = 2; j <= n; ++j)
      Q(i, j) = double(i * (i - 1) * j * (j - 1)) / double(i + j - 3);
  return Q;
}

inline double box_clearance_gradient(const Box& b, const Vec3& p, Vec3* g) {
  const double h = 1e-7;
  for (int i = 0; i < 3; ++i) {
    Vec3 e = Vec3::Zero();
    e[i] = h;
    (*g)[i] = (box_sdf(b, p + e) - box_sdf(b, p - e)) / (2 * h);
  }
  if (g->norm() < 1e-12) *g = Vec3::UnitZ();
  g->normalize();
  return box_sdf(b, p);
}

// Knot values (v, a) and bubble coefficients per axis are the unknowns;
// segment polynomials are affine in them.
class QuinticBasis {
 public:
  QuinticBasis(const std::vector<Waypoint>& wps, int order, Boundary bc)
      : wps_(wps), n_(order), S_(static_cast<int>(wps.size()) - 1) {
    const int K = S_ + 1;
    knot_var_.assign(K, {-1, -1});
    int idx = 0;
    for (int k = 0; k < K; ++k) {
      const bool fixed = bc == Boundary::kRest && (k == 0 || k == S_);
      if (!fixed) knot_var_[k] = {idx, idx + 1}, idx += 2;
    }
    bubble0_ = idx;
    nv_ = idx + S_ * (n_ - 5);
  }

  int axis_vars() const { return nv_; }
  int vars() const { return 3 * nv_; }
  int order() const { return n_; }
  int segments() const { return S_; }
  double T(int k) const { return wps_[k + 1].t - wps_[k].t; }

  // coefficients = A x_axis + b for segment k, axis ax.
  void segment_map(int k, int ax, MatX& A, VecX& b) const {
    static const double H[6][6] = {
        {1, 0, 0, -10, 15, -6},     // p0
        {0, 1, 0, -6, 8, -3},       // v0
        {0, 0, .5, -1.5, 1.5, -.5}, // a0
        {0, 0, 0, 10, -15, 6},      // p1
        {0, 0, 0, -4, 7, -3},       // v1
        {0, 0, 0, .5, -1, .5}};     // a1
    const double Tk = T(k);
    A = MatX::Zero(n_ + 1, nv_);
    b = VecX::Zero(n_ + 1);
    const double p0 = wps_[k].p[ax], p1 = wps_[k + 1].p[ax];
    for (int i = 0; i < 6; ++i) b[i] = H[0][i] * p0 + H[3][i] * p1;
    auto put = [&](int var, const double* h, double scale) {
      if (var < 0) return;
      for (int i = 0; i < 6; ++i) A(i, var) += h[i] * scale;
    };
    put(knot_var_[k][0], H[1], Tk);
    put(knot_var_[k][1], H[2], Tk * Tk);
    put(knot_var_[k + 1][0], H[4], Tk);
    put(knot_var_[k + 1][1], H[5], Tk * Tk);
    // s^3 (1 - s)^3 s^j vanishes to second order at both ends.
    for (int j = 0; j < n_ - 5; ++j) {
      const int var = bubble0_ + k * (n_ - 5) + j;
      A(3 + j, var) += 1;
      A(4 + j, var) -= 3;
      A(5 + j, var) += 3;
      A(6 + j, var) -= 1;
    }
  }

 private:
  const std::vector<Waypoint>& wps_;
  int n_;
  int S_;
  std::vector<std::array<int, 2>> knot_var_;
  int bubble0_ = 0;
  int nv_ = 0;
};

inline void check_waypoints(const std::vector<Waypoint>& wps) {
  if (wps.size() < 2) throw ConfigError("trajectory: at least two waypoints are required");
  for (std::size_t k = 0; k < wps.size(); ++k) {
    if (!std::isfinite(wps[k].t)) throw ConfigError("trajectory: waypoint " + std::to_string(k) + " has no time");
    if (k > 0 && !(wps[k].t > wps[k - 1].t))
      throw ConfigError("trajectory: waypoint times must be strictly increasing (waypoint " +
                        std::to_string(k) + ")");
    if ((wps[k].tol_p.array() <= 0).any() || (wps[k].tol_o.array() <= 0).any())
      throw ConfigError("trajectory: waypoint tolerances must be positive");
  }
}

}  // namespace detail

/// Fills missing waypoint times: each segment gets the longest of the
/// rest-to-rest times implied by v_max, a_max and w_max, with a 20% margin,
/// rounded up to a multiple of 0.1 s so common sample steps land on the knots.
inline void assign_times(std::vector<Waypoint>& wps, const PlannerOptions& opt, double t0 = 0.0) {
  if (wps.empty()) return;
  if (std::isnan(wps[0].t)) wps[0].t = t0;
  for (std::size_t k = 1; k < wps.size(); ++k) {
    if (!std::isnan(wps[k].t)) continue;
    const double d = (wps[k].p - wps[k - 1].p).norm();
    const double ang = so3::log(wps[k - 1].R.transpose() * wps[k].R).norm();
    double T = std::max({1.875 * d / opt.v_max, std::sqrt(5.8 * d / opt.a_max), ang / opt.w_max, 0.2});
    wps[k].t = wps[k - 1].t + std::ceil(12.0 * T - 1e-9) / 10.0;
  }
}

/// Minimum-acceleration position trajectory through timed waypoints.
inline PositionPlan plan_position(std::vector<Waypoint> wps, const PlannerOptions& opt,
                                  const std::vector<Box>& obstacles = {}) {
  detail::check_waypoints(wps);
  if (opt.order < 5) throw ConfigError("trajectory: polynomial order must be at least 5");
  if (!(opt.v_max > 0) || !(opt.a_max > 0)) throw ConfigError("trajectory: v_max and a_max must be positive");

  PositionPlan plan;
  for (std::size_t k = 0; k < wps.size(); ++k)
    for (std::size_t b = 0; b < obstacles.size(); ++b)
      if (box_sdf(obstacles[b], wps[k].p) < opt.clearance) {
        plan.reason = "waypoint " + std::to_string(k) + " lies inside inflated obstacle " + std::to_string(b);
        plan.waypoints = wps;
        return plan;
      }
  for (std::size_t k = 0; k + 1 < wps.size(); ++k) {
    const double need = (wps[k + 1].p - wps[k].p).norm() / (wps[k + 1].t - wps[k].t);
    if (need > opt.v_max) {
      plan.reason = "segment " + std::to_string(k) + ": mean speed " + std::to_string(need) +
                    " m/s exceeds v_max";
      plan.waypoints = wps;
      return plan;
    }
  }

  const int n = opt.order;
  const MatX Qg = detail::accel_gram(n);
  for (int attempt = 0;; ++attempt) {
    plan.retries = attempt;
    plan.waypoints = wps;
    detail::QuinticBasis basis(wps, n, opt.boundary);
    const int S = basis.segments();
    const int nv = basis.axis_vars();
    std::vector<std::array<MatX, 3>> A(S);
    std::vector<std::array<VecX, 3>> b(S);
    QPProblem qp;
    qp.H = MatX::Zero(basis.vars(), basis.vars());
    qp.g = VecX::Zero(basis.vars());
    for (int k = 0; k < S; ++k) {
      const double w = 2.0 / std::pow(basis.T(k), 3);
      for (int ax = 0; ax < 3; ++ax) {
        basis.segment_map(k, ax, A[k][ax], b[k][ax]);
        qp.H.block(ax * nv, ax * nv, nv, nv) += w * A[k][ax].transpose() * Qg * A[k][ax];
        qp.g.segment(ax * nv, nv) += w * A[k][ax].transpose() * Qg * b[k][ax];
      }
    }
    qp.H += 1e-12 * MatX::Identity(basis.vars(), basis.vars());
    qp.Aeq = MatX(0, basis.vars());
    qp.beq = VecX(0);
    qp.Ain = MatX(0, basis.vars());
    qp.bin = VecX(0);

    std::vector<VecX> rows;
    std::vector<double> rhs;
    // Affine maps of the d-th derivative at (k, s) to world coordinates.
    auto deriv_rows = [&](int k, double s, int d, MatX& G, Vec3& c) {
      const VecX m = detail::monomial_row(n, s, d) / std::pow(basis.T(k), d);
      G = MatX::Zero(3, basis.vars());
      for (int ax = 0; ax < 3; ++ax) {
        G.block(ax, ax * nv, 1, nv) = m.transpose() * A[k][ax];
        c[ax] = m.dot(b[k][ax]);
      }
    };

    VecX x = VecX::Zero(basis.vars());
    bool converged = false, qp_failed = false;
    int worst_obstacle_seg = -1;
    double worst_obstacle = 0.0;
    for (int iter = 0; iter < opt.max_cuts; ++iter) {
      if (!rows.empty()) {
        qp.Ain.resize(static_cast<int>(rows.size()), basis.vars());
        qp.bin.resize(static_cast<int>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
          qp.Ain.row(r) = rows[r].transpose();
          qp.bin[r] = rhs[r];
        }
      }
      const QPResult sol = solve_qp(qp);
      if (!sol.ok()) {
        qp_failed = true;
        plan.reason = std::string("position QP ") + to_string(sol.status) +
                      " under speed/acceleration/obstacle constraints";
        break;
      }
      x = sol.x;
      plan.cuts = iter;
      int added = 0;
      worst_obstacle_seg = -1;
      worst_obstacle = 0.0;
      for (int k = 0; k < S; ++k) {
        for (int i = 0; i <= opt.collocation; ++i) {
          const double s = double(i) / opt.collocation;
          MatX G;
          Vec3 c;
          for (int d = 1; d <= 2; ++d) {
            deriv_rows(k, s, d, G, c);
            const Vec3 val = G * x + c;
            const double lim = d == 1 ? opt.v_max : opt.a_max;
            if (val.norm() > lim) {
              // n.val <= lim is implied by |val| <= lim.
              const Vec3 nrm = val.normalized();
              rows.push_back(-(nrm.transpose() * G).transpose());
              rhs.push_back(-(lim * (1.0 - 1e-3) - nrm.dot(c)));
              ++added;
            }
          }
          if (obstacles.empty()) continue;
          deriv_rows(k, s, 0, G, c);
          const Vec3 p = G * x + c;
          for (const auto& box : obstacles) {
            Vec3 grad;
            const double dist = detail::box_clearance_gradient(box, p, &grad);
            if (dist < opt.clearance) {
              // The distance to a convex box is convex, so its tangent plane
              // underestimates it and the cut is conservative.
              rows.push_back((grad.transpose() * G).transpose());
              rhs.push_back(opt.clearance + 1e-6 - dist + grad.dot(p) - grad.dot(c));
              ++added;
              if (opt.clearance - dist > worst_obstacle) {
                worst_obstacle = opt.clearance - dist;
                worst_obstacle_seg = k;
              }
            }
          }
        }
      }
      if (added == 0) {
        converged = true;
        break;
      }
    }
    if (!converged && !qp_failed) plan.reason = "cutting planes did not converge";

    plan.traj = PositionTrajectory{};
    for (int k = 0; k <= S; ++k) plan.traj.knots.push_back(wps[k].t);
    plan.traj.coeffs.resize(S);
    plan.traj.objective = 0.0;
    for (int k = 0; k < S; ++k)
      for (int ax = 0; ax < 3; ++ax) {
        plan.traj.coeffs[k][ax] = A[k][ax] * x.segment(ax * nv, nv) + b[k][ax];
        const VecX& c = plan.traj.coeffs[k][ax];
        plan.traj.objective += c.dot(Qg * c) / std::pow(basis.T(k), 3);
      }
    if (converged) {
      plan.feasible = true;
      plan.reason.clear();
      return plan;
    }
    if (attempt >= opt.max_retries || obstacles.empty()) return plan;

    // Retry with a via-point at the middle of the offending segment, pushed
    // out of the obstacle along the distance gradient.
    int k = worst_obstacle_seg;
    if (k < 0) k = 0;
    Waypoint mid = wps[k];
    mid.t = 0.5 * (wps[k].t + wps[k + 1].t);
    mid.R = wps[k].R * so3::exp(0.5 * so3::log(wps[k].R.transpose() * wps[k + 1].R));
    mid.p = 0.5 * (wps[k].p + wps[k + 1].p);
    for (int it = 0; it < 50; ++it) {
      double worst = std::numeric_limits<double>::infinity();
      const Box* near = nullptr;
      for (const auto& box : obstacles) {
        const double d = box_sdf(box, mid.p);
        if (d < worst) worst = d, near = &box;
      }
      const double target = 2.0 * opt.clearance + 0.02;
      if (worst >= target) break;
      Vec3 grad;
      detail::box_clearance_gradient(*near, mid.p, &grad);
      mid.p += grad * (target - worst + 1e-3);
    }
    wps.insert(wps.begin() + k + 1, mid);
  }
}

/// Geodesic orientation interpolation between waypoint rotations.
struct OrientationTrajectory {
  std::vector<double> knots;
  std::vector<Mat3> R0;   // segment start rotation
  std::vector<Vec3> phi;  // segment log vector in the start frame

  int segment_of(double t) const {
    const auto it = std::upper_bound(knots.begin() + 1, knots.end() - 1, t);
    return static_cast<int>(it - knots.begin()) - 1;
  }
  Mat3 rotation(double t) const {
    const int k = segment_of(t);
    const double s = std::clamp((t - knots[k]) / (knots[k + 1] - knots[k]), 0.0, 1.0);
    return R0[k] * so3::exp(s * phi[k]);
  }
  /// World-frame angular velocity; constant within a segment.
  Vec3 omega(double t) const {
    const int k = segment_of(t);
    return R0[k] * phi[k] / (knots[k + 1] - knots[k]);
  }
};

inline OrientationTrajectory plan_orientation(const std::vector<Waypoint>& wps) {
  detail::check_waypoints(wps);
  OrientationTrajectory o;
  for (const auto& w : wps) o.knots.push_back(w.t);
  Mat3 Rin = wps[0].R;
  for (std::size_t k = 0; k + 1 < wps.size(); ++k) {
    Mat3 Rd = wps[k + 1].R;
    Mat3 rel = Rin.transpose() * Rd;
    const double c = std::clamp((rel.trace() - 1.0) * 0.5, -1.0, 1.0);
    if (M_PI - std::acos(c) < 1e-9) {
      // Half-turn: the geodesic is not unique. Nudge the target about a
      // fixed axis so the direction is well defined.
      Rd = Rd * so3::exp(Vec3(1e-6, 0.0, 0.0));
      rel = Rin.transpose() * Rd;
    }
    o.R0.push_back(Rin);
    o.phi.push_back(so3::log(rel));
    Rin = Rin * so3::exp(o.phi.back());
  }
  return o;
}

/// Uniformly sampled, synchronized reference.
struct ReferenceTrajectory {
  double dt = 0.01;
  std::vector<double> t;
  std::vector<Vec3> p, v, a;
  std::vector<Mat3> R;
  std::vector<Vec3> omega;  // world frame
  std::vector<int> segment;
  std::vector<Waypoint> waypoints;

  std::size_t size() const { return t.size(); }
  /// Index clamped to the last sample; used for horizon preview.
  std::size_t clamp(std::size_t i) const { return std::min(i, t.size() - 1); }
  Eigen::Vector4d quat(std::size_t i) const { return so3::quat_from_matrix(R[clamp(i)]); }
};

inline ReferenceTrajectory sample(const PositionTrajectory& pos, const OrientationTrajectory& ori, double dt) {
  if (!(dt > 0)) throw ConfigError("trajectory: dt must be positive");
  double shortest = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < pos.knots.size(); ++k)
    shortest = std::min(shortest, pos.knots[k + 1] - pos.knots[k]);
  if (dt > shortest + 1e-12)
    throw ConfigError("trajectory: dt " + std::to_string(dt) + " exceeds the shortest segment duration " +
                      std::to_string(shortest));
  ReferenceTrajectory ref;
  ref.dt = dt;
  const double t0 = pos.knots.front();
  const double T = pos.duration();
  const auto count = static_cast<std::size_t>(std::floor(T / dt + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) {
    const double t = std::min(t0 + i * dt, pos.knots.back());
    ref.t.push_back(t);
    ref.p.push_back(pos.position(t));
    ref.v.push_back(pos.velocity(t));
    ref.a.push_back(pos.acceleration(t));
    ref.R.push_back(ori.rotation(t));
    ref.omega.push_back(ori.omega(t));
    ref.segment.push_back(pos.segment_of(t));
  }
  return ref;
}

struct ReferencePlan {
  bool feasible = false;
  std::string reason;
  PositionPlan position;
  OrientationTrajectory orientation;
  ReferenceTrajectory reference;
};

/// Times the waypoints if needed, plans position and orientation and samples.
inline ReferencePlan plan_reference(std::vector<Waypoint> wps, const PlannerOptions& opt,
                                    const std::vector<Box>& obstacles, double dt) {
  assign_times(wps, opt);
  ReferencePlan out;
  out.position = plan_position(wps, opt, obstacles);
  out.feasible = out.position.feasible;
  out.reason = out.position.reason;
  if (!out.feasible) return out;
  out.orientation = plan_orientation(out.position.waypoints);
  out.reference = sample(out.position.traj, out.orientation, dt);
  out.reference.waypoints = out.position.waypoints;
  return out;
}

}  // namespace mcd
