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

// Assist-branch posture optimization for bi-branch designs. Each step picks
// the assist joints that minimize whole-body torque with the main branch held
// at its planned state; the resulting samples become B-spline control points
// and the smoothed motion is checked again against the torque limits.

#include <algorithm>
#include <cmath>
#include <vector>

#include "mcd/bspline.hpp"
#include "mcd/dynamics.hpp"

namespace mcd {

struct AssistOptions {
  double lambda = 0.01;  // pull toward the initial assist posture
  double mu = 100.0;     // torque-limit penalty weight
  double alpha = 10.0;   // softplus sharpness, 1/(N m)
  int max_iterations = 50;
  double step_tolerance = 1e-6;
  int degree = 3;
  bool gravity = true;
};

/// Main-branch motion is given as full joint vectors; their assist entries
/// are ignored.
struct AssistProblem {
  const KinematicModel* model = nullptr;
  double dt = 0.01;
  std::vector<double> t;
  std::vector<VecX> q, qd, qdd;
  VecX q0;  // initial assist state, assist joints only
  Vec6 F_ext = Vec6::Zero();
  AssistOptions opt;

  int steps() const { return static_cast<int>(q.size()); }

  void validate() const {
    if (model == nullptr) throw ConfigError("assist: no model");
    const AssistOptions& o = opt;
    if (o.lambda < 0 || o.mu < 0) throw ConfigError("assist: weights must be nonnegative");
    if (!(o.alpha > 0)) throw ConfigError("assist: alpha must be positive");
    if (q0.size() != model->assist_dof())
      throw DimensionError("assist: q0 has " + std::to_string(q0.size()) +
                           " entries, model has " + std::to_string(model->assist_dof()) +
                           " assist joints");
    if (qd.size() != q.size() || qdd.size() != q.size() || t.size() != q.size())
      throw DimensionError("assist: trajectory arrays differ in length");
    for (std::size_t i = 0; i < q.size(); ++i) {
      model->check_dim(q[i], "assist q");
      model->check_dim(qd[i], "assist qd");
      model->check_dim(qdd[i], "assist qdd");
    }
  }
};

/// (1/alpha) ln(1 + e^(alpha x)) without overflow.
inline double softplus(double x, double alpha) {
  const double z = alpha * x;
  if (z > 0) return x + std::log1p(std::exp(-z)) / alpha;
  return std::log1p(std::exp(z)) / alpha;
}

inline double logistic(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

/// Sum over joints of softplus(|tau| - tau_max)^2.
inline double softplus_torque_penalty(const VecX& tau, const VecX& tau_max, double alpha) {
  if (!(alpha > 0)) throw ConfigError("softplus: alpha must be positive");
  if (tau.size() != tau_max.size()) throw DimensionError("softplus: size mismatch");
  double s = 0.0;
  for (int j = 0; j < tau.size(); ++j) {
    const double v = softplus(std::abs(tau[j]) - tau_max[j], alpha);
    s += v * v;
  }
  return s;
}

inline VecX whole_body_torque(const KinematicModel& model, const VecX& q, const VecX& qd,
                              const VecX& qdd, const Vec6& F_ext, bool gravity) {
  const FKResult fk = forward_kinematics(model, q);
  VecX tau = rnea(model, q, qd, qdd, gravity, fk);
  if (!F_ext.isZero(0.0)) tau -= jacobian(model, q, fk).transpose() * F_ext;
  return tau;
}

/// Writes assist entries into a full joint vector.
inline void scatter(VecX& full, const std::vector<int>& idx, const VecX& part) {
  for (std::size_t k = 0; k < idx.size(); ++k) full[idx[k]] = part[static_cast<int>(k)];
}

inline VecX gather(const VecX& full, const std::vector<int>& idx) {
  VecX out(static_cast<int>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<int>(k)] = full[idx[k]];
  return out;
}

namespace detail {

/// Residuals whose squared norm is the per-step objective:
/// [tau; sqrt(lambda)(q_a - q0); sqrt(mu) softplus(|tau| - tau_max)].
struct AssistResidual {
  const AssistProblem& pb;
  int i;
  VecX qd_a, qdd_a;
  std::vector<int> idx;
  VecX tau_max;

  VecX torque(const VecX& q_a) const {
    VecX q = pb.q[i], qd = pb.qd[i], qdd = pb.qdd[i];
    scatter(q, idx, q_a);
    scatter(qd, idx, qd_a);
    scatter(qdd, idx, qdd_a);
    return whole_body_torque(*pb.model, q, qd, qdd, pb.F_ext, pb.opt.gravity);
  }

  VecX residual(const VecX& q_a, const VecX& tau) const {
    const int n = static_cast<int>(tau.size());
    const int d = static_cast<int>(q_a.size());
    VecX r(2 * n + d);
    r.head(n) = tau;
    r.segment(n, d) = std::sqrt(pb.opt.lambda) * (q_a - pb.q0);
    for (int j = 0; j < n; ++j)
      r[n + d + j] = std::sqrt(pb.opt.mu) *
                     softplus(std::abs(tau[j]) - tau_max[j], pb.opt.alpha);
    return r;
  }

  double value(const VecX& q_a) const { return residual(q_a, torque(q_a)).squaredNorm(); }

  VecX gradient(const VecX& q_a, const VecX& tau, const VecX& r) const {
    return 2.0 * jacobian(q_a, tau).transpose() * r;
  }

  /// Central differences of the gradient, symmetrized.
  MatX hessian(const VecX& q_a) const {
    const int d = static_cast<int>(q_a.size());
    MatX H(d, d);
    const double h = 1e-4;
    for (int c = 0; c < d; ++c) {
      VecX a = q_a, b = q_a;
      a[c] += h;
      b[c] -= h;
      const VecX ta = torque(a), tb = torque(b);
      H.col(c) = (gradient(a, ta, residual(a, ta)) - gradient(b, tb, residual(b, tb))) / (2 * h);
    }
    return 0.5 * (H + H.transpose());
  }

  /// Residual Jacobian; the torque part by central differences.
  MatX jacobian(const VecX& q_a, const VecX& tau) const {
    const int n = static_cast<int>(tau.size());
    const int d = static_cast<int>(q_a.size());
    MatX Jt(n, d);
    const double h = 1e-6;
    for (int c = 0; c < d; ++c) {
      VecX a = q_a, b = q_a;
      a[c] += h;
      b[c] -= h;
      Jt.col(c) = (torque(a) - torque(b)) / (2 * h);
    }
    MatX J = MatX::Zero(2 * n + d, d);
    J.topRows(n) = Jt;
    J.block(n, 0, d, d) = std::sqrt(pb.opt.lambda) * MatX::Identity(d, d);
    for (int j = 0; j < n; ++j) {
      const double s = tau[j] >= 0 ? 1.0 : -1.0;
      const double g = logistic(pb.opt.alpha * (std::abs(tau[j]) - tau_max[j]));
      J.row(n + d + j) = std::sqrt(pb.opt.mu) * g * s * Jt.row(j);
    }
    return J;
  }
};

}  // namespace detail

struct AssistStep {
  VecX q;  // assist joints
  double objective = 0.0;
  double objective_warm = 0.0;
  int iterations = 0;
  bool stalled = false;
};

/// Per-step objective at assist posture q_a with the given assist rates.
inline double assist_objective(const AssistProblem& pb, int i, const VecX& q_a,
                               const VecX& qd_a, const VecX& qdd_a) {
  detail::AssistResidual res{pb, i, qd_a, qdd_a, pb.model->joint_indices(Branch::kAssist),
                             pb.model->torque_limits()};
  return res.value(q_a);
}

/// Projected Newton iteration from `warm` with a difference Hessian. The assist rates are fixed
/// parameters, so the problem is over the posture q_a only.
/// `lo` and `hi` bound the assist posture; they must lie inside the joint
/// position limits.
inline AssistStep solve_step(const AssistProblem& pb, int i, const VecX& warm, const VecX& qd_a,
                             const VecX& qdd_a, const VecX& lo, const VecX& hi) {
  if (i < 0 || i >= pb.steps()) throw Error("assist: step index out of range");
  const KinematicModel& m = *pb.model;
  detail::AssistResidual res{pb, i, qd_a, qdd_a, m.joint_indices(Branch::kAssist),
                             m.torque_limits()};
  const int d = static_cast<int>(warm.size());
  if (lo.size() != d || hi.size() != d) throw DimensionError("assist: bound size mismatch");

  // The effective warm start is the given one clamped into the box.
  AssistStep out;
  const VecX start = warm.cwiseMax(lo).cwiseMin(hi);
  VecX x = start;
  VecX tau = res.torque(x);
  VecX r = res.residual(x, tau);
  out.objective_warm = r.squaredNorm();
  double f = r.squaredNorm();
  bool converged = false;
  int it = 0;
  for (; it < pb.opt.max_iterations && !converged; ++it) {
    const VecX g = res.gradient(x, tau, r);
    // Variables at a bound with the descent direction pointing out stay put.
    std::vector<int> free;
    for (int c = 0; c < d; ++c) {
      const bool at_lo = x[c] <= lo[c] + 1e-12 && g[c] > 0;
      const bool at_hi = x[c] >= hi[c] - 1e-12 && g[c] < 0;
      if (!at_lo && !at_hi) free.push_back(c);
    }
    if (free.empty()) {
      converged = true;
      break;
    }
    const MatX Hfull = res.hessian(x);
    const int nf = static_cast<int>(free.size());
    MatX H(nf, nf);
    VecX gf(nf);
    for (int a = 0; a < nf; ++a) {
      gf[a] = g[free[a]];
      for (int b = 0; b < nf; ++b) H(a, b) = Hfull(free[a], free[b]);
    }
    // Shift to positive definite where the objective is locally concave.
    const double emin = Eigen::SelfAdjointEigenSolver<MatX>(H).eigenvalues().minCoeff();
    const double floor = 1e-8 * (1.0 + H.diagonal().cwiseAbs().maxCoeff());
    if (emin < floor) H.diagonal().array() += floor - emin;
    const VecX step = H.ldlt().solve(-gf);
    VecX dx = VecX::Zero(d);
    for (int a = 0; a < nf; ++a) dx[free[a]] = step[a];

    double s = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 30; ++ls, s *= 0.5) {
      const VecX xn = (x + s * dx).cwiseMax(lo).cwiseMin(hi);
      const VecX tn = res.torque(xn);
      const VecX rn = res.residual(xn, tn);
      const double fn = rn.squaredNorm();
      if (fn < f) {
        const double moved_by = (xn - x).norm();
        x = xn;
        tau = tn;
        r = rn;
        f = fn;
        moved = true;
        if (moved_by < pb.opt.step_tolerance) converged = true;
        break;
      }
    }
    // No decrease along a descent direction: stationary to the accuracy of
    // the difference derivatives.
    if (!moved) converged = true;
  }
  out.iterations = it;
  if (!converged) {
    out.q = start;
    out.objective = out.objective_warm;
    out.stalled = true;
    return out;
  }
  out.q = x;
  out.objective = f;
  return out;
}

/// Same, bounded by the joint position limits only.
inline AssistStep solve_step(const AssistProblem& pb, int i, const VecX& warm, const VecX& qd_a,
                             const VecX& qdd_a) {
  const auto idx = pb.model->joint_indices(Branch::kAssist);
  return solve_step(pb, i, warm, qd_a, qdd_a, gather(pb.model->q_lower(), idx),
                    gather(pb.model->q_upper(), idx));
}

/// Postures reachable at step i from the two previous ones under the joint
/// velocity and acceleration limits, intersected with the position limits.
/// The speed is further capped so the joint can still brake to rest within
/// `remaining` seconds. When no posture satisfies everything the box
/// collapses to the nearest admissible point.
inline std::pair<VecX, VecX> rate_box(const KinematicModel& m, const std::vector<int>& idx,
                                      const VecX& prev, const VecX& prev2, double dt,
                                      double remaining) {
  const int d = static_cast<int>(idx.size());
  VecX lo(d), hi(d);
  for (int k = 0; k < d; ++k) {
    const JointInfo& j = m.joints[idx[k]];
    const double pred = 2.0 * prev[k] - prev2[k];
    const double a = j.a_max * dt * dt;
    const double v = std::min(j.v_max, j.a_max * std::max(remaining, 0.0)) * dt;
    lo[k] = std::max({j.q_min, pred - a, prev[k] - v});
    hi[k] = std::min({j.q_max, pred + a, prev[k] + v});
    if (lo[k] > hi[k]) lo[k] = hi[k] = std::clamp(pred, j.q_min, j.q_max);
  }
  return {lo, hi};
}

struct SmoothedTrajectory {
  BSpline spline;
  bool passthrough = false;  // too few samples for the degree
  std::vector<VecX> q, qd, qdd;
};

/// Raw samples at uniform times t become control points of a clamped
/// uniform B-spline, resampled at the same times. The end samples are
/// repeated degree - 1 times and the knot spacing equals the sample spacing,
/// so the parameter domain extends (degree - 1) dt / 2 past both ends. With
/// that layout the first derivative is a convex combination of raw
/// differences over dt, hence no resampled step is longer than the longest
/// raw step, and the curve starts and ends at rest.
inline SmoothedTrajectory smooth(const std::vector<VecX>& raw, const std::vector<double>& t,
                                 int degree) {
  if (raw.size() != t.size()) throw DimensionError("smooth: samples and times differ");
  if (degree < 1) throw ConfigError("smooth: degree must be >= 1");
  SmoothedTrajectory out;
  const int K = static_cast<int>(raw.size());
  if (K == 0) return out;
  const int d = static_cast<int>(raw.front().size());
  if (K < degree + 1 || !(t.back() > t.front())) {
    out.passthrough = true;
    out.q = raw;
    out.qd.assign(K, VecX::Zero(d));
    out.qdd.assign(K, VecX::Zero(d));
    return out;
  }
  const double dt = (t.back() - t.front()) / (K - 1);
  for (int k = 1; k < K; ++k)
    if (std::abs(t[k] - t[k - 1] - dt) > 1e-9 * (1 + dt))
      throw ConfigError("smooth: sample times must be uniform");
  const int pad = degree - 1;
  MatX P(d, K + 2 * pad);
  for (int k = 0; k < pad; ++k) {
    P.col(k) = raw.front();
    P.col(K + pad + k) = raw.back();
  }
  for (int k = 0; k < K; ++k) P.col(pad + k) = raw[k];
  const double ext = 0.5 * pad * dt;
  out.spline = BSpline(std::move(P), degree, t.front() - ext, t.back() + ext);
  for (int k = 0; k < K; ++k) {
    out.q.push_back(out.spline.eval(t[k], 0));
    out.qd.push_back(out.spline.eval(t[k], 1));
    out.qdd.push_back(out.spline.eval(t[k], 2));
  }
  return out;
}

struct TorqueCheck {
  TorqueProfile profile;
  TorqueReport report;
};

/// Whole-body inverse dynamics along full joint trajectories.
inline TorqueCheck recheck(const KinematicModel& model, const std::vector<VecX>& q,
                           const std::vector<VecX>& qd, const std::vector<VecX>& qdd,
                           const Vec6& F_ext = Vec6::Zero(), bool gravity = true) {
  TorqueCheck c;
  c.profile.tau_max = model.torque_limits();
  for (std::size_t i = 0; i < q.size(); ++i)
    c.profile.tau.push_back(whole_body_torque(model, q[i], qd[i], qdd[i], F_ext, gravity));
  c.report = torque_feasible(c.profile);
  return c;
}

/// Largest |tau| over steps and the given joints.
inline double peak_torque(const TorqueProfile& p, const std::vector<int>& joints) {
  double m = 0.0;
  for (const auto& tau : p.tau)
    for (int j : joints) m = std::max(m, std::abs(tau[j]));
  return m;
}

struct AssistResult {
  bool active = false;     // false when the model has no assist joints
  std::vector<VecX> raw;   // per-step optimum, assist joints
  std::vector<AssistStep> steps;
  SmoothedTrajectory smoothed;
  std::vector<VecX> q, qd, qdd;  // full joint vectors: main as given, assist smoothed
  TorqueCheck check;
  int stalled_steps = 0;
};

inline AssistResult optimize_assist(const AssistProblem& pb) {
  pb.validate();
  const KinematicModel& m = *pb.model;
  AssistResult out;
  out.q = pb.q;
  out.qd = pb.qd;
  out.qdd = pb.qdd;
  const auto idx = m.joint_indices(Branch::kAssist);
  if (idx.empty() || pb.q.empty()) {
    if (!pb.q.empty()) out.check = recheck(m, out.q, out.qd, out.qdd, pb.F_ext, pb.opt.gravity);
    return out;
  }
  out.active = true;
  const int d = static_cast<int>(idx.size());
  // Each step is a static posture problem. Feeding back differenced assist
  // rates puts a 1/dt^2 inertia term into the loop and makes successive
  // optima oscillate; the rates of the smoothed curve enter the recheck.
  // After the first step the posture may only move as far as the joint
  // rate limits allow, starting from rest.
  const VecX zero = VecX::Zero(d);
  for (int i = 0; i < pb.steps(); ++i) {
    AssistStep s;
    if (i == 0) {
      s = solve_step(pb, 0, pb.q0, zero, zero);
    } else {
      const VecX& prev = out.raw.back();
      const VecX& prev2 = i >= 2 ? out.raw[i - 2] : prev;
      const auto [lo, hi] = rate_box(m, idx, prev, prev2, pb.dt, pb.t.back() - pb.t[i]);
      s = solve_step(pb, i, prev, zero, zero, lo, hi);
    }
    out.stalled_steps += s.stalled;
    out.raw.push_back(s.q);
    out.steps.push_back(std::move(s));
  }
  out.smoothed = smooth(out.raw, pb.t, pb.opt.degree);
  const VecX lo = gather(m.q_lower(), idx), hi = gather(m.q_upper(), idx);
  for (int i = 0; i < pb.steps(); ++i) {
    scatter(out.q[i], idx, out.smoothed.q[i].cwiseMax(lo).cwiseMin(hi));
    scatter(out.qd[i], idx, out.smoothed.qd[i]);
    scatter(out.qdd[i], idx, out.smoothed.qdd[i]);
  }
  out.check = recheck(m, out.q, out.qd, out.qdd, pb.F_ext, pb.opt.gravity);
  return out;
}

}  // namespace mcd
