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

// Two-level hierarchical MPC over the main branch. The high level tracks the
// high-priority task axes; the low level refines the remaining axes inside
// the null space of the high-priority rows so the end-effector motion on
// those rows is left unchanged.
//
// Decision variable per step: joint acceleration. Velocities follow by
// qd_k = qd_c + dt * sum_{j<=k} qdd_j and positions by q_{k+1} = q_k + dt qd_k,
// so the stacked input u_k = [qd_k; qdd_k] is consistent by construction.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mcd/kinematics.hpp"
#include "mcd/qp.hpp"
#include "mcd/so3.hpp"
#include "mcd/trajectory.hpp"

namespace mcd {

using Vec4 = Eigen::Vector4d;

struct PriorityPartition {
  AxisSet high;
  AxisSet low;
};

struct IKOptions {
  int max_iterations = 500;
  double damping = 0.01;
  double tolerance_fraction = 0.1;  // of the waypoint tolerance
  int seeds = 8;
};

struct MPCConfig {
  int N_h = 10;
  int N_l = 10;
  double dt = 0.01;
  double Q_pos = 10.0;
  double Q_ori = 4.0;
  double R = 0.005;  // on joint velocities and accelerations
  double velocity_weight = 1.0;  // scales Q on the twist part of the state
  double feedback_gain = 10.0;   // 1/s, pose error folded into the twist reference
  IKOptions ik;
};

/// x_e = [p; o; pdot; omega]
struct EEState {
  Vec3 p = Vec3::Zero();
  Vec4 o = Vec4(1, 0, 0, 0);
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();

  Eigen::Matrix<double, 13, 1> vector() const {
    Eigen::Matrix<double, 13, 1> x;
    x << p, o, v, w;
    return x;
  }
};

/// First-order quaternion step with renormalization.
inline Vec4 integrate_quaternion(const Vec4& o, const Vec3& w, double dt) {
  Vec4 n = o + 0.5 * dt * so3::quat_rate_matrix(o) * w;
  return n / n.norm();
}

/// Linearized horizon model around the current state. J and Jdot are
/// frozen across the horizon.
struct Prediction {
  int n = 0;  // main-branch joints
  int N = 0;
  double dt = 0.0;
  std::vector<int> joints;  // model joint indices of the columns
  VecX q, qd;               // current main-branch state
  EEState x0;
  Mat6X J, Jd;

  // Raw stacked system over u = [qd_0; qdd_0; ...; qd_{N-1}; qdd_{N-1}]:
  // X = X0 + B U with X = [x_1; ...; x_N] (13 rows each).
  MatX B;
  VecX X0;

  // Consistency map U = U0 + T z, z = [qdd_0; ...; qdd_{N-1}].
  MatX T;
  VecX U0;

  // Condensed state map X = Xc + Bz z and joint maps.
  MatX Bz;
  VecX Xc;
  MatX Pq;  // dq_{k+1} stacked = dq0 + Pq z
  VecX dq0;
  MatX Vq;  // qd_k stacked = qd0s + Vq z
  VecX qd0s;

  int decision_size() const { return n * N; }
  int raw_input_size() const { return 2 * n * N; }
};

inline EEState ee_state(const KinematicModel& model, const VecX& q_full, const VecX& qd_full) {
  const FKResult fk = forward_kinematics(model, q_full);
  const Mat6X J = jacobian(model, q_full, fk);
  EEState s;
  s.p = fk.ee.p;
  s.o = so3::quat_from_matrix(fk.ee.R);
  const Vec6 tw = J * qd_full;
  s.v = tw.head<3>();
  s.w = tw.tail<3>();
  return s;
}

inline Prediction build_prediction(const KinematicModel& model, const VecX& q_full, const VecX& qd_full,
                                   const MPCConfig& cfg) {
  model.check_dim(q_full, "build_prediction q");
  model.check_dim(qd_full, "build_prediction qd");
  if (cfg.N_h < 1 || cfg.N_l < 1) throw ConfigError("hmpc: horizons must be at least 1");
  if (!(cfg.dt > 0)) throw ConfigError("hmpc: dt must be positive");
  Prediction P;
  P.joints = model.main_joint_indices();
  P.n = static_cast<int>(P.joints.size());
  P.N = cfg.N_h;
  P.dt = cfg.dt;
  const int n = P.n, N = P.N;
  const double dt = cfg.dt;
  const FKResult fk = forward_kinematics(model, q_full);
  const Mat6X Jf = jacobian(model, q_full, fk);
  const Mat6X Jdf = jacobian_dot(model, q_full, qd_full, fk);
  P.J.resize(6, n);
  P.Jd.resize(6, n);
  P.q.resize(n);
  P.qd.resize(n);
  for (int c = 0; c < n; ++c) {
    P.J.col(c) = Jf.col(P.joints[c]);
    P.Jd.col(c) = Jdf.col(P.joints[c]);
    P.q[c] = q_full[P.joints[c]];
    P.qd[c] = qd_full[P.joints[c]];
  }
  P.x0.p = fk.ee.p;
  P.x0.o = so3::quat_from_matrix(fk.ee.R);
  P.x0.v = P.J.topRows<3>() * P.qd;
  P.x0.w = P.J.bottomRows<3>() * P.qd;

  // B_e (13 x 12) maps [v; w; a; alpha] to the forward-Euler state increment.
  Eigen::Matrix<double, 13, 12> Be = Eigen::Matrix<double, 13, 12>::Zero();
  Be.block<3, 3>(0, 0) = dt * Mat3::Identity();
  Be.block<4, 3>(3, 3) = 0.5 * dt * so3::quat_rate_matrix(P.x0.o);
  Be.block<3, 3>(7, 6) = dt * Mat3::Identity();
  Be.block<3, 3>(10, 9) = dt * Mat3::Identity();
  // B_kin (12 x 2n): twist from qd, twist rate from qd and qdd.
  MatX Bkin = MatX::Zero(12, 2 * n);
  Bkin.block(0, 0, 6, n) = P.J;
  Bkin.block(6, 0, 6, n) = P.Jd;
  Bkin.block(6, n, 6, n) = P.J;
  const MatX step = Be * Bkin;

  P.B = MatX::Zero(13 * N, 2 * n * N);
  P.X0.resize(13 * N);
  for (int k = 0; k < N; ++k) {
    P.X0.segment<13>(13 * k) = P.x0.vector();
    for (int i = 0; i <= k; ++i) P.B.block(13 * k, 2 * n * i, 13, 2 * n) = step;
  }

  P.T = MatX::Zero(2 * n * N, n * N);
  P.U0 = VecX::Zero(2 * n * N);
  P.Pq = MatX::Zero(n * N, n * N);
  P.dq0 = VecX::Zero(n * N);
  P.Vq = MatX::Zero(n * N, n * N);
  P.qd0s = VecX::Zero(n * N);
  const MatX I = MatX::Identity(n, n);
  for (int k = 0; k < N; ++k) {
    P.U0.segment(2 * n * k, n) = P.qd;
    P.qd0s.segment(n * k, n) = P.qd;
    P.dq0.segment(n * k, n) = (k + 1) * dt * P.qd;
    for (int j = 0; j <= k; ++j) {
      P.T.block(2 * n * k, n * j, n, n) = dt * I;
      P.Vq.block(n * k, n * j, n, n) = dt * I;
      P.Pq.block(n * k, n * j, n, n) = dt * dt * (k - j + 1) * I;
    }
    P.T.block(2 * n * k + n, n * k, n, n) = I;
  }
  P.Bz = P.B * P.T;
  P.Xc = P.X0 + P.B * P.U0;
  return P;
}

namespace detail {

// Quadratic tracking cost over the horizon on `axes`, in the condensed
// variable z:  0.5 z'Hz + g'z (+ const).
struct CostTerms {
  MatX H;
  VecX g;
  double c = 0.0;
  double value(const VecX& z) const { return 0.5 * z.dot(H * z) + g.dot(z) + c; }
};

inline CostTerms tracking_cost(const Prediction& P, const ReferenceTrajectory& ref, std::size_t i0,
                               AxisSet axes, const MPCConfig& cfg) {
  const int nz = P.decision_size();
  CostTerms C;
  C.H = MatX::Zero(nz, nz);
  C.g = VecX::Zero(nz);
  int m = 0;
  const auto idx = axes.indices(&m);
  // Closed-loop twist target: preview feed-forward plus a proportional term
  // on the current pose error, so accumulated error is driven out through
  // the well-scaled velocity rows.
  const std::size_t rc = ref.clamp(i0);
  const Vec3 fb_p = cfg.feedback_gain * (ref.p[rc] - P.x0.p);
  const Vec3 fb_o = cfg.feedback_gain * so3::log(ref.R[rc] * so3::matrix_from_quat(P.x0.o).transpose());
  for (int k = 0; k < P.N; ++k) {
    const std::size_t r = ref.clamp(i0 + k + 1);
    Vec4 oref = so3::quat_from_matrix(ref.R[r]);
    if (oref.dot(P.x0.o) < 0) oref = -oref;
    // 12 error rows [p; e_o; v; w] = A x + a with x the 13-state.
    Eigen::Matrix<double, 12, 13> A = Eigen::Matrix<double, 12, 13>::Zero();
    Eigen::Matrix<double, 12, 1> a = Eigen::Matrix<double, 12, 1>::Zero();
    A.block<3, 3>(0, 0) = Mat3::Identity();
    a.segment<3>(0) = -ref.p[r];
    A.block<3, 4>(3, 3) = 2.0 * so3::quat_right(so3::quat_conj(oref)).bottomRows<3>();
    A.block<3, 3>(6, 7) = Mat3::Identity();
    a.segment<3>(6) = -(ref.v[r] + fb_p);
    A.block<3, 3>(9, 10) = Mat3::Identity();
    a.segment<3>(9) = -(ref.omega[r] + fb_o);
    MatX S = MatX::Zero(2 * m, 12);
    VecX w(2 * m);
    for (int j = 0; j < m; ++j) {
      const int ax = idx[j];
      const double q = ax < 3 ? cfg.Q_pos : cfg.Q_ori;
      S(j, ax) = 1.0;
      w[j] = q;
      S(m + j, 6 + ax) = 1.0;
      w[m + j] = q * cfg.velocity_weight;
    }
    const MatX E = S * A;  // rows of the selected errors w.r.t. the state
    const MatX G = E * P.Bz.middleRows(13 * k, 13);
    const VecX e0 = E * P.Xc.segment<13>(13 * k) + S * a;
    C.H += 2.0 * G.transpose() * w.asDiagonal() * G;
    C.g += 2.0 * G.transpose() * w.asDiagonal() * e0;
    C.c += e0.dot(w.asDiagonal() * e0);
  }
  // Control effort on both halves of u.
  C.H += 2.0 * cfg.R * (P.Vq.transpose() * P.Vq + MatX::Identity(nz, nz));
  C.g += 2.0 * cfg.R * P.Vq.transpose() * P.qd0s;
  C.c += cfg.R * P.qd0s.squaredNorm();
  return C;
}

// Joint position, velocity and acceleration boxes as rows A z >= b.
inline void box_constraints(const Prediction& P, const KinematicModel& model, MatX& A, VecX& b) {
  const int n = P.n, N = P.N, nz = n * N;
  VecX ql(n), qu(n), vl(n), al(n);
  for (int c = 0; c < n; ++c) {
    const JointInfo& j = model.joints[P.joints[c]];
    ql[c] = j.q_min;
    qu[c] = j.q_max;
    vl[c] = j.v_max;
    al[c] = j.a_max;
  }
  A.resize(6 * nz, nz);
  b.resize(6 * nz);
  int r = 0;
  for (int k = 0; k < N; ++k)
    for (int c = 0; c < n; ++c) {
      const int row = n * k + c;
      const double qc = P.q[c] + P.dq0[row];
      A.row(r) = P.Pq.row(row);
      b[r++] = ql[c] - qc;
      A.row(r) = -P.Pq.row(row);
      b[r++] = qc - qu[c];
      A.row(r) = P.Vq.row(row);
      b[r++] = -vl[c] - P.qd0s[row];
      A.row(r) = -P.Vq.row(row);
      b[r++] = P.qd0s[row] - vl[c];
      A.row(r).setZero();
      A(r, row) = 1.0;
      b[r++] = -al[c];
      A.row(r).setZero();
      A(r, row) = -1.0;
      b[r++] = -al[c];
    }
}

inline MatX null_space(const MatX& A) {
  const int n = static_cast<int>(A.cols());
  if (A.rows() == 0 || n == 0) return MatX::Identity(n, n);
  Eigen::JacobiSVD<MatX> svd(A, Eigen::ComputeFullV);
  const VecX& s = svd.singularValues();
  const double tol = std::max(1e-12, 1e-9 * (s.size() ? s[0] : 0.0));
  int rank = 0;
  for (int i = 0; i < s.size(); ++i) rank += s[i] > tol;
  return svd.matrixV().rightCols(n - rank);
}

}  // namespace detail

struct LevelSolution {
  bool ok = false;
  bool degraded = false;  // low level fell back to the high-level input
  std::string reason;
  VecX z;                 // stacked joint accelerations
  double objective = 0.0;
  double objective_at_high = 0.0;  // low-level objective evaluated at the high-level input
  double eq_residual = 0.0;
};

inline LevelSolution high_level_solve(const Prediction& P, const KinematicModel& model,
                                      const ReferenceTrajectory& ref, std::size_t i0, AxisSet high,
                                      const MPCConfig& cfg) {
  if (high.empty()) throw ConfigError("hmpc: the high-priority axis set must not be empty");
  LevelSolution out;
  const auto C = detail::tracking_cost(P, ref, i0, high, cfg);
  QPProblem qp;
  qp.H = C.H;
  qp.g = C.g;
  qp.Aeq = MatX(0, P.decision_size());
  qp.beq = VecX(0);
  detail::box_constraints(P, model, qp.Ain, qp.bin);
  const QPResult r = solve_qp(qp);
  if (!r.ok()) {
    out.reason = std::string("high-level QP ") + to_string(r.status);
    return out;
  }
  out.ok = true;
  out.z = r.x;
  out.objective = C.value(r.x);
  return out;
}

/// Residual of B_kin (u2 - u1) on the high-priority rows, max over steps.
inline double equality_residual(const Prediction& P, AxisSet high, const VecX& z1, const VecX& z2) {
  const MatX JH = sub_jacobian(P.J, high);
  const VecX dz = z2 - z1;
  const VecX dqd = P.Vq * dz;
  double res = 0.0;
  for (int k = 0; k < P.N; ++k) {
    res = std::max(res, (JH * dqd.segment(P.n * k, P.n)).norm());
    res = std::max(res, (JH * dz.segment(P.n * k, P.n)).norm());
  }
  return res;
}

inline LevelSolution low_level_solve(const Prediction& P, const KinematicModel& model,
                                     const ReferenceTrajectory& ref, std::size_t i0, AxisSet high,
                                     AxisSet low, const VecX& z1, const MPCConfig& cfg) {
  LevelSolution out;
  out.ok = true;
  out.z = z1;
  if (low.empty()) return out;
  const MatX Z = detail::null_space(sub_jacobian(P.J, high));
  const int r = static_cast<int>(Z.cols());
  const auto C = detail::tracking_cost(P, ref, i0, low, cfg);
  out.objective = out.objective_at_high = C.value(z1);
  if (r == 0) return out;
  const int Nl = std::min(cfg.N_l, P.N);
  const int nz = P.decision_size();
  // z2 = z1 + Zb w, Zb block-diagonal over the first N_l steps.
  MatX Zb = MatX::Zero(nz, r * Nl);
  for (int k = 0; k < Nl; ++k) Zb.block(P.n * k, r * k, P.n, r) = Z;
  QPProblem qp;
  qp.H = Zb.transpose() * C.H * Zb;
  qp.g = Zb.transpose() * (C.H * z1 + C.g);
  qp.Aeq = MatX(0, r * Nl);
  qp.beq = VecX(0);
  MatX A;
  VecX b;
  detail::box_constraints(P, model, A, b);
  qp.Ain = A * Zb;
  qp.bin = b - A * z1;
  const QPResult s = solve_qp(qp);
  if (!s.ok()) {
    out.degraded = true;
    out.reason = std::string("low-level QP ") + to_string(s.status) + ", using high-level input";
    return out;
  }
  out.z = z1 + Zb * s.x;
  out.objective = C.value(out.z);
  out.eq_residual = equality_residual(P, high, z1, out.z);
  return out;
}

struct IKResult {
  bool converged = false;
  VecX q;  // full joint vector
  int iterations = 0;
  Vec6 error = Vec6::Zero();  // [p_des - p; log(R_des R')]
};

namespace detail {

inline Vec6 pose_error(const KinematicModel& model, const VecX& q, const Waypoint& target, Mat6X* J) {
  const FKResult fk = forward_kinematics(model, q);
  if (J) *J = jacobian(model, q, fk);
  Vec6 e;
  e.head<3>() = target.p - fk.ee.p;
  e.tail<3>() = so3::log(target.R * fk.ee.R.transpose());
  return e;
}

inline bool within(const Vec6& e, const Vec6& tol, AxisSet axes) {
  for (int a = 0; a < 6; ++a)
    if (axes.contains(a) && std::abs(e[a]) >= tol[a]) return false;
  return true;
}

inline MatX dls(const MatX& A, double lambda) {
  const int m = static_cast<int>(A.rows());
  return A.transpose() * (A * A.transpose() + lambda * lambda * MatX::Identity(m, m)).ldlt().solve(
                             MatX::Identity(m, m));
}

inline VecX hierarchical_step(const MatX& J, const Vec6& e, const PriorityPartition& part, double damping) {
  const MatX JH = sub_jacobian(J, part.high);
  VecX dq = dls(JH, damping) * sub_jacobian(e, part.high);
  if (!part.low.empty()) {
    const MatX Z = null_space(JH);
    if (Z.cols() > 0) {
      const MatX JLf = sub_jacobian(J, part.low);
      const MatX JL = JLf * Z;
      const VecX eL = sub_jacobian(e, part.low) - JLf * dq;
      dq += Z * (dls(JL, damping) * eL);
    }
  }
  return dq;
}

}  // namespace detail

/// Hierarchical damped least squares: the high-priority error is reduced
/// first; the low-priority error only inside its null space.
inline IKResult initial_ik(const KinematicModel& model, const Waypoint& target, const PriorityPartition& part,
                           const IKOptions& opt = {}, const VecX* seed = nullptr) {
  if (part.high.empty()) throw ConfigError("ik: the high-priority axis set must not be empty");
  const std::vector<int> cols = model.main_joint_indices();
  const int n = static_cast<int>(cols.size());
  const VecX lo = model.q_lower(), hi = model.q_upper();
  Vec6 tol;
  tol << target.tol_p, target.tol_o;
  tol *= opt.tolerance_fraction;

  std::vector<VecX> seeds;
  seeds.push_back(seed ? *seed : VecX::Zero(model.dof()));
  std::mt19937 rng(7);
  for (int s = 1; s < opt.seeds; ++s) {
    VecX q = VecX::Zero(model.dof());
    for (int c : cols) {
      std::uniform_real_distribution<double> u(0.8 * lo[c], 0.8 * hi[c]);
      q[c] = s == 1 ? 0.5 * ((c % 2) ? -1 : 1) : u(rng);
    }
    seeds.push_back(q);
  }

  IKResult best;
  double best_high = std::numeric_limits<double>::infinity();
  double best_low = std::numeric_limits<double>::infinity();
  int total = 0;
  for (const VecX& s0 : seeds) {
    VecX q = s0.cwiseMax(lo).cwiseMin(hi);
    Mat6X Jf;
    bool h_ok = false;
    int it = 0;
    Vec6 e = detail::pose_error(model, q, target, &Jf);
    // First half: all target axes as one level, which reaches consistent
    // targets quickly. Second half: strict priorities.
    const int split = part.low.empty() ? 0 : opt.max_iterations / 2;
    for (; it < opt.max_iterations; ++it) {
      h_ok = detail::within(e, tol, part.high);
      if (h_ok && (part.low.empty() || detail::within(e, tol, part.low))) break;
      const PriorityPartition level = it < split ? PriorityPartition{part.high | part.low, AxisSet{}} : part;
      MatX J(6, n);
      for (int c = 0; c < n; ++c) J.col(c) = Jf.col(cols[c]);
      // Joints resting on a bound whose step points outward are frozen and
      // the step recomputed without them.
      std::vector<char> frozen(n, 0);
      VecX dq;
      for (int pass = 0; pass <= n; ++pass) {
        std::vector<int> free;
        for (int c = 0; c < n; ++c)
          if (!frozen[c]) free.push_back(c);
        if (free.empty()) {
          dq = VecX::Zero(n);
          break;
        }
        MatX Jr(6, static_cast<int>(free.size()));
        for (std::size_t f = 0; f < free.size(); ++f) Jr.col(f) = J.col(free[f]);
        const VecX dqr = detail::hierarchical_step(Jr, e, level, opt.damping);
        dq = VecX::Zero(n);
        for (std::size_t f = 0; f < free.size(); ++f) dq[free[f]] = dqr[f];
        bool changed = false;
        for (int c = 0; c < n; ++c) {
          const int j = cols[c];
          if (frozen[c]) continue;
          if ((q[j] >= hi[j] - 1e-12 && dq[c] > 0) || (q[j] <= lo[j] + 1e-12 && dq[c] < 0)) {
            frozen[c] = 1;
            changed = true;
          }
        }
        if (!changed) break;
      }
      // Limit the step to keep the linearization honest.
      const double mx = dq.cwiseAbs().maxCoeff();
      if (mx > 0.3) dq *= 0.3 / mx;
      if (dq.norm() < 1e-12) {
        if (it < split) {
          it = split - 1;  // stalled: move on to the strict stage
          continue;
        }
        if (h_ok) break;
      }
      for (int c = 0; c < n; ++c) q[cols[c]] = std::clamp(q[cols[c]] + dq[c], lo[cols[c]], hi[cols[c]]);
      e = detail::pose_error(model, q, target, &Jf);
    }
    total += it;
    h_ok = detail::within(e, tol, part.high);
    // Rank: high-priority convergence first, then the low-priority error.
    const double hn = sub_jacobian(e, part.high).norm();
    const double ln = part.low.empty() ? 0.0 : sub_jacobian(e, part.low).norm();
    const bool better = h_ok ? (!best.converged || ln < best_low) : (!best.converged && hn < best_high);
    if (better) {
      best.converged = h_ok;
      best.q = q;
      best.error = e;
      best_high = hn;
      best_low = ln;
    }
    if (h_ok && (part.low.empty() || detail::within(e, tol, part.low))) break;
  }
  best.iterations = total;
  return best;
}

struct HMPCResult {
  bool feasible = false;
  std::string reason;
  int failed_step = -1;
  std::vector<double> t;
  std::vector<VecX> q, qd, qdd;  // full joint vectors; assist joints held at zero
  std::vector<EEState> ee;
  std::vector<Vec6> error;       // [p - p_ref; log(R R_ref')] per sample
  double max_eq_residual = 0.0;
  double max_box_violation = 0.0;
  double max_quat_norm_error = 0.0;
  int degraded_steps = 0;
  int ik_iterations = 0;
  double ik_error = 0.0;  // initial IK: worst high-axis error over its tolerance
};

/// Redundancy condition: each priority level must leave spare joints.
inline std::string redundancy_violation(const KinematicModel& model, const PriorityPartition& part) {
  const int n = model.main_dof();
  if (part.high.empty()) return "high-priority axis set is empty";
  if ((part.high & part.low).bits() != 0) return "priority sets overlap";
  if (part.high.size() >= n)
    return "high-priority axes (" + std::to_string(part.high.size()) + ") not fewer than main-branch joints (" +
           std::to_string(n) + ")";
  if (part.low.size() >= n)
    return "low-priority axes (" + std::to_string(part.low.size()) + ") not fewer than main-branch joints (" +
           std::to_string(n) + ")";
  return {};
}

inline HMPCResult hmpc_plan(const KinematicModel& model, const ReferenceTrajectory& ref,
                            const PriorityPartition& part, const MPCConfig& cfg, const VecX* q_start = nullptr) {
  HMPCResult res;
  if (ref.size() == 0) throw ConfigError("hmpc: empty reference");
  if (std::abs(ref.dt - cfg.dt) > 1e-12)
    throw ConfigError("hmpc: reference dt does not match the controller dt");
  if (const std::string why = redundancy_violation(model, part); !why.empty()) {
    res.reason = "redundancy: " + why;
    return res;
  }
  VecX q;
  if (q_start) {
    model.check_dim(*q_start, "hmpc start");
    q = *q_start;
  } else {
    Waypoint w0 = ref.waypoints.empty() ? Waypoint{} : ref.waypoints.front();
    w0.p = ref.p[0];
    w0.R = ref.R[0];
    const IKResult ik = initial_ik(model, w0, part, cfg.ik);
    res.ik_iterations = ik.iterations;
    int nh = 0;
    const auto hi_axes = part.high.indices(&nh);
    for (int k = 0; k < nh; ++k) {
      const int ax = hi_axes[k];
      const double tol = ax < 3 ? w0.tol_p[ax] : w0.tol_o[ax - 3];
      res.ik_error = std::max(res.ik_error, std::abs(ik.error[ax]) / tol);
    }
    if (!ik.converged) {
      res.reason = "initial IK did not converge";
      res.failed_step = 0;
      return res;
    }
    q = ik.q;
  }
  VecX qd = VecX::Zero(model.dof());
  VecX qdd = VecX::Zero(model.dof());
  const VecX lo = model.q_lower(), hi = model.q_upper(), vl = model.v_limit(), al = model.a_limit();

  Vec4 o_int = Vec4::Zero();
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const FKResult fk = forward_kinematics(model, q);
    EEState x = ee_state(model, q, qd);
    if (i == 0) o_int = x.o;
    res.max_quat_norm_error = std::max(res.max_quat_norm_error, std::abs(o_int.norm() - 1.0));
    res.t.push_back(ref.t[i]);
    res.q.push_back(q);
    res.qd.push_back(qd);
    res.qdd.push_back(qdd);
    res.ee.push_back(x);
    Vec6 e;
    e.head<3>() = fk.ee.p - ref.p[i];
    e.tail<3>() = so3::orientation_error(fk.ee.R, ref.R[i]);
    res.error.push_back(e);
    if (i + 1 == ref.size()) break;

    const Prediction P = build_prediction(model, q, qd, cfg);
    const LevelSolution hl = high_level_solve(P, model, ref, i, part.high, cfg);
    if (!hl.ok) {
      res.reason = hl.reason + " at step " + std::to_string(i);
      res.failed_step = static_cast<int>(i);
      return res;
    }
    const LevelSolution ll = low_level_solve(P, model, ref, i, part.high, part.low, hl.z, cfg);
    if (ll.degraded) ++res.degraded_steps;
    res.max_eq_residual = std::max(res.max_eq_residual, ll.eq_residual);

    // Apply the first step: qd_0 = qd + dt qdd_0, q += dt qd_0.
    for (int c = 0; c < P.n; ++c) {
      const int j = P.joints[c];
      qdd[j] = ll.z[c];
      qd[j] = P.qd[c] + cfg.dt * ll.z[c];
      q[j] = P.q[c] + cfg.dt * qd[j];
      const double viol = std::max({q[j] - hi[j], lo[j] - q[j], std::abs(qd[j]) - vl[j],
                                    std::abs(qdd[j]) - al[j], 0.0});
      res.max_box_violation = std::max(res.max_box_violation, viol);
    }
    o_int = integrate_quaternion(o_int, x.w, cfg.dt);
  }
  res.feasible = true;
  return res;
}

}  // namespace mcd
