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

#include "mcd/assist.hpp"

#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"

namespace mcd {
namespace {

using testing::cantilever;

// de Boor's triangle on the clamped knot vector, written independently of
// the basis-function evaluation in the library.
VecX de_boor(const MatX& P, const std::vector<double>& U, int p, double u) {
  const int n = static_cast<int>(P.cols()) - 1;
  int k = p;
  while (k < n && u >= U[k + 1]) ++k;
  std::vector<VecX> d;
  for (int j = 0; j <= p; ++j) d.push_back(P.col(k - p + j));
  for (int r = 1; r <= p; ++r)
    for (int j = p; j >= r; --j) {
      const int i = k - p + j;
      const double den = U[i + p - r + 1] - U[i];
      const double a = den > 0 ? (u - U[i]) / den : 0.0;
      d[j] = (1 - a) * d[j - 1] + a * d[j];
    }
  return d[p];
}

// Cox-de Boor recursion with the half-open convention, last interval closed.
double cox_de_boor(const std::vector<double>& U, int i, int p, double u) {
  if (p == 0) {
    const bool last = u == U.back() && U[i] < U[i + 1] && U[i + 1] == U.back();
    return (U[i] <= u && u < U[i + 1]) || last ? 1.0 : 0.0;
  }
  double v = 0.0;
  const double a = U[i + p] - U[i], b = U[i + p + 1] - U[i + 1];
  if (a > 0) v += (u - U[i]) / a * cox_de_boor(U, i, p - 1, u);
  if (b > 0) v += (U[i + p + 1] - u) / b * cox_de_boor(U, i + 1, p - 1, u);
  return v;
}

MatX random_points(std::mt19937& rng, int d, int K) {
  std::normal_distribution<double> g;
  MatX P(d, K);
  for (int i = 0; i < P.size(); ++i) P.data()[i] = g(rng);
  return P;
}

TEST(BSpline, ConstantControlPointsGiveConstantCurve) {
  const VecX c = (VecX(2) << 0.3, -1.2).finished();
  const BSpline s(c.replicate(1, 9), 3, 0.0, 2.0);
  for (double u = 0; u <= 2.0; u += 0.013) {
    EXPECT_LT((s.eval(u) - c).norm(), 1e-14);
    EXPECT_LT(s.eval(u, 1).norm(), 1e-12);
    EXPECT_LT(s.eval(u, 2).norm(), 1e-10);
  }
}

TEST(BSpline, CollinearControlPointsStayOnLine) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> U(-2, 2);
  const Vec3 a(0.1, 0.2, 0.3), dir = Vec3(1, -2, 0.5).normalized();
  MatX P(3, 12);
  for (int k = 0; k < 12; ++k) P.col(k) = a + U(rng) * dir;
  const BSpline s(P, 3, 0.0, 1.0);
  for (double u = 0; u <= 1.0; u += 0.001) {
    const Vec3 x = s.eval(u);
    EXPECT_LT((x - a).cross(dir).norm(), 1e-13);
  }
}

TEST(BSpline, ClampedEndsHitFirstAndLastControlPoint) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int p = 1 + trial % 5;
    const MatX P = random_points(rng, 4, p + 1 + trial % 7);
    const BSpline s(P, p, -1.0, 2.5);
    EXPECT_LT((s.eval(-1.0) - P.col(0)).norm(), 1e-14);
    EXPECT_LT((s.eval(2.5) - P.col(P.cols() - 1)).norm(), 1e-14);
  }
}

TEST(BSpline, MatchesDeBoorTriangle) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int p = 1 + trial % 4;
    const MatX P = random_points(rng, 3, p + 1 + trial % 9);
    const BSpline s(P, p, 0.5, 3.0);
    for (int k = 0; k < 50; ++k) {
      const double u = 0.5 + 2.5 * U(rng);
      EXPECT_LT((s.eval(u) - de_boor(P, s.knots(), p, u)).norm(), 1e-12);
    }
  }
}

TEST(BSpline, BasisMatchesRecursionAndSumsToOne) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const BSpline s(random_points(rng, 1, 10), 3, 0.0, 1.0);
  const auto& knots = s.knots();
  for (int k = 0; k <= 200; ++k) {
    const double u = k / 200.0;
    const int span = s.span(u);
    const MatX N = s.basis_derivatives(span, u, 0);
    EXPECT_NEAR(N.row(0).sum(), 1.0, 1e-14);
    for (int j = 0; j <= 3; ++j)
      EXPECT_NEAR(N(0, j), cox_de_boor(knots, span - 3 + j, 3, u), 1e-13) << u;
  }
}

TEST(BSpline, DerivativesMatchFiniteDifferences) {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> U(0.05, 0.95);
  const MatX P = random_points(rng, 2, 14);
  const BSpline s(P, 4, 0.0, 1.0);
  const double h = 1e-5;
  for (int k = 0; k < 100; ++k) {
    const double u = U(rng);
    const VecX fd1 = (s.eval(u + h) - s.eval(u - h)) / (2 * h);
    const VecX fd2 = (s.eval(u + h, 1) - s.eval(u - h, 1)) / (2 * h);
    EXPECT_LT((s.eval(u, 1) - fd1).norm(), 1e-5 * (1 + fd1.norm()));
    EXPECT_LT((s.eval(u, 2) - fd2).norm(), 1e-4 * (1 + fd2.norm()));
  }
}

TEST(BSpline, RejectsTooFewControlPoints) {
  EXPECT_THROW(BSpline(MatX::Zero(2, 3), 3, 0.0, 1.0), ConfigError);
  EXPECT_THROW(BSpline(MatX::Zero(2, 4), 3, 1.0, 1.0), ConfigError);
}

TEST(Softplus, KneeValue) {
  for (double alpha : {0.5, 10.0, 300.0}) {
    const double want = std::pow(std::log(2.0) / alpha, 2);
    EXPECT_NEAR(softplus_torque_penalty(VecX::Constant(1, 50.0), VecX::Constant(1, 50.0), alpha),
                want, 1e-15 * (1 + want));
    EXPECT_NEAR(softplus_torque_penalty(VecX::Constant(1, -50.0), VecX::Constant(1, 50.0), alpha),
                want, 1e-15 * (1 + want));
  }
}

TEST(Softplus, TailWellBelowLimit) {
  const double alpha = 10.0;
  const VecX tau = VecX::Constant(1, 120.0 - 10.0 / alpha);
  const double v = softplus_torque_penalty(tau, VecX::Constant(1, 120.0), alpha);
  const double closed = std::pow(std::log1p(std::exp(-10.0)) / alpha, 2);
  EXPECT_NEAR(v, closed, 1e-12 * closed);
  EXPECT_LT(v, std::pow(4.55e-5 / alpha, 2));
}

TEST(Softplus, HingeLimitAndOverflowSafety) {
  const VecX lim = VecX::Constant(1, 100.0);
  EXPECT_NEAR(softplus_torque_penalty(VecX::Constant(1, 101.0), lim, 1e4), 1.0, 1e-12);
  const double big = softplus_torque_penalty(VecX::Constant(1, 1e5), lim, 1e6);
  EXPECT_TRUE(std::isfinite(big));
  EXPECT_NEAR(big, std::pow(1e5 - 100.0, 2), 1e-6 * big);
  EXPECT_EQ(softplus_torque_penalty(VecX::Constant(1, 0.0), lim, 1e6), 0.0);
  EXPECT_THROW(softplus_torque_penalty(lim, lim, 0.0), ConfigError);
}

AssistProblem static_problem(const KinematicModel& m, const VecX& q_main, int steps) {
  AssistProblem pb;
  pb.model = &m;
  pb.dt = 0.01;
  for (int i = 0; i < steps; ++i) {
    pb.t.push_back(i * pb.dt);
    pb.q.push_back(q_main);
    pb.qd.push_back(VecX::Zero(m.dof()));
    pb.qdd.push_back(VecX::Zero(m.dof()));
  }
  pb.q0 = VecX::Zero(m.assist_dof());
  return pb;
}

// Main branch forward and level: shared elbow upright, main elbow folds the
// 45 degree port down to horizontal.
VecX level_pose(const KinematicModel& m) {
  VecX q = VecX::Zero(m.dof());
  q[1] = 0.0;
  q[m.joint_indices(Branch::kMain)[0]] = M_PI / 4;
  return q;
}

TEST(AssistStep, ZeroGravityKeepsInitialPosture) {
  const auto m = cantilever(0.0);
  auto pb = static_problem(m, level_pose(m), 1);
  pb.opt.gravity = false;
  pb.q0 = (VecX(2) << 0.4, -0.7).finished();
  const VecX zero = VecX::Zero(2);
  const auto s = solve_step(pb, 0, VecX::Constant(2, 1.1), zero, zero);
  EXPECT_FALSE(s.stalled);
  EXPECT_LT((s.q - pb.q0).norm(), 1e-9);
  EXPECT_LT(s.objective, 1e-16);
}

TEST(AssistStep, OffloadsSharedJointOfCantilever) {
  const auto m = cantilever(5.0);
  ASSERT_EQ(m.assist_dof(), 2);
  const auto pb = static_problem(m, level_pose(m), 1);
  const VecX zero = VecX::Zero(2);
  const auto s = solve_step(pb, 0, pb.q0, zero, zero);
  ASSERT_FALSE(s.stalled);
  const auto shared = m.joint_indices(Branch::kShared);
  VecX qf = pb.q[0], qo = pb.q[0];
  scatter(qo, m.joint_indices(Branch::kAssist), s.q);
  const VecX z = VecX::Zero(m.dof());
  const VecX tf = whole_body_torque(m, qf, z, z, Vec6::Zero(), true);
  const VecX to = whole_body_torque(m, qo, z, z, Vec6::Zero(), true);
  double pf = 0, po = 0;
  for (int j : shared) {
    pf = std::max(pf, std::abs(tf[j]));
    po = std::max(po, std::abs(to[j]));
  }
  std::cout << "shared-joint peak frozen " << pf << " optimized " << po << " N m\n";
  EXPECT_LT(po, pf);
  EXPECT_LT(s.objective, s.objective_warm);
}

TEST(AssistStep, ReturnsStationaryPointNoWorseThanWarmStart) {
  const auto m = cantilever(3.0);
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  const auto idx = m.joint_indices(Branch::kAssist);
  for (int trial = 0; trial < 20; ++trial) {
    VecX q = VecX::Zero(m.dof());
    for (int j : m.main_joint_indices()) q[j] = 0.6 * U(rng);
    auto pb = static_problem(m, q, 1);
    const VecX warm = (VecX(2) << U(rng), U(rng)).finished();
    const VecX zero = VecX::Zero(2);
    const auto s = solve_step(pb, 0, warm, zero, zero);
    EXPECT_LE(s.objective, s.objective_warm);
    if (s.stalled) continue;
    // Projected gradient by central differences of the objective itself.
    const double h = 1e-5;
    for (int c = 0; c < 2; ++c) {
      VecX a = s.q, b = s.q;
      a[c] += h;
      b[c] -= h;
      const double g = (assist_objective(pb, 0, a, zero, zero) -
                        assist_objective(pb, 0, b, zero, zero)) / (2 * h);
      const bool at_lo = s.q[c] <= m.joints[idx[c]].q_min + 1e-9 && g > 0;
      const bool at_hi = s.q[c] >= m.joints[idx[c]].q_max - 1e-9 && g < 0;
      if (!at_lo && !at_hi) EXPECT_LT(std::abs(g), 1e-3 * (1 + s.objective)) << trial;
    }
  }
}

TEST(AssistStep, IterationCapReturnsWarmStartWithStallFlag) {
  const auto m = cantilever(5.0);
  auto pb = static_problem(m, level_pose(m), 1);
  pb.opt.max_iterations = 0;
  const VecX warm = (VecX(2) << 0.2, 0.1).finished();
  const auto s = solve_step(pb, 0, warm, VecX::Zero(2), VecX::Zero(2));
  EXPECT_TRUE(s.stalled);
  EXPECT_EQ(s.q, warm);
}

// Shared yaw and pitch move rest to rest over 2 s with a quintic profile.
AssistProblem moving_problem(const KinematicModel& m) {
  AssistProblem pb = static_problem(m, level_pose(m), 201);
  const double T = 2.0;
  for (int i = 0; i < pb.steps(); ++i) {
    const double s = pb.t[i] / T;
    const double f = 10 * std::pow(s, 3) - 15 * std::pow(s, 4) + 6 * std::pow(s, 5);
    const double fd = (30 * s * s - 60 * s * s * s + 30 * s * s * s * s) / T;
    const double fdd = (60 * s - 180 * s * s + 120 * s * s * s) / (T * T);
    const Vec3 amp(0.6, 0.3, 0.0);
    for (int j = 0; j < 2; ++j) {
      pb.q[i][j] += amp[j] * f;
      pb.qd[i][j] = amp[j] * fd;
      pb.qdd[i][j] = amp[j] * fdd;
    }
  }
  return pb;
}

double max_jump(const std::vector<VecX>& x) {
  double m = 0;
  for (std::size_t i = 1; i < x.size(); ++i) m = std::max(m, (x[i] - x[i - 1]).norm());
  return m;
}

TEST(AssistPipeline, MainBranchIsUntouchedAndSmoothingNeverRoughens) {
  const auto m = cantilever(5.0);
  const auto pb = moving_problem(m);
  const auto r = optimize_assist(pb);
  ASSERT_TRUE(r.active);
  EXPECT_EQ(r.stalled_steps, 0);
  const auto main = m.main_joint_indices();
  for (int i = 0; i < pb.steps(); ++i)
    for (int j : main) {
      EXPECT_EQ(r.q[i][j], pb.q[i][j]);
      EXPECT_EQ(r.qd[i][j], pb.qd[i][j]);
      EXPECT_EQ(r.qdd[i][j], pb.qdd[i][j]);
    }
  EXPECT_LE(max_jump(r.smoothed.q), max_jump(r.raw));
  EXPECT_TRUE(r.check.report.feasible);
  // Resampled rates are time derivatives of the resampled positions.
  const double h = 1e-6;
  for (int i = 0; i < pb.steps(); ++i) {
    const double t = pb.t[i];
    const VecX fd = (r.smoothed.spline.eval(t + h) - r.smoothed.spline.eval(t - h)) / (2 * h);
    EXPECT_LT((r.smoothed.qd[i] - fd).norm(), 1e-6 * (1 + fd.norm()));
    EXPECT_LT((r.smoothed.q[i] - r.smoothed.spline.eval(t)).norm(), 1e-15);
  }
}

TEST(AssistPipeline, SmoothedCurveStartsAndEndsAtRest) {
  std::mt19937 rng(4);
  std::normal_distribution<double> g;
  std::vector<VecX> raw;
  std::vector<double> t;
  for (int k = 0; k < 40; ++k) {
    raw.push_back((VecX(2) << g(rng), g(rng)).finished());
    t.push_back(0.01 * k);
  }
  for (int p : {2, 3, 4}) {
    const auto sm = smooth(raw, t, p);
    const BSpline& s = sm.spline;
    EXPECT_LT((s.eval(s.u0()) - raw.front()).norm(), 1e-14);
    EXPECT_LT((s.eval(s.u1()) - raw.back()).norm(), 1e-14);
    EXPECT_LT(s.eval(s.u0(), 1).norm(), 1e-9);
    EXPECT_LT(s.eval(s.u1(), 1).norm(), 1e-9);
    EXPECT_LE(max_jump(sm.q), max_jump(raw) * (1 + 1e-12)) << p;
  }
}

TEST(AssistPipeline, SmoothingConstantAssistLeavesTorquesUnchanged) {
  const auto m = cantilever(5.0);
  auto pb = static_problem(m, level_pose(m), 50);
  const VecX qa = (VecX(2) << 0.3, -0.9).finished();
  std::vector<VecX> raw(50, qa);
  const auto sm = smooth(raw, pb.t, 3);
  ASSERT_FALSE(sm.passthrough);
  const auto idx = m.joint_indices(Branch::kAssist);
  std::vector<VecX> q_raw = pb.q, q_s = pb.q, qd_s = pb.qd, qdd_s = pb.qdd;
  for (int i = 0; i < 50; ++i) {
    scatter(q_raw[i], idx, qa);
    scatter(q_s[i], idx, sm.q[i]);
    scatter(qd_s[i], idx, sm.qd[i]);
    scatter(qdd_s[i], idx, sm.qdd[i]);
  }
  const auto before = recheck(m, q_raw, pb.qd, pb.qdd);
  const auto after = recheck(m, q_s, qd_s, qdd_s);
  for (int i = 0; i < 50; ++i)
    EXPECT_LT((before.profile.tau[i] - after.profile.tau[i]).norm(), 1e-9);
}

TEST(AssistPipeline, UnderTorquedModelFailsRecheck) {
  auto m = cantilever(5.0);
  for (auto& j : m.joints) j.torque_limit = 1.0;
  const auto r = optimize_assist(moving_problem(m));
  EXPECT_FALSE(r.check.report.feasible);
  EXPECT_FALSE(r.check.report.violations.empty());
}

TEST(AssistPipeline, ShortTrajectoryPassesThroughWithFlag) {
  const auto m = cantilever(5.0);
  const auto pb = static_problem(m, level_pose(m), 3);
  const auto r = optimize_assist(pb);
  EXPECT_TRUE(r.smoothed.passthrough);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(r.smoothed.q[i], r.raw[i]);
}

TEST(AssistPipeline, SingleBranchModelIsNoOp) {
  const auto m = testing::arm(4);
  AssistProblem pb = static_problem(m, VecX::Constant(4, 0.2), 5);
  const auto r = optimize_assist(pb);
  EXPECT_FALSE(r.active);
  EXPECT_TRUE(r.raw.empty());
  for (int i = 0; i < 5; ++i) EXPECT_EQ(r.q[i], pb.q[i]);
  EXPECT_EQ(r.check.profile.tau.size(), 5u);
}

TEST(AssistPipeline, RejectsBadConfiguration) {
  const auto m = cantilever(5.0);
  auto pb = static_problem(m, level_pose(m), 5);
  pb.opt.alpha = 0.0;
  EXPECT_THROW(optimize_assist(pb), ConfigError);
  pb.opt.alpha = 10.0;
  pb.q0 = VecX::Zero(3);
  EXPECT_THROW(optimize_assist(pb), DimensionError);
}

}  // namespace
}  // namespace mcd
