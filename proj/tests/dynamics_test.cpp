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

#include <random>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "mcd/dynamics.hpp"

namespace mcd {
namespace {

using testing::pendulum;
using testing::planar_chain;
using testing::random_catalog_model;
using testing::random_chain;

VecX random_vec(std::mt19937& rng, int n, double s) {
  std::uniform_real_distribution<double> u(-s, s);
  VecX v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

// Energy from world CoM positions and finite-difference body velocities,
// independent of the recursive routine.
double potential_energy(const KinematicModel& m, const VecX& q) {
  const FKResult fk = forward_kinematics(m, q);
  double pe = 0.0;
  for (std::size_t i = 0; i < m.bodies.size(); ++i)
    pe += m.bodies[i].mass * kGravity * (fk.bodies[i] * m.bodies[i].com).z();
  if (m.payload > 0.0) pe += m.payload * kGravity * fk.ee.p.z();
  return pe;
}

double kinetic_energy(const KinematicModel& m, const VecX& q, const VecX& qd) {
  const double h = 1e-6;
  const FKResult a = forward_kinematics(m, q + h * qd);
  const FKResult b = forward_kinematics(m, q - h * qd);
  const FKResult c = forward_kinematics(m, q);
  double ke = 0.0;
  for (std::size_t i = 0; i < m.bodies.size(); ++i) {
    const Body& body = m.bodies[i];
    const Vec3 v = ((a.bodies[i] * body.com) - (b.bodies[i] * body.com)) / (2 * h);
    const Vec3 w = so3::log(a.bodies[i].linear() * b.bodies[i].linear().transpose()) / (2 * h);
    const Mat3 R = c.bodies[i].linear();
    ke += 0.5 * body.mass * v.squaredNorm() + 0.5 * w.dot(R * body.inertia * R.transpose() * w);
  }
  ke += 0.5 * m.payload * ((a.ee.p - b.ee.p) / (2 * h)).squaredNorm();
  return ke;
}

TEST(Dynamics, PendulumClosedForms) {
  const double mass = 2.5, l = 0.8;
  const KinematicModel m = pendulum(mass, l);
  for (double q : {0.0, 0.4, -1.1, 2.0}) {
    const VecX qv = VecX::Constant(1, q);
    EXPECT_NEAR(mass_matrix(m, qv)(0, 0), mass * l * l, 1e-10);
    const BiasTerms bt = bias_terms(m, qv, VecX::Zero(1));
    EXPECT_NEAR(bt.gravity[0], mass * kGravity * l * std::cos(q), 1e-10);
    EXPECT_NEAR(bt.coriolis[0], 0.0, 1e-12);
    const double a = 0.7;
    DynamicsState s{qv, VecX::Zero(1), VecX::Constant(1, a)};
    EXPECT_NEAR(inverse_dynamics(m, s)[0],
                mass * l * l * a + mass * kGravity * l * std::cos(q), 1e-10);
  }
}

TEST(Dynamics, MassMatrixSymmetricPositiveDefinite) {
  std::mt19937 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const KinematicModel m = trial % 2 ? random_chain(rng, 1 + trial % 7)
                                       : random_catalog_model(rng, trial % 4 == 0);
    const VecX q = random_vec(rng, m.dof(), 2.4);
    const FKResult fk = forward_kinematics(m, q);
    MatX M(m.dof(), m.dof());
    const VecX z = VecX::Zero(m.dof());
    for (int j = 0; j < m.dof(); ++j) M.col(j) = rnea(m, q, z, VecX::Unit(m.dof(), j), false, fk);
    EXPECT_LT((M - M.transpose()).norm(), 1e-10);
    Eigen::SelfAdjointEigenSolver<MatX> es(mass_matrix(m, q));
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Dynamics, MassMatrixColumnsAreUnitProbes) {
  std::mt19937 rng(2);
  const KinematicModel m = random_chain(rng, 6);
  const VecX q = random_vec(rng, 6, 2.0);
  const MatX M = mass_matrix(m, q);
  const VecX G = bias_terms(m, q, VecX::Zero(6)).gravity;
  for (int j = 0; j < 6; ++j) {
    const VecX col = inverse_dynamics(m, {q, VecX::Zero(6), VecX::Unit(6, j)}) - G;
    EXPECT_LT((M.col(j) - col).norm(), 1e-10);
  }
}

TEST(Dynamics, LinearInAcceleration) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const KinematicModel m = random_chain(rng, 5);
    const VecX q = random_vec(rng, 5, 2.0), qd = random_vec(rng, 5, 1.0);
    const VecX a1 = random_vec(rng, 5, 1.0), a2 = random_vec(rng, 5, 1.0);
    auto tau = [&](const VecX& a) { return inverse_dynamics(m, {q, qd, a}); };
    EXPECT_LT((tau(a1 + a2) - tau(a1) - tau(a2) + tau(VecX::Zero(5))).norm(), 1e-9);
  }
}

TEST(Dynamics, PowerBalanceAlongPrescribedMotion) {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    KinematicModel m = random_chain(rng, 4);
    m.payload = trial * 0.5;
    const VecX q0 = random_vec(rng, 4, 1.0), amp = random_vec(rng, 4, 0.8),
               w = random_vec(rng, 4, 3.0);
    auto q_at = [&](double t) { return VecX(q0.array() + amp.array() * (w.array() * t).sin()); };
    auto qd_at = [&](double t) {
      return VecX(amp.array() * w.array() * (w.array() * t).cos());
    };
    auto qdd_at = [&](double t) {
      return VecX(-amp.array() * w.array().square() * (w.array() * t).sin());
    };
    auto energy = [&](double t) {
      return kinetic_energy(m, q_at(t), qd_at(t)) + potential_energy(m, q_at(t));
    };
    for (double t = 0.0; t <= 1.0; t += 0.1) {
      const MatX M = mass_matrix(m, q_at(t));
      const BiasTerms bt = bias_terms(m, q_at(t), qd_at(t));
      const double power = qd_at(t).dot(M * qdd_at(t) + bt.coriolis + bt.gravity);
      const double h = 1e-4;
      const double dE = (energy(t + h) - energy(t - h)) / (2 * h);
      EXPECT_NEAR(power, dE, 1e-6) << "t=" << t;
    }
  }
}

// Forward dynamics by solving M qdd = -C qd - G; RK4 integration.
TEST(Dynamics, EnergyRateOverFreeSwing) {
  std::mt19937 rng(5);
  const KinematicModel m = random_chain(rng, 3);
  auto accel = [&](const VecX& q, const VecX& qd) {
    const BiasTerms bt = bias_terms(m, q, qd);
    return VecX(mass_matrix(m, q).ldlt().solve(-bt.coriolis - bt.gravity));
  };
  const double dt = 1e-3;
  VecX q = random_vec(rng, 3, 1.0), qd = VecX::Zero(3);
  std::vector<double> E;
  std::vector<double> power;
  for (int k = 0; k <= 1000; ++k) {
    E.push_back(kinetic_energy(m, q, qd) + potential_energy(m, q));
    const VecX a = accel(q, qd);
    const MatX M = mass_matrix(m, q);
    const BiasTerms bt = bias_terms(m, q, qd);
    power.push_back(qd.dot(M * a + bt.coriolis + bt.gravity));
    const VecX k1q = qd, k1v = a;
    const VecX k2q = qd + 0.5 * dt * k1v, k2v = accel(q + 0.5 * dt * k1q, k2q);
    const VecX k3q = qd + 0.5 * dt * k2v, k3v = accel(q + 0.5 * dt * k2q, k3q);
    const VecX k4q = qd + dt * k3v, k4v = accel(q + dt * k3q, k4q);
    q += dt / 6 * (k1q + 2 * k2q + 2 * k3q + k4q);
    qd += dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
  }
  for (std::size_t k = 1; k + 1 < E.size(); ++k) {
    const double dE = (E[k + 1] - E[k - 1]) / (2 * dt);
    EXPECT_NEAR(power[k], dE, 1e-6) << "step " << k;
  }
  EXPECT_GT(std::abs(qd.norm()), 1e-3);  // it actually swung
}

TEST(Dynamics, CoriolisVanishesAtRest) {
  std::mt19937 rng(6);
  const KinematicModel m = random_catalog_model(rng, true);
  const VecX q = random_vec(rng, m.dof(), 2.0);
  EXPECT_EQ(bias_terms(m, q, VecX::Zero(m.dof())).coriolis.norm(), 0.0);
}

TEST(Dynamics, StaticPoseIsGravity) {
  std::mt19937 rng(7);
  const KinematicModel m = random_chain(rng, 5);
  const VecX q = random_vec(rng, 5, 2.0);
  const VecX tau = inverse_dynamics(m, {q, VecX::Zero(5), VecX::Zero(5)});
  EXPECT_LT((tau - bias_terms(m, q, VecX::Zero(5)).gravity).norm(), 1e-12);
}

TEST(Dynamics, ExternalWrenchVirtualWork) {
  // Planar 2R in the horizontal plane: gravity does no work on z joints.
  const KinematicModel m = planar_chain({0.5, 0.4}, 2.0);
  const VecX q = (VecX(2) << 0.3, 0.9).finished();
  const Vec3 F(3.0, -7.0, -20.0);
  Vec6 W = Vec6::Zero();
  W.head<3>() = F;
  const VecX tau = inverse_dynamics(m, {q, VecX::Zero(2), VecX::Zero(2), W});
  const VecX G = bias_terms(m, q, VecX::Zero(2)).gravity;
  // Holding against an environment force F needs tau . dq = -F . dp.
  for (int j = 0; j < 2; ++j) {
    const double h = 1e-6;
    VecX qp = q, qm = q;
    qp[j] += h;
    qm[j] -= h;
    const Vec3 dp = (forward_kinematics(m, qp).ee.p - forward_kinematics(m, qm).ee.p) / (2 * h);
    EXPECT_NEAR(tau[j] - G[j], -F.dot(dp), 1e-7);
  }
  // A force straight down on a z-joint chain needs no torque.
  Vec6 down = Vec6::Zero();
  down[2] = -50.0;
  EXPECT_LT((inverse_dynamics(m, {q, VecX::Zero(2), VecX::Zero(2), down}) - G).norm(), 1e-12);
}

TEST(Dynamics, PayloadAddsPointMass) {
  const double mass = 1.5, l = 0.6;
  KinematicModel m = pendulum(mass, l);
  m.payload = 0.7;
  const VecX q = VecX::Constant(1, 0.3);
  EXPECT_NEAR(mass_matrix(m, q)(0, 0), (mass + 0.7) * l * l, 1e-12);
  EXPECT_NEAR(bias_terms(m, q, VecX::Zero(1)).gravity[0],
              (mass + 0.7) * kGravity * l * std::cos(0.3), 1e-12);
}

TEST(Dynamics, AssistMomentArmShiftsSharedGravityTorque) {
  const Catalog cat = default_catalog();
  // shared elbow 2, Y, main link 9 + EE, assist: elbow 5 + link 11
  const auto seg = segment({2, 16, 9, 17, 5, 11, 15}, {1, 2}, cat);
  ASSERT_TRUE(seg.is_bi_branch);
  const Assembly a = assemble(seg, MountedPose{}, cat);
  ASSERT_TRUE(a.feasible);
  const KinematicModel& m = a.model;
  ASSERT_EQ(m.dof(), 2);
  const int shared = m.joint_indices(Branch::kShared).at(0);
  const int assist = m.joint_indices(Branch::kAssist).at(0);
  struct Sample {
    double arm, tau;
  };
  std::vector<Sample> samples;
  for (double th = -2.0; th <= 2.0; th += 0.25) {
    VecX q = VecX::Zero(2);
    q[shared] = 0.4;
    q[assist] = th;
    const FKResult fk = forward_kinematics(m, q);
    const Pose& J = fk.bodies[m.joints[shared].body];
    const Vec3 axis = J.linear() * m.bodies[m.joints[shared].body].axis;
    double arm = 0.0;  // assist mass moment about the shared axis, horizontal lever
    for (std::size_t i = 0; i < m.bodies.size(); ++i) {
      if (m.bodies[i].branch != Branch::kAssist) continue;
      const Vec3 r = fk.bodies[i] * m.bodies[i].com - J.translation();
      arm += m.bodies[i].mass * axis.dot(r.cross(Vec3::UnitZ()));
    }
    samples.push_back({arm, bias_terms(m, q, VecX::Zero(2)).gravity[shared]});
  }
  std::sort(samples.begin(), samples.end(), [](auto& x, auto& y) { return x.arm < y.arm; });
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].arm - samples[i - 1].arm < 1e-9) continue;
    EXPECT_GT(samples[i].tau, samples[i - 1].tau);
  }
  EXPECT_GT(samples.back().arm - samples.front().arm, 0.1);
}

TEST(Torque, Feasibility) {
  TorqueProfile p;
  p.tau_max = VecX::Constant(2, 100.0);
  p.tau = {VecX::Zero(2), VecX::Zero(2)};
  EXPECT_TRUE(torque_feasible(p).feasible);
  p.tau.push_back((VecX(2) << 0.0, -100.1).finished());
  const TorqueReport r = torque_feasible(p);
  EXPECT_FALSE(r.feasible);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0], std::make_pair(2, 1));
  EXPECT_NEAR(r.max_abs[1], 100.1, 1e-12);
}

TEST(Torque, ElbowLimitComparison) {
  // Peak torque compared against the 160 N*m large-elbow limit.
  TorqueProfile p;
  p.tau_max = VecX::Constant(1, *default_catalog().module(3).torque_limit);
  p.tau = {VecX::Constant(1, 150.0), VecX::Constant(1, -159.9)};
  TorqueReport r = torque_feasible(p);
  EXPECT_TRUE(r.feasible);
  EXPECT_NEAR(r.max_abs[0], 159.9, 1e-12);
  p.tau.push_back(VecX::Constant(1, 160.0 * 1.001));
  EXPECT_FALSE(torque_feasible(p).feasible);
}

TEST(Metrics, Effort) {
  TorqueProfile p;
  p.tau_max = VecX::Constant(2, 1.0);
  for (int i = 0; i < 7; ++i) p.tau.push_back(VecX::Ones(2));
  EXPECT_DOUBLE_EQ(effort_metric(p), 2.0);
  p.tau = {(VecX(2) << 3.0, 4.0).finished()};
  EXPECT_DOUBLE_EQ(effort_metric(p), 25.0);
  std::mt19937 rng(9);
  p.tau.clear();
  for (int i = 0; i < 13; ++i) p.tau.push_back(random_vec(rng, 4, 50.0));
  double s = 0.0;
  for (std::size_t i = 0; i < p.tau.size(); ++i)
    for (int j = 0; j < 4; ++j) s += p.tau[i][j] * p.tau[i][j];
  EXPECT_NEAR(effort_metric(p), s / 13.0, 1e-9);
  p.tau.clear();
  EXPECT_THROW(effort_metric(p), Error);
}

TEST(Metrics, Manipulability) {
  const double r = 0.55;
  const KinematicModel one = planar_chain({r});
  AxisSet xy = AxisSet::parse("px").with(1);
  std::vector<VecX> qs;
  for (double q = -2.0; q <= 2.0; q += 0.5) qs.push_back(VecX::Constant(1, q));
  // J_xy = [-r sin q; r cos q]: the Gram scalar J^T J is r^2 at every pose,
  // while the 2x2 product J J^T has rank one and zero determinant.
  const MatX Jxy = sub_jacobian(jacobian(one, qs[0]), xy);
  EXPECT_NEAR((Jxy.transpose() * Jxy)(0, 0), r * r, 1e-14);
  EXPECT_NEAR(manipulability_metric(one, qs, xy), 0.0, 1e-14);

  const KinematicModel two = planar_chain({0.5, 0.4});
  EXPECT_NEAR(manipulability_metric(two, {VecX::Zero(2)}, xy), 0.0, 1e-14);
  // Full-rank 2R: det = (l1 l2 sin q2)^2.
  const VecX q2 = (VecX(2) << 0.2, 1.1).finished();
  EXPECT_NEAR(manipulability_metric(two, {q2}, xy), std::pow(0.5 * 0.4 * std::sin(1.1), 2), 1e-12);

  std::mt19937 rng(10);
  const KinematicModel four = random_chain(rng, 4);
  const VecX q = random_vec(rng, 4, 2.0);
  const MatX P = jacobian(four, q).topRows(3);
  const Mat3 A = P * P.transpose();
  const double det = A(0, 0) * (A(1, 1) * A(2, 2) - A(1, 2) * A(2, 1)) -
                     A(0, 1) * (A(1, 0) * A(2, 2) - A(1, 2) * A(2, 0)) +
                     A(0, 2) * (A(1, 0) * A(2, 1) - A(1, 1) * A(2, 0));
  EXPECT_NEAR(manipulability_metric(four, {q}, AxisSet::position()), det, 1e-12);
  EXPECT_THROW(manipulability_metric(four, {}, AxisSet::position()), Error);
}

}  // namespace
}  // namespace mcd
