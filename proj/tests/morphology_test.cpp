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

#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "mcd/kinematics.hpp"
#include "mcd/morphology.hpp"

namespace mcd {
namespace {

VecX worked_scores() {
  VecX M(17);
  M << 0.80, 0.70, 0.75, 0.98, 0.95, 0.71, 0.44, 0.88, 0.10, 0.11, 0.84, 0.44, 0.22, 0.21, 0.40,
      0.90, 0.65;
  return M;
}

TEST(SortMap, WorkedExample) {
  const std::vector<int> expected = {4, 5, 16, 8, 11, 1, 3, 6, 2, 17, 7, 12, 15, 13, 14, 10, 9};
  EXPECT_EQ(sort_map(worked_scores()), expected);
}

TEST(SortMap, DecreasingAndTiedScoresGiveIdentity) {
  VecX M(17);
  for (int i = 0; i < 17; ++i) M[i] = 1.0 - 0.05 * i;
  std::vector<int> identity(17);
  std::iota(identity.begin(), identity.end(), 1);
  EXPECT_EQ(sort_map(M), identity);
  EXPECT_EQ(sort_map(VecX::Constant(17, 0.3)), identity);
}

TEST(SortMap, AlwaysAPermutation) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    VecX M(17);
    for (int i = 0; i < 17; ++i) M[i] = std::round(u(rng) * 8.0) / 8.0;  // many ties
    std::vector<int> c = sort_map(M);
    std::sort(c.begin(), c.end());
    for (int i = 0; i < 17; ++i) ASSERT_EQ(c[i], i + 1);
  }
}

TEST(MountMap, Examples) {
  EXPECT_EQ(mount_map(0.90, 0.65), (std::array<int, 2>{1, 2}));
  EXPECT_EQ(mount_map(0.2, 0.8), (std::array<int, 2>{2, 1}));
  EXPECT_EQ(mount_map(0.5, 0.5), (std::array<int, 2>{1, 2}));
}

TEST(Segment, WorkedBiBranch) {
  const Catalog cat = default_catalog();
  const auto s = segment(sort_map(worked_scores()), {1, 2}, cat);
  ASSERT_TRUE(s.feasible);
  EXPECT_EQ(s.base_segment, (std::vector<int>{4, 5}));
  EXPECT_EQ(s.main_branch, (std::vector<int>{8, 11, 1, 3, 6, 2}));
  EXPECT_EQ(s.assist_branch, (std::vector<int>{7, 12}));
  EXPECT_TRUE(s.is_bi_branch);
  EXPECT_TRUE(s.uses_y_module);
  EXPECT_EQ(s.main_port, 1);
  EXPECT_EQ(s.assist_port, 2);
}

TEST(Segment, DegenerateEncodingsMatch) {
  const Catalog cat = default_catalog();
  const std::vector<int> a = {6, 12, 16, 7, 1, 8, 13, 2, 3, 9, 4, 15, 5, 10, 11, 14, 17};
  const std::vector<int> b = {6, 12, 16, 17, 7, 1, 8, 13, 2, 3, 9, 4, 15, 5, 10, 11, 14};
  const auto sa = segment(a, {2, 1}, cat);
  const auto sb = segment(b, {1, 2}, cat);
  EXPECT_FALSE(sa.is_bi_branch);
  EXPECT_FALSE(sb.is_bi_branch);
  EXPECT_TRUE(sa.assist_branch.empty());
  EXPECT_EQ(sa, sb);
  const Assembly ma = assemble(sa, MountedPose{}, cat);
  const Assembly mb = assemble(sb, MountedPose{}, cat);
  ASSERT_TRUE(ma.feasible);
  ASSERT_TRUE(mb.feasible);
  EXPECT_TRUE(ma.model.same_structure(mb.model));
}

TEST(Segment, EndEffectorFirstIsInfeasible) {
  const Catalog cat = default_catalog();
  std::vector<int> c = {15, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 16, 17};
  const auto s = segment(c, {1, 2}, cat);
  EXPECT_FALSE(s.feasible);
  EXPECT_FALSE(assemble(s, MountedPose{}, cat).feasible);
}

TEST(Segment, NoSomIsPlainChain) {
  const Catalog cat = default_catalog();
  const auto s = segment({2, 9, 1, 5, 15, 16, 17}, {1, 2}, cat);
  EXPECT_FALSE(s.uses_y_module);
  EXPECT_EQ(s.base_segment, (std::vector<int>{2, 9, 1, 5}));
  EXPECT_TRUE(s.main_branch.empty());
}

TEST(Assemble, SingleBranchChain) {
  const Catalog cat = default_catalog();
  // elbow, link 0.4, straight, elbow, end effector
  const auto s = segment({2, 9, 1, 5, 15}, {1, 2}, cat);
  const Assembly a = assemble(s, MountedPose{}, cat);
  ASSERT_TRUE(a.feasible);
  EXPECT_EQ(a.model.dof(), 3);
  EXPECT_EQ(a.model.capsules.size(), 5u);
  const FKResult fk = forward_kinematics(a.model, VecX::Zero(3));
  const double reach = 0.18 + 0.4 + 0.14 + 0.18 + 0.10;
  EXPECT_NEAR(fk.ee.p.z(), reach, 1e-12);
  EXPECT_NEAR(fk.ee.p.head<2>().norm(), 0.0, 1e-12);
}

TEST(Assemble, WorkedBiBranchHasToollessAssist) {
  const Catalog cat = default_catalog();
  const auto s = segment(sort_map(worked_scores()), {1, 2}, cat);
  const Assembly a = assemble(s, MountedPose{}, cat);
  ASSERT_TRUE(a.feasible);
  const KinematicModel& m = a.model;
  EXPECT_TRUE(m.is_bi_branch());
  EXPECT_EQ(m.dof(Branch::kShared), 2);  // modules 4, 5
  EXPECT_EQ(m.dof(Branch::kMain), 4);    // 1, 3, 6, 2
  EXPECT_EQ(m.dof(Branch::kAssist), 0);  // links 7, 12 only
  EXPECT_EQ(m.bodies[m.ee_body].kind, ModuleKind::kEndEffector);
  EXPECT_EQ(m.bodies[m.ee_body].branch, Branch::kMain);
  int ees = 0;
  for (const auto& b : m.bodies) {
    ees += b.kind == ModuleKind::kEndEffector;
    if (b.branch == Branch::kAssist) {
      EXPECT_NE(b.kind, ModuleKind::kEndEffector);
    }
  }
  EXPECT_EQ(ees, 1);
  // base 2 + Y + main 6 + EE + assist 2
  EXPECT_EQ(m.capsules.size(), 12u);
}

TEST(Assemble, RandomDecodesFormValidTrees) {
  const Catalog cat = default_catalog();
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int y_on_base = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    VecX M(17);
    for (int i = 0; i < 17; ++i) M[i] = u(rng);
    const Decoded d = decode(M, u(rng), u(rng), cat);
    const Assembly a = assemble(d.seg, MountedPose{}, cat);
    if (!a.feasible) continue;
    const KinematicModel& m = a.model;
    int joints = 0;
    for (std::size_t i = 0; i < m.bodies.size(); ++i) {
      ASSERT_LT(m.bodies[i].parent, static_cast<int>(i));
      if (m.bodies[i].joint >= 0) {
        ++joints;
        ASSERT_EQ(m.joints[m.bodies[i].joint].body, static_cast<int>(i));
      }
    }
    int expected = 0;
    for (const auto* seg : {&d.seg.base_segment, &d.seg.main_branch, &d.seg.assist_branch})
      for (int id : *seg) expected += cat.module(id).has_joint();
    ASSERT_EQ(joints, expected);
    ASSERT_EQ(m.dof(), expected);
    if (d.seg.uses_y_module && d.seg.base_segment.empty()) {
      ++y_on_base;
      ASSERT_EQ(m.bodies[0].kind, ModuleKind::kYSplitter);
      ASSERT_EQ(m.bodies[0].parent, -1);
    }
    // q ordering: shared, then main, then assist.
    for (int j = 1; j < m.dof(); ++j)
      ASSERT_LE(static_cast<int>(m.joints[j - 1].branch), static_cast<int>(m.joints[j].branch));
  }
  EXPECT_GT(y_on_base, 0);
}

TEST(Decode, MonotoneTransformInvariance) {
  const Catalog cat = default_catalog();
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    VecX M(17);
    for (int i = 0; i < 17; ++i) M[i] = u(rng);
    const VecX F = M.array().cube() * 0.5 + 0.1;  // strictly increasing, stays in [0, 1]
    const VecX G = (M.array() + 0.2) * 0.5;  // shift then scale
    const auto a = decode(M, 0.3, 0.6, cat);
    EXPECT_EQ(a.seg, decode(F, 0.3, 0.6, cat).seg);
    EXPECT_EQ(a.seg, decode(G, 0.3, 0.6, cat).seg);
  }
}

TEST(Decode, RejectsWrongLength) {
  EXPECT_THROW(decode(VecX::Zero(5), 0.5, 0.5, default_catalog()), DimensionError);
}

}  // namespace
}  // namespace mcd
