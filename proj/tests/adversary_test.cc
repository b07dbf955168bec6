/*
 * Copyright 2026 The detrust Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "detrust/adversary.h"

#include "gtest/gtest.h"

namespace detrust::adversary {
namespace {

using encoding::FusionMode;
using participation::FromSupports;

class AdversaryTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    group_ = new GroupParams(SetupGroup(128, {.seed = 21, .allow_insecure = true}));
  }
  static void TearDownTestSuite() { delete group_; }

  static Harness Make(int n, int m, int t_g) {
    HarnessOptions o;
    o.n = n;
    o.m = m;
    o.t_g = t_g;
    return Harness(o, *group_);
  }

  static GroupParams* group_;
};

GroupParams* AdversaryTest::group_ = nullptr;

TEST_F(AdversaryTest, LoneTargetRowIsRefused) {
  auto h = Make(5, 4, 3);
  const auto report = h.Isolation(2, {});
  EXPECT_EQ(report.outcome, Outcome::kBlockedByInspection);
  EXPECT_FALSE(report.evidence.empty());
}

TEST_F(AdversaryTest, CollusionBoundaryIsOneBelowThreshold) {
  // Row = target + colluders; it clears inspection only once its support
  // reaches t_g, i.e. with t_g - 1 colluders.
  auto h = Make(7, 4, 4);
  const auto boundary = h.CollusionBoundary(1);
  ASSERT_EQ(boundary.size(), 7u);
  for (const auto& [c, outcome] : boundary) {
    if (c < 3) {
      EXPECT_EQ(outcome, Outcome::kBlockedByInspection) << c;
    } else {
      EXPECT_EQ(outcome, Outcome::kSucceeded) << c;
    }
  }
}

TEST_F(AdversaryTest, TwoColludersAtThresholdFourDoNotExpose) {
  auto h = Make(7, 4, 4);
  EXPECT_NE(h.Isolation(1, {2, 3}).outcome, Outcome::kSucceeded);
}

TEST_F(AdversaryTest, AllParticipateRefusesAnySubFullRow) {
  auto h = Make(7, 2, 7);
  for (int c = 0; c < 6; ++c) {
    std::vector<int> colluders;
    for (int j = 2; j <= 1 + c; ++j) colluders.push_back(j);
    EXPECT_EQ(h.Isolation(1, colluders).outcome, Outcome::kBlockedByInspection) << c;
  }
}

TEST_F(AdversaryTest, NonBpMatrixIsRefused) {
  auto h = Make(3, 2, 1);
  const auto crafted = FromSupports(3, {{1, 2}, {1}}, FusionMode::kAverage);
  EXPECT_EQ(h.Disaggregation(crafted).outcome, Outcome::kBlockedByInspection);
}

TEST_F(AdversaryTest, BpMatrixYieldsNoExposure) {
  auto h = Make(4, 3, 2);
  const auto crafted = FromSupports(4, {{1, 2}, {3, 4}, {1, 2, 3, 4}}, FusionMode::kAverage);
  const auto report = h.Disaggregation(crafted);
  EXPECT_EQ(report.outcome, Outcome::kNoExposure);
  EXPECT_TRUE(report.aggregate_correct);
}

TEST_F(AdversaryTest, SingleRoundGivesNoSystemToSolve) {
  auto h = Make(5, 1, 3);
  const auto crafted = FromSupports(5, {{1, 2, 3}}, FusionMode::kAverage);
  EXPECT_NE(h.Disaggregation(crafted).outcome, Outcome::kSucceeded);
}

TEST_F(AdversaryTest, DifferencingSucceedsWhenInspectionIsWeakened) {
  // t_bp = 1 accepts singleton classes, so differencing rounds works. This
  // control shows the solver is live.
  HarnessOptions o;
  o.n = 3;
  o.m = 2;
  o.t_g = 2;
  o.t_bp = 1;
  Harness h(o, *group_);
  const auto crafted = FromSupports(3, {{1, 2, 3}, {2, 3}}, FusionMode::kAverage);
  EXPECT_EQ(h.Disaggregation(crafted).outcome, Outcome::kSucceeded);
}

TEST_F(AdversaryTest, ReplayedCiphertextsFailToDecrypt) {
  auto h = Make(6, 2, 3);
  const std::vector<int> support{1, 2, 3, 4};
  EXPECT_EQ(h.Replay(1, 2, {2, 3, 4}, support).outcome, Outcome::kBlockedByLabel);
  EXPECT_EQ(h.Replay(1, 2, {1}, support).outcome, Outcome::kBlockedByLabel);
  const auto control = h.Replay(1, 2, {}, support);
  EXPECT_EQ(control.outcome, Outcome::kNoExposure);
  EXPECT_TRUE(control.aggregate_correct);
}

TEST_F(AdversaryTest, TwoFacedMatrixBreaksKeyBinding) {
  auto h = Make(5, 3, 3);
  EXPECT_EQ(h.TwoFaced(1, 1).outcome, Outcome::kBlockedByKeyBinding);
  EXPECT_EQ(h.TwoFaced(1, 4).outcome, Outcome::kBlockedByKeyBinding);
  const auto control = h.TwoFaced(1, 0);
  EXPECT_NE(control.outcome, Outcome::kSucceeded);
  EXPECT_NE(control.outcome, Outcome::kBlockedByKeyBinding);
  EXPECT_TRUE(control.aggregate_correct);
}

TEST(AttackReportTest, JsonUsesNames) {
  AttackReport r;
  r.attack = AttackKind::kReplay;
  r.outcome = Outcome::kBlockedByLabel;
  r.evidence = {"x"};
  const auto j = r.ToJson();
  EXPECT_EQ(j.at("attack"), AttackName(AttackKind::kReplay));
  EXPECT_EQ(j.at("outcome"), OutcomeName(Outcome::kBlockedByLabel));
  EXPECT_EQ(j.at("evidence").size(), 1u);
}

}  // namespace
}  // namespace detrust::adversary
