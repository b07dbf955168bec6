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


#include "detrust/dtc.h"

#include <set>

#include "detrust/errors.h"
#include "gtest/gtest.h"

namespace detrust::dtc {
namespace {

using participation::Enrollment;
using participation::ParticipationMatrix;
using participation::VerdictKind;

class DtcTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    group_ = new GroupParams(SetupGroup(64, {.seed = 4, .allow_insecure = true}));
  }
  static void TearDownTestSuite() { delete group_; }

  // Builds n parties with the given local thresholds and enrollment wishes.
  void Build(int m, std::vector<int> t_local, std::vector<Enrollment> enrollment = {},
             int t_bp = 2, int max_rounds = kDefaultMaxNegotiationRounds, uint64_t seed = 1) {
    const int n = static_cast<int>(t_local.size());
    pp_ = dmcfe::Setup(*group_, n, encoding::EncodingConfig{}.PayloadBound(), 1);
    Drbg rng(seed);
    keys_ = dmcfe::KeygenCeremony(pp_, rng);
    parties_.clear();
    for (int j = 1; j <= n; ++j) {
      PartyOptions o;
      o.party_id = j;
      o.t_local = t_local[j - 1];
      o.t_bp = t_bp;
      if (!enrollment.empty()) o.policy.enrollment = enrollment[j - 1];
      parties_.emplace_back(o, pp_, &keys_[j - 1]);
    }
    AggregatorOptions ao;
    ao.m = m;
    ao.n = n;
    ao.t_bp = t_bp;
    ao.seed = seed;
    ao.max_negotiation_rounds = max_rounds;
    aggregator_ = std::make_unique<DtcAggregator>(ao);
  }

  // The three agreement conditions plus every party's final verdict.
  void ExpectAgreed(const ConsensusResult& r) {
    EXPECT_TRUE(participation::CheckBp(r.matrix, aggregator_->trust().t_bp));
    EXPECT_TRUE(participation::RowsMeetThreshold(r.matrix, r.t_g));
    for (auto& p : parties_) {
      ASSERT_TRUE(p.accepted().has_value());
      EXPECT_EQ(*p.accepted(), r.matrix.Canonical());
    }
    EXPECT_TRUE(r.fragments.Complete());
    for (int i = 1; i <= r.matrix.m(); ++i) {
      EXPECT_NO_THROW(dmcfe::KeyDerComb(pp_, r.fragments.Row(i)));
    }
  }

  static GroupParams* group_;
  dmcfe::PublicParams pp_;
  std::vector<dmcfe::PartySecretKey> keys_;
  std::vector<DtcParty> parties_;
  std::unique_ptr<DtcAggregator> aggregator_;
};

GroupParams* DtcTest::group_ = nullptr;

TEST_F(DtcTest, HonestFederationAgreesInOneRound) {
  Build(6, {3, 3, 3, 3, 3});
  const auto r = RunConsensus(*aggregator_, parties_);
  EXPECT_EQ(r.negotiation_rounds, 1);
  EXPECT_EQ(r.t_g, 3);
  EXPECT_EQ(aggregator_->phase(), Phase::kDone);
  ExpectAgreed(r);
}

TEST_F(DtcTest, GlobalThresholdIsTheMaximum) {
  Build(4, {2, 4, 2, 2});
  const auto r = RunConsensus(*aggregator_, parties_);
  EXPECT_EQ(r.t_g, 4);
  for (int i = 1; i <= 4; ++i) EXPECT_EQ(r.matrix.Support(i), (std::vector<int>{1, 2, 3, 4}));
  ExpectAgreed(r);
}

TEST_F(DtcTest, ThresholdAboveNAborts) {
  Build(4, {2, 5, 2, 2});
  EXPECT_THROW(RunConsensus(*aggregator_, parties_), InfeasibleConstraints);
  EXPECT_EQ(aggregator_->phase(), Phase::kAborted);
}

TEST_F(DtcTest, PartyDemandingEveryRoundGetsIt) {
  Build(10, {2, 2, 2, 2, 2, 2},
        {Enrollment::kAny, Enrollment::kAny, Enrollment::kAny, Enrollment::kAny,
         Enrollment::kAlways, Enrollment::kAny});
  const auto r = RunConsensus(*aggregator_, parties_);
  for (int i = 1; i <= 10; ++i) EXPECT_TRUE(r.matrix.Enrolled(i, 5));
  EXPECT_LE(r.negotiation_rounds, kDefaultMaxNegotiationRounds);
  ExpectAgreed(r);
}

TEST_F(DtcTest, PartyRefusingToJoinIsLeftOut) {
  Build(5, {3, 3, 3, 3, 3},
        {Enrollment::kNever, Enrollment::kAny, Enrollment::kAny, Enrollment::kAny,
         Enrollment::kAny});
  const auto r = RunConsensus(*aggregator_, parties_);
  for (int i = 1; i <= 5; ++i) EXPECT_FALSE(r.matrix.Enrolled(i, 1));
  ExpectAgreed(r);
}

TEST_F(DtcTest, IrreconcilableDemandsNamePartyRefusal) {
  // Everyone is needed for t_g = 3, but party 2 will never join.
  Build(3, {3, 3, 3}, {Enrollment::kAny, Enrollment::kNever, Enrollment::kAny});
  try {
    RunConsensus(*aggregator_, parties_);
    FAIL() << "expected PartyRefusal";
  } catch (const PartyRefusal& e) {
    EXPECT_EQ(e.parties(), std::vector<int>{2});
  }
}

TEST_F(DtcTest, NegotiationCapEndsInTimeout) {
  Build(10, {2, 2, 2, 2, 2, 2},
        {Enrollment::kAny, Enrollment::kAny, Enrollment::kAny, Enrollment::kAny,
         Enrollment::kAlways, Enrollment::kAny},
        2, 1);
  // Cap of one: the first proposal leaves party 5 out at least once.
  const auto first = participation::ProposeMatrix(10, 6, participation::MakeTrustConfig(
                                                             {2, 2, 2, 2, 2, 2}, 2),
                                                  encoding::FusionMode::kAverage, 1);
  bool always_in = true;
  for (int i = 1; i <= 10; ++i) always_in &= first.Enrolled(i, 5);
  ASSERT_FALSE(always_in);
  EXPECT_THROW(RunConsensus(*aggregator_, parties_), ConsensusTimeout);
}

TEST_F(DtcTest, FragmentsRequireTheAcceptedMatrix) {
  Build(3, {2, 2, 2, 2});
  const auto r = RunConsensus(*aggregator_, parties_);
  ParticipationMatrix altered = r.matrix;
  altered.set(1, 1, Rational(1, 3));
  EXPECT_THROW(parties_[0].GenerateFragments(altered), RefusedMatrix);
  EXPECT_NO_THROW(parties_[0].GenerateFragments(r.matrix));
}

TEST_F(DtcTest, TwentyRoundsGiveTwentyTaggedFragments) {
  Build(20, {3, 3, 3, 3, 3});
  const auto r = RunConsensus(*aggregator_, parties_);
  const auto column = parties_[2].GenerateFragments(r.matrix);
  ASSERT_EQ(column.size(), 20u);
  for (int i = 1; i <= 20; ++i) {
    EXPECT_EQ(ToString(column[i - 1].fusion_tag).rfind("round=" + std::to_string(i) + ";", 0),
              0u);
  }
}

TEST_F(DtcTest, IdenticalRowsStillGetDistinctFragments) {
  Build(2, {3, 3, 3});
  const auto r = RunConsensus(*aggregator_, parties_);
  ASSERT_EQ(r.matrix.row(1), r.matrix.row(2));
  EXPECT_NE(r.fragments.Get(1, 1)->d1, r.fragments.Get(2, 1)->d1);
}

TEST_F(DtcTest, AggregatorRejectsFragmentsForAnotherMatrix) {
  Build(2, {3, 3, 3});
  for (auto& p : parties_) aggregator_->OnThreshold(p.id(), p.t_local());
  const auto proposal = aggregator_->Propose();
  for (auto& p : parties_) aggregator_->OnVerdict(p.id(), p.Inspect(proposal, 3));
  ASSERT_EQ(aggregator_->phase(), Phase::kFinalizing);
  std::vector<dmcfe::PartialDecryptionKey> forged;
  const std::vector<int64_t> y{1, 1, 0};
  for (int i = 1; i <= 2; ++i) {
    forged.push_back(dmcfe::KeyDerShare(pp_, keys_[0], y, dmcfe::MakeFusionTag(i, y)));
  }
  EXPECT_THROW(aggregator_->OnFragments(1, forged), ProtocolError);
}

TEST(MergeTest, AcceptedSuggestionIsSpliced) {
  // Parties 5 and 6 sit out round 2; both ask to join it.
  const auto proposal = participation::FromSupports(
      6, {{1, 2, 3, 4, 5, 6}, {1, 2, 3, 4}}, encoding::FusionMode::kAverage);
  const auto trust = participation::MakeTrustConfig({3, 3, 3, 3, 3, 3}, 2);
  const std::vector<Rational> want{Rational(1, 6), Rational(1, 6)};
  std::map<int, participation::InspectionVerdict> verdicts;
  for (int j = 1; j <= 4; ++j) verdicts[j] = {VerdictKind::kAccept, std::nullopt};
  verdicts[5] = {VerdictKind::kSuggest, want};
  verdicts[6] = {VerdictKind::kSuggest, want};
  participation::ProposalConstraints learned;
  const auto merged = AggregatorMergeSuggestions(proposal, verdicts, trust,
                                                 encoding::FusionMode::kAverage, {}, 1, learned);
  EXPECT_EQ(merged.Support(2), (std::vector<int>{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(merged.at(2, 1), Rational(1, 6));
  EXPECT_TRUE(learned.pinned.empty());
  EXPECT_TRUE(participation::CheckBp(merged, 2));
}

TEST(MergeTest, SuggestionBreakingBpTriggersRepair) {
  // Party 5 alone asking into round 2 would leave it in a singleton class.
  const auto proposal = participation::FromSupports(
      6, {{1, 2, 3, 4, 5, 6}, {1, 2, 3, 4}}, encoding::FusionMode::kAverage);
  const auto trust = participation::MakeTrustConfig({3, 3, 3, 3, 3, 3}, 2);
  std::map<int, participation::InspectionVerdict> verdicts;
  for (int j : {1, 2, 3, 4, 6}) verdicts[j] = {VerdictKind::kAccept, std::nullopt};
  verdicts[5] = {VerdictKind::kSuggest, std::vector<Rational>{Rational(1, 6), Rational(1, 5)}};
  participation::ProposalConstraints learned;
  const auto merged = AggregatorMergeSuggestions(proposal, verdicts, trust,
                                                 encoding::FusionMode::kAverage, {}, 7, learned);
  EXPECT_EQ(learned.pinned, std::vector<int>{5});
  for (int i = 1; i <= 2; ++i) EXPECT_TRUE(merged.Enrolled(i, 5));
  EXPECT_TRUE(participation::CheckBp(merged, 2));
  EXPECT_TRUE(participation::RowsMeetThreshold(merged, 3));
}

TEST(KeyFragmentMatrixTest, RowSkipsMissing) {
  KeyFragmentMatrix k(2, 3);
  dmcfe::PartialDecryptionKey f;
  f.party_id = 2;
  k.Set(1, 2, f);
  EXPECT_EQ(k.Row(1).size(), 1u);
  EXPECT_EQ(k.Count(), 1u);
  EXPECT_FALSE(k.Complete());
}

}  // namespace
}  // namespace detrust::dtc
