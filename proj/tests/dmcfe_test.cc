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


#include "detrust/dmcfe.h"

#include <numeric>

#include "detrust/errors.h"
#include "gtest/gtest.h"

namespace detrust::dmcfe {
namespace {

GroupParams Small() { return SetupGroup(16, {.seed = 1, .allow_insecure = true}); }

class DmcfeTest : public ::testing::Test {
 protected:
  void Init(int n, int64_t payload = 100, int64_t scale = 1) {
    pp_ = dmcfe::Setup(Small(), n, payload, scale);
    Drbg rng(11);
    keys_ = KeygenCeremony(pp_, rng);
  }

  std::vector<PartialDecryptionKey> AllFragments(const std::vector<int64_t>& y,
                                                 const Bytes& tag) const {
    std::vector<PartialDecryptionKey> out;
    for (const auto& k : keys_) out.push_back(KeyDerShare(pp_, k, y, tag));
    return out;
  }

  PublicParams pp_;
  std::vector<PartySecretKey> keys_;
};

TEST(SetupTest, DlogBoundFormula) {
  const GroupParams gp = StandardGroup2048();
  EXPECT_EQ(dmcfe::Setup(gp, 5, 100000, 1).dlog_bound, 500000);
  EXPECT_EQ(dmcfe::Setup(gp, 2, 10, 100).dlog_bound, 2000);
  EXPECT_THROW(dmcfe::Setup(gp, 1, 10, 1), PreconditionError);
}

TEST(SetupTest, RejectsRangeThatWrapsTheGroup) {
  const GroupParams toy{23, 11, 4, 5};
  EXPECT_NO_THROW(dmcfe::Setup(toy, 2, 2, 1));  // 2*4+1 = 9 <= 11
  EXPECT_THROW(dmcfe::Setup(toy, 2, 3, 1), PreconditionError);
}

TEST_F(DmcfeTest, CeremonySeedsAreSymmetricAndComplete) {
  Init(4);
  ASSERT_EQ(keys_.size(), 4u);
  for (const auto& k : keys_) {
    EXPECT_EQ(k.pairwise_seeds.size(), 3u);
    EXPECT_FALSE(k.pairwise_seeds.contains(k.party_id));
    for (const auto& [peer, seed] : k.pairwise_seeds) {
      EXPECT_EQ(keys_[peer - 1].pairwise_seeds.at(k.party_id), seed);
    }
    EXPECT_GE(k.s1, 0);
    EXPECT_LT(k.s1, pp_.group.q);
  }
}

TEST_F(DmcfeTest, CeremoniesWithDifferentRandomnessDiffer) {
  Init(3);
  Drbg other(12);
  const auto keys2 = KeygenCeremony(pp_, other);
  EXPECT_NE(keys_[0].s1, keys2[0].s1);
}

TEST(DhKeySetupTest, PairwiseSeedsAgree) {
  const GroupParams gp = StandardGroup2048();
  Drbg rng(5);
  const DhKeyPair a = GenerateDhKey(gp, rng);
  const DhKeyPair b = GenerateDhKey(gp, rng);
  EXPECT_TRUE(IsSubgroupMember(gp, a.public_key.value()));
  EXPECT_EQ(DerivePairwiseSeed(gp, 1, a.secret, 2, b.public_key),
            DerivePairwiseSeed(gp, 2, b.secret, 1, a.public_key));
  EXPECT_THROW(DerivePairwiseSeed(gp, 1, a.secret, 2, GroupElement(gp.p - 1)), ProtocolError);
}

TEST(DhKeySetupTest, MakeSecretKeyNeedsEverySeed) {
  const PublicParams pp = dmcfe::Setup(Small(), 3, 10, 1);
  Drbg rng(1);
  std::map<int, Digest> seeds{{2, Digest{}}};
  EXPECT_THROW(MakeSecretKey(pp, 1, seeds, rng), PreconditionError);
  seeds[3] = Digest{};
  EXPECT_EQ(MakeSecretKey(pp, 1, seeds, rng).pairwise_seeds.size(), 2u);
}

TEST(EncryptTest, ToyGroupMatchesHandComputation) {
  PublicParams pp;
  pp.group = {23, 11, 4, 5};
  pp.n = 2;
  pp.payload_bound = 3;
  pp.dlog_bound = 6;
  PartySecretKey sk;
  sk.party_id = 1;
  sk.s1 = 3;
  sk.s2 = 7;
  const Bytes label = ToBytes("round-1");
  const auto [u1, u2] = HashToGroup(pp.group, CoordinateLabel(label, 0));
  const std::vector<int64_t> x{3};
  const Ciphertext ct = Encrypt(pp, sk, x, label);
  long expected = 1;
  for (int i = 0; i < 3; ++i) expected = expected * u1.value().get_si() % 23;
  for (int i = 0; i < 7; ++i) expected = expected * u2.value().get_si() % 23;
  for (int i = 0; i < 3; ++i) expected = expected * 4 % 23;
  EXPECT_EQ(ct.coords.at(0).value(), expected);
}

TEST_F(DmcfeTest, ZeroPlaintextIsPureMask) {
  Init(2);
  const Bytes label = ToBytes("round-3");
  const std::vector<int64_t> x{0, 0};
  const Ciphertext ct = Encrypt(pp_, keys_[0], x, label);
  for (size_t k = 0; k < 2; ++k) {
    const auto [u1, u2] = HashToGroup(pp_.group, CoordinateLabel(label, k));
    const mpz_class mask = PowMod(u1.value(), keys_[0].s1, pp_.group.p) *
                           PowMod(u2.value(), keys_[0].s2, pp_.group.p) % pp_.group.p;
    EXPECT_EQ(ct.coords[k].value(), mask);
  }
}

TEST_F(DmcfeTest, EncryptIsDeterministicAndChecksRange) {
  Init(2);
  const std::vector<int64_t> x{5, -7};
  const Bytes label = ToBytes("round-1");
  const Ciphertext a = Encrypt(pp_, keys_[0], x, label);
  const Ciphertext b = Encrypt(pp_, keys_[0], x, label);
  EXPECT_EQ(a.coords, b.coords);
  for (const auto& c : a.coords) EXPECT_TRUE(IsSubgroupMember(pp_.group, c.value()));
  const std::vector<int64_t> big{101};
  EXPECT_THROW(Encrypt(pp_, keys_[0], big, label), PayloadOutOfRange);
}

TEST_F(DmcfeTest, ZeroSharesCancel) {
  Init(5);
  for (const char* tag : {"round=1;y=1,1,1,1,1", "round=2;y=0,1,1,0,1"}) {
    mpz_class s1 = 0;
    mpz_class s2 = 0;
    for (const auto& k : keys_) {
      const auto [z1, z2] = ZeroShare(pp_, k, ToBytes(tag));
      s1 += z1;
      s2 += z2;
    }
    EXPECT_EQ(s1 % pp_.group.q, 0);
    EXPECT_EQ(s2 % pp_.group.q, 0);
  }
}

TEST_F(DmcfeTest, AllZeroWeightsCombineToZeroKey) {
  Init(3);
  const std::vector<int64_t> y{0, 0, 0};
  const auto dk = KeyDerComb(pp_, AllFragments(y, MakeFusionTag(1, y)));
  EXPECT_EQ(dk.d1, 0);
  EXPECT_EQ(dk.d2, 0);
}

TEST_F(DmcfeTest, UnitWeightCombinesToThatSecret) {
  Init(3);
  const std::vector<int64_t> y{1, 0, 0};
  const auto dk = KeyDerComb(pp_, AllFragments(y, MakeFusionTag(1, y)));
  EXPECT_EQ(dk.d1, keys_[0].s1);
  EXPECT_EQ(dk.d2, keys_[0].s2);
}

TEST_F(DmcfeTest, FragmentsBindTheRound) {
  Init(3);
  const std::vector<int64_t> y{1, 1, 1};
  const auto f1 = KeyDerShare(pp_, keys_[0], y, MakeFusionTag(1, y));
  const auto f2 = KeyDerShare(pp_, keys_[0], y, MakeFusionTag(2, y));
  EXPECT_NE(f1.d1, f2.d1);
  EXPECT_EQ(ToString(f1.fusion_tag), "round=1;y=1,1,1");
}

TEST_F(DmcfeTest, KeyDerShareChecksLength) {
  Init(3);
  const std::vector<int64_t> y{1, 1};
  EXPECT_THROW(KeyDerShare(pp_, keys_[0], y, ToBytes("t")), WeightVectorLengthMismatch);
}

TEST_F(DmcfeTest, CombineNamesMissingParty) {
  Init(4);
  const std::vector<int64_t> y{1, 1, 1, 1};
  auto frags = AllFragments(y, MakeFusionTag(1, y));
  frags.erase(frags.begin() + 2);
  try {
    KeyDerComb(pp_, frags);
    FAIL() << "expected MissingFragment";
  } catch (const MissingFragment& e) {
    EXPECT_EQ(e.missing(), std::vector<int>{3});
  }
}

TEST_F(DmcfeTest, CombineRejectsMixedTags) {
  Init(3);
  const std::vector<int64_t> y{1, 1, 1};
  auto frags = AllFragments(y, MakeFusionTag(1, y));
  frags[1] = KeyDerShare(pp_, keys_[1], y, MakeFusionTag(2, y));
  EXPECT_THROW(KeyDerComb(pp_, frags), MixedFusionTag);
}

TEST_F(DmcfeTest, DecryptThreePartySum) {
  Init(3);
  const std::vector<int64_t> y{1, 1, 1};
  const Bytes label = ToBytes("round-1");
  std::vector<Ciphertext> cts;
  const std::vector<std::vector<int64_t>> xs{{2}, {5}, {-4}};
  for (int j = 0; j < 3; ++j) cts.push_back(Encrypt(pp_, keys_[j], xs[j], label));
  const auto dk = KeyDerComb(pp_, AllFragments(y, MakeFusionTag(1, y)));
  EXPECT_EQ(Decrypt(pp_, dk, cts, y, label), std::vector<int64_t>{3});
}

TEST_F(DmcfeTest, DecryptZeroVectors) {
  Init(3);
  const std::vector<int64_t> y{1, 1, 1};
  const Bytes label = ToBytes("round-1");
  std::vector<Ciphertext> cts;
  const std::vector<int64_t> zero{0, 0, 0};
  for (const auto& k : keys_) cts.push_back(Encrypt(pp_, k, zero, label));
  const auto dk = KeyDerComb(pp_, AllFragments(y, MakeFusionTag(1, y)));
  EXPECT_EQ(Decrypt(pp_, dk, cts, y, label), zero);
}

TEST_F(DmcfeTest, WeightedSubsetDecrypts) {
  Init(4, 100, 10);
  const std::vector<int64_t> y{3, 0, 7, 1};
  const Bytes label = ToBytes("round-2");
  const std::vector<std::vector<int64_t>> xs{{10, -3}, {99, 99}, {-20, 4}, {1, 1}};
  std::vector<Ciphertext> cts;
  for (int j : {0, 2, 3}) cts.push_back(Encrypt(pp_, keys_[j], xs[j], label));
  const auto dk = KeyDerComb(pp_, AllFragments(y, MakeFusionTag(2, y)));
  const auto out = Decrypt(pp_, dk, cts, y, label);
  EXPECT_EQ(out, (std::vector<int64_t>{3 * 10 - 7 * 20 + 1, -3 * 3 + 7 * 4 + 1}));
}

TEST_F(DmcfeTest, DecryptChecksSendersAndLabels) {
  Init(3);
  const std::vector<int64_t> y{1, 1, 0};
  const Bytes label = ToBytes("round-1");
  const std::vector<int64_t> x{1};
  const auto dk = KeyDerComb(pp_, AllFragments(y, MakeFusionTag(1, y)));
  std::vector<Ciphertext> cts{Encrypt(pp_, keys_[0], x, label)};
  EXPECT_THROW(Decrypt(pp_, dk, cts, y, label), PreconditionError);
  cts.push_back(Encrypt(pp_, keys_[1], x, ToBytes("round-2")));
  EXPECT_THROW(Decrypt(pp_, dk, cts, y, label), LabelMismatch);
}

TEST_F(DmcfeTest, RelabelledReplayFailsDlog) {
  // Larger group so a stray hit inside the dlog range is negligible.
  pp_ = dmcfe::Setup(SetupGroup(128, {.seed = 3, .allow_insecure = true}), 3, 100, 1);
  Drbg rng(2);
  keys_ = KeygenCeremony(pp_, rng);
  const std::vector<int64_t> y{1, 1, 1};
  const std::vector<int64_t> x{7, 8};
  std::vector<Ciphertext> cts;
  for (const auto& k : keys_) cts.push_back(Encrypt(pp_, k, x, ToBytes("round-2")));
  cts[1] = Encrypt(pp_, keys_[1], x, ToBytes("round-1"));
  cts[1].label = ToBytes("round-2");
  const auto dk = KeyDerComb(pp_, AllFragments(y, MakeFusionTag(2, y)));
  EXPECT_THROW(Decrypt(pp_, dk, cts, y, ToBytes("round-2")), DlogNotFound);
}

TEST_F(DmcfeTest, KeyForOtherWeightsFailsDlog) {
  pp_ = dmcfe::Setup(SetupGroup(128, {.seed = 3, .allow_insecure = true}), 3, 100, 1);
  Drbg rng(2);
  keys_ = KeygenCeremony(pp_, rng);
  const std::vector<int64_t> y{1, 1, 1};
  const std::vector<int64_t> y_other{1, 2, 1};
  const std::vector<int64_t> x{7};
  std::vector<Ciphertext> cts;
  for (const auto& k : keys_) cts.push_back(Encrypt(pp_, k, x, ToBytes("round-1")));
  const auto dk = KeyDerComb(pp_, AllFragments(y_other, MakeFusionTag(1, y)));
  EXPECT_THROW(Decrypt(pp_, dk, cts, y, ToBytes("round-1")), DlogNotFound);
}

TEST_F(DmcfeTest, JsonRoundTrips) {
  Init(2);
  const std::vector<int64_t> x{4, -4};
  const Ciphertext ct = Encrypt(pp_, keys_[1], x, ToBytes("round-9"));
  const auto j = CiphertextToJson(ct);
  EXPECT_EQ(j.at("label"), Base64Encode(ToBytes("round-9")));
  EXPECT_TRUE(j.at("coords").at(0).is_string());
  const Ciphertext back = CiphertextFromJson(j);
  EXPECT_EQ(back.party_id, 2);
  EXPECT_EQ(back.coords, ct.coords);

  const std::vector<int64_t> y{1, 1};
  const auto f = KeyDerShare(pp_, keys_[0], y, MakeFusionTag(4, y));
  const auto fb = FragmentFromJson(FragmentToJson(f));
  EXPECT_EQ(fb.d1, f.d1);
  EXPECT_EQ(fb.d2, f.d2);
  EXPECT_EQ(fb.fusion_tag, f.fusion_tag);

  const PublicParams pb = PublicParamsFromJson(PublicParamsToJson(pp_));
  EXPECT_EQ(pb.group, pp_.group);
  EXPECT_EQ(pb.dlog_bound, pp_.dlog_bound);
}

}  // namespace
}  // namespace detrust::dmcfe
