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


#include "detrust/bytes.h"

#include <set>
#include <string>

#include "detrust/errors.h"
#include "gtest/gtest.h"

namespace detrust {
namespace {

TEST(BytesTest, Sha256KnownAnswer) {
  // FIPS 180-2 test vector.
  EXPECT_EQ(HexEncode(Sha256(ToBytes("abc"))),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(BytesTest, HmacKnownAnswer) {
  // RFC 4231 test case 2.
  EXPECT_EQ(HexEncode(HmacSha256(ToBytes("Jefe"), ToBytes("what do ya want for nothing?"))),
            "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
}

TEST(BytesTest, Base64RoundTripAndRejectsGarbage) {
  const Bytes data = ToBytes("round-17");
  EXPECT_EQ(Base64Encode(data), "cm91bmQtMTc=");
  EXPECT_EQ(Base64Decode("cm91bmQtMTc="), data);
  EXPECT_THROW(Base64Decode("%%%"), ProtocolError);
}

TEST(BytesTest, FramingSeparatesConcatenations) {
  Bytes a;
  AppendFramed(a, "ab");
  AppendFramed(a, "c");
  Bytes b;
  AppendFramed(b, "a");
  AppendFramed(b, "bc");
  EXPECT_NE(a, b);
  EXPECT_EQ(a.size(), 4u + 2 + 4 + 1);
}

TEST(BytesTest, MpzRoundTrip) {
  const mpz_class v("123456789012345678901234567890");
  EXPECT_EQ(BytesToMpz(MpzToBytes(v)), v);
  EXPECT_EQ(BytesToMpz(MpzToBytes(0)), 0);
}

TEST(DrbgTest, SeededStreamsRepeat) {
  Drbg a(42);
  Drbg b(42);
  Drbg c(43);
  const uint64_t x = a.NextU64();
  EXPECT_EQ(x, b.NextU64());
  EXPECT_NE(x, c.NextU64());
}

TEST(DrbgTest, ForksAreIndependent) {
  Drbg root(7);
  Drbg f1 = root.Fork("one");
  Drbg f2 = root.Fork("two");
  EXPECT_NE(f1.NextU64(), f2.NextU64());
}

TEST(DrbgTest, UniformBelowStaysInRange) {
  Drbg rng(1);
  const mpz_class bound = 11;
  std::set<long> seen;
  for (int i = 0; i < 500; ++i) {
    const mpz_class v = rng.UniformBelow(bound);
    ASSERT_GE(v, 0);
    ASSERT_LT(v, bound);
    seen.insert(v.get_si());
  }
  EXPECT_EQ(seen.size(), 11u);
}

TEST(DrbgTest, NextDoubleInUnitInterval) {
  Drbg rng(3);
  double sum = 0;
  for (int i = 0; i < 10000; ++i) {
    const double d = rng.NextDouble();
    ASSERT_GE(d, 0.0);
    ASSERT_LT(d, 1.0);
    sum += d;
  }
  EXPECT_NEAR(sum / 10000, 0.5, 0.02);
}

}  // namespace
}  // namespace detrust
