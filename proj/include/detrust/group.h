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

#ifndef DETRUST_GROUP_H_
#define DETRUST_GROUP_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <utility>

#include <gmpxx.h>

#include "detrust/bytes.h"
#include "json.hpp"

namespace detrust {

// Minimum modulus size accepted without the explicit insecure opt-in.
inline constexpr int kProductionLambda = 2048;

// Safe-prime group: p = 2q + 1 with g generating the order-q subgroup of
// quadratic residues.
struct GroupParams {
  mpz_class p;
  mpz_class q;
  mpz_class g;
  int lambda = 0;

  bool operator==(const GroupParams& o) const {
    return p == o.p && q == o.q && g == o.g && lambda == o.lambda;
  }
};

// A member of the order-q subgroup, held as its residue in [1, p-1].
class GroupElement {
 public:
  GroupElement() : value_(1) {}
  explicit GroupElement(mpz_class value) : value_(std::move(value)) {}

  const mpz_class& value() const { return value_; }
  bool operator==(const GroupElement& o) const { return value_ == o.value_; }

 private:
  mpz_class value_;
};

struct SetupOptions {
  std::optional<uint64_t> seed;
  // Required for lambda < kProductionLambda.
  bool allow_insecure = false;
  // Candidate budget before SetupError.
  int max_attempts = 2'000'000;
};

// Generates a fresh safe-prime group with a `lambda`-bit modulus.
// Throws PreconditionError (lambda < 16 or missing insecure opt-in) or
// SetupError (search budget exhausted).
GroupParams SetupGroup(int lambda, const SetupOptions& options = {});

// The 2048-bit MODP prime from RFC 3526 with g = 4. Avoids a multi-minute
// safe-prime search for production runs.
GroupParams StandardGroup2048();

// Full validity check: primality of p and q, p = 2q + 1, g of order q.
bool ValidateGroup(const GroupParams& params);

bool IsSubgroupMember(const GroupParams& params, const mpz_class& v);

mpz_class PowMod(const mpz_class& base, const mpz_class& exp, const mpz_class& mod);
// g^x for signed x (negative x means the inverse power).
GroupElement GPow(const GroupParams& params, const mpz_class& x);
GroupElement Mul(const GroupParams& params, const GroupElement& a, const GroupElement& b);
GroupElement Pow(const GroupParams& params, const GroupElement& a, const mpz_class& e);
GroupElement Inverse(const GroupParams& params, const GroupElement& a);

// Hashes a label to two subgroup elements with unknown discrete logs.
std::pair<GroupElement, GroupElement> HashToGroup(const GroupParams& params,
                                                  std::span<const uint8_t> label);

// Baby-step giant-step solver for x in [-bound, bound] with g^x = target.
// When the range wraps the group order the non-negative representative
// wins. The baby-step table is built once and is read-only afterwards, so one
// solver can serve many threads.
class DlogSolver {
 public:
  DlogSolver(const GroupParams& params, int64_t bound);

  // Throws DlogNotFound when no exponent in range matches.
  int64_t Solve(const GroupElement& target) const;
  int64_t bound() const { return bound_; }

 private:
  GroupParams params_;
  int64_t bound_;
  int64_t stride_;
  mpz_class giant_factor_;  // g^(-stride)
  std::unordered_multimap<uint64_t, int64_t> baby_steps_;

  std::optional<int64_t> Probe(const mpz_class& gamma, int64_t step, const mpz_class& start,
                               int64_t limit) const;
  std::optional<int64_t> SearchNonNegative(const mpz_class& start, int64_t limit) const;
};

int64_t DlogBounded(const GroupParams& params, const GroupElement& target, int64_t bound);

nlohmann::json GroupToJson(const GroupParams& params);
GroupParams GroupFromJson(const nlohmann::json& j);

}  // namespace detrust

#endif  // DETRUST_GROUP_H_
