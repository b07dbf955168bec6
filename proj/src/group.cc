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

#include "detrust/group.h"

#include <cmath>
#include <string>

#include "detrust/errors.h"

namespace detrust {
namespace {

constexpr int kPrimalityReps = 40;

bool IsProbablePrime(const mpz_class& v) {
  return mpz_probab_prime_p(v.get_mpz_t(), kPrimalityReps) > 0;
}

// Table key over every limb. Small powers of g = 4 are powers of two, so any
// single limb would put most of them in one bucket.
uint64_t LimbHash(const mpz_class& v) {
  uint64_t h = 0x9e3779b97f4a7c15ULL;
  const size_t limbs = mpz_size(v.get_mpz_t());
  for (size_t i = 0; i < limbs; ++i) {
    h ^= static_cast<uint64_t>(mpz_getlimbn(v.get_mpz_t(), i)) + 0x9e3779b97f4a7c15ULL +
         (h << 6) + (h >> 2);
  }
  return h;
}

// Small odd primes used to sieve candidates q before any Miller-Rabin work.
const std::vector<unsigned long>& SmallPrimes() {
  static const std::vector<unsigned long> primes = [] {
    std::vector<unsigned long> out;
    for (unsigned long c = 3; c < 2000; c += 2) {
      bool prime = true;
      for (unsigned long d = 3; d * d <= c; d += 2) {
        if (c % d == 0) {
          prime = false;
          break;
        }
      }
      if (prime) out.push_back(c);
    }
    return out;
  }();
  return primes;
}

// Rejects q when q or 2q+1 has a small factor (other than being that prime).
bool PassesSieve(const mpz_class& q) {
  for (unsigned long sp : SmallPrimes()) {
    const unsigned long r = mpz_fdiv_ui(q.get_mpz_t(), sp);
    if (r == 0 && q != sp) return false;
    if ((2 * r + 1) % sp == 0 && 2 * q + 1 != sp) return false;
  }
  return true;
}

constexpr const char* kRfc3526Group14 =
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF";

}  // namespace

GroupParams SetupGroup(int lambda, const SetupOptions& options) {
  if (lambda < 16) throw PreconditionError("lambda must be at least 16");
  if (lambda < kProductionLambda && !options.allow_insecure) {
    throw PreconditionError("lambda=" + std::to_string(lambda) +
                            " is below the production profile; set the insecure flag");
  }
  Drbg rng = options.seed ? Drbg(*options.seed) : Drbg();
  const int qbits = lambda - 1;
  const mpz_class top = mpz_class(1) << (qbits - 1);
  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    mpz_class q = rng.UniformBelow(top) + top;  // exactly qbits bits
    if (mpz_even_p(q.get_mpz_t())) q += 1;
    if (mpz_sizeinbase(q.get_mpz_t(), 2) != static_cast<size_t>(qbits)) continue;
    if (!PassesSieve(q)) continue;
    if (!IsProbablePrime(q)) continue;
    const mpz_class p = 2 * q + 1;
    if (!IsProbablePrime(p)) continue;
    // Any square other than 1 generates the order-q subgroup.
    for (;;) {
      const mpz_class h = rng.UniformBelow(p - 3) + 2;
      const mpz_class g = h * h % p;
      if (g != 1) return GroupParams{p, q, g, lambda};
    }
  }
  throw SetupError("no safe prime found within " + std::to_string(options.max_attempts) +
                   " candidates");
}

GroupParams StandardGroup2048() {
  static const GroupParams params = [] {
    GroupParams gp;
    gp.p = mpz_class(kRfc3526Group14, 16);
    gp.q = (gp.p - 1) / 2;
    gp.g = 4;
    gp.lambda = 2048;
    return gp;
  }();
  return params;
}

bool ValidateGroup(const GroupParams& params) {
  if (params.q < 2 || params.p != 2 * params.q + 1) return false;
  if (!IsProbablePrime(params.q) || !IsProbablePrime(params.p)) return false;
  if (params.g <= 1 || params.g >= params.p) return false;
  return PowMod(params.g, params.q, params.p) == 1;
}

bool IsSubgroupMember(const GroupParams& params, const mpz_class& v) {
  if (v < 1 || v >= params.p) return false;
  // p = 2q + 1: the order-q subgroup is exactly the quadratic residues.
  return mpz_jacobi(v.get_mpz_t(), params.p.get_mpz_t()) == 1;
}

mpz_class PowMod(const mpz_class& base, const mpz_class& exp, const mpz_class& mod) {
  mpz_class out;
  if (exp < 0) {
    mpz_class inv;
    if (mpz_invert(inv.get_mpz_t(), base.get_mpz_t(), mod.get_mpz_t()) == 0) {
      throw PreconditionError("element is not invertible");
    }
    const mpz_class pos = -exp;
    mpz_powm(out.get_mpz_t(), inv.get_mpz_t(), pos.get_mpz_t(), mod.get_mpz_t());
  } else {
    mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  }
  return out;
}

GroupElement GPow(const GroupParams& params, const mpz_class& x) {
  return GroupElement(PowMod(params.g, x, params.p));
}

GroupElement Mul(const GroupParams& params, const GroupElement& a, const GroupElement& b) {
  return GroupElement(a.value() * b.value() % params.p);
}

GroupElement Pow(const GroupParams& params, const GroupElement& a, const mpz_class& e) {
  return GroupElement(PowMod(a.value(), e, params.p));
}

GroupElement Inverse(const GroupParams& params, const GroupElement& a) {
  mpz_class inv;
  mpz_invert(inv.get_mpz_t(), a.value().get_mpz_t(), params.p.get_mpz_t());
  return GroupElement(inv);
}

std::pair<GroupElement, GroupElement> HashToGroup(const GroupParams& params,
                                                  std::span<const uint8_t> label) {
  const size_t width = (mpz_sizeinbase(params.p.get_mpz_t(), 2) + 64 + 7) / 8;
  auto derive = [&](std::string_view tag) {
    for (uint32_t counter = 0;; ++counter) {
      Bytes stream;
      for (uint32_t block = 0; stream.size() < width; ++block) {
        Bytes input = ToBytes("detrust-h2g");
        AppendFramed(input, tag);
        AppendFramed(input, label);
        for (uint32_t v : {counter, block}) {
          for (int shift = 24; shift >= 0; shift -= 8) input.push_back((v >> shift) & 0xff);
        }
        const Digest d = Sha256(input);
        stream.insert(stream.end(), d.begin(), d.end());
      }
      stream.resize(width);
      const mpz_class candidate = BytesToMpz(stream) % params.p;
      if (candidate < 2 || candidate > params.p - 2) continue;
      return GroupElement(candidate * candidate % params.p);
    }
  };
  return {derive("u1"), derive("u2")};
}

DlogSolver::DlogSolver(const GroupParams& params, int64_t bound)
    : params_(params), bound_(bound) {
  if (bound < 1) throw PreconditionError("dlog bound must be >= 1");
  const auto range = static_cast<double>(2 * bound + 1);
  stride_ = static_cast<int64_t>(std::ceil(std::sqrt(range)));
  while (stride_ * stride_ < 2 * bound + 1) ++stride_;
  baby_steps_.reserve(static_cast<size_t>(stride_) * 2);
  mpz_class cur = 1;
  for (int64_t j = 0; j < stride_; ++j) {
    baby_steps_.emplace(LimbHash(cur), j);
    cur = cur * params.g % params.p;
  }
  giant_factor_ = PowMod(params.g, mpz_class(-stride_), params.p);
}

std::optional<int64_t> DlogSolver::Probe(const mpz_class& gamma, int64_t step,
                                         const mpz_class& start, int64_t limit) const {
  const auto range = baby_steps_.equal_range(LimbHash(gamma));
  for (auto it = range.first; it != range.second; ++it) {
    const int64_t x = step * stride_ + it->second;
    if (x > limit) continue;
    if (PowMod(params_.g, mpz_class(static_cast<long>(x)), params_.p) == start) return x;
  }
  return std::nullopt;
}

std::optional<int64_t> DlogSolver::SearchNonNegative(const mpz_class& start,
                                                     int64_t limit) const {
  mpz_class gamma = start;
  for (int64_t i = 0; i * stride_ <= limit; ++i) {
    if (auto x = Probe(gamma, i, start, limit)) return x;
    gamma = gamma * giant_factor_ % params_.p;
  }
  return std::nullopt;
}

int64_t DlogSolver::Solve(const GroupElement& target) const {
  const mpz_class& pos = target.value();
  const mpz_class neg = Inverse(params_, target).value();
  if (mpz_class(2) * bound_ + 1 > params_.q) {
    if (auto x = SearchNonNegative(pos, bound_)) return *x;
    if (auto x = SearchNonNegative(neg, bound_)) return -*x;
  } else {
    // The answer is unique, so both signs can be searched outward together.
    mpz_class gamma_pos = pos, gamma_neg = neg;
    for (int64_t i = 0; i * stride_ <= bound_; ++i) {
      if (auto x = Probe(gamma_pos, i, pos, bound_)) return *x;
      if (auto x = Probe(gamma_neg, i, neg, bound_)) return -*x;
      gamma_pos = gamma_pos * giant_factor_ % params_.p;
      gamma_neg = gamma_neg * giant_factor_ % params_.p;
    }
  }
  throw DlogNotFound("no exponent in [-" + std::to_string(bound_) + ", " +
                     std::to_string(bound_) + "]");
}

int64_t DlogBounded(const GroupParams& params, const GroupElement& target, int64_t bound) {
  return DlogSolver(params, bound).Solve(target);
}

nlohmann::json GroupToJson(const GroupParams& params) {
  return {{"p", params.p.get_str()},
          {"q", params.q.get_str()},
          {"g", params.g.get_str()},
          {"lambda", params.lambda}};
}

GroupParams GroupFromJson(const nlohmann::json& j) {
  GroupParams gp;
  gp.p = mpz_class(j.at("p").get<std::string>());
  gp.q = mpz_class(j.at("q").get<std::string>());
  gp.g = mpz_class(j.at("g").get<std::string>());
  gp.lambda = j.at("lambda").get<int>();
  return gp;
}

}  // namespace detrust
