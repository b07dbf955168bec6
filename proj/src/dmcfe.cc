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

#include <algorithm>
#include <set>
#include <string>

#include "detrust/errors.h"

namespace detrust::dmcfe {
namespace {

// PRF(k, tag || component) reduced mod q, expanded past |q| by 64 bits.
mpz_class PrfModQ(const mpz_class& q, const Digest& key, std::span<const uint8_t> tag,
                  uint8_t component) {
  const size_t width = (mpz_sizeinbase(q.get_mpz_t(), 2) + 64 + 7) / 8;
  Bytes stream;
  for (uint32_t block = 0; stream.size() < width; ++block) {
    Bytes msg = ToBytes("detrust-zero-share");
    AppendFramed(msg, tag);
    msg.push_back(component);
    for (int shift = 24; shift >= 0; shift -= 8) msg.push_back((block >> shift) & 0xff);
    const Digest d = HmacSha256(key, msg);
    stream.insert(stream.end(), d.begin(), d.end());
  }
  stream.resize(width);
  return BytesToMpz(stream) % q;
}

mpz_class Mod(const mpz_class& v, const mpz_class& m) {
  mpz_class r = v % m;
  if (r < 0) r += m;
  return r;
}

mpz_class ToMpz(int64_t v) { return mpz_class(static_cast<long>(v)); }

}  // namespace

PublicParams Setup(const GroupParams& group, int n, int64_t payload_bound,
                   int64_t max_weight_scale) {
  if (n < 2) throw PreconditionError("need at least two parties, got n=" + std::to_string(n));
  if (payload_bound < 1 || max_weight_scale < 1) {
    throw PreconditionError("payload bound and weight scale must be positive");
  }
  PublicParams pp;
  pp.group = group;
  pp.n = n;
  pp.payload_bound = payload_bound;
  pp.dlog_bound = static_cast<int64_t>(n) * payload_bound * max_weight_scale;
  if (mpz_class(static_cast<long>(2 * pp.dlog_bound + 1)) > group.q) {
    throw PreconditionError("decryption range 2*" + std::to_string(pp.dlog_bound) +
                            "+1 exceeds the subgroup order");
  }
  return pp;
}

PublicParams Setup(int lambda, int n, int64_t payload_bound, int64_t max_weight_scale,
                   const SetupOptions& options) {
  if (n < 2) throw PreconditionError("need at least two parties, got n=" + std::to_string(n));
  return Setup(SetupGroup(lambda, options), n, payload_bound, max_weight_scale);
}

std::vector<PartySecretKey> KeygenCeremony(const PublicParams& pp, Drbg& rng) {
  std::vector<std::map<int, Digest>> seeds(pp.n);
  for (int i = 1; i <= pp.n; ++i) {
    for (int j = i + 1; j <= pp.n; ++j) {
      Digest k;
      rng.Fill(k);
      seeds[i - 1][j] = k;
      seeds[j - 1][i] = k;
    }
  }
  std::vector<PartySecretKey> keys;
  keys.reserve(pp.n);
  for (int i = 1; i <= pp.n; ++i) {
    keys.push_back(MakeSecretKey(pp, i, std::move(seeds[i - 1]), rng));
  }
  return keys;
}

DhKeyPair GenerateDhKey(const GroupParams& group, Drbg& rng) {
  DhKeyPair kp;
  kp.secret = rng.UniformBelow(group.q - 1) + 1;
  kp.public_key = GPow(group, kp.secret);
  return kp;
}

Digest DerivePairwiseSeed(const GroupParams& group, int self_id, const mpz_class& secret,
                          int peer_id, const GroupElement& peer_public) {
  if (!IsSubgroupMember(group, peer_public.value()) || peer_public.value() == 1) {
    throw ProtocolError("peer DH key is not a subgroup element");
  }
  const mpz_class shared = PowMod(peer_public.value(), secret, group.p);
  Bytes material = ToBytes("detrust-pairwise-seed");
  AppendFramed(material, std::to_string(std::min(self_id, peer_id)));
  AppendFramed(material, std::to_string(std::max(self_id, peer_id)));
  AppendFramed(material, MpzToBytes(shared));
  return Sha256(material);
}

PartySecretKey MakeSecretKey(const PublicParams& pp, int party_id,
                             std::map<int, Digest> pairwise_seeds, Drbg& rng) {
  if (party_id < 1 || party_id > pp.n) throw PreconditionError("party id out of range");
  for (int j = 1; j <= pp.n; ++j) {
    if (j != party_id && !pairwise_seeds.contains(j)) {
      throw PreconditionError("missing pairwise seed with party " + std::to_string(j));
    }
  }
  if (pairwise_seeds.size() != static_cast<size_t>(pp.n - 1)) {
    throw PreconditionError("unexpected pairwise seed entries");
  }
  PartySecretKey sk;
  sk.party_id = party_id;
  sk.s1 = rng.UniformBelow(pp.group.q);
  sk.s2 = rng.UniformBelow(pp.group.q);
  sk.pairwise_seeds = std::move(pairwise_seeds);
  return sk;
}

Bytes CoordinateLabel(std::span<const uint8_t> label, size_t index) {
  Bytes out;
  AppendFramed(out, label);
  AppendFramed(out, std::to_string(index));
  return out;
}

Ciphertext Encrypt(const PublicParams& pp, const PartySecretKey& sk,
                   std::span<const int64_t> x, std::span<const uint8_t> label) {
  Ciphertext ct;
  ct.party_id = sk.party_id;
  ct.label.assign(label.begin(), label.end());
  ct.coords.reserve(x.size());
  const GroupParams& gp = pp.group;
  for (size_t k = 0; k < x.size(); ++k) {
    if (x[k] > pp.payload_bound || x[k] < -pp.payload_bound) {
      throw PayloadOutOfRange("coordinate " + std::to_string(k) + " = " +
                              std::to_string(x[k]) + " exceeds bound " +
                              std::to_string(pp.payload_bound));
    }
    const auto [u1, u2] = HashToGroup(gp, CoordinateLabel(label, k));
    mpz_class v = PowMod(u1.value(), sk.s1, gp.p) * PowMod(u2.value(), sk.s2, gp.p) % gp.p;
    v = v * GPow(gp, ToMpz(x[k])).value() % gp.p;
    ct.coords.emplace_back(std::move(v));
  }
  return ct;
}

Bytes MakeFusionTag(int round, std::span<const int64_t> weights) {
  std::string text = "round=" + std::to_string(round) + ";y=";
  for (size_t i = 0; i < weights.size(); ++i) {
    if (i) text += ",";
    text += std::to_string(weights[i]);
  }
  return ToBytes(text);
}

std::pair<mpz_class, mpz_class> ZeroShare(const PublicParams& pp, const PartySecretKey& sk,
                                          std::span<const uint8_t> fusion_tag) {
  mpz_class z1 = 0;
  mpz_class z2 = 0;
  for (const auto& [peer, seed] : sk.pairwise_seeds) {
    const mpz_class r1 = PrfModQ(pp.group.q, seed, fusion_tag, 1);
    const mpz_class r2 = PrfModQ(pp.group.q, seed, fusion_tag, 2);
    if (sk.party_id > peer) {
      z1 += r1;
      z2 += r2;
    } else {
      z1 -= r1;
      z2 -= r2;
    }
  }
  return {Mod(z1, pp.group.q), Mod(z2, pp.group.q)};
}

PartialDecryptionKey KeyDerShare(const PublicParams& pp, const PartySecretKey& sk,
                                 std::span<const int64_t> weights,
                                 std::span<const uint8_t> fusion_tag) {
  if (weights.size() != static_cast<size_t>(pp.n)) {
    throw WeightVectorLengthMismatch("expected " + std::to_string(pp.n) + " weights, got " +
                                     std::to_string(weights.size()));
  }
  const auto [z1, z2] = ZeroShare(pp, sk, fusion_tag);
  const mpz_class y = ToMpz(weights[sk.party_id - 1]);
  PartialDecryptionKey dk;
  dk.party_id = sk.party_id;
  dk.fusion_tag.assign(fusion_tag.begin(), fusion_tag.end());
  dk.d1 = Mod(y * sk.s1 + z1, pp.group.q);
  dk.d2 = Mod(y * sk.s2 + z2, pp.group.q);
  return dk;
}

FunctionalDecryptionKey KeyDerComb(const PublicParams& pp,
                                   std::span<const PartialDecryptionKey> fragments) {
  std::set<int> present;
  for (const auto& f : fragments) {
    if (f.party_id < 1 || f.party_id > pp.n) {
      throw PreconditionError("fragment from unknown party " + std::to_string(f.party_id));
    }
    if (!present.insert(f.party_id).second) {
      throw PreconditionError("duplicate fragment from party " + std::to_string(f.party_id));
    }
  }
  std::vector<int> missing;
  for (int j = 1; j <= pp.n; ++j) {
    if (!present.contains(j)) missing.push_back(j);
  }
  if (!missing.empty()) throw MissingFragment(missing);
  FunctionalDecryptionKey dk;
  dk.fusion_tag = fragments.front().fusion_tag;
  dk.d1 = 0;
  dk.d2 = 0;
  for (const auto& f : fragments) {
    if (f.fusion_tag != dk.fusion_tag) {
      throw MixedFusionTag("party " + std::to_string(f.party_id) + " tag '" +
                           ToString(f.fusion_tag) + "' differs from '" +
                           ToString(dk.fusion_tag) + "'");
    }
    dk.d1 += f.d1;
    dk.d2 += f.d2;
  }
  dk.d1 = Mod(dk.d1, pp.group.q);
  dk.d2 = Mod(dk.d2, pp.group.q);
  return dk;
}

std::vector<int64_t> Decrypt(const PublicParams& pp, const FunctionalDecryptionKey& dk,
                             std::span<const Ciphertext> cts,
                             std::span<const int64_t> weights,
                             std::span<const uint8_t> label, const DlogSolver& solver) {
  if (weights.size() != static_cast<size_t>(pp.n)) {
    throw WeightVectorLengthMismatch("expected " + std::to_string(pp.n) + " weights");
  }
  std::set<int> support;
  for (int j = 1; j <= pp.n; ++j) {
    if (weights[j - 1] != 0) support.insert(j);
  }
  std::set<int> participants;
  const Bytes expected_label(label.begin(), label.end());
  size_t dim = cts.empty() ? 0 : cts.front().coords.size();
  for (const auto& ct : cts) {
    if (ct.label != expected_label) {
      throw LabelMismatch("party " + std::to_string(ct.party_id) + " ciphertext labelled '" +
                          ToString(ct.label) + "', expected '" + ToString(expected_label) +
                          "'");
    }
    if (!participants.insert(ct.party_id).second) {
      throw PreconditionError("two ciphertexts from party " + std::to_string(ct.party_id));
    }
    if (ct.coords.size() != dim) throw DimensionMismatch("ciphertext lengths differ");
  }
  if (participants != support) {
    throw PreconditionError("ciphertext senders do not match the weight support");
  }
  const GroupParams& gp = pp.group;
  std::vector<int64_t> out(dim);
  for (size_t k = 0; k < dim; ++k) {
    mpz_class acc = 1;
    for (const auto& ct : cts) {
      acc = acc * PowMod(ct.coords[k].value(), ToMpz(weights[ct.party_id - 1]), gp.p) % gp.p;
    }
    const auto [u1, u2] = HashToGroup(gp, CoordinateLabel(label, k));
    const mpz_class mask = PowMod(u1.value(), dk.d1, gp.p) * PowMod(u2.value(), dk.d2, gp.p) % gp.p;
    const GroupElement unmasked = Mul(gp, GroupElement(acc), Inverse(gp, GroupElement(mask)));
    out[k] = solver.Solve(unmasked);
  }
  return out;
}

std::vector<int64_t> Decrypt(const PublicParams& pp, const FunctionalDecryptionKey& dk,
                             std::span<const Ciphertext> cts,
                             std::span<const int64_t> weights,
                             std::span<const uint8_t> label) {
  return Decrypt(pp, dk, cts, weights, label, DlogSolver(pp.group, pp.dlog_bound));
}

nlohmann::json CiphertextToJson(const Ciphertext& ct) {
  nlohmann::json coords = nlohmann::json::array();
  for (const auto& c : ct.coords) coords.push_back(c.value().get_str());
  return {{"party", ct.party_id}, {"label", Base64Encode(ct.label)}, {"coords", coords}};
}

Ciphertext CiphertextFromJson(const nlohmann::json& j) {
  Ciphertext ct;
  ct.party_id = j.at("party").get<int>();
  ct.label = Base64Decode(j.at("label").get<std::string>());
  for (const auto& c : j.at("coords")) ct.coords.emplace_back(mpz_class(c.get<std::string>()));
  return ct;
}

nlohmann::json FragmentToJson(const PartialDecryptionKey& dk) {
  return {{"party", dk.party_id},
          {"tag", Base64Encode(dk.fusion_tag)},
          {"d", {dk.d1.get_str(), dk.d2.get_str()}}};
}

PartialDecryptionKey FragmentFromJson(const nlohmann::json& j) {
  PartialDecryptionKey dk;
  dk.party_id = j.at("party").get<int>();
  dk.fusion_tag = Base64Decode(j.at("tag").get<std::string>());
  const auto& d = j.at("d");
  if (!d.is_array() || d.size() != 2) throw ProtocolError("fragment needs two scalars");
  dk.d1 = mpz_class(d[0].get<std::string>());
  dk.d2 = mpz_class(d[1].get<std::string>());
  return dk;
}

nlohmann::json PublicParamsToJson(const PublicParams& pp) {
  return {{"group", GroupToJson(pp.group)},
          {"n", pp.n},
          {"payload_bound", pp.payload_bound},
          {"dlog_bound", pp.dlog_bound}};
}

PublicParams PublicParamsFromJson(const nlohmann::json& j) {
  PublicParams pp;
  pp.group = GroupFromJson(j.at("group"));
  pp.n = j.at("n").get<int>();
  pp.payload_bound = j.at("payload_bound").get<int64_t>();
  pp.dlog_bound = j.at("dlog_bound").get<int64_t>();
  return pp;
}

nlohmann::json SecretKeyToJson(const PartySecretKey& sk) {
  nlohmann::json seeds = nlohmann::json::object();
  for (const auto& [peer, seed] : sk.pairwise_seeds) seeds[std::to_string(peer)] = HexEncode(seed);
  return {{"party", sk.party_id}, {"s", {sk.s1.get_str(), sk.s2.get_str()}}, {"seeds", seeds}};
}

}  // namespace detrust::dmcfe
