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

#ifndef DETRUST_DMCFE_H_
#define DETRUST_DMCFE_H_

// Decentralized multi-client functional encryption for labelled inner
// products. Each party encrypts under its own key; the decryption key for a
// weight vector y is assembled from one fragment per party, and the
// pairwise zero shares inside the fragments cancel only when every party
// contributed a fragment for the same (round, y) tag.
//
//   ct_{i,k}  = u1(l,k)^{s_i1} * u2(l,k)^{s_i2} * g^{x_{i,k}}
//   dk_i      = y_i * s_i + z_i(tag)            with sum_i z_i(tag) = 0
//   prod_i ct_{i,k}^{y_i} / (u1^{dk_1} u2^{dk_2}) = g^{<x_k, y>}

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "detrust/bytes.h"
#include "detrust/group.h"
#include "json.hpp"

namespace detrust::dmcfe {

struct PublicParams {
  GroupParams group;
  int n = 0;
  int64_t payload_bound = 0;
  int64_t dlog_bound = 0;
};

struct PartySecretKey {
  int party_id = 0;  // 1-based
  mpz_class s1;
  mpz_class s2;
  std::map<int, Digest> pairwise_seeds;  // k_ij == k_ji
};

struct Ciphertext {
  int party_id = 0;
  Bytes label;
  std::vector<GroupElement> coords;
};

struct PartialDecryptionKey {
  int party_id = 0;
  Bytes fusion_tag;
  mpz_class d1;
  mpz_class d2;
};

struct FunctionalDecryptionKey {
  Bytes fusion_tag;
  mpz_class d1;
  mpz_class d2;
};

// dlog_bound = n * payload_bound * max_weight_scale. Throws
// PreconditionError for n < 2 or when the decryption range would wrap the
// group order.
PublicParams Setup(const GroupParams& group, int n, int64_t payload_bound,
                   int64_t max_weight_scale);
PublicParams Setup(int lambda, int n, int64_t payload_bound, int64_t max_weight_scale,
                   const SetupOptions& options = {});

// Trusted in-process dealer (simulation mode).
std::vector<PartySecretKey> KeygenCeremony(const PublicParams& pp, Drbg& rng);

// Pieces of the deployed key setup, where pairwise seeds come from a
// Diffie-Hellman exchange relayed by the setup key server.
struct DhKeyPair {
  mpz_class secret;
  GroupElement public_key;
};
DhKeyPair GenerateDhKey(const GroupParams& group, Drbg& rng);
Digest DerivePairwiseSeed(const GroupParams& group, int self_id, const mpz_class& secret,
                          int peer_id, const GroupElement& peer_public);
// Draws (s1, s2) locally; the seeds must cover every other party.
PartySecretKey MakeSecretKey(const PublicParams& pp, int party_id,
                             std::map<int, Digest> pairwise_seeds, Drbg& rng);

// label || coordinate index, as fed to HashToGroup.
Bytes CoordinateLabel(std::span<const uint8_t> label, size_t index);

Ciphertext Encrypt(const PublicParams& pp, const PartySecretKey& sk,
                   std::span<const int64_t> x, std::span<const uint8_t> label);

// round index || canonical serialization of the integer weight vector.
Bytes MakeFusionTag(int round, std::span<const int64_t> weights);

// z_i(tag), the party's zero share, componentwise.
std::pair<mpz_class, mpz_class> ZeroShare(const PublicParams& pp, const PartySecretKey& sk,
                                          std::span<const uint8_t> fusion_tag);

PartialDecryptionKey KeyDerShare(const PublicParams& pp, const PartySecretKey& sk,
                                 std::span<const int64_t> weights,
                                 std::span<const uint8_t> fusion_tag);

FunctionalDecryptionKey KeyDerComb(const PublicParams& pp,
                                   std::span<const PartialDecryptionKey> fragments);

std::vector<int64_t> Decrypt(const PublicParams& pp, const FunctionalDecryptionKey& dk,
                             std::span<const Ciphertext> cts,
                             std::span<const int64_t> weights,
                             std::span<const uint8_t> label, const DlogSolver& solver);
std::vector<int64_t> Decrypt(const PublicParams& pp, const FunctionalDecryptionKey& dk,
                             std::span<const Ciphertext> cts,
                             std::span<const int64_t> weights,
                             std::span<const uint8_t> label);

nlohmann::json CiphertextToJson(const Ciphertext& ct);
Ciphertext CiphertextFromJson(const nlohmann::json& j);
nlohmann::json FragmentToJson(const PartialDecryptionKey& dk);
PartialDecryptionKey FragmentFromJson(const nlohmann::json& j);
nlohmann::json PublicParamsToJson(const PublicParams& pp);
PublicParams PublicParamsFromJson(const nlohmann::json& j);
nlohmann::json SecretKeyToJson(const PartySecretKey& sk);

}  // namespace detrust::dmcfe

#endif  // DETRUST_DMCFE_H_
