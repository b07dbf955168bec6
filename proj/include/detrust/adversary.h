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


#ifndef DETRUST_ADVERSARY_H_
#define DETRUST_ADVERSARY_H_

// A malicious aggregator driving honest parties through the real inspection,
// fragment and decryption code. Each attack returns a report; none throws.
// Success means a target's update was recovered within encoding tolerance of
// the ground truth, not merely that some decryption completed.

#include <optional>
#include <string>
#include <vector>

#include "detrust/dmcfe.h"
#include "detrust/dtc.h"
#include "detrust/encoding.h"
#include "detrust/participation.h"
#include "json.hpp"

namespace detrust::adversary {

enum class AttackKind {
  kIsolationNoCollusion,
  kIsolationWithCollusion,
  kDisaggregation,
  kReplay,
  kTwoFacedMatrix,
};
const char* AttackName(AttackKind kind);

enum class Outcome {
  kBlockedByInspection,
  kBlockedByKeyBinding,
  kBlockedByLabel,
  // The attack ran to completion but recovered nothing (or was a no-op).
  kNoExposure,
  kSucceeded,
};
const char* OutcomeName(Outcome outcome);

struct AttackReport {
  AttackKind attack = AttackKind::kIsolationNoCollusion;
  Outcome outcome = Outcome::kNoExposure;
  std::vector<std::string> evidence;
  // True when some decryption returned the honest aggregate exactly. Control
  // runs rely on it.
  bool aggregate_correct = false;

  nlohmann::json ToJson() const;
};

struct HarnessOptions {
  int n = 5;
  int m = 4;
  int t_g = 3;
  int t_bp = 2;
  size_t dimension = 4;
  encoding::EncodingConfig encoding;
  uint64_t seed = 1;
  int group_lambda = 128;
};

class Harness {
 public:
  // Generates a group of `group_lambda` bits unless one is given.
  explicit Harness(HarnessOptions options, std::optional<GroupParams> group = std::nullopt);

  const HarnessOptions& options() const { return options_; }
  const dmcfe::PublicParams& pp() const { return pp_; }
  const participation::TrustConfig& trust() const { return trust_; }
  // Ground-truth update of `party` in `round`, inside [-1, 1].
  const std::vector<double>& Update(int round, int party) const;

  // Aggregator proposes {target} + colluders in every round. Colluders accept
  // anything and hand over their keys and updates.
  AttackReport Isolation(int target, const std::vector<int>& colluders);
  // Outcome for each colluder count 0..n-1 (colluders taken in id order,
  // skipping the target).
  std::vector<std::pair<int, Outcome>> CollusionBoundary(int target);

  // Parties are assumed to send the same update every round, the most
  // favourable case for differencing.
  AttackReport Disaggregation(const participation::ParticipationMatrix& crafted);

  // Every round uses `support`. Round-i1 ciphertexts of `replayed` are
  // relabelled and substituted into round i2.
  AttackReport Replay(int i1, int i2, const std::vector<int>& replayed,
                      const std::vector<int>& support);

  // `target` is shown all parties in every round; everyone else is shown the
  // same matrix with `manipulated` removed. manipulated == 0 is the
  // consistent control.
  AttackReport TwoFaced(int target, int manipulated);

 private:
  std::vector<participation::InspectionVerdict> ShowTo(
      const participation::ParticipationMatrix& matrix, const std::vector<int>& parties,
      std::vector<std::string>& evidence);
  std::vector<dmcfe::PartialDecryptionKey> Fragments(const participation::ParticipationMatrix& m,
                                                     int party, bool colluding) const;
  dmcfe::Ciphertext EncryptUpdate(int party, const std::vector<double>& update, int round) const;
  std::vector<double> Quantized(const std::vector<double>& update) const;
  std::vector<double> Decode(const participation::ParticipationMatrix& matrix, int round,
                             const std::vector<int64_t>& raw) const;
  bool Close(const std::vector<double>& a, const std::vector<double>& b) const;

  HarnessOptions options_;
  dmcfe::PublicParams pp_;
  participation::TrustConfig trust_;
  std::vector<dmcfe::PartySecretKey> keys_;
  std::vector<dtc::DtcParty> parties_;
  std::vector<std::vector<std::vector<double>>> updates_;  // [round-1][party-1]
  DlogSolver solver_;
};

}  // namespace detrust::adversary

#endif  // DETRUST_ADVERSARY_H_
