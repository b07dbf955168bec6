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

#ifndef DETRUST_DTC_H_
#define DETRUST_DTC_H_

// Trust consensus over the participation matrix. The aggregator side is an
// explicit state machine fed one message at a time; the party side is a
// responder whose only state is the matrix it last accepted. Both are
// transport-agnostic: the federation wires them to envelopes, and
// RunConsensus drives them directly in-process.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "detrust/dmcfe.h"
#include "detrust/encoding.h"
#include "detrust/participation.h"

namespace detrust::dtc {

using participation::InspectionVerdict;
using participation::ParticipationMatrix;

inline constexpr int kDefaultMaxNegotiationRounds = 10;

// m x n table of partial decryption keys; row i, column j holds party j's
// fragment for round i.
class KeyFragmentMatrix {
 public:
  KeyFragmentMatrix() = default;
  KeyFragmentMatrix(int m, int n) : m_(m), n_(n), cells_(m * n) {}

  int m() const { return m_; }
  int n() const { return n_; }
  void Set(int round, int party, dmcfe::PartialDecryptionKey fragment);
  const std::optional<dmcfe::PartialDecryptionKey>& Get(int round, int party) const;
  // Fragments for one round, in party order; missing ones are skipped.
  std::vector<dmcfe::PartialDecryptionKey> Row(int round) const;
  bool Complete() const;
  size_t Count() const;

 private:
  int m_ = 0;
  int n_ = 0;
  std::vector<std::optional<dmcfe::PartialDecryptionKey>> cells_;
};

// Integer weights and tag the fragments of `round` are bound to.
struct RowBinding {
  encoding::IntegerWeights weights;
  Bytes fusion_tag;
};
RowBinding BindRow(const ParticipationMatrix& matrix, int round,
                   const encoding::EncodingConfig& cfg, encoding::FusionMode mode);

struct AggregatorOptions {
  int m = 1;
  int n = 2;
  int t_bp = 2;
  encoding::FusionMode mode = encoding::FusionMode::kAverage;
  encoding::EncodingConfig encoding;
  std::vector<int64_t> sample_counts;
  uint64_t seed = 0;
  int max_negotiation_rounds = kDefaultMaxNegotiationRounds;
};

enum class Phase { kCollectThresholds, kProposing, kAwaitVerdicts, kFinalizing, kDone, kAborted };
const char* PhaseName(Phase phase);

// Applies suggestions to `proposal`. When every verdict is accept or suggest,
// all suggestions are first spliced in together. Failing that, each
// suggestion is spliced in alone when the renormalized result still passes
// BP and the row threshold. Otherwise the
// party's column is zeroed, its wish is remembered in `learned`, and the
// matrix is rebuilt by ProposeMatrix under every remembered constraint.
// Throws InfeasibleConstraints when no rebuild exists.
ParticipationMatrix AggregatorMergeSuggestions(
    const ParticipationMatrix& proposal, const std::map<int, InspectionVerdict>& verdicts,
    const participation::TrustConfig& trust, encoding::FusionMode mode,
    const std::vector<int64_t>& sample_counts, uint64_t repair_seed,
    participation::ProposalConstraints& learned);

class DtcAggregator {
 public:
  explicit DtcAggregator(AggregatorOptions options);

  Phase phase() const { return phase_; }
  int negotiation_round() const { return negotiation_round_; }
  int t_g() const { return trust_.t_g; }
  const participation::TrustConfig& trust() const { return trust_; }
  const ParticipationMatrix& current_proposal() const { return proposal_; }
  const std::map<int, InspectionVerdict>& verdicts() const { return verdicts_; }
  const KeyFragmentMatrix& fragments() const { return fragments_; }
  // Set once Aborted: the error kind, message and (for PartyRefusal) the
  // parties whose demands could not be met.
  const std::string& abort_kind() const { return abort_kind_; }
  const std::string& abort_reason() const { return abort_reason_; }
  const std::vector<int>& irreconcilable() const { return irreconcilable_; }

  // CollectThresholds. Moves to Proposing once all n arrived.
  void OnThreshold(int party, int t_local);
  // Proposing -> AwaitVerdicts. Returns the matrix to broadcast.
  const ParticipationMatrix& Propose();
  // AwaitVerdicts. Once all n verdicts are in, moves to Finalizing (all
  // accepted), back to Proposing (negotiation continues) or Aborted.
  void OnVerdict(int party, InspectionVerdict verdict);
  // Finalizing -> Done once all n columns are stored. Each fragment's tag
  // must match the agreed row binding.
  void OnFragments(int party, const std::vector<dmcfe::PartialDecryptionKey>& column);
  void Abort(const std::string& kind, const std::string& reason);

 private:
  void Resolve();

  AggregatorOptions options_;
  Phase phase_ = Phase::kCollectThresholds;
  std::map<int, int> thresholds_;
  participation::TrustConfig trust_;
  ParticipationMatrix proposal_;
  std::map<int, InspectionVerdict> verdicts_;
  participation::ProposalConstraints learned_;
  int negotiation_round_ = 0;
  bool proposal_is_fresh_ = true;
  KeyFragmentMatrix fragments_;
  std::string abort_kind_;
  std::string abort_reason_;
  std::vector<int> irreconcilable_;
};

struct PartyOptions {
  int party_id = 1;
  int t_local = 2;
  int t_bp = 2;
  participation::WeightPolicy policy;
  encoding::EncodingConfig encoding;
};

class DtcParty {
 public:
  DtcParty(PartyOptions options, dmcfe::PublicParams pp, const dmcfe::PartySecretKey* sk);

  int id() const { return options_.party_id; }
  int t_local() const { return options_.t_local; }
  const std::optional<std::string>& accepted() const { return accepted_; }

  InspectionVerdict Inspect(const ParticipationMatrix& proposal, int t_g);
  // Throws RefusedMatrix unless `final_matrix` is byte-identical to the last
  // accepted proposal.
  std::vector<dmcfe::PartialDecryptionKey> GenerateFragments(
      const ParticipationMatrix& final_matrix) const;

 private:
  PartyOptions options_;
  dmcfe::PublicParams pp_;
  const dmcfe::PartySecretKey* sk_;
  std::optional<std::string> accepted_;
};

struct ConsensusResult {
  ParticipationMatrix matrix;
  KeyFragmentMatrix fragments;
  int negotiation_rounds = 0;
  int t_g = 0;
};

// Drives both sides to completion in-process. Throws ConsensusTimeout,
// PartyRefusal or InfeasibleConstraints.
ConsensusResult RunConsensus(DtcAggregator& aggregator, std::vector<DtcParty>& parties);

}  // namespace detrust::dtc

#endif  // DETRUST_DTC_H_
