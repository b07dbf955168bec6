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

#include <algorithm>
#include <set>

#include "detrust/errors.h"

namespace detrust::dtc {

using participation::Enrollment;
using participation::VerdictKind;

void KeyFragmentMatrix::Set(int round, int party, dmcfe::PartialDecryptionKey fragment) {
  cells_.at((round - 1) * n_ + (party - 1)) = std::move(fragment);
}

const std::optional<dmcfe::PartialDecryptionKey>& KeyFragmentMatrix::Get(int round,
                                                                         int party) const {
  return cells_.at((round - 1) * n_ + (party - 1));
}

std::vector<dmcfe::PartialDecryptionKey> KeyFragmentMatrix::Row(int round) const {
  std::vector<dmcfe::PartialDecryptionKey> out;
  for (int j = 1; j <= n_; ++j) {
    if (const auto& f = Get(round, j)) out.push_back(*f);
  }
  return out;
}

bool KeyFragmentMatrix::Complete() const { return Count() == cells_.size(); }

size_t KeyFragmentMatrix::Count() const {
  return static_cast<size_t>(std::count_if(cells_.begin(), cells_.end(),
                                            [](const auto& c) { return c.has_value(); }));
}

RowBinding BindRow(const ParticipationMatrix& matrix, int round,
                   const encoding::EncodingConfig& cfg, encoding::FusionMode mode) {
  RowBinding b;
  b.weights = encoding::IntegerizeWeights(cfg, matrix.row(round), mode);
  b.fusion_tag = dmcfe::MakeFusionTag(round, b.weights.weights);
  return b;
}

const char* PhaseName(Phase phase) {
  switch (phase) {
    case Phase::kCollectThresholds: return "CollectThresholds";
    case Phase::kProposing: return "Proposing";
    case Phase::kAwaitVerdicts: return "AwaitVerdicts";
    case Phase::kFinalizing: return "Finalizing";
    case Phase::kDone: return "Done";
    case Phase::kAborted: return "Aborted";
  }
  return "?";
}

ParticipationMatrix AggregatorMergeSuggestions(
    const ParticipationMatrix& proposal, const std::map<int, InspectionVerdict>& verdicts,
    const participation::TrustConfig& trust, encoding::FusionMode mode,
    const std::vector<int64_t>& sample_counts, uint64_t repair_seed,
    participation::ProposalConstraints& learned) {
  // Suggestions that only work together (two parties joining one round) are tried jointly first.
  bool only_suggest_or_accept = true;
  ParticipationMatrix joint = proposal;
  for (const auto& [party, verdict] : verdicts) {
    if (verdict.kind == VerdictKind::kSuggest) {
      joint.set_column(party, *verdict.suggested_column);
    } else if (verdict.kind != VerdictKind::kAccept) {
      only_suggest_or_accept = false;
    }
  }
  if (only_suggest_or_accept) {
    participation::Renormalize(joint, mode, sample_counts);
    if (participation::CheckBp(joint, trust.t_bp) &&
        participation::RowsMeetThreshold(joint, trust.t_g)) {
      return joint;
    }
  }
  ParticipationMatrix merged = proposal;
  bool needs_repair = false;
  for (const auto& [party, verdict] : verdicts) {
    switch (verdict.kind) {
      case VerdictKind::kAccept:
        break;
      case VerdictKind::kRefuse:
      case VerdictKind::kViolateBp:
        needs_repair = true;
        break;
      case VerdictKind::kSuggest: {
        const auto& col = *verdict.suggested_column;
        ParticipationMatrix candidate = merged;
        candidate.set_column(party, col);
        participation::Renormalize(candidate, mode, sample_counts);
        if (participation::CheckBp(candidate, trust.t_bp) &&
            participation::RowsMeetThreshold(candidate, trust.t_g)) {
          merged = std::move(candidate);
          break;
        }
        merged.set_column(party, std::vector<Rational>(merged.m()));
        const bool all_in = std::none_of(col.begin(), col.end(),
                                         [](const Rational& w) { return w.is_zero(); });
        auto& bucket = all_in ? learned.pinned : learned.excluded;
        if (std::find(bucket.begin(), bucket.end(), party) == bucket.end()) {
          bucket.push_back(party);
        }
        needs_repair = true;
        break;
      }
    }
  }
  if (!needs_repair) {
    participation::Renormalize(merged, mode, sample_counts);
    return merged;
  }
  return participation::ProposeMatrix(proposal.m(), proposal.n(), trust, mode, repair_seed,
                                      sample_counts, learned);
}

DtcAggregator::DtcAggregator(AggregatorOptions options) : options_(std::move(options)) {
  if (options_.n < 2 || options_.m < 1) throw PreconditionError("consensus needs n >= 2, m >= 1");
}

void DtcAggregator::OnThreshold(int party, int t_local) {
  if (phase_ != Phase::kCollectThresholds) throw ProtocolError("threshold outside collection");
  if (party < 1 || party > options_.n) throw ProtocolError("threshold from unknown party");
  thresholds_[party] = t_local;
  if (static_cast<int>(thresholds_.size()) < options_.n) return;
  std::vector<int> t_local_all;
  for (const auto& [_, t] : thresholds_) t_local_all.push_back(t);
  trust_ = participation::MakeTrustConfig(std::move(t_local_all), options_.t_bp);
  phase_ = Phase::kProposing;
  try {
    proposal_ = participation::ProposeMatrix(options_.m, options_.n, trust_, options_.mode,
                                             options_.seed, options_.sample_counts);
  } catch (const InfeasibleConstraints& e) {
    Abort("InfeasibleConstraints", e.what());
  }
}

const ParticipationMatrix& DtcAggregator::Propose() {
  if (phase_ != Phase::kProposing) throw ProtocolError("propose outside Proposing phase");
  verdicts_.clear();
  phase_ = Phase::kAwaitVerdicts;
  return proposal_;
}

void DtcAggregator::OnVerdict(int party, InspectionVerdict verdict) {
  if (phase_ != Phase::kAwaitVerdicts) throw ProtocolError("verdict outside AwaitVerdicts");
  if (party < 1 || party > options_.n) throw ProtocolError("verdict from unknown party");
  if (verdict.kind == VerdictKind::kSuggest &&
      (!verdict.suggested_column ||
       static_cast<int>(verdict.suggested_column->size()) != options_.m)) {
    throw ProtocolError("suggestion without a column of length m");
  }
  verdicts_[party] = std::move(verdict);
  if (static_cast<int>(verdicts_.size()) == options_.n) Resolve();
}

void DtcAggregator::Resolve() {
  ++negotiation_round_;
  const bool all_accept = std::all_of(verdicts_.begin(), verdicts_.end(), [](const auto& kv) {
    return kv.second.kind == VerdictKind::kAccept;
  });
  if (all_accept) {
    fragments_ = KeyFragmentMatrix(options_.m, options_.n);
    phase_ = Phase::kFinalizing;
    return;
  }
  if (negotiation_round_ >= options_.max_negotiation_rounds) {
    Abort("ConsensusTimeout", "no agreement after " + std::to_string(negotiation_round_) +
                                  " negotiation rounds");
    return;
  }
  try {
    proposal_ = AggregatorMergeSuggestions(proposal_, verdicts_, trust_, options_.mode,
                                           options_.sample_counts,
                                           options_.seed + negotiation_round_, learned_);
    phase_ = Phase::kProposing;
  } catch (const InfeasibleConstraints& e) {
    std::set<int> parties(learned_.pinned.begin(), learned_.pinned.end());
    parties.insert(learned_.excluded.begin(), learned_.excluded.end());
    irreconcilable_.assign(parties.begin(), parties.end());
    Abort("PartyRefusal", e.what());
  }
}

void DtcAggregator::OnFragments(int party,
                                const std::vector<dmcfe::PartialDecryptionKey>& column) {
  if (phase_ != Phase::kFinalizing) throw ProtocolError("fragments outside Finalizing");
  if (static_cast<int>(column.size()) != options_.m) {
    throw ProtocolError("party " + std::to_string(party) + " sent " +
                        std::to_string(column.size()) + " fragments, expected " +
                        std::to_string(options_.m));
  }
  for (int i = 1; i <= options_.m; ++i) {
    const auto& f = column[i - 1];
    if (f.party_id != party) throw ProtocolError("fragment party id mismatch");
    const RowBinding binding = BindRow(proposal_, i, options_.encoding, options_.mode);
    if (f.fusion_tag != binding.fusion_tag) {
      throw ProtocolError("party " + std::to_string(party) + " fragment for round " +
                          std::to_string(i) + " is bound to a different matrix");
    }
    fragments_.Set(i, party, f);
  }
  if (fragments_.Complete()) phase_ = Phase::kDone;
}

void DtcAggregator::Abort(const std::string& kind, const std::string& reason) {
  abort_kind_ = kind;
  abort_reason_ = reason;
  phase_ = Phase::kAborted;
}

DtcParty::DtcParty(PartyOptions options, dmcfe::PublicParams pp, const dmcfe::PartySecretKey* sk)
    : options_(std::move(options)), pp_(std::move(pp)), sk_(sk) {}

InspectionVerdict DtcParty::Inspect(const ParticipationMatrix& proposal, int t_g) {
  accepted_.reset();
  if (proposal.n() < options_.party_id) return {VerdictKind::kRefuse, std::nullopt};
  participation::TrustConfig trust;
  trust.t_local.assign(proposal.n(), 0);
  trust.t_local[options_.party_id - 1] = options_.t_local;
  trust.t_g = t_g;
  trust.t_bp = options_.t_bp;
  const auto expected = participation::ExpectedColumn(proposal, options_.party_id, options_.policy);
  InspectionVerdict verdict =
      participation::PartyInspect(proposal, options_.party_id, trust, expected);
  if (verdict.kind == VerdictKind::kAccept) accepted_ = proposal.Canonical();
  return verdict;
}

std::vector<dmcfe::PartialDecryptionKey> DtcParty::GenerateFragments(
    const ParticipationMatrix& final_matrix) const {
  if (!accepted_ || *accepted_ != final_matrix.Canonical()) {
    throw RefusedMatrix("party " + std::to_string(options_.party_id) +
                        " never accepted this matrix");
  }
  if (sk_ == nullptr) throw PreconditionError("party has no secret key");
  std::vector<dmcfe::PartialDecryptionKey> out;
  out.reserve(final_matrix.m());
  for (int i = 1; i <= final_matrix.m(); ++i) {
    const RowBinding b = BindRow(final_matrix, i, options_.encoding, options_.policy.mode);
    out.push_back(dmcfe::KeyDerShare(pp_, *sk_, b.weights.weights, b.fusion_tag));
  }
  return out;
}

namespace {

[[noreturn]] void ThrowAbort(const DtcAggregator& aggregator) {
  const std::string& kind = aggregator.abort_kind();
  if (kind == "ConsensusTimeout") throw ConsensusTimeout(aggregator.abort_reason());
  if (kind == "PartyRefusal") throw PartyRefusal(aggregator.irreconcilable());
  throw InfeasibleConstraints(aggregator.abort_reason());
}

}  // namespace

ConsensusResult RunConsensus(DtcAggregator& aggregator, std::vector<DtcParty>& parties) {
  for (auto& p : parties) aggregator.OnThreshold(p.id(), p.t_local());
  while (aggregator.phase() == Phase::kProposing) {
    const ParticipationMatrix proposal = aggregator.Propose();
    for (auto& p : parties) aggregator.OnVerdict(p.id(), p.Inspect(proposal, aggregator.t_g()));
  }
  if (aggregator.phase() == Phase::kAborted) ThrowAbort(aggregator);
  for (auto& p : parties) {
    aggregator.OnFragments(p.id(), p.GenerateFragments(aggregator.current_proposal()));
  }
  ConsensusResult result;
  result.matrix = aggregator.current_proposal();
  result.fragments = aggregator.fragments();
  result.negotiation_rounds = aggregator.negotiation_round();
  result.t_g = aggregator.t_g();
  return result;
}

}  // namespace detrust::dtc
