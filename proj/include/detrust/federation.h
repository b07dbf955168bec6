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

#ifndef DETRUST_FEDERATION_H_
#define DETRUST_FEDERATION_H_

// End-to-end training: registration, key setup through the key server, trust
// consensus, then m rounds of query -> local train -> noise -> encrypt ->
// quorum check -> key recovery -> decrypt. The same entities run over the
// simulator or TCP.

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "detrust/config.h"
#include "detrust/dmcfe.h"
#include "detrust/dtc.h"
#include "detrust/encoding.h"
#include "detrust/model.h"
#include "detrust/participation.h"
#include "detrust/transport.h"

namespace detrust::fl {

using model::ModelVector;

// Per-round ciphertext label. Binds every ciphertext to one round.
Bytes RoundLabel(int round);

struct RoundRecord {
  int round = 0;
  std::vector<int> participants;
  std::vector<std::string> ciphertext_ids;
  std::string key_id;
  std::string global_model_hash;
  double wall_ms = 0;

  nlohmann::json ToJson() const;
};

struct MetricsRow {
  int round = 0;
  double accuracy = 0;
  double loss = 0;
  double wall_ms = 0;
  uint64_t bytes_tx = 0;      // cumulative
  uint64_t interactions = 0;  // cumulative, table accounting
};

// The aggregator's decryption path for one round: combine the round's key
// fragments, check they are bound to the agreed row, decrypt the inner
// product and decode it. Learns only the fused model.
class SecureAggregatorCore {
 public:
  SecureAggregatorCore(dmcfe::PublicParams pp, encoding::EncodingConfig cfg,
                       encoding::FusionMode mode, participation::ParticipationMatrix matrix,
                       dtc::KeyFragmentMatrix fragments);

  // Throws MissingFragment, MixedFusionTag, LabelMismatch, DlogNotFound.
  ModelVector FuseAndDecrypt(int round, std::span<const dmcfe::Ciphertext> cts,
                             std::span<const dmcfe::PartialDecryptionKey> fragments_row,
                             RoundRecord* record = nullptr) const;
  ModelVector FuseAndDecrypt(int round, std::span<const dmcfe::Ciphertext> cts,
                             RoundRecord* record = nullptr) const;

  const dmcfe::PublicParams& pp() const { return pp_; }
  const participation::ParticipationMatrix& matrix() const { return matrix_; }
  const dtc::KeyFragmentMatrix& fragments() const { return fragments_; }
  const DlogSolver& solver() const { return solver_; }

 private:
  dmcfe::PublicParams pp_;
  encoding::EncodingConfig cfg_;
  encoding::FusionMode mode_;
  participation::ParticipationMatrix matrix_;
  dtc::KeyFragmentMatrix fragments_;
  DlogSolver solver_;
};

// Plaintext fusion with exact weights, used by the reference mode.
ModelVector FusePlain(const participation::ParticipationMatrix& matrix, int round,
                      const std::vector<std::pair<int, std::vector<double>>>& updates);

struct PartyNodeOptions {
  int party_id = 1;
  int m = 1;
  int n = 2;
  bool secure = true;
  GroupParams group;
  model::DatasetShard shard;
  model::TrainParams train;
  model::DpConfig dp;
  encoding::EncodingConfig encoding;
  int t_local = 2;
  int t_bp = 2;
  participation::WeightPolicy policy;
  uint64_t seed = 0;
};

class PartyNode : public transport::Endpoint {
 public:
  explicit PartyNode(PartyNodeOptions options);

  // Opens the registration interaction.
  void Start(transport::Network& net);
  void OnMessage(const transport::Envelope& env, transport::Network& net) override;

  int id() const { return options_.party_id; }
  bool keys_ready() const { return sk_.has_value(); }
  const std::optional<dmcfe::PartySecretKey>& secret_key() const { return sk_; }
  const std::optional<participation::ParticipationMatrix>& accepted_matrix() const {
    return accepted_matrix_;
  }
  int trained_rounds() const { return trained_rounds_; }
  const std::vector<std::string>& aborts() const { return aborts_; }
  const std::optional<ModelVector>& final_model() const { return final_model_; }

 private:
  void Handle(const transport::Envelope& env, transport::Network& net);
  void Reply(transport::Network& net, transport::MsgType type, nlohmann::json payload);
  void HandleTrainQuery(const transport::Envelope& env, transport::Network& net);

  PartyNodeOptions options_;
  Drbg rng_;
  std::optional<dmcfe::DhKeyPair> dh_;
  std::optional<dmcfe::PublicParams> pp_;
  std::optional<dmcfe::PartySecretKey> sk_;
  std::unique_ptr<dtc::DtcParty> dtc_;
  std::optional<participation::ParticipationMatrix> last_proposal_;
  std::optional<participation::ParticipationMatrix> accepted_matrix_;
  std::vector<transport::Envelope> pending_;
  int last_round_ = 0;
  int trained_rounds_ = 0;
  std::vector<std::string> aborts_;
  std::optional<ModelVector> final_model_;
};

class KeyServerNode : public transport::Endpoint {
 public:
  explicit KeyServerNode(GroupParams group) : group_(std::move(group)) {}
  void OnMessage(const transport::Envelope& env, transport::Network& net) override;

 private:
  void MaybeAnswerParties(transport::Network& net);

  GroupParams group_;
  std::optional<dmcfe::PublicParams> pp_;
  std::map<int, std::string> dh_directory_;
  bool answered_ = false;
};

struct RunResult {
  ModelVector final_model;
  std::vector<MetricsRow> metrics;
  std::vector<RoundRecord> records;
  transport::InteractionMeter::Snapshot meter;
  participation::ParticipationMatrix matrix;
  int negotiation_rounds = 0;
  int t_g = 0;
  std::vector<std::string> trace;
  // Messages the aggregator received, for audits.
  std::vector<transport::Envelope> aggregator_inbox;
  std::vector<dmcfe::PartySecretKey> party_keys;
};

// Loaded or synthesized data for a run.
struct RunData {
  model::Federation federation;
  size_t dimension = 0;
};
RunData PrepareData(const RunConfig& cfg);
GroupParams ResolveGroup(const RunConfig& cfg);

// Fault injection for tests: messages to a party for which `drop` returns
// true are discarded before the party sees them.
struct RunHooks {
  std::function<bool(const transport::Envelope&)> drop;
};

// Throws on any protocol failure (QuorumFailure, DecryptionFailure, the
// consensus errors, ConfigError).
RunResult RunFederation(const RunConfig& cfg, const RunHooks& hooks = {});

void WriteMetricsCsv(const std::vector<MetricsRow>& rows, const std::string& path);
void WriteTimingCsv(const std::vector<MetricsRow>& rows, const std::string& path);

// Metered counts next to the closed-form counts of this protocol
// (mn + 2n + 1), plain federated learning (mn + n) and a per-round key
// request design (mn + m + 2n + 1).
nlohmann::json InteractionReport(const RunConfig& cfg,
                                 const transport::InteractionMeter::Snapshot& meter);

// metrics.csv, timing.csv, interactions.json, rounds.json, final_model.json,
// config.json and, when `with_trace`, trace.txt.
void WriteRunOutputs(const RunConfig& cfg, const RunResult& result, const std::string& dir,
                     bool with_trace);

}  // namespace detrust::fl

#endif  // DETRUST_FEDERATION_H_
