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

#include "detrust/federation.h"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include "detrust/errors.h"

namespace detrust::fl {

using transport::Envelope;
using transport::kAggregatorId;
using transport::kKeyServerId;
using transport::MsgType;
using transport::Network;

namespace {

constexpr auto kTcpTimeout = std::chrono::seconds(120);

uint64_t DeriveSeed(uint64_t seed, std::string_view tag, int a, int b) {
  Bytes material = ToBytes("detrust-seed");
  AppendFramed(material, std::to_string(seed));
  AppendFramed(material, tag);
  AppendFramed(material, std::to_string(a));
  AppendFramed(material, std::to_string(b));
  const Digest d = Sha256(material);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | d[i];
  return v;
}

std::string ShortHash(std::string_view text) {
  const Digest d = Sha256(ToBytes(text));
  return HexEncode(std::span<const uint8_t>(d.data(), 16));
}

nlohmann::json ColumnToJson(const std::vector<Rational>& col) {
  nlohmann::json out = nlohmann::json::array();
  for (const Rational& w : col) out.push_back({w.num(), w.den()});
  return out;
}

std::vector<Rational> ColumnFromJson(const nlohmann::json& j) {
  std::vector<Rational> out;
  for (const auto& pair : j) out.emplace_back(pair.at(0).get<int64_t>(), pair.at(1).get<int64_t>());
  return out;
}

Envelope Make(MsgType type, std::string from, std::string to, nlohmann::json payload) {
  Envelope env;
  env.type = type;
  env.sender = std::move(from);
  env.receiver = std::move(to);
  env.payload = std::move(payload);
  return env;
}

}  // namespace

Bytes RoundLabel(int round) { return ToBytes("round-" + std::to_string(round)); }

nlohmann::json RoundRecord::ToJson() const {
  return {{"round", round},
          {"participants", participants},
          {"ciphertext_ids", ciphertext_ids},
          {"key_id", key_id},
          {"global_model_hash", global_model_hash},
          {"wall_ms", wall_ms}};
}

SecureAggregatorCore::SecureAggregatorCore(dmcfe::PublicParams pp, encoding::EncodingConfig cfg,
                                           encoding::FusionMode mode,
                                           participation::ParticipationMatrix matrix,
                                           dtc::KeyFragmentMatrix fragments)
    : pp_(std::move(pp)),
      cfg_(cfg),
      mode_(mode),
      matrix_(std::move(matrix)),
      fragments_(std::move(fragments)),
      solver_(pp_.group, pp_.dlog_bound) {}

ModelVector SecureAggregatorCore::FuseAndDecrypt(
    int round, std::span<const dmcfe::Ciphertext> cts,
    std::span<const dmcfe::PartialDecryptionKey> fragments_row, RoundRecord* record) const {
  const dtc::RowBinding binding = dtc::BindRow(matrix_, round, cfg_, mode_);
  const dmcfe::FunctionalDecryptionKey dk = dmcfe::KeyDerComb(pp_, fragments_row);
  if (dk.fusion_tag != binding.fusion_tag) {
    throw MixedFusionTag("fragments bound to '" + ToString(dk.fusion_tag) + "', round " +
                         std::to_string(round) + " needs '" + ToString(binding.fusion_tag) + "'");
  }
  const Bytes label = RoundLabel(round);
  const std::vector<int64_t> aggregate =
      dmcfe::Decrypt(pp_, dk, cts, binding.weights.weights, label, solver_);
  ModelVector out;
  out.values = encoding::Decode(cfg_, aggregate, binding.weights.total_weight_scale);
  out.round_produced = round;
  if (record != nullptr) {
    record->round = round;
    record->participants.clear();
    record->ciphertext_ids.clear();
    for (const auto& ct : cts) {
      record->participants.push_back(ct.party_id);
      record->ciphertext_ids.push_back(ShortHash(dmcfe::CiphertextToJson(ct).dump()));
    }
    record->key_id = ShortHash(ToString(dk.fusion_tag));
    record->global_model_hash = model::ModelHash(out);
  }
  return out;
}

ModelVector SecureAggregatorCore::FuseAndDecrypt(int round,
                                                 std::span<const dmcfe::Ciphertext> cts,
                                                 RoundRecord* record) const {
  const auto row = fragments_.Row(round);
  return FuseAndDecrypt(round, cts, row, record);
}

ModelVector FusePlain(const participation::ParticipationMatrix& matrix, int round,
                      const std::vector<std::pair<int, std::vector<double>>>& updates) {
  ModelVector out;
  out.round_produced = round;
  for (const auto& [party, values] : updates) {
    if (out.values.empty()) out.values.assign(values.size(), 0.0);
    if (values.size() != out.values.size()) throw DimensionMismatch("update sizes differ");
    const double w = matrix.at(round, party).ToDouble();
    for (size_t k = 0; k < values.size(); ++k) out.values[k] += w * values[k];
  }
  return out;
}

PartyNode::PartyNode(PartyNodeOptions options)
    : options_(std::move(options)),
      rng_(DeriveSeed(options_.seed, "party", options_.party_id, 0)) {}

void PartyNode::Start(Network& net) {
  net.Send(Make(MsgType::kRegister, transport::PartyEntityId(id()), kAggregatorId,
                {{"party", id()}, {"samples", options_.shard.rows()}}));
}

void PartyNode::Reply(Network& net, MsgType type, nlohmann::json payload) {
  net.Send(Make(type, transport::PartyEntityId(id()), kAggregatorId, std::move(payload)));
}

void PartyNode::OnMessage(const Envelope& env, Network& net) {
  // Aggregator traffic after registration waits for the key material.
  if (options_.secure && !sk_ && env.sender == kAggregatorId && env.type != MsgType::kRegister) {
    pending_.push_back(env);
    return;
  }
  try {
    Handle(env, net);
  } catch (const Error& e) {
    aborts_.push_back(e.what());
    if (env.sender == kAggregatorId) {
      Reply(net, MsgType::kAbort, {{"party", id()}, {"reason", e.what()}, {"kind", e.kind()}});
    }
  }
}

void PartyNode::Handle(const Envelope& env, Network& net) {
  switch (env.type) {
    case MsgType::kRegister: {
      if (!options_.secure) return;
      dh_ = dmcfe::GenerateDhKey(options_.group, rng_);
      net.Send(Make(MsgType::kKeySetup, transport::PartyEntityId(id()), kKeyServerId,
                    {{"party", id()}, {"dh_public", dh_->public_key.value().get_str()}}));
      return;
    }
    case MsgType::kKeySetup: {
      if (!dh_) throw ProtocolError("key setup reply before DH key generation");
      dmcfe::PublicParams pp = dmcfe::PublicParamsFromJson(env.payload.at("pp"));
      if (!(pp.group == options_.group)) throw ProtocolError("key server announced another group");
      std::map<int, Digest> seeds;
      for (const auto& [key, value] : env.payload.at("directory").items()) {
        const int peer = std::stoi(key);
        if (peer == id()) continue;
        seeds[peer] = dmcfe::DerivePairwiseSeed(options_.group, id(), dh_->secret, peer,
                                                GroupElement(mpz_class(value.get<std::string>())));
      }
      sk_ = dmcfe::MakeSecretKey(pp, id(), std::move(seeds), rng_);
      pp_ = pp;
      dtc::PartyOptions popts;
      popts.party_id = id();
      popts.t_local = options_.t_local;
      popts.t_bp = options_.t_bp;
      popts.policy = options_.policy;
      popts.encoding = options_.encoding;
      dtc_ = std::make_unique<dtc::DtcParty>(popts, *pp_, &*sk_);
      std::vector<Envelope> pending;
      pending.swap(pending_);
      for (const auto& p : pending) OnMessage(p, net);
      return;
    }
    case MsgType::kDtcThreshold:
      Reply(net, MsgType::kDtcThreshold, {{"party", id()}, {"t_local", options_.t_local}});
      return;
    case MsgType::kDtcPropose: {
      const auto proposal = participation::MatrixFromJson(env.payload.at("matrix"));
      const int t_g = env.payload.at("t_g").get<int>();
      const auto verdict = dtc_->Inspect(proposal, t_g);
      accepted_matrix_.reset();
      if (verdict.kind == participation::VerdictKind::kAccept) accepted_matrix_ = proposal;
      nlohmann::json payload = {{"party", id()}, {"kind", participation::VerdictName(verdict.kind)}};
      if (verdict.suggested_column) payload["suggested_column"] = ColumnToJson(*verdict.suggested_column);
      Reply(net, MsgType::kDtcVerdict, std::move(payload));
      return;
    }
    case MsgType::kDtcKeyFrags: {
      const auto final_matrix = participation::MatrixFromJson(env.payload.at("matrix"));
      const auto fragments = dtc_->GenerateFragments(final_matrix);
      nlohmann::json list = nlohmann::json::array();
      for (const auto& f : fragments) list.push_back(dmcfe::FragmentToJson(f));
      Reply(net, MsgType::kDtcKeyFrags, {{"party", id()}, {"fragments", list}});
      return;
    }
    case MsgType::kTrainQuery:
      HandleTrainQuery(env, net);
      return;
    case MsgType::kGlobalModel: {
      ModelVector mv;
      mv.values = env.payload.at("model").get<std::vector<double>>();
      mv.round_produced = env.payload.at("round").get<int>();
      final_model_ = std::move(mv);
      return;
    }
    case MsgType::kAbort:
      aborts_.push_back(env.payload.at("reason").get<std::string>());
      return;
    default:
      throw ProtocolError(std::string("party cannot handle ") + transport::MsgTypeName(env.type));
  }
}

void PartyNode::HandleTrainQuery(const Envelope& env, Network& net) {
  const int round = env.payload.at("round").get<int>();
  bool enrolled = false;
  if (options_.secure) {
    if (!accepted_matrix_) throw RefusedMatrix("training query before an agreed matrix");
    if (round < 1 || round > accepted_matrix_->m()) throw ProtocolError("round out of range");
    enrolled = accepted_matrix_->Enrolled(round, id());
  } else {
    for (const auto& p : env.payload.at("enrolled")) enrolled |= p.get<int>() == id();
  }
  if (!enrolled) return;
  // One ciphertext per label: never answer a round twice or go backwards.
  if (round <= last_round_) {
    throw ProtocolError("query for round " + std::to_string(round) + " after round " +
                        std::to_string(last_round_));
  }
  last_round_ = round;
  ModelVector global;
  global.values = env.payload.at("model").get<std::vector<double>>();
  model::TrainParams train = options_.train;
  train.seed = DeriveSeed(options_.seed, "train", id(), round);
  const ModelVector local = model::LocalTrain(options_.shard, global, train);
  Drbg noise_rng(DeriveSeed(options_.seed, "dp", id(), round));
  const ModelVector noisy = model::DpSmcNoise(options_.dp, local, noise_rng, global.values);
  ++trained_rounds_;
  if (!options_.secure) {
    Reply(net, MsgType::kTrainReply, {{"party", id()}, {"round", round}, {"values", noisy.values}});
    return;
  }
  const auto encoded = encoding::Encode(options_.encoding, noisy.values);
  const auto ct = dmcfe::Encrypt(*pp_, *sk_, encoded, RoundLabel(round));
  Reply(net, MsgType::kTrainReply,
        {{"party", id()}, {"round", round}, {"ciphertext", dmcfe::CiphertextToJson(ct)}});
}

void KeyServerNode::OnMessage(const Envelope& env, Network& net) {
  if (env.type != MsgType::kKeySetup) {
    throw ProtocolError(std::string("key server cannot handle ") + transport::MsgTypeName(env.type));
  }
  if (env.sender == kAggregatorId) {
    pp_ = dmcfe::Setup(group_, env.payload.at("n").get<int>(),
                       env.payload.at("payload_bound").get<int64_t>(),
                       env.payload.at("max_weight_scale").get<int64_t>());
    net.Send(Make(MsgType::kKeySetup, kKeyServerId, kAggregatorId,
                  {{"pp", dmcfe::PublicParamsToJson(*pp_)}}));
  } else {
    const int party = env.payload.at("party").get<int>();
    if (transport::PartyEntityId(party) != env.sender) throw ProtocolError("party id spoofed");
    const mpz_class pub(env.payload.at("dh_public").get<std::string>());
    if (!IsSubgroupMember(group_, pub)) throw ProtocolError("DH key outside the group");
    dh_directory_[party] = pub.get_str();
  }
  MaybeAnswerParties(net);
}

void KeyServerNode::MaybeAnswerParties(Network& net) {
  if (answered_ || !pp_ || static_cast<int>(dh_directory_.size()) < pp_->n) return;
  answered_ = true;
  nlohmann::json directory = nlohmann::json::object();
  for (const auto& [party, pub] : dh_directory_) directory[std::to_string(party)] = pub;
  const nlohmann::json pp = dmcfe::PublicParamsToJson(*pp_);
  for (const auto& [party, _] : dh_directory_) {
    net.Send(Make(MsgType::kKeySetup, kKeyServerId, transport::PartyEntityId(party),
                  {{"pp", pp}, {"directory", directory}}));
  }
}

RunData PrepareData(const RunConfig& cfg) {
  RunData data;
  if (cfg.dataset.kind == "blobs") {
    data.federation = model::MakeBlobFederation(cfg.dataset.blobs, cfg.n, cfg.seed);
  } else {
    for (int j = 1; j <= cfg.n; ++j) {
      data.federation.shards.push_back(model::LoadCsv(cfg.dataset.party_csv.at(j - 1), j));
    }
    data.federation.test = model::LoadCsv(cfg.dataset.test_csv, 0);
    int classes = cfg.dataset.num_classes;
    if (classes == 0) {
      auto scan = [&](const model::DatasetShard& s) {
        for (int y : s.labels) classes = std::max(classes, y + 1);
      };
      for (const auto& s : data.federation.shards) scan(s);
      scan(data.federation.test);
    }
    data.federation.num_classes = classes;
    for (const auto& s : data.federation.shards) {
      if (s.num_features != data.federation.test.num_features) {
        throw ConfigError("party and test CSV feature counts differ");
      }
    }
  }
  data.dimension = model::ModelDimension(data.federation.num_classes,
                                         data.federation.test.num_features);
  return data;
}

GroupParams ResolveGroup(const RunConfig& cfg) {
  if (cfg.group.source == "standard") return StandardGroup2048();
  SetupOptions opts;
  opts.seed = cfg.group.seed;
  opts.allow_insecure = cfg.group.allow_insecure;
  return SetupGroup(cfg.group.lambda, opts);
}

namespace {

class AggregatorDriver {
 public:
  AggregatorDriver(const RunConfig& cfg, Network& net, const RunData& data,
                   std::vector<int64_t> sample_counts)
      : cfg_(cfg), net_(net), data_(data), sample_counts_(std::move(sample_counts)) {}

  RunResult Run();

 private:
  std::vector<Envelope> CollectN(size_t expected) {
    return net_.Collect(kAggregatorId, expected, kTcpTimeout);
  }
  void Broadcast(MsgType type, const nlohmann::json& payload) {
    for (int j = 1; j <= cfg_.n; ++j) {
      net_.Send(Make(type, kAggregatorId, transport::PartyEntityId(j), payload));
    }
  }
  void Record(std::vector<Envelope>& got) {
    inbox_.insert(inbox_.end(), got.begin(), got.end());
  }
  static void ThrowIfAbort(const Envelope& env) {
    if (env.type != MsgType::kAbort) return;
    const std::string kind = env.payload.value("kind", "");
    const std::string reason = env.sender + ": " + env.payload.at("reason").get<std::string>();
    if (kind == "RefusedMatrix") throw RefusedMatrix(reason);
    throw ProtocolError(reason);
  }

  void Register();
  dmcfe::PublicParams KeySetup();
  dtc::ConsensusResult Consensus(const dmcfe::PublicParams& pp);
  participation::TrustConfig Trust() const;

  const RunConfig& cfg_;
  Network& net_;
  const RunData& data_;
  std::vector<int64_t> sample_counts_;
  std::vector<Envelope> inbox_;
};

participation::TrustConfig AggregatorDriver::Trust() const {
  std::vector<int> t_local;
  for (int j = 1; j <= cfg_.n; ++j) t_local.push_back(cfg_.TLocal(j));
  return participation::MakeTrustConfig(std::move(t_local), cfg_.t_bp);
}

void AggregatorDriver::Register() {
  auto regs = CollectN(cfg_.n);
  Record(regs);
  std::set<int> seen;
  for (const auto& env : regs) {
    if (env.type != MsgType::kRegister) throw ProtocolError("expected REGISTER");
    seen.insert(env.payload.at("party").get<int>());
  }
  if (static_cast<int>(seen.size()) != cfg_.n) throw QuorumFailure("not every party registered");
  for (int j : seen) {
    net_.Send(Make(MsgType::kRegister, kAggregatorId, transport::PartyEntityId(j),
                   {{"party", j}, {"ok", true}}));
  }
}

dmcfe::PublicParams AggregatorDriver::KeySetup() {
  net_.Send(Make(MsgType::kKeySetup, kAggregatorId, kKeyServerId,
                 {{"n", cfg_.n},
                  {"payload_bound", cfg_.encoding.PayloadBound()},
                  {"max_weight_scale", cfg_.encoding.MaxWeightScale(cfg_.fusion)}}));
  auto got = CollectN(1);
  Record(got);
  if (got.size() != 1 || got.front().type != MsgType::kKeySetup) {
    throw ProtocolError("key server did not answer");
  }
  return dmcfe::PublicParamsFromJson(got.front().payload.at("pp"));
}

dtc::ConsensusResult AggregatorDriver::Consensus(const dmcfe::PublicParams& pp) {
  dtc::AggregatorOptions opts;
  opts.m = cfg_.m;
  opts.n = cfg_.n;
  opts.t_bp = cfg_.t_bp;
  opts.mode = cfg_.fusion;
  opts.encoding = cfg_.encoding;
  opts.sample_counts = sample_counts_;
  opts.seed = cfg_.seed;
  opts.max_negotiation_rounds = cfg_.max_negotiation_rounds;
  dtc::DtcAggregator agg(opts);
  (void)pp;

  auto expect_all = [&](MsgType type) {
    auto got = CollectN(cfg_.n);
    Record(got);
    std::map<int, Envelope> by_party;
    for (auto& env : got) {
      ThrowIfAbort(env);
      if (env.type != type) throw ProtocolError("unexpected " + std::string(MsgTypeName(env.type)));
      by_party[env.payload.at("party").get<int>()] = env;
    }
    if (static_cast<int>(by_party.size()) != cfg_.n) {
      throw QuorumFailure("consensus message missing from some parties");
    }
    return by_party;
  };

  Broadcast(MsgType::kDtcThreshold, {{"query", "threshold"}});
  for (auto& [party, env] : expect_all(MsgType::kDtcThreshold)) {
    agg.OnThreshold(party, env.payload.at("t_local").get<int>());
  }
  while (agg.phase() == dtc::Phase::kProposing) {
    const auto proposal = agg.Propose();
    Broadcast(MsgType::kDtcPropose,
              {{"matrix", participation::MatrixToJson(proposal)}, {"t_g", agg.t_g()}});
    for (auto& [party, env] : expect_all(MsgType::kDtcVerdict)) {
      participation::InspectionVerdict v;
      v.kind = participation::ParseVerdict(env.payload.at("kind").get<std::string>());
      if (env.payload.contains("suggested_column")) {
        v.suggested_column = ColumnFromJson(env.payload.at("suggested_column"));
      }
      agg.OnVerdict(party, std::move(v));
    }
  }
  if (agg.phase() == dtc::Phase::kAborted) {
    Broadcast(MsgType::kAbort, {{"reason", agg.abort_reason()}});
    if (agg.abort_kind() == "ConsensusTimeout") throw ConsensusTimeout(agg.abort_reason());
    if (agg.abort_kind() == "PartyRefusal") throw PartyRefusal(agg.irreconcilable());
    throw InfeasibleConstraints(agg.abort_reason());
  }
  Broadcast(MsgType::kDtcKeyFrags, {{"matrix", participation::MatrixToJson(agg.current_proposal())}});
  for (auto& [party, env] : expect_all(MsgType::kDtcKeyFrags)) {
    std::vector<dmcfe::PartialDecryptionKey> column;
    for (const auto& f : env.payload.at("fragments")) column.push_back(dmcfe::FragmentFromJson(f));
    agg.OnFragments(party, column);
  }
  if (agg.phase() != dtc::Phase::kDone) throw ProtocolError("fragment matrix incomplete");
  dtc::ConsensusResult result;
  result.matrix = agg.current_proposal();
  result.fragments = agg.fragments();
  result.negotiation_rounds = agg.negotiation_round();
  result.t_g = agg.t_g();
  return result;
}

RunResult AggregatorDriver::Run() {
  using Clock = std::chrono::steady_clock;
  RunResult result;
  const model::Federation& fed = data_.federation;
  Register();

  std::optional<SecureAggregatorCore> core;
  participation::ParticipationMatrix matrix;
  if (cfg_.secure) {
    const dmcfe::PublicParams pp = KeySetup();
    dtc::ConsensusResult consensus = Consensus(pp);
    result.negotiation_rounds = consensus.negotiation_rounds;
    result.t_g = consensus.t_g;
    matrix = consensus.matrix;
    core.emplace(pp, cfg_.encoding, cfg_.fusion, consensus.matrix, std::move(consensus.fragments));
  } else {
    const auto trust = Trust();
    result.t_g = trust.t_g;
    matrix = participation::ProposeMatrix(cfg_.m, cfg_.n, trust, cfg_.fusion, cfg_.seed,
                                          sample_counts_);
  }
  result.matrix = matrix;

  ModelVector global;
  global.values.assign(data_.dimension, 0.0);
  for (int round = 1; round <= cfg_.m; ++round) {
    const auto start = Clock::now();
    const std::vector<int> support = matrix.Support(round);
    nlohmann::json query = {{"round", round}, {"model", global.values}};
    if (!cfg_.secure) query["enrolled"] = support;
    Broadcast(MsgType::kTrainQuery, query);

    auto replies = CollectN(support.size());
    Record(replies);
    std::map<int, Envelope> by_party;
    for (auto& env : replies) {
      ThrowIfAbort(env);
      if (env.type != MsgType::kTrainReply || env.payload.at("round").get<int>() != round) {
        throw ProtocolError("unexpected reply in round " + std::to_string(round));
      }
      by_party[env.payload.at("party").get<int>()] = env;
    }
    std::vector<int> missing;
    for (int j : support) {
      if (!by_party.contains(j)) missing.push_back(j);
    }
    if (!missing.empty() || by_party.size() != support.size()) {
      std::string names;
      for (int j : missing) names += (names.empty() ? "" : ",") + std::to_string(j);
      throw QuorumFailure("round " + std::to_string(round) + " missing replies from [" + names + "]");
    }

    RoundRecord record;
    if (cfg_.secure) {
      std::vector<dmcfe::Ciphertext> cts;
      for (const auto& [party, env] : by_party) {
        cts.push_back(dmcfe::CiphertextFromJson(env.payload.at("ciphertext")));
        if (cts.back().party_id != party) throw ProtocolError("ciphertext party mismatch");
        for (const auto& c : cts.back().coords) {
          if (!IsSubgroupMember(core->pp().group, c.value())) {
            throw ProtocolError("ciphertext coordinate outside the subgroup");
          }
        }
      }
      try {
        global = core->FuseAndDecrypt(round, cts, &record);
      } catch (const DlogNotFound& e) {
        throw DecryptionFailure("round " + std::to_string(round) + ": " + e.what());
      }
    } else {
      std::vector<std::pair<int, std::vector<double>>> updates;
      for (const auto& [party, env] : by_party) {
        updates.emplace_back(party, env.payload.at("values").get<std::vector<double>>());
      }
      global = FusePlain(matrix, round, updates);
      record.round = round;
      record.participants = support;
      record.global_model_hash = model::ModelHash(global);
    }
    const double wall_ms =
        std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    record.wall_ms = wall_ms;
    result.records.push_back(record);

    const model::Evaluation ev = model::Evaluate(global, fed.test, fed.num_classes);
    const auto snap = net_.meter().snapshot();
    result.metrics.push_back(
        {round, ev.accuracy, ev.loss, wall_ms, snap.BytesTotal(), snap.TableTotal()});
  }
  Broadcast(MsgType::kGlobalModel, {{"round", cfg_.m}, {"model", global.values}});
  result.final_model = global;
  result.aggregator_inbox = std::move(inbox_);
  return result;
}

// Drops what the hook selects, forwards the rest.
class LossyEndpoint : public transport::Endpoint {
 public:
  LossyEndpoint(transport::Endpoint* inner, const RunHooks& hooks)
      : inner_(inner), hooks_(hooks) {}
  void OnMessage(const Envelope& env, Network& net) override {
    if (hooks_.drop && hooks_.drop(env)) return;
    inner_->OnMessage(env, net);
  }

 private:
  transport::Endpoint* inner_;
  const RunHooks& hooks_;
};

}  // namespace

RunResult RunFederation(const RunConfig& cfg, const RunHooks& hooks) {
  Validate(cfg);
  const RunData data = PrepareData(cfg);
  const GroupParams group = cfg.secure ? ResolveGroup(cfg) : GroupParams{};

  std::vector<int64_t> sample_counts;
  if (cfg.weights_from_samples) {
    if (cfg.fusion != encoding::FusionMode::kWeighted) {
      throw ConfigError("weights_from_samples requires weighted fusion");
    }
    for (const auto& s : data.federation.shards) sample_counts.push_back(static_cast<int64_t>(s.rows()));
  }

  std::unique_ptr<Network> net;
  if (cfg.mode == "sim") {
    net = std::make_unique<transport::SimNetwork>();
  } else {
    std::map<std::string, transport::Address> directory;
    int offset = 0;
    auto add = [&](const std::string& id) {
      directory[id] = {cfg.host, cfg.base_port == 0 ? 0 : cfg.base_port + offset};
      ++offset;
    };
    add(kAggregatorId);
    add(kKeyServerId);
    for (int j = 1; j <= cfg.n; ++j) add(transport::PartyEntityId(j));
    net = std::make_unique<transport::TcpNetwork>(std::move(directory));
  }

  std::vector<std::unique_ptr<PartyNode>> parties;
  for (int j = 1; j <= cfg.n; ++j) {
    PartyNodeOptions o;
    o.party_id = j;
    o.m = cfg.m;
    o.n = cfg.n;
    o.secure = cfg.secure;
    o.group = group;
    o.shard = data.federation.shards.at(j - 1);
    o.train.num_classes = data.federation.num_classes;
    o.train.local_epochs = cfg.local_epochs;
    o.train.learning_rate = cfg.learning_rate;
    o.train.batch_size = cfg.batch_size;
    o.dp = cfg.dp;
    o.encoding = cfg.encoding;
    o.t_local = cfg.TLocal(j);
    o.t_bp = cfg.t_bp;
    o.policy.mode = cfg.fusion;
    o.policy.enrollment = cfg.EnrollmentOf(j);
    o.policy.sample_counts = sample_counts;
    o.seed = cfg.seed;
    parties.push_back(std::make_unique<PartyNode>(std::move(o)));
  }
  KeyServerNode key_server(group);

  net->AddMailbox(kAggregatorId);
  if (cfg.secure) net->Attach(kKeyServerId, &key_server);
  std::vector<std::unique_ptr<LossyEndpoint>> wrapped;
  for (auto& p : parties) {
    transport::Endpoint* endpoint = p.get();
    if (hooks.drop) {
      wrapped.push_back(std::make_unique<LossyEndpoint>(endpoint, hooks));
      endpoint = wrapped.back().get();
    }
    net->Attach(transport::PartyEntityId(p->id()), endpoint);
  }
  for (auto& p : parties) p->Start(*net);

  AggregatorDriver driver(cfg, *net, data, sample_counts);
  RunResult result;
  try {
    result = driver.Run();
  } catch (...) {
    if (auto* tcp = dynamic_cast<transport::TcpNetwork*>(net.get())) tcp->Shutdown();
    throw;
  }
  if (auto* sim = dynamic_cast<transport::SimNetwork*>(net.get())) sim->RunUntilIdle();
  if (auto* tcp = dynamic_cast<transport::TcpNetwork*>(net.get())) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    tcp->Shutdown();
  }
  result.meter = net->meter().snapshot();
  result.trace = net->Trace();
  for (auto& p : parties) {
    if (p->secret_key()) result.party_keys.push_back(*p->secret_key());
  }
  return result;
}

void WriteMetricsCsv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "round,accuracy,loss,bytes_tx,interactions\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.round << "," << r.accuracy << "," << r.loss << "," << r.bytes_tx << ","
        << r.interactions << "\n";
  }
}

void WriteTimingCsv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "round,wall_ms\n";
  out << std::fixed << std::setprecision(3);
  for (const auto& r : rows) out << r.round << "," << r.wall_ms << "\n";
}

nlohmann::json InteractionReport(const RunConfig& cfg,
                                 const transport::InteractionMeter::Snapshot& meter) {
  const uint64_t ours = transport::ExpectedInteractions(cfg.m, cfg.n);
  const uint64_t plain = transport::PlainFlInteractions(cfg.m, cfg.n);
  const uint64_t per_round_keys = transport::PerRoundKeyInteractions(cfg.m, cfg.n);
  nlohmann::json channels = nlohmann::json::object();
  for (const auto& [ch, count] : meter.interactions) channels[transport::ChannelName(ch)] = count;
  nlohmann::json bytes = nlohmann::json::object();
  for (const auto& [ch, count] : meter.bytes) bytes[transport::ChannelName(ch)] = count;
  const double measured = static_cast<double>(meter.TableTotal());
  return {{"secure", cfg.secure},
          {"m", cfg.m},
          {"n", cfg.n},
          {"measured_interactions", meter.TableTotal()},
          {"per_channel", channels},
          {"bytes_per_channel", bytes},
          {"bytes_total", meter.BytesTotal()},
          {"consensus_interactions", meter.consensus_interactions},
          {"consensus_bytes", meter.consensus_bytes},
          {"formula_this_protocol", ours},
          {"formula_plain_fl", plain},
          {"formula_per_round_keys", per_round_keys},
          {"reduction_vs_per_round_keys",
           (static_cast<double>(per_round_keys) - measured) / static_cast<double>(per_round_keys)}};
}

void WriteRunOutputs(const RunConfig& cfg, const RunResult& result, const std::string& dir,
                     bool with_trace) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  auto write_json = [&](const std::string& name, const nlohmann::json& j) {
    std::ofstream out(base / name);
    if (!out) throw ConfigError("cannot write " + (base / name).string());
    out << j.dump(2) << "\n";
  };
  WriteMetricsCsv(result.metrics, (base / "metrics.csv").string());
  WriteTimingCsv(result.metrics, (base / "timing.csv").string());
  nlohmann::json interactions = InteractionReport(cfg, result.meter);
  interactions["negotiation_rounds"] = result.negotiation_rounds;
  interactions["t_g"] = result.t_g;
  write_json("interactions.json", interactions);
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : result.records) rounds.push_back(r.ToJson());
  write_json("rounds.json", {{"matrix", participation::MatrixToJson(result.matrix)},
                             {"rounds", rounds}});
  write_json("final_model.json", {{"round", result.final_model.round_produced},
                                  {"hash", model::ModelHash(result.final_model)},
                                  {"values", result.final_model.values}});
  write_json("config.json", ConfigToJson(cfg));
  if (with_trace) {
    std::ofstream out(base / "trace.txt");
    for (const auto& line : result.trace) out << line << "\n";
  }
}

}  // namespace detrust::fl
