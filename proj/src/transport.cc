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

#include "detrust/transport.h"

#include <fstream>
#include <set>

#include "detrust/errors.h"

namespace detrust::transport {
namespace {

struct TypeInfo {
  MsgType type;
  const char* name;
  // The payload must contain every key of at least one alternative.
  std::vector<std::vector<std::string>> shapes;
};

const std::vector<TypeInfo>& Types() {
  static const std::vector<TypeInfo> types = {
      {MsgType::kRegister, "REGISTER", {{"party"}}},
      {MsgType::kKeySetup,
       "KEYSETUP",
       {{"n", "payload_bound", "max_weight_scale"},
        {"pp"},
        {"party", "dh_public"},
        {"pp", "directory"}}},
      {MsgType::kDtcThreshold, "DTC_THRESHOLD", {{"query"}, {"party", "t_local"}}},
      {MsgType::kDtcPropose, "DTC_PROPOSE", {{"matrix", "t_g"}}},
      {MsgType::kDtcVerdict, "DTC_VERDICT", {{"party", "kind"}}},
      {MsgType::kDtcKeyFrags, "DTC_KEYFRAGS", {{"matrix"}, {"party", "fragments"}}},
      {MsgType::kTrainQuery, "TRAIN_QUERY", {{"round", "model"}}},
      {MsgType::kTrainReply,
       "TRAIN_REPLY",
       {{"party", "round", "ciphertext"}, {"party", "round", "values"}}},
      {MsgType::kGlobalModel, "GLOBAL_MODEL", {{"round", "model"}}},
      {MsgType::kAbort, "ABORT", {{"reason"}}},
  };
  return types;
}

const TypeInfo& InfoFor(MsgType type) {
  for (const auto& t : Types()) {
    if (t.type == type) return t;
  }
  throw ProtocolError("unknown message type");
}

}  // namespace

const char* MsgTypeName(MsgType type) { return InfoFor(type).name; }

MsgType ParseMsgType(const std::string& name) {
  for (const auto& t : Types()) {
    if (name == t.name) return t.type;
  }
  throw ProtocolError("unknown message type '" + name + "'");
}

std::string PartyEntityId(int party) { return "P" + std::to_string(party); }

int PartyFromEntityId(const std::string& id) {
  if (id.size() < 2 || id[0] != 'P') return 0;
  for (size_t i = 1; i < id.size(); ++i) {
    if (id[i] < '0' || id[i] > '9') return 0;
  }
  return std::stoi(id.substr(1));
}

std::string SerializeEnvelope(const Envelope& env) {
  const nlohmann::json j = {{"type", MsgTypeName(env.type)},
                            {"from", env.sender},
                            {"to", env.receiver},
                            {"seq", env.seq},
                            {"payload", env.payload}};
  return j.dump();
}

Envelope ParseEnvelopeLine(const std::string& line) {
  try {
    const nlohmann::json j = nlohmann::json::parse(line);
    Envelope env;
    env.type = ParseMsgType(j.at("type").get<std::string>());
    env.sender = j.at("from").get<std::string>();
    env.receiver = j.at("to").get<std::string>();
    env.seq = j.at("seq").get<uint64_t>();
    env.payload = j.at("payload");
    ValidatePayload(env);
    return env;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string(e.what()) + " in line: " + line);
  } catch (const ProtocolError& e) {
    const std::string what = e.what();
    if (what.find(" in line: ") != std::string::npos) throw;
    throw ProtocolError(what + " in line: " + line);
  }
}

void ValidatePayload(const Envelope& env) {
  if (!env.payload.is_object()) throw ProtocolError("payload must be a JSON object");
  const TypeInfo& info = InfoFor(env.type);
  for (const auto& shape : info.shapes) {
    bool ok = true;
    for (const auto& key : shape) {
      if (!env.payload.contains(key)) {
        ok = false;
        break;
      }
    }
    if (ok) return;
  }
  throw ProtocolError(std::string(info.name) + " payload lacks required fields");
}

const char* ChannelName(Channel c) {
  switch (c) {
    case Channel::kAggregatorParty: return "A-P";
    case Channel::kAggregatorKeyServer: return "A-K";
    case Channel::kPartyKeyServer: return "P-K";
    case Channel::kOther: return "other";
  }
  return "?";
}

Channel ChannelOf(const std::string& a, const std::string& b) {
  auto role = [](const std::string& id) {
    if (id == kAggregatorId) return 'A';
    if (id == kKeyServerId) return 'K';
    if (PartyFromEntityId(id) > 0) return 'P';
    return '?';
  };
  const std::set<char> roles = {role(a), role(b)};
  if (roles == std::set<char>{'A', 'P'}) return Channel::kAggregatorParty;
  if (roles == std::set<char>{'A', 'K'}) return Channel::kAggregatorKeyServer;
  if (roles == std::set<char>{'P', 'K'}) return Channel::kPartyKeyServer;
  return Channel::kOther;
}

bool IsConsensusMessage(MsgType type) {
  return type == MsgType::kDtcThreshold || type == MsgType::kDtcPropose ||
         type == MsgType::kDtcVerdict || type == MsgType::kDtcKeyFrags;
}

uint64_t ExpectedInteractions(int m, int n) {
  return static_cast<uint64_t>(m) * n + 2 * static_cast<uint64_t>(n) + 1;
}

uint64_t PlainFlInteractions(int m, int n) {
  return static_cast<uint64_t>(m) * n + static_cast<uint64_t>(n);
}

uint64_t PerRoundKeyInteractions(int m, int n) {
  return ExpectedInteractions(m, n) + static_cast<uint64_t>(m);
}

bool IsTableRequest(const Envelope& env) {
  switch (env.type) {
    case MsgType::kRegister:
      return PartyFromEntityId(env.sender) > 0 && env.receiver == kAggregatorId;
    case MsgType::kKeySetup:
      return env.receiver == kKeyServerId;
    case MsgType::kTrainQuery:
      return env.sender == kAggregatorId;
    default:
      return false;
  }
}

uint64_t InteractionMeter::Snapshot::TableTotal() const {
  uint64_t total = 0;
  for (const auto& [_, v] : interactions) total += v;
  return total;
}

uint64_t InteractionMeter::Snapshot::BytesTotal() const {
  uint64_t total = consensus_bytes;
  for (const auto& [_, v] : bytes) total += v;
  return total;
}

void InteractionMeter::Record(const Envelope& env, size_t wire_bytes) {
  std::lock_guard<std::mutex> lock(mu_);
  if (IsConsensusMessage(env.type)) {
    counts_.consensus_bytes += wire_bytes;
    if (env.sender == kAggregatorId) ++counts_.consensus_interactions;
    return;
  }
  const Channel c = ChannelOf(env.sender, env.receiver);
  counts_.bytes[c] += wire_bytes;
  if (IsTableRequest(env)) ++counts_.interactions[c];
}

InteractionMeter::Snapshot InteractionMeter::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return counts_;
}

std::optional<Envelope> Network::Recv(const std::string& mailbox,
                                      std::chrono::milliseconds timeout) {
  auto got = Collect(mailbox, 1, timeout);
  if (got.empty()) return std::nullopt;
  return got.front();
}

std::vector<std::string> Network::Trace() const {
  std::lock_guard<std::mutex> lock(trace_mu_);
  return trace_;
}

void Network::WriteTrace(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write trace " + path);
  for (const auto& line : Trace()) out << line << "\n";
}

std::string Network::Stamp(Envelope& env) {
  std::string line;
  {
    std::lock_guard<std::mutex> lock(trace_mu_);
    env.seq = ++next_seq_[env.sender];
    line = SerializeEnvelope(env);
    trace_.push_back(line);
  }
  meter_.Record(env, line.size() + 1);
  return line;
}

void SimNetwork::Attach(const std::string& id, Endpoint* endpoint) { endpoints_[id] = endpoint; }

void SimNetwork::AddMailbox(const std::string& id) { mailboxes_[id]; }

void SimNetwork::Send(Envelope env) {
  ValidatePayload(env);
  if (!endpoints_.contains(env.receiver) && !mailboxes_.contains(env.receiver)) {
    throw PreconditionError("unregistered receiver " + env.receiver);
  }
  Stamp(env);
  queue_.push_back(std::move(env));
}

bool SimNetwork::DeliverOne() {
  if (queue_.empty()) return false;
  Envelope env = std::move(queue_.front());
  queue_.pop_front();
  if (auto it = endpoints_.find(env.receiver); it != endpoints_.end()) {
    it->second->OnMessage(env, *this);
  } else {
    mailboxes_[env.receiver].push_back(std::move(env));
  }
  return true;
}

void SimNetwork::RunUntilIdle() {
  while (DeliverOne()) {
  }
}

std::vector<Envelope> SimNetwork::Collect(const std::string& mailbox, size_t expected,
                                          std::chrono::milliseconds /*timeout*/) {
  auto& box = mailboxes_[mailbox];
  while (box.size() < expected && DeliverOne()) {
  }
  std::vector<Envelope> out(std::make_move_iterator(box.begin()),
                            std::make_move_iterator(box.end()));
  box.clear();
  return out;
}

}  // namespace detrust::transport
