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

#ifndef DETRUST_TRANSPORT_H_
#define DETRUST_TRANSPORT_H_

// Message passing between the aggregator ("A"), the parties ("P1".."Pn")
// and the setup key server ("K"). Two backends share one interface: an
// in-process deterministic simulator and TCP with one JSON object per line.
//
// Reactive entities implement Endpoint and are attached to the network; the
// aggregator is the driver and pulls its inbox with Collect().

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

namespace detrust::transport {

enum class MsgType {
  kRegister,
  kKeySetup,
  kDtcThreshold,
  kDtcPropose,
  kDtcVerdict,
  kDtcKeyFrags,
  kTrainQuery,
  kTrainReply,
  kGlobalModel,
  kAbort,
};

const char* MsgTypeName(MsgType type);
MsgType ParseMsgType(const std::string& name);

inline const std::string kAggregatorId = "A";
inline const std::string kKeyServerId = "K";
std::string PartyEntityId(int party);
// 0 when `id` is not a party id.
int PartyFromEntityId(const std::string& id);

struct Envelope {
  MsgType type = MsgType::kAbort;
  std::string sender;
  std::string receiver;
  nlohmann::json payload = nlohmann::json::object();
  uint64_t seq = 0;

  bool operator==(const Envelope& o) const {
    return type == o.type && sender == o.sender && receiver == o.receiver &&
           payload == o.payload && seq == o.seq;
  }
};

// One line, no trailing newline. Keys are emitted in sorted order.
std::string SerializeEnvelope(const Envelope& env);
// Throws ProtocolError naming the offending line.
Envelope ParseEnvelopeLine(const std::string& line);
// Checks the payload fields required for the message type.
void ValidatePayload(const Envelope& env);

enum class Channel { kAggregatorParty, kAggregatorKeyServer, kPartyKeyServer, kOther };
const char* ChannelName(Channel c);
Channel ChannelOf(const std::string& a, const std::string& b);

// Counts request-response exchanges the way the communication table does:
// REGISTER (P->A), KEYSETUP requests to K, and TRAIN_QUERY (A->P). Trust
// negotiation traffic goes to a separate consensus counter.
class InteractionMeter {
 public:
  struct Snapshot {
    std::map<Channel, uint64_t> interactions;
    std::map<Channel, uint64_t> bytes;
    uint64_t consensus_interactions = 0;
    uint64_t consensus_bytes = 0;

    uint64_t TableTotal() const;
    uint64_t BytesTotal() const;
  };

  void Record(const Envelope& env, size_t wire_bytes);
  Snapshot snapshot() const;

 private:
  mutable std::mutex mu_;
  Snapshot counts_;
};

// True for the messages that open a metered table interaction.
bool IsTableRequest(const Envelope& env);
bool IsConsensusMessage(MsgType type);

// Closed-form interaction counts: this protocol (mn + 2n + 1), plain
// federated learning (mn + n), and per-round key requests (mn + m + 2n + 1).
uint64_t ExpectedInteractions(int m, int n);
uint64_t PlainFlInteractions(int m, int n);
uint64_t PerRoundKeyInteractions(int m, int n);

class Network;

class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual void OnMessage(const Envelope& env, Network& net) = 0;
};

class Network {
 public:
  virtual ~Network() = default;

  // Reactive entity: messages to `id` are handed to `endpoint`.
  virtual void Attach(const std::string& id, Endpoint* endpoint) = 0;
  // Mailbox entity: messages to `id` queue until Collect/Recv.
  virtual void AddMailbox(const std::string& id) = 0;
  // Stamps the per-sender sequence number, meters, traces and delivers.
  virtual void Send(Envelope env) = 0;
  // Returns queued messages for a mailbox once `expected` have arrived or
  // nothing more can arrive (sim) / the timeout expires (tcp).
  virtual std::vector<Envelope> Collect(const std::string& mailbox, size_t expected,
                                        std::chrono::milliseconds timeout) = 0;
  std::optional<Envelope> Recv(const std::string& mailbox,
                               std::chrono::milliseconds timeout = std::chrono::seconds(5));

  InteractionMeter& meter() { return meter_; }
  std::vector<std::string> Trace() const;
  void WriteTrace(const std::string& path) const;

 protected:
  // Assigns seq, meters and records the trace line; returns the wire line.
  std::string Stamp(Envelope& env);

 private:
  InteractionMeter meter_;
  mutable std::mutex trace_mu_;
  std::map<std::string, uint64_t> next_seq_;
  std::vector<std::string> trace_;
};

// Single-threaded deterministic simulator: one global FIFO, delivery happens
// inside Collect().
class SimNetwork : public Network {
 public:
  void Attach(const std::string& id, Endpoint* endpoint) override;
  void AddMailbox(const std::string& id) override;
  void Send(Envelope env) override;
  std::vector<Envelope> Collect(const std::string& mailbox, size_t expected,
                                std::chrono::milliseconds timeout) override;
  // Delivers everything queued to attached endpoints.
  void RunUntilIdle();

 private:
  bool DeliverOne();

  std::deque<Envelope> queue_;
  std::map<std::string, Endpoint*> endpoints_;
  std::map<std::string, std::deque<Envelope>> mailboxes_;
};

struct Address {
  std::string host = "127.0.0.1";
  int port = 0;
};

// Every local entity listens on its own port; a send opens (and caches) a
// connection to the receiver and writes one line. Endpoint callbacks run on
// the connection reader threads and are serialized per endpoint.
class TcpNetwork : public Network {
 public:
  explicit TcpNetwork(std::map<std::string, Address> directory);
  ~TcpNetwork() override;

  void Attach(const std::string& id, Endpoint* endpoint) override;
  void AddMailbox(const std::string& id) override;
  void Send(Envelope env) override;
  std::vector<Envelope> Collect(const std::string& mailbox, size_t expected,
                                std::chrono::milliseconds timeout) override;

  // Address an entity listens on (actual port once bound).
  Address AddressOf(const std::string& id) const;
  // Lines that failed to parse, with the ProtocolError message.
  std::vector<std::string> protocol_errors() const;
  void Shutdown();

 private:
  struct Local;
  void Listen(const std::string& id);
  void AcceptLoop(int listen_fd, const std::string& id);
  void ReadLoop(int fd, const std::string& id);
  void Dispatch(const std::string& id, const Envelope& env);
  int ConnectionTo(const std::string& id);

  std::map<std::string, Address> directory_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, std::unique_ptr<Local>> locals_;
  std::map<std::string, int> outbound_;
  std::mutex send_mu_;
  std::vector<std::string> protocol_errors_;
  std::vector<std::thread> threads_;
  std::vector<int> fds_;
  bool stopping_ = false;
};

}  // namespace detrust::transport

#endif  // DETRUST_TRANSPORT_H_
