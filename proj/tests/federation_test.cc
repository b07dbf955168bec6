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

#include <cmath>
#include <filesystem>
#include <fstream>

#include "detrust/errors.h"
#include "gtest/gtest.h"

namespace detrust::fl {
namespace {

using transport::MsgType;

RunConfig SmallConfig() {
  RunConfig cfg;
  cfg.m = 3;
  cfg.n = 4;
  cfg.t_default = 2;
  cfg.group.source = "generate";
  cfg.group.lambda = 128;
  cfg.group.seed = 3;
  cfg.group.allow_insecure = true;
  cfg.dataset.blobs.samples_per_party = 60;
  cfg.dataset.blobs.test_samples = 150;
  cfg.seed = 5;
  return cfg;
}

double MaxAbsDiff(const std::vector<double>& a, const std::vector<double>& b) {
  EXPECT_EQ(a.size(), b.size());
  double worst = 0;
  for (size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
  return worst;
}

TEST(FusePlainTest, WeightsEachUpdateByItsMatrixEntry) {
  const auto v = participation::FromSupports(3, {{1, 3}}, encoding::FusionMode::kAverage);
  const auto fused = FusePlain(v, 1, {{1, {2.0, 4.0}}, {3, {4.0, -2.0}}});
  EXPECT_DOUBLE_EQ(fused.values[0], 3.0);
  EXPECT_DOUBLE_EQ(fused.values[1], 1.0);
}

TEST(FederationTest, RoundLabelsDiffer) {
  EXPECT_EQ(ToString(RoundLabel(7)), "round-7");
  EXPECT_NE(RoundLabel(1), RoundLabel(2));
}

TEST(FederationTest, SecureRunTracksPlaintextReference) {
  const RunConfig cfg = SmallConfig();
  const RunResult secure = RunFederation(cfg);
  RunConfig plain_cfg = cfg;
  plain_cfg.secure = false;
  const RunResult plain = RunFederation(plain_cfg);

  EXPECT_EQ(secure.matrix.Canonical(), plain.matrix.Canonical());
  ASSERT_EQ(secure.metrics.size(), 3u);
  EXPECT_LE(MaxAbsDiff(secure.final_model.values, plain.final_model.values), 1e-2);
  EXPECT_NEAR(secure.metrics.back().accuracy, plain.metrics.back().accuracy, 0.01);
  EXPECT_EQ(secure.records.size(), 3u);
  for (const auto& r : secure.records) {
    EXPECT_EQ(r.participants, secure.matrix.Support(r.round));
    EXPECT_EQ(r.ciphertext_ids.size(), r.participants.size());
  }
  EXPECT_EQ(secure.party_keys.size(), 4u);
  EXPECT_EQ(secure.meter.TableTotal(), transport::ExpectedInteractions(3, 4));
}

TEST(FederationTest, IdenticalUpdatesFuseToThemselves) {
  RunConfig cfg = SmallConfig();
  cfg.m = 1;
  cfg.n = 3;
  cfg.t_default = 3;
  cfg.local_epochs = 0;  // every party returns the zero model
  const RunResult r = RunFederation(cfg);
  EXPECT_EQ(r.matrix.Support(1), (std::vector<int>{1, 2, 3}));
  for (double v : r.final_model.values) EXPECT_NEAR(v, 0.0, 1e-4);
}

TEST(FederationTest, AggregatorSeesOnlyCiphertexts) {
  const RunResult r = RunFederation(SmallConfig());
  int replies = 0;
  for (const auto& env : r.aggregator_inbox) {
    if (env.type != MsgType::kTrainReply) continue;
    ++replies;
    EXPECT_FALSE(env.payload.contains("values"));
    ASSERT_TRUE(env.payload.contains("ciphertext"));
    // Nothing in a reply parses as a small plaintext number.
    const std::string dump = env.payload.at("ciphertext").dump();
    EXPECT_EQ(dump.find('.'), std::string::npos);
  }
  size_t enrolled = 0;
  for (int i = 1; i <= r.matrix.m(); ++i) enrolled += r.matrix.Support(i).size();
  EXPECT_EQ(static_cast<size_t>(replies), enrolled);
}

TEST(FederationTest, PartyOutsideTheSupportStaysSilent) {
  RunConfig cfg = SmallConfig();
  cfg.enrollment = {participation::Enrollment::kNever, participation::Enrollment::kAny,
                    participation::Enrollment::kAny, participation::Enrollment::kAny};
  const RunResult r = RunFederation(cfg);
  for (int i = 1; i <= cfg.m; ++i) EXPECT_FALSE(r.matrix.Enrolled(i, 1));
  for (const auto& env : r.aggregator_inbox) {
    if (env.type == MsgType::kTrainReply) EXPECT_NE(env.sender, "P1");
  }
}

TEST(FederationTest, MissingReplyIsAQuorumFailure) {
  RunConfig cfg = SmallConfig();
  cfg.t_default = 4;  // everyone is enrolled every round
  RunHooks hooks;
  hooks.drop = [](const transport::Envelope& env) {
    return env.type == MsgType::kTrainQuery && env.receiver == "P3" &&
           env.payload.at("round").get<int>() == 2;
  };
  try {
    RunFederation(cfg, hooks);
    FAIL() << "expected QuorumFailure";
  } catch (const QuorumFailure& e) {
    EXPECT_NE(std::string(e.what()).find("round 2 missing replies from [3]"), std::string::npos);
  }
}

TEST(FederationTest, WeightedFusionMatchesFedAvg) {
  const auto dir = std::filesystem::temp_directory_path() / "detrust_fedavg";
  std::filesystem::create_directories(dir);
  model::BlobSpec spec;
  spec.samples_per_party = 100;
  spec.test_samples = 120;
  const auto fed = model::MakeBlobFederation(spec, 1, 8);
  const std::vector<size_t> sizes{20, 30, 50};  // weights 0.2, 0.3, 0.5
  RunConfig cfg = SmallConfig();
  cfg.n = 3;
  cfg.m = 2;
  cfg.t_default = 3;
  cfg.fusion = encoding::FusionMode::kWeighted;
  cfg.weights_from_samples = true;
  cfg.dataset.kind = "csv";
  size_t offset = 0;
  for (size_t j = 0; j < sizes.size(); ++j) {
    model::DatasetShard shard;
    shard.num_features = fed.shards[0].num_features;
    shard.labels.assign(fed.shards[0].labels.begin() + offset,
                        fed.shards[0].labels.begin() + offset + sizes[j]);
    shard.features.assign(fed.shards[0].features.begin() + offset * shard.num_features,
                          fed.shards[0].features.begin() + (offset + sizes[j]) * shard.num_features);
    offset += sizes[j];
    const auto path = (dir / ("p" + std::to_string(j + 1) + ".csv")).string();
    model::WriteCsv(shard, path);
    cfg.dataset.party_csv.push_back(path);
  }
  cfg.dataset.test_csv = (dir / "test.csv").string();
  model::WriteCsv(fed.test, cfg.dataset.test_csv);

  const RunResult secure = RunFederation(cfg);
  for (int i = 1; i <= 2; ++i) {
    EXPECT_EQ(secure.matrix.at(i, 1), Rational(1, 5));
    EXPECT_EQ(secure.matrix.at(i, 2), Rational(3, 10));
    EXPECT_EQ(secure.matrix.at(i, 3), Rational(1, 2));
  }
  RunConfig plain_cfg = cfg;
  plain_cfg.secure = false;
  const RunResult plain = RunFederation(plain_cfg);
  EXPECT_LE(MaxAbsDiff(secure.final_model.values, plain.final_model.values), 1e-2);
  std::filesystem::remove_all(dir);
}

TEST(FederationTest, SampleWeightsNeedWeightedFusion) {
  RunConfig cfg = SmallConfig();
  cfg.weights_from_samples = true;
  EXPECT_THROW(RunFederation(cfg), ConfigError);
}

TEST(FederationTest, TcpRunMatchesSimulator) {
  RunConfig cfg = SmallConfig();
  cfg.m = 2;
  const RunResult sim = RunFederation(cfg);
  cfg.mode = "tcp";
  const RunResult tcp = RunFederation(cfg);
  EXPECT_EQ(tcp.final_model.values, sim.final_model.values);
  EXPECT_EQ(tcp.meter.TableTotal(), sim.meter.TableTotal());
}

TEST(FederationTest, OutputsAreWritten) {
  RunConfig cfg = SmallConfig();
  cfg.m = 2;
  const RunResult r = RunFederation(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "detrust_outputs";
  WriteRunOutputs(cfg, r, dir.string(), true);
  for (const char* f : {"metrics.csv", "timing.csv", "interactions.json", "rounds.json",
                        "final_model.json", "config.json", "trace.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  std::ifstream in(dir / "metrics.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "round,accuracy,loss,bytes_tx,interactions");
  const auto report = InteractionReport(cfg, r.meter);
  EXPECT_EQ(report.at("formula_this_protocol"), transport::ExpectedInteractions(2, 4));
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace detrust::fl
