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


// detrust: run federations, sweeps and attacks; build keys; check matrices.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "detrust/adversary.h"
#include "detrust/config.h"
#include "detrust/dmcfe.h"
#include "detrust/errors.h"
#include "detrust/federation.h"
#include "detrust/participation.h"
#include "json.hpp"

namespace {

using detrust::RunConfig;
namespace fs = std::filesystem;

constexpr int kExitFailure = 2;

struct RunFlags {
  std::string config;
  std::optional<int> precision;
  std::optional<uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> fusion;
  bool weights_from_samples = false;
  bool plaintext = false;
  bool trace = false;
  std::string out = "out";
};

void AddRunFlags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--precision", f.precision, "decimal digits kept when encoding");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--mode", f.mode, "sim or tcp")->check(CLI::IsMember({"sim", "tcp"}));
  cmd->add_option("--fusion", f.fusion, "average or weighted")
      ->check(CLI::IsMember({"average", "weighted"}));
  cmd->add_flag("--weights-from-samples", f.weights_from_samples,
                "weighted fusion with weights proportional to local sample counts");
  cmd->add_flag("--plaintext", f.plaintext, "plaintext FedAvg reference run");
  cmd->add_flag("--trace", f.trace, "write the message trace");
  cmd->add_option("--out", f.out, "output directory");
}

bool InsecureGroupsAllowed() {
  const char* v = std::getenv("DETRUST_INSECURE_SMALL_GROUP");
  return v != nullptr && std::string(v) == "1";
}

// Small generated groups need DETRUST_INSECURE_SMALL_GROUP=1.
void GateGroup(detrust::GroupSpec& group) {
  if (group.source == "generate" && group.lambda < 2048) {
    if (!InsecureGroupsAllowed()) {
      throw detrust::ConfigError("group of " + std::to_string(group.lambda) +
                                 " bits requires DETRUST_INSECURE_SMALL_GROUP=1");
    }
    group.allow_insecure = true;
  }
}

RunConfig BuildConfig(const RunFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : detrust::LoadConfig(f.config);
  if (f.precision) cfg.encoding.precision = *f.precision;
  if (f.seed) cfg.seed = *f.seed;
  if (f.mode) cfg.mode = *f.mode;
  if (f.fusion) cfg.fusion = detrust::encoding::ParseFusionMode(*f.fusion);
  if (f.weights_from_samples) {
    cfg.weights_from_samples = true;
    cfg.fusion = detrust::encoding::FusionMode::kWeighted;
  }
  if (f.plaintext) cfg.secure = false;
  cfg.out_dir = f.out;
  GateGroup(cfg.group);
  detrust::Validate(cfg);
  return cfg;
}

int ReportError(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << "\n";
  return kExitFailure;
}

template <typename F>
int Guarded(F&& body) {
  try {
    return body();
  } catch (const detrust::Error& e) {
    return ReportError(e.kind(), e.what());
  } catch (const std::exception& e) {
    return ReportError("InternalError", e.what());
  }
}

int CmdRun(const RunFlags& f) {
  return Guarded([&] {
    const RunConfig cfg = BuildConfig(f);
    const auto result = detrust::fl::RunFederation(cfg);
    detrust::fl::WriteRunOutputs(cfg, result, cfg.out_dir, f.trace);
    const auto& last = result.metrics.back();
    std::cout << nlohmann::json{{"rounds", result.metrics.size()},
                                {"accuracy", last.accuracy},
                                {"loss", last.loss},
                                {"interactions", result.meter.TableTotal()},
                                {"negotiation_rounds", result.negotiation_rounds},
                                {"out", cfg.out_dir}}
                     .dump()
              << "\n";
    return 0;
  });
}

struct SweepRow {
  std::string value;
  std::string status = "ok";
  double accuracy = 0;
  double loss = 0;
  double wall_ms = 0;
  uint64_t interactions = 0;
  std::string error;
};

SweepRow SweepOne(RunConfig cfg, const std::string& axis, int value, bool trace) {
  SweepRow row;
  row.value = std::to_string(value);
  try {
    if (axis == "parties") {
      cfg.n = value;
    } else {
      cfg.encoding.precision = value;
    }
    cfg.out_dir = (fs::path(cfg.out_dir) / (axis + "-" + row.value)).string();
    detrust::Validate(cfg);
    const auto result = detrust::fl::RunFederation(cfg);
    detrust::fl::WriteRunOutputs(cfg, result, cfg.out_dir, trace);
    row.accuracy = result.metrics.back().accuracy;
    row.loss = result.metrics.back().loss;
    for (const auto& r : result.metrics) row.wall_ms += r.wall_ms;
    row.interactions = result.meter.TableTotal();
  } catch (const detrust::Error& e) {
    row.status = "failed";
    row.error = std::string(e.kind()) + ": " + e.what();
  } catch (const std::exception& e) {
    row.status = "failed";
    row.error = e.what();
  }
  return row;
}

std::string CsvField(std::string s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

int CmdSweep(const RunFlags& f, const std::string& axis, const std::vector<int>& values,
             bool parallel) {
  return Guarded([&] {
    if (values.empty()) throw detrust::ConfigError("sweep needs at least one value");
    const RunConfig base = BuildConfig(f);
    std::vector<SweepRow> rows;
    if (parallel) {
      std::vector<std::future<SweepRow>> jobs;
      for (int v : values) {
        jobs.push_back(std::async(std::launch::async, SweepOne, base, axis, v, f.trace));
      }
      for (auto& j : jobs) rows.push_back(j.get());
    } else {
      for (int v : values) rows.push_back(SweepOne(base, axis, v, f.trace));
    }
    fs::create_directories(base.out_dir);
    const fs::path summary = fs::path(base.out_dir) / "summary.csv";
    std::ofstream out(summary);
    out << "axis,value,status,accuracy,loss,wall_ms,interactions,error\n";
    int failures = 0;
    for (const auto& r : rows) {
      failures += r.status != "ok";
      out << axis << "," << r.value << "," << r.status << "," << r.accuracy << "," << r.loss << ","
          << r.wall_ms << "," << r.interactions << "," << CsvField(r.error) << "\n";
    }
    std::cout << nlohmann::json{{"runs", rows.size()}, {"failures", failures},
                                {"summary", summary.string()}}
                     .dump()
              << "\n";
    return failures == 0 ? 0 : 1;
  });
}

detrust::participation::ParticipationMatrix LoadMatrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw detrust::ConfigError("cannot read " + path);
  const nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw detrust::ConfigError(path + " is not JSON");
  // Either the full matrix form or {"n": N, "supports": [[1,2], ...]}.
  if (j.contains("supports")) {
    return detrust::participation::FromSupports(
        j.at("n").get<int>(), j.at("supports").get<std::vector<std::vector<int>>>(),
        detrust::encoding::FusionMode::kAverage);
  }
  return detrust::participation::MatrixFromJson(j);
}

struct AttackFlags {
  std::string kind;
  int target = 1;
  std::vector<int> colluders;
  int n = 5;
  int m = 4;
  int t_g = 3;
  int t_bp = 2;
  uint64_t seed = 1;
  std::string matrix;
  int i1 = 1;
  int i2 = 2;
  std::vector<int> support;
  int manipulated = -1;
  bool boundary = false;
};

int CmdAttack(const AttackFlags& f) {
  return Guarded([&] {
    detrust::adversary::HarnessOptions opts;
    opts.n = f.n;
    opts.m = f.m;
    opts.t_g = f.t_g;
    opts.t_bp = f.t_bp;
    opts.seed = f.seed;
    detrust::adversary::Harness harness(opts);
    nlohmann::json out;
    if (f.kind == "isolation") {
      out = harness.Isolation(f.target, f.colluders).ToJson();
      if (f.boundary) {
        nlohmann::json b = nlohmann::json::array();
        for (const auto& [c, o] : harness.CollusionBoundary(f.target)) {
          b.push_back({{"colluders", c}, {"outcome", detrust::adversary::OutcomeName(o)}});
        }
        out["boundary"] = b;
      }
    } else if (f.kind == "disaggregation") {
      if (f.matrix.empty()) throw detrust::ConfigError("disaggregation needs --matrix");
      out = harness.Disaggregation(LoadMatrix(f.matrix)).ToJson();
    } else if (f.kind == "replay") {
      std::vector<int> support = f.support;
      if (support.empty()) {
        for (int j = 1; j <= f.n; ++j) support.push_back(j);
      }
      std::vector<int> replayed = f.colluders.empty() ? std::vector<int>{f.target} : f.colluders;
      out = harness.Replay(f.i1, f.i2, replayed, support).ToJson();
    } else {
      const int manipulated = f.manipulated < 0 ? f.target : f.manipulated;
      out = harness.TwoFaced(f.target, manipulated).ToJson();
    }
    std::cout << out.dump(2) << "\n";
    return out.at("outcome") == "Succeeded" ? 1 : 0;
  });
}

int CmdKeygen(int n, int lambda, uint64_t seed, const std::string& out_dir) {
  return Guarded([&] {
    detrust::GroupSpec spec;
    spec.source = lambda >= 2048 ? "standard" : "generate";
    spec.lambda = lambda;
    spec.seed = seed;
    GateGroup(spec);
    const detrust::GroupParams group =
        spec.source == "standard"
            ? detrust::StandardGroup2048()
            : detrust::SetupGroup(lambda, {.seed = seed, .allow_insecure = spec.allow_insecure});
    detrust::encoding::EncodingConfig enc;
    const auto pp = detrust::dmcfe::Setup(group, n, enc.PayloadBound(),
                                          enc.MaxWeightScale(detrust::encoding::FusionMode::kAverage));
    detrust::Drbg rng(seed);
    const auto keys = detrust::dmcfe::KeygenCeremony(pp, rng);
    fs::create_directories(out_dir);
    std::ofstream(fs::path(out_dir) / "pp.json") << detrust::dmcfe::PublicParamsToJson(pp).dump(2)
                                                 << "\n";
    for (const auto& k : keys) {
      std::ofstream(fs::path(out_dir) / ("party-" + std::to_string(k.party_id) + ".json"))
          << detrust::dmcfe::SecretKeyToJson(k).dump(2) << "\n";
    }
    std::cout << nlohmann::json{{"n", n}, {"lambda", lambda}, {"out", out_dir}}.dump() << "\n";
    return 0;
  });
}

int CmdValidateMatrix(const std::string& path, int t_g, int t_bp, const std::string& fusion) {
  return Guarded([&] {
    namespace part = detrust::participation;
    const auto matrix = LoadMatrix(path);
    const auto mode = detrust::encoding::ParseFusionMode(fusion);
    const bool bp = part::CheckBp(matrix, t_bp);
    const bool threshold = part::RowsMeetThreshold(matrix, t_g);
    const bool weights = part::RowWeightsConsistent(matrix, mode);
    const auto exposed = part::DisaggregationRankTest(matrix);
    std::cout << nlohmann::json{{"batch_partition", bp},
                                {"rows_meet_threshold", threshold},
                                {"weights_consistent", weights},
                                {"exposed_parties", exposed}}
                     .dump(2)
              << "\n";
    return bp && threshold && weights && exposed.empty() ? 0 : 1;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning with decentralized functional encryption"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "run one federation");
  AddRunFlags(run, run_flags);

  RunFlags sweep_flags;
  std::string axis;
  std::vector<int> values;
  bool parallel = false;
  auto* sweep = app.add_subcommand("sweep", "one run per value of an axis");
  AddRunFlags(sweep, sweep_flags);
  sweep->add_option("--axis", axis, "parties or precision")
      ->required()
      ->check(CLI::IsMember({"parties", "precision"}));
  std::string values_text;
  sweep->add_option("--values", values_text, "comma-separated values to sweep")
      ->required()
      ->check([&values](const std::string& text) -> std::string {
        values.clear();
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
          try {
            size_t used = 0;
            values.push_back(std::stoi(item, &used));
            if (used != item.size()) return "'" + item + "' is not an integer";
          } catch (const std::exception&) {
            return "'" + item + "' is not an integer";
          }
        }
        if (values.empty() || text.back() == ',') return "needs a non-empty list of integers";
        return {};
      });
  sweep->add_flag("--parallel", parallel, "run the values concurrently");

  AttackFlags attack_flags;
  auto* attack = app.add_subcommand("attack", "mount an inference attack as the aggregator");
  attack->add_option("--kind", attack_flags.kind)
      ->required()
      ->check(CLI::IsMember({"isolation", "disaggregation", "replay", "two-faced"}));
  attack->add_option("--target", attack_flags.target, "target party");
  attack->add_option("--colluders", attack_flags.colluders,
                     "colluding parties (replay: replayed parties)")
      ->delimiter(',');
  attack->add_option("--n", attack_flags.n);
  attack->add_option("--m", attack_flags.m);
  attack->add_option("--t-g", attack_flags.t_g);
  attack->add_option("--t-bp", attack_flags.t_bp);
  attack->add_option("--seed", attack_flags.seed);
  attack->add_option("--matrix", attack_flags.matrix, "crafted matrix JSON (disaggregation)");
  attack->add_option("--i1", attack_flags.i1, "replayed round");
  attack->add_option("--i2", attack_flags.i2, "attacked round");
  attack->add_option("--support", attack_flags.support, "replay round support")->delimiter(',');
  attack->add_option("--manipulated", attack_flags.manipulated,
                     "column removed from the others' matrix (two-faced; 0 = none)");
  attack->add_flag("--boundary", attack_flags.boundary, "sweep the colluder count (isolation)");

  int kg_n = 5;
  int kg_lambda = 2048;
  uint64_t kg_seed = 1;
  std::string kg_out = "keys";
  auto* keygen = app.add_subcommand("keygen-ceremony", "dealer key generation for simulation");
  keygen->add_option("--n", kg_n)->required();
  keygen->add_option("--lambda", kg_lambda);
  keygen->add_option("--seed", kg_seed);
  keygen->add_option("--out", kg_out);

  std::string vm_path;
  int vm_t_g = 3;
  int vm_t_bp = 2;
  std::string vm_fusion = "average";
  auto* validate = app.add_subcommand("validate-matrix", "check a participation matrix");
  validate->add_option("--matrix", vm_path)->required()->check(CLI::ExistingFile);
  validate->add_option("--t-g", vm_t_g);
  validate->add_option("--t-bp", vm_t_bp);
  validate->add_option("--fusion", vm_fusion)->check(CLI::IsMember({"average", "weighted"}));

  CLI11_PARSE(app, argc, argv);

  if (*run) return CmdRun(run_flags);
  if (*sweep) return CmdSweep(sweep_flags, axis, values, parallel);
  if (*attack) return CmdAttack(attack_flags);
  if (*keygen) return CmdKeygen(kg_n, kg_lambda, kg_seed, kg_out);
  return CmdValidateMatrix(vm_path, vm_t_g, vm_t_bp, vm_fusion);
}
