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


#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "gtest/gtest.h"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI with `args`, capturing stdout; stderr is folded in with 2>&1
// when `merge` is set.
Result Cli(const std::string& args, const std::string& env = "", bool merge = false) {
  const std::string cmd = env + " \"" DETRUST_CLI_PATH "\" " + args + (merge ? " 2>&1" : " 2>/dev/null");
  Result r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  size_t got;
  while ((got = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, got);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("detrust_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string Write(const std::string& name, const std::string& body) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << body;
    return p.string();
  }

  std::string SmallConfig() {
    return Write("cfg.json", R"({"m": 2, "n": 3, "trust": {"t_default": 2},
      "dataset": {"samples_per_party": 40, "test_samples": 60},
      "group": {"source": "generate", "lambda": 128, "seed": 2}})");
  }

  fs::path dir_;
};

TEST_F(CliTest, ThresholdAboveNIsRejected) {
  const auto m = Write("m.json", R"({"n": 3, "supports": [[1, 2, 3]]})");
  EXPECT_NE(Cli("validate-matrix --matrix " + m + " --t-g 4").code, 0);
}

TEST_F(CliTest, ValidMatrixPassesAndNonBpFails) {
  const auto ok = Write("ok.json", R"({"n": 4, "supports": [[1, 2], [3, 4], [1, 2, 3, 4]]})");
  EXPECT_EQ(Cli("validate-matrix --matrix " + ok + " --t-g 2").code, 0);
  const auto bad = Write("bad.json", R"({"n": 3, "supports": [[1, 2, 3], [2, 3]]})");
  EXPECT_NE(Cli("validate-matrix --matrix " + bad + " --t-g 2").code, 0);
}

TEST_F(CliTest, EmptySweepIsAUsageError) {
  const Result r = Cli("sweep --axis precision --values \"\"");
  EXPECT_NE(r.code, 0);
}

TEST_F(CliTest, SmallGroupNeedsExplicitOptIn) {
  const Result r = Cli("run --config " + SmallConfig() + " --out " + (dir_ / "o").string(), "",
                       true);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("DETRUST_INSECURE_SMALL_GROUP"), std::string::npos);
}

TEST_F(CliTest, RunWritesOutputs) {
  const fs::path out = dir_ / "o";
  const Result r = Cli("run --config " + SmallConfig() + " --out " + out.string(),
                       "DETRUST_INSECURE_SMALL_GROUP=1");
  ASSERT_EQ(r.code, 0);
  for (const char* f : {"metrics.csv", "interactions.json", "rounds.json", "final_model.json"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  std::ifstream in(out / "interactions.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("measured_interactions"), 2 * 3 + 2 * 3 + 1);
}

TEST_F(CliTest, AttackPrintsReport) {
  const Result r = Cli("attack --kind isolation --target 2");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("outcome"), "BlockedByInspection");
}

TEST_F(CliTest, KeygenCeremonyWritesKeys) {
  const Result r = Cli("keygen-ceremony --n 3 --lambda 64 --out " + (dir_ / "k").string(),
                       "DETRUST_INSECURE_SMALL_GROUP=1");
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "k" / "pp.json"));
  for (int j = 1; j <= 3; ++j) {
    EXPECT_TRUE(fs::exists(dir_ / "k" / ("party-" + std::to_string(j) + ".json")));
  }
}

TEST_F(CliTest, UnknownSubcommandFails) { EXPECT_NE(Cli("frobnicate").code, 0); }

}  // namespace
