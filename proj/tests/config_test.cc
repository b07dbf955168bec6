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


#include "detrust/config.h"

#include <filesystem>
#include <fstream>

#include "detrust/errors.h"
#include "gtest/gtest.h"

namespace detrust {
namespace {

TEST(ConfigTest, DefaultsAreValid) {
  const RunConfig cfg;
  EXPECT_NO_THROW(Validate(cfg));
  EXPECT_EQ(cfg.m, 20);
  EXPECT_EQ(cfg.n, 5);
  EXPECT_EQ(cfg.TLocal(3), 3);
  EXPECT_EQ(cfg.EnrollmentOf(2), participation::Enrollment::kAny);
}

TEST(ConfigTest, JsonRoundTrip) {
  RunConfig cfg;
  cfg.n = 4;
  cfg.m = 7;
  cfg.fusion = encoding::FusionMode::kWeighted;
  cfg.t_local = {2, 3, 2, 4};
  cfg.enrollment = {participation::Enrollment::kAlways, participation::Enrollment::kAny,
                    participation::Enrollment::kNever, participation::Enrollment::kAny};
  cfg.dp.enabled = true;
  cfg.dp.epsilon = 2.5;
  cfg.encoding.precision = 6;
  cfg.group.source = "generate";
  cfg.group.lambda = 256;
  cfg.seed = 99;
  const RunConfig back = ConfigFromJson(ConfigToJson(cfg));
  EXPECT_EQ(ConfigToJson(back), ConfigToJson(cfg));
  EXPECT_EQ(back.TLocal(4), 4);
  EXPECT_EQ(back.EnrollmentOf(3), participation::Enrollment::kNever);
}

TEST(ConfigTest, MissingKeysKeepDefaults) {
  const RunConfig cfg = ConfigFromJson({{"m", 3}});
  EXPECT_EQ(cfg.m, 3);
  EXPECT_EQ(cfg.n, 5);
  EXPECT_EQ(cfg.group.source, "standard");
}

TEST(ConfigTest, BadValuesAreConfigErrors) {
  EXPECT_THROW(ConfigFromJson({{"m", "lots"}}), ConfigError);
  EXPECT_THROW(ConfigFromJson({{"fusion", "median"}}), ConfigError);
}

TEST(ConfigTest, ValidateRejectsImpossibleSettings) {
  RunConfig cfg;
  cfg.t_default = 6;
  EXPECT_THROW(Validate(cfg), InfeasibleConstraints);
  cfg = RunConfig{};
  cfg.t_local = {2, 2};
  EXPECT_THROW(Validate(cfg), ConfigError);
  cfg = RunConfig{};
  cfg.t_bp = 1;
  EXPECT_THROW(Validate(cfg), ConfigError);
  cfg = RunConfig{};
  cfg.mode = "udp";
  EXPECT_THROW(Validate(cfg), ConfigError);
  cfg = RunConfig{};
  cfg.dataset.kind = "csv";
  EXPECT_THROW(Validate(cfg), ConfigError);
}

TEST(ConfigTest, LoadFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "detrust_config_test.json";
  {
    std::ofstream out(path);
    out << R"({"n": 6, "trust": {"t_default": 4}})";
  }
  const RunConfig cfg = LoadConfig(path.string());
  EXPECT_EQ(cfg.n, 6);
  EXPECT_EQ(cfg.t_default, 4);
  std::filesystem::remove(path);
  EXPECT_THROW(LoadConfig(path.string()), ConfigError);
}

}  // namespace
}  // namespace detrust
