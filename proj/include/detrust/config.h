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

#ifndef DETRUST_CONFIG_H_
#define DETRUST_CONFIG_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "detrust/encoding.h"
#include "detrust/model.h"
#include "detrust/participation.h"
#include "json.hpp"

namespace detrust {

struct GroupSpec {
  // "standard" selects the 2048-bit RFC 3526 group; "generate" runs the
  // safe-prime search at `lambda` bits from `seed`.
  std::string source = "standard";
  int lambda = 2048;
  uint64_t seed = 1;
  bool allow_insecure = false;
};

struct DatasetSpec {
  // "blobs" (synthetic) or "csv".
  std::string kind = "blobs";
  model::BlobSpec blobs;
  std::vector<std::string> party_csv;  // one per party
  std::string test_csv;
  int num_classes = 0;  // csv only; 0 = infer from labels
};

struct RunConfig {
  std::string mode = "sim";  // sim | tcp
  bool secure = true;        // false: plaintext FedAvg reference
  int m = 20;
  int n = 5;
  encoding::FusionMode fusion = encoding::FusionMode::kAverage;
  bool weights_from_samples = false;
  encoding::EncodingConfig encoding;
  std::vector<int> t_local;  // empty: every party uses t_default
  int t_default = 3;
  int t_bp = 2;
  std::vector<participation::Enrollment> enrollment;  // empty: all kAny
  int max_negotiation_rounds = 10;
  model::DpConfig dp;
  DatasetSpec dataset;
  int local_epochs = 3;
  double learning_rate = 0.01;
  int batch_size = 16;
  uint64_t seed = 1;
  GroupSpec group;
  std::string host = "127.0.0.1";
  int base_port = 0;  // 0: ephemeral ports
  std::string out_dir;

  int TLocal(int party) const;
  participation::Enrollment EnrollmentOf(int party) const;
};

// Throws ConfigError (or InfeasibleConstraints for impossible thresholds).
void Validate(const RunConfig& cfg);

nlohmann::json ConfigToJson(const RunConfig& cfg);
// Missing keys keep their defaults. Throws ConfigError on bad values.
RunConfig ConfigFromJson(const nlohmann::json& j);
RunConfig LoadConfig(const std::string& path);

}  // namespace detrust

#endif  // DETRUST_CONFIG_H_
