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

#include <algorithm>
#include <fstream>

#include "detrust/errors.h"

namespace detrust {

int RunConfig::TLocal(int party) const {
  return t_local.empty() ? t_default : t_local.at(party - 1);
}

participation::Enrollment RunConfig::EnrollmentOf(int party) const {
  return enrollment.empty() ? participation::Enrollment::kAny : enrollment.at(party - 1);
}

void Validate(const RunConfig& cfg) {
  if (cfg.mode != "sim" && cfg.mode != "tcp") throw ConfigError("mode must be sim or tcp");
  if (cfg.m < 1) throw ConfigError("m must be >= 1");
  if (cfg.n < 2) throw ConfigError("n must be >= 2");
  encoding::Validate(cfg.encoding);
  if (!cfg.t_local.empty() && static_cast<int>(cfg.t_local.size()) != cfg.n) {
    throw ConfigError("t_local needs one entry per party");
  }
  if (!cfg.enrollment.empty() && static_cast<int>(cfg.enrollment.size()) != cfg.n) {
    throw ConfigError("enrollment needs one entry per party");
  }
  int t_g = 0;
  for (int j = 1; j <= cfg.n; ++j) t_g = std::max(t_g, cfg.TLocal(j));
  if (t_g < 2) throw ConfigError("trust thresholds must be >= 2");
  if (cfg.t_bp < 2) throw ConfigError("t_bp must be >= 2");
  if (t_g > cfg.n) {
    throw InfeasibleConstraints("t_g=" + std::to_string(t_g) + " exceeds n=" +
                                std::to_string(cfg.n));
  }
  if (cfg.t_bp > cfg.n) throw InfeasibleConstraints("t_bp exceeds n");
  if (cfg.max_negotiation_rounds < 1) throw ConfigError("max_negotiation_rounds must be >= 1");
  model::Validate(cfg.dp);
  if (cfg.local_epochs < 0) throw ConfigError("local_epochs must be >= 0");
  if (!(cfg.learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.dataset.kind == "csv") {
    if (static_cast<int>(cfg.dataset.party_csv.size()) != cfg.n) {
      throw ConfigError("csv dataset needs one file per party");
    }
    if (cfg.dataset.test_csv.empty()) throw ConfigError("csv dataset needs a test file");
  } else if (cfg.dataset.kind != "blobs") {
    throw ConfigError("dataset kind must be blobs or csv");
  }
  if (cfg.group.source != "standard" && cfg.group.source != "generate") {
    throw ConfigError("group source must be standard or generate");
  }
}

nlohmann::json ConfigToJson(const RunConfig& cfg) {
  nlohmann::json enrollment = nlohmann::json::array();
  for (auto e : cfg.enrollment) enrollment.push_back(participation::EnrollmentName(e));
  return {
      {"mode", cfg.mode},
      {"secure", cfg.secure},
      {"m", cfg.m},
      {"n", cfg.n},
      {"fusion", encoding::FusionModeName(cfg.fusion)},
      {"weights_from_samples", cfg.weights_from_samples},
      {"precision", cfg.encoding.precision},
      {"weight_precision", cfg.encoding.weight_precision},
      {"clip_bound", cfg.encoding.clip_bound},
      {"trust", {{"t_local", cfg.t_local}, {"t_default", cfg.t_default}, {"t_bp", cfg.t_bp}}},
      {"enrollment", enrollment},
      {"max_negotiation_rounds", cfg.max_negotiation_rounds},
      {"dp",
       {{"enabled", cfg.dp.enabled},
        {"epsilon", cfg.dp.epsilon},
        {"delta", cfg.dp.delta},
        {"clip_norm", cfg.dp.clip_norm},
        {"honest_count", cfg.dp.honest_count}}},
      {"dataset",
       {{"kind", cfg.dataset.kind},
        {"num_classes", cfg.dataset.blobs.num_classes},
        {"num_features", cfg.dataset.blobs.num_features},
        {"samples_per_party", cfg.dataset.blobs.samples_per_party},
        {"test_samples", cfg.dataset.blobs.test_samples},
        {"center_spread", cfg.dataset.blobs.center_spread},
        {"noise_std", cfg.dataset.blobs.noise_std},
        {"party_csv", cfg.dataset.party_csv},
        {"test_csv", cfg.dataset.test_csv},
        {"csv_num_classes", cfg.dataset.num_classes}}},
      {"train",
       {{"local_epochs", cfg.local_epochs},
        {"learning_rate", cfg.learning_rate},
        {"batch_size", cfg.batch_size}}},
      {"seed", cfg.seed},
      {"group",
       {{"source", cfg.group.source},
        {"lambda", cfg.group.lambda},
        {"seed", cfg.group.seed},
        {"allow_insecure", cfg.group.allow_insecure}}},
      {"tcp", {{"host", cfg.host}, {"base_port", cfg.base_port}}},
      {"out_dir", cfg.out_dir},
  };
}

namespace {

template <typename T>
void Read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace

RunConfig ConfigFromJson(const nlohmann::json& j) {
  RunConfig cfg;
  try {
    Read(j, "mode", cfg.mode);
    Read(j, "secure", cfg.secure);
    Read(j, "m", cfg.m);
    Read(j, "n", cfg.n);
    if (j.contains("fusion")) cfg.fusion = encoding::ParseFusionMode(j.at("fusion").get<std::string>());
    Read(j, "weights_from_samples", cfg.weights_from_samples);
    Read(j, "precision", cfg.encoding.precision);
    Read(j, "weight_precision", cfg.encoding.weight_precision);
    Read(j, "clip_bound", cfg.encoding.clip_bound);
    if (j.contains("trust")) {
      const auto& t = j.at("trust");
      Read(t, "t_local", cfg.t_local);
      Read(t, "t_default", cfg.t_default);
      Read(t, "t_bp", cfg.t_bp);
    }
    if (j.contains("enrollment")) {
      for (const auto& e : j.at("enrollment")) {
        cfg.enrollment.push_back(participation::ParseEnrollment(e.get<std::string>()));
      }
    }
    Read(j, "max_negotiation_rounds", cfg.max_negotiation_rounds);
    if (j.contains("dp")) {
      const auto& d = j.at("dp");
      Read(d, "enabled", cfg.dp.enabled);
      Read(d, "epsilon", cfg.dp.epsilon);
      Read(d, "delta", cfg.dp.delta);
      Read(d, "clip_norm", cfg.dp.clip_norm);
      Read(d, "honest_count", cfg.dp.honest_count);
    }
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      Read(d, "kind", cfg.dataset.kind);
      Read(d, "num_classes", cfg.dataset.blobs.num_classes);
      Read(d, "num_features", cfg.dataset.blobs.num_features);
      Read(d, "samples_per_party", cfg.dataset.blobs.samples_per_party);
      Read(d, "test_samples", cfg.dataset.blobs.test_samples);
      Read(d, "center_spread", cfg.dataset.blobs.center_spread);
      Read(d, "noise_std", cfg.dataset.blobs.noise_std);
      Read(d, "party_csv", cfg.dataset.party_csv);
      Read(d, "test_csv", cfg.dataset.test_csv);
      Read(d, "csv_num_classes", cfg.dataset.num_classes);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      Read(t, "local_epochs", cfg.local_epochs);
      Read(t, "learning_rate", cfg.learning_rate);
      Read(t, "batch_size", cfg.batch_size);
    }
    Read(j, "seed", cfg.seed);
    if (j.contains("group")) {
      const auto& g = j.at("group");
      Read(g, "source", cfg.group.source);
      Read(g, "lambda", cfg.group.lambda);
      Read(g, "seed", cfg.group.seed);
      Read(g, "allow_insecure", cfg.group.allow_insecure);
    }
    if (j.contains("tcp")) {
      Read(j.at("tcp"), "host", cfg.host);
      Read(j.at("tcp"), "base_port", cfg.base_port);
    }
    Read(j, "out_dir", cfg.out_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
  return cfg;
}

RunConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return ConfigFromJson(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace detrust
