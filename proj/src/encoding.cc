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

#include "detrust/encoding.h"

#include <cmath>
#include <string>

#include "detrust/errors.h"

namespace detrust::encoding {
namespace {

std::atomic<uint64_t> g_clipped{0};

int64_t Pow10(int e) {
  int64_t out = 1;
  for (int i = 0; i < e; ++i) out *= 10;
  return out;
}

}  // namespace

const char* FusionModeName(FusionMode mode) {
  return mode == FusionMode::kAverage ? "average" : "weighted";
}

FusionMode ParseFusionMode(const std::string& name) {
  if (name == "average") return FusionMode::kAverage;
  if (name == "weighted") return FusionMode::kWeighted;
  throw ConfigError("unknown fusion mode '" + name + "'");
}

int64_t EncodingConfig::Scale() const { return Pow10(precision); }
int64_t EncodingConfig::WeightScale() const { return Pow10(weight_precision); }

int64_t EncodingConfig::PayloadBound() const {
  return static_cast<int64_t>(std::ceil(clip_bound * static_cast<double>(Scale())));
}

int64_t EncodingConfig::MaxWeightScale(FusionMode mode) const {
  return mode == FusionMode::kAverage ? 1 : WeightScale();
}

void Validate(const EncodingConfig& cfg) {
  if (cfg.precision < 0 || cfg.precision > 12) throw ConfigError("precision must be in [0, 12]");
  if (cfg.weight_precision < 0 || cfg.weight_precision > 9) {
    throw ConfigError("weight precision must be in [0, 9]");
  }
  if (!(cfg.clip_bound > 0)) throw ConfigError("clip bound must be positive");
}

uint64_t ClippedCount() { return g_clipped.load(); }

std::vector<int64_t> Encode(const EncodingConfig& cfg, std::span<const double> v) {
  const double scale = static_cast<double>(cfg.Scale());
  std::vector<int64_t> out;
  out.reserve(v.size());
  for (double x : v) {
    if (x > cfg.clip_bound || x < -cfg.clip_bound) {
      g_clipped.fetch_add(1, std::memory_order_relaxed);
      x = x > 0 ? cfg.clip_bound : -cfg.clip_bound;
    }
    // std::llround rounds half away from zero.
    out.push_back(std::llround(x * scale));
  }
  return out;
}

std::vector<double> Decode(const EncodingConfig& cfg, std::span<const int64_t> v,
                           int64_t total_weight_scale) {
  if (total_weight_scale < 1) throw PreconditionError("total weight scale must be >= 1");
  const double denom = static_cast<double>(cfg.Scale()) * static_cast<double>(total_weight_scale);
  std::vector<double> out;
  out.reserve(v.size());
  for (int64_t x : v) out.push_back(static_cast<double>(x) / denom);
  return out;
}

IntegerWeights IntegerizeWeights(const EncodingConfig& cfg, std::span<const Rational> y,
                                 FusionMode mode) {
  IntegerWeights out;
  out.weights.reserve(y.size());
  int64_t support = 0;
  for (const Rational& w : y) {
    if (w < Rational(0)) throw PreconditionError("negative fusion weight " + w.ToString());
    if (!w.is_zero()) ++support;
  }
  if (support == 0) throw ZeroSupport("fusion vector has no nonzero weight");
  if (mode == FusionMode::kAverage) {
    for (const Rational& w : y) out.weights.push_back(w.is_zero() ? 0 : 1);
    out.total_weight_scale = support;
    return out;
  }
  const int64_t scale = cfg.WeightScale();
  for (const Rational& w : y) {
    // round half away from zero on exact rationals (weights are nonnegative)
    const __int128 scaled_num = static_cast<__int128>(w.num()) * scale;
    const auto scaled = static_cast<int64_t>((2 * scaled_num + w.den()) / (2 * w.den()));
    if (scaled == 0 && !w.is_zero()) {
      throw PreconditionError("weight " + w.ToString() + " vanishes at weight precision " +
                              std::to_string(cfg.weight_precision));
    }
    out.weights.push_back(scaled);
  }
  out.total_weight_scale = scale;
  return out;
}

}  // namespace detrust::encoding
