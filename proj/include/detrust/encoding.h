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

#ifndef DETRUST_ENCODING_H_
#define DETRUST_ENCODING_H_

// Fixed-point conversion between float model parameters and the integer
// plaintext space of the cryptosystem. Scaling is decimal: precision p keeps
// p digits after the decimal point.

#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "detrust/rational.h"

namespace detrust::encoding {

enum class FusionMode { kAverage, kWeighted };

const char* FusionModeName(FusionMode mode);
FusionMode ParseFusionMode(const std::string& name);

struct EncodingConfig {
  int precision = 4;
  int weight_precision = 2;
  double clip_bound = 10.0;

  int64_t Scale() const;
  int64_t WeightScale() const;
  int64_t PayloadBound() const;
  // Largest total weight scale a fusion vector can carry under `mode`.
  int64_t MaxWeightScale(FusionMode mode) const;
};

void Validate(const EncodingConfig& cfg);

// Number of entries clipped by Encode since process start.
uint64_t ClippedCount();

std::vector<int64_t> Encode(const EncodingConfig& cfg, std::span<const double> v);
std::vector<double> Decode(const EncodingConfig& cfg, std::span<const int64_t> v,
                           int64_t total_weight_scale);

struct IntegerWeights {
  std::vector<int64_t> weights;
  int64_t total_weight_scale = 1;
};

// Average mode puts unit weights on the support (exact); weighted mode rounds
// y * 10^p_w. Throws ZeroSupport when every weight is zero.
IntegerWeights IntegerizeWeights(const EncodingConfig& cfg, std::span<const Rational> y,
                                 FusionMode mode);

}  // namespace detrust::encoding

#endif  // DETRUST_ENCODING_H_
