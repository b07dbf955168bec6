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

#ifndef DETRUST_MODEL_H_
#define DETRUST_MODEL_H_

// Desk-scale local learner (multiclass logistic regression trained by
// minibatch SGD), synthetic and CSV datasets, and the distributed Gaussian
// noise each party adds before encryption.

#include <cstdint>
#include <string>
#include <vector>

#include "detrust/bytes.h"

namespace detrust::model {

struct ModelVector {
  std::vector<double> values;
  int round_produced = 0;
};

struct DatasetShard {
  int party_id = 0;
  int num_features = 0;
  std::vector<double> features;  // row-major, rows x num_features
  std::vector<int> labels;

  size_t rows() const { return labels.size(); }
  const double* row(size_t r) const { return features.data() + r * num_features; }
};

// Headerless CSV, last column is the integer label.
DatasetShard LoadCsv(const std::string& path, int party_id);
void WriteCsv(const DatasetShard& shard, const std::string& path);

struct BlobSpec {
  int num_classes = 3;
  int num_features = 4;
  int samples_per_party = 200;
  int test_samples = 600;
  double center_spread = 4.0;  // centers drawn from [-spread, spread]^F
  double noise_std = 1.0;
};

struct Federation {
  std::vector<DatasetShard> shards;  // one per party, ids 1..n
  DatasetShard test;
  int num_classes = 0;
};

// Gaussian blobs shared out IID across `n` parties plus a held-out set.
Federation MakeBlobFederation(const BlobSpec& spec, int n, uint64_t seed);

struct TrainParams {
  int num_classes = 3;
  int local_epochs = 3;
  double learning_rate = 0.01;
  int batch_size = 16;
  uint64_t seed = 0;
};

// Parameter count: classes * (features + 1), weights then biases.
size_t ModelDimension(int num_classes, int num_features);

ModelVector LocalTrain(const DatasetShard& shard, const ModelVector& global,
                       const TrainParams& params);

struct Evaluation {
  double accuracy = 0;
  double loss = 0;
};
Evaluation Evaluate(const ModelVector& model, const DatasetShard& data, int num_classes);

struct DpConfig {
  bool enabled = false;
  double epsilon = 1.0;
  double delta = 1e-5;
  double clip_norm = 1.0;
  int honest_count = 1;  // t: parties the total noise is split across
};

void Validate(const DpConfig& cfg);
// C * sqrt(2 ln(1.25 / delta)) / epsilon
double SigmaTotal(const DpConfig& cfg);
double SigmaParty(const DpConfig& cfg);

double StandardNormal(Drbg& rng);

// Clips (model - reference) to L2 norm <= clip_norm and adds N(0, sigma_party^2)
// per coordinate. An empty reference clips the model itself. Identity when
// disabled.
ModelVector DpSmcNoise(const DpConfig& cfg, const ModelVector& model, Drbg& rng,
                       const std::vector<double>& reference = {});

std::string ModelHash(const ModelVector& model);

}  // namespace detrust::model

#endif  // DETRUST_MODEL_H_
