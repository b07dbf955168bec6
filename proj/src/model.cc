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

#include "detrust/model.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "detrust/errors.h"

namespace detrust::model {

DatasetShard LoadCsv(const std::string& path, int party_id) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset " + path);
  DatasetShard shard;
  shard.party_id = party_id;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        cells.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (cells.size() < 2) throw ConfigError(path + ":" + std::to_string(line_no) + ": too few columns");
    const int features = static_cast<int>(cells.size()) - 1;
    if (shard.num_features == 0) shard.num_features = features;
    if (features != shard.num_features) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": column count changed");
    }
    const double label = cells.back();
    if (label != std::floor(label) || label < 0) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": label must be a non-negative integer");
    }
    shard.features.insert(shard.features.end(), cells.begin(), cells.end() - 1);
    shard.labels.push_back(static_cast<int>(label));
  }
  return shard;
}

void WriteCsv(const DatasetShard& shard, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out.precision(17);
  for (size_t r = 0; r < shard.rows(); ++r) {
    for (int f = 0; f < shard.num_features; ++f) out << shard.row(r)[f] << ",";
    out << shard.labels[r] << "\n";
  }
}

double StandardNormal(Drbg& rng) {
  // Box-Muller; u1 in (0, 1].
  const double u1 = 1.0 - rng.NextDouble();
  const double u2 = rng.NextDouble();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Federation MakeBlobFederation(const BlobSpec& spec, int n, uint64_t seed) {
  Drbg rng(seed);
  std::vector<std::vector<double>> centers(spec.num_classes,
                                           std::vector<double>(spec.num_features));
  for (auto& c : centers) {
    for (double& x : c) x = (2.0 * rng.NextDouble() - 1.0) * spec.center_spread;
  }
  auto sample = [&](DatasetShard& shard, int count) {
    shard.num_features = spec.num_features;
    for (int s = 0; s < count; ++s) {
      const int label = static_cast<int>(rng.NextU64() % spec.num_classes);
      for (int f = 0; f < spec.num_features; ++f) {
        shard.features.push_back(centers[label][f] + spec.noise_std * StandardNormal(rng));
      }
      shard.labels.push_back(label);
    }
  };
  Federation fed;
  fed.num_classes = spec.num_classes;
  for (int j = 1; j <= n; ++j) {
    DatasetShard shard;
    shard.party_id = j;
    sample(shard, spec.samples_per_party);
    fed.shards.push_back(std::move(shard));
  }
  sample(fed.test, spec.test_samples);
  return fed;
}

size_t ModelDimension(int num_classes, int num_features) {
  return static_cast<size_t>(num_classes) * (num_features + 1);
}

namespace {

// Softmax probabilities for one row.
void Forward(const std::vector<double>& w, int classes, int features, const double* x,
             std::vector<double>& probs) {
  const size_t bias = static_cast<size_t>(classes) * features;
  double max_logit = -INFINITY;
  for (int c = 0; c < classes; ++c) {
    double z = w[bias + c];
    for (int f = 0; f < features; ++f) z += w[c * features + f] * x[f];
    probs[c] = z;
    max_logit = std::max(max_logit, z);
  }
  double sum = 0;
  for (int c = 0; c < classes; ++c) {
    probs[c] = std::exp(probs[c] - max_logit);
    sum += probs[c];
  }
  for (int c = 0; c < classes; ++c) probs[c] /= sum;
}

}  // namespace

ModelVector LocalTrain(const DatasetShard& shard, const ModelVector& global,
                       const TrainParams& params) {
  const int classes = params.num_classes;
  const int features = shard.num_features;
  if (global.values.size() != ModelDimension(classes, features)) {
    throw DimensionMismatch("model has " + std::to_string(global.values.size()) +
                            " parameters, shard needs " +
                            std::to_string(ModelDimension(classes, features)));
  }
  ModelVector out = global;
  if (params.local_epochs <= 0 || shard.rows() == 0) return out;
  std::vector<double>& w = out.values;
  Drbg rng(params.seed);
  std::vector<size_t> order(shard.rows());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> probs(classes);
  std::vector<double> grad(w.size());
  const size_t bias = static_cast<size_t>(classes) * features;
  const size_t batch = static_cast<size_t>(std::max(1, params.batch_size));
  for (int epoch = 0; epoch < params.local_epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.NextU64() % i]);
    for (size_t start = 0; start < order.size(); start += batch) {
      const size_t end = std::min(order.size(), start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (size_t k = start; k < end; ++k) {
        const double* x = shard.row(order[k]);
        const int y = shard.labels[order[k]];
        if (y < 0 || y >= classes) throw DimensionMismatch("label outside class range");
        Forward(w, classes, features, x, probs);
        for (int c = 0; c < classes; ++c) {
          const double err = probs[c] - (c == y ? 1.0 : 0.0);
          for (int f = 0; f < features; ++f) grad[c * features + f] += err * x[f];
          grad[bias + c] += err;
        }
      }
      const double step = params.learning_rate / static_cast<double>(end - start);
      for (size_t p = 0; p < w.size(); ++p) w[p] -= step * grad[p];
    }
  }
  return out;
}

Evaluation Evaluate(const ModelVector& model, const DatasetShard& data, int num_classes) {
  const int features = data.num_features;
  if (model.values.size() != ModelDimension(num_classes, features)) {
    throw DimensionMismatch("model does not match dataset arity");
  }
  Evaluation ev;
  if (data.rows() == 0) return ev;
  std::vector<double> probs(num_classes);
  size_t correct = 0;
  double loss = 0;
  for (size_t r = 0; r < data.rows(); ++r) {
    Forward(model.values, num_classes, features, data.row(r), probs);
    const int pred = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    if (pred == data.labels[r]) ++correct;
    loss -= std::log(std::max(probs[data.labels[r]], 1e-300));
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(data.rows());
  ev.loss = loss / static_cast<double>(data.rows());
  return ev;
}

void Validate(const DpConfig& cfg) {
  if (!cfg.enabled) return;
  if (!(cfg.epsilon > 0)) throw ConfigError("DP epsilon must be positive");
  if (!(cfg.delta > 0 && cfg.delta < 1)) throw ConfigError("DP delta must be in (0, 1)");
  if (!(cfg.clip_norm > 0)) throw ConfigError("DP clip norm must be positive");
  if (cfg.honest_count < 1) throw ConfigError("DP honest count must be >= 1");
}

double SigmaTotal(const DpConfig& cfg) {
  return cfg.clip_norm * std::sqrt(2.0 * std::log(1.25 / cfg.delta)) / cfg.epsilon;
}

double SigmaParty(const DpConfig& cfg) {
  return SigmaTotal(cfg) / std::sqrt(static_cast<double>(cfg.honest_count));
}

ModelVector DpSmcNoise(const DpConfig& cfg, const ModelVector& model, Drbg& rng,
                       const std::vector<double>& reference) {
  if (!cfg.enabled) return model;
  if (!reference.empty() && reference.size() != model.values.size()) {
    throw DimensionMismatch("DP reference differs in dimension");
  }
  ModelVector out = model;
  std::vector<double> delta(model.values.size());
  double norm_sq = 0;
  for (size_t k = 0; k < delta.size(); ++k) {
    delta[k] = model.values[k] - (reference.empty() ? 0.0 : reference[k]);
    norm_sq += delta[k] * delta[k];
  }
  const double norm = std::sqrt(norm_sq);
  const double factor = norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;
  const double sigma = SigmaParty(cfg);
  for (size_t k = 0; k < delta.size(); ++k) {
    const double base = reference.empty() ? 0.0 : reference[k];
    out.values[k] = base + delta[k] * factor + sigma * StandardNormal(rng);
  }
  return out;
}

std::string ModelHash(const ModelVector& model) {
  Bytes raw(model.values.size() * sizeof(double));
  std::memcpy(raw.data(), model.values.data(), raw.size());
  const Digest d = Sha256(raw);
  return HexEncode(std::span<const uint8_t>(d.data(), 16));
}

}  // namespace detrust::model
