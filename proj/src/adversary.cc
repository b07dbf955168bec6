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


#include "detrust/adversary.h"

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "detrust/errors.h"

namespace detrust::adversary {

using participation::FromSupports;
using participation::ParticipationMatrix;
using participation::VerdictKind;

namespace {

std::string RowText(const ParticipationMatrix& matrix, int round) {
  std::string out = "(";
  for (int j = 1; j <= matrix.n(); ++j) {
    if (j > 1) out += ",";
    out += matrix.Enrolled(round, j) ? "1" : "0";
  }
  return out + ")";
}

std::vector<int> Without(int n, int skip) {
  std::vector<int> out;
  for (int j = 1; j <= n; ++j) {
    if (j != skip) out.push_back(j);
  }
  return out;
}

// Coefficients c with sum_i c_i * row_i == e_party, if the system is
// consistent. Exact arithmetic over the matrix weights.
std::optional<std::vector<double>> SolveCombination(const ParticipationMatrix& matrix,
                                                    int party) {
  const int m = matrix.m();
  const int n = matrix.n();
  // n equations (one per party column), m unknowns, augmented with e_party.
  std::vector<std::vector<mpq_class>> a(n, std::vector<mpq_class>(m + 1));
  for (int j = 1; j <= n; ++j) {
    for (int i = 1; i <= m; ++i) {
      const Rational w = matrix.at(i, j);
      a[j - 1][i - 1] = mpq_class(mpz_class(std::to_string(w.num())),
                                  mpz_class(std::to_string(w.den())));
      a[j - 1][i - 1].canonicalize();
    }
    a[j - 1][m] = j == party ? 1 : 0;
  }
  std::vector<int> pivot_col;
  int row = 0;
  for (int col = 0; col < m && row < n; ++col) {
    int sel = -1;
    for (int r = row; r < n; ++r) {
      if (a[r][col] != 0) {
        sel = r;
        break;
      }
    }
    if (sel < 0) continue;
    std::swap(a[row], a[sel]);
    const mpq_class inv = 1 / a[row][col];
    for (auto& v : a[row]) v *= inv;
    for (int r = 0; r < n; ++r) {
      if (r == row || a[r][col] == 0) continue;
      const mpq_class f = a[r][col];
      for (int c = col; c <= m; ++c) a[r][c] -= f * a[row][c];
    }
    pivot_col.push_back(col);
    ++row;
  }
  for (int r = row; r < n; ++r) {
    if (a[r][m] != 0) return std::nullopt;
  }
  std::vector<double> coeffs(m, 0.0);
  for (int r = 0; r < row; ++r) coeffs[pivot_col[r]] = a[r][m].get_d();
  return coeffs;
}

}  // namespace

const char* AttackName(AttackKind kind) {
  switch (kind) {
    case AttackKind::kIsolationNoCollusion: return "IsolationNoCollusion";
    case AttackKind::kIsolationWithCollusion: return "IsolationWithCollusion";
    case AttackKind::kDisaggregation: return "Disaggregation";
    case AttackKind::kReplay: return "Replay";
    case AttackKind::kTwoFacedMatrix: return "TwoFacedMatrix";
  }
  return "?";
}

const char* OutcomeName(Outcome outcome) {
  switch (outcome) {
    case Outcome::kBlockedByInspection: return "BlockedByInspection";
    case Outcome::kBlockedByKeyBinding: return "BlockedByKeyBinding";
    case Outcome::kBlockedByLabel: return "BlockedByLabel";
    case Outcome::kNoExposure: return "NoExposure";
    case Outcome::kSucceeded: return "Succeeded";
  }
  return "?";
}

nlohmann::json AttackReport::ToJson() const {
  return {{"attack", AttackName(attack)},
          {"outcome", OutcomeName(outcome)},
          {"aggregate_correct", aggregate_correct},
          {"evidence", evidence}};
}

Harness::Harness(HarnessOptions options, std::optional<GroupParams> group)
    : options_(std::move(options)),
      pp_(dmcfe::Setup(group ? *group
                             : SetupGroup(options_.group_lambda,
                                          {.seed = options_.seed, .allow_insecure = true}),
                       options_.n, options_.encoding.PayloadBound(),
                       options_.encoding.MaxWeightScale(encoding::FusionMode::kAverage))),
      solver_(pp_.group, pp_.dlog_bound) {
  trust_ = participation::MakeTrustConfig(std::vector<int>(options_.n, options_.t_g),
                                          options_.t_bp);
  Drbg rng(options_.seed);
  Drbg key_rng = rng.Fork("keys");
  keys_ = dmcfe::KeygenCeremony(pp_, key_rng);
  parties_.reserve(options_.n);
  for (int j = 1; j <= options_.n; ++j) {
    dtc::PartyOptions po;
    po.party_id = j;
    po.t_local = options_.t_g;
    po.t_bp = options_.t_bp;
    po.encoding = options_.encoding;
    parties_.emplace_back(po, pp_, &keys_[j - 1]);
  }
  Drbg data_rng = rng.Fork("updates");
  updates_.assign(options_.m, std::vector<std::vector<double>>(options_.n));
  for (auto& round : updates_) {
    for (auto& u : round) {
      u.resize(options_.dimension);
      for (double& v : u) v = 2.0 * data_rng.NextDouble() - 1.0;
    }
  }
}

const std::vector<double>& Harness::Update(int round, int party) const {
  return updates_.at(round - 1).at(party - 1);
}

std::vector<participation::InspectionVerdict> Harness::ShowTo(
    const ParticipationMatrix& matrix, const std::vector<int>& parties,
    std::vector<std::string>& evidence) {
  std::vector<participation::InspectionVerdict> out;
  for (int j : parties) {
    out.push_back(parties_[j - 1].Inspect(matrix, trust_.t_g));
    evidence.push_back("P" + std::to_string(j) + " verdict " +
                       participation::VerdictName(out.back().kind));
  }
  return out;
}

std::vector<dmcfe::PartialDecryptionKey> Harness::Fragments(const ParticipationMatrix& matrix,
                                                            int party, bool colluding) const {
  if (!colluding) return parties_[party - 1].GenerateFragments(matrix);
  std::vector<dmcfe::PartialDecryptionKey> out;
  for (int i = 1; i <= matrix.m(); ++i) {
    const auto b = dtc::BindRow(matrix, i, options_.encoding, encoding::FusionMode::kAverage);
    out.push_back(dmcfe::KeyDerShare(pp_, keys_[party - 1], b.weights.weights, b.fusion_tag));
  }
  return out;
}

dmcfe::Ciphertext Harness::EncryptUpdate(int party, const std::vector<double>& update,
                                         int round) const {
  const auto x = encoding::Encode(options_.encoding, update);
  const Bytes label = ToBytes("round-" + std::to_string(round));
  return dmcfe::Encrypt(pp_, keys_[party - 1], x, label);
}

std::vector<double> Harness::Quantized(const std::vector<double>& update) const {
  const auto x = encoding::Encode(options_.encoding, update);
  return encoding::Decode(options_.encoding, x, 1);
}

std::vector<double> Harness::Decode(const ParticipationMatrix& matrix, int round,
                                    const std::vector<int64_t>& raw) const {
  const auto b = dtc::BindRow(matrix, round, options_.encoding, encoding::FusionMode::kAverage);
  return encoding::Decode(options_.encoding, raw, b.weights.total_weight_scale);
}

bool Harness::Close(const std::vector<double>& a, const std::vector<double>& b) const {
  if (a.size() != b.size()) return false;
  const double tol = 1.0 / static_cast<double>(options_.encoding.Scale());
  for (size_t k = 0; k < a.size(); ++k) {
    if (std::abs(a[k] - b[k]) > tol) return false;
  }
  return true;
}

AttackReport Harness::Isolation(int target, const std::vector<int>& colluders) {
  AttackReport report;
  report.attack = colluders.empty() ? AttackKind::kIsolationNoCollusion
                                    : AttackKind::kIsolationWithCollusion;
  const std::set<int> bad(colluders.begin(), colluders.end());
  std::vector<int> support(bad.begin(), bad.end());
  support.insert(std::upper_bound(support.begin(), support.end(), target), target);
  const ParticipationMatrix crafted = FromSupports(
      options_.n, std::vector<std::vector<int>>(options_.m, support), encoding::FusionMode::kAverage);
  report.evidence.push_back("proposed row " + RowText(crafted, 1) + " with " +
                            std::to_string(bad.size()) + " colluders, t_g=" +
                            std::to_string(trust_.t_g));

  std::vector<int> honest;
  for (int j = 1; j <= options_.n; ++j) {
    if (!bad.contains(j)) honest.push_back(j);
  }
  for (const auto& v : ShowTo(crafted, honest, report.evidence)) {
    if (v.kind != VerdictKind::kAccept) {
      report.outcome = Outcome::kBlockedByInspection;
      return report;
    }
  }

  try {
    std::vector<dmcfe::PartialDecryptionKey> row;
    for (int j = 1; j <= options_.n; ++j) row.push_back(Fragments(crafted, j, bad.contains(j))[0]);
    const auto dk = dmcfe::KeyDerComb(pp_, row);
    std::vector<dmcfe::Ciphertext> cts;
    for (int j : support) cts.push_back(EncryptUpdate(j, Update(1, j), 1));
    const auto b = dtc::BindRow(crafted, 1, options_.encoding, encoding::FusionMode::kAverage);
    const auto raw = dmcfe::Decrypt(pp_, dk, cts, b.weights.weights, ToBytes("round-1"), solver_);
    const std::vector<double> mean = Decode(crafted, 1, raw);

    std::vector<double> expected(options_.dimension, 0.0);
    for (int j : support) {
      const auto q = Quantized(Update(1, j));
      for (size_t k = 0; k < q.size(); ++k) expected[k] += q[k] / support.size();
    }
    report.aggregate_correct = Close(mean, expected);

    // Strip the colluders' known contributions from the sum.
    std::vector<double> recovered(options_.dimension);
    for (size_t k = 0; k < recovered.size(); ++k) recovered[k] = mean[k] * support.size();
    for (int c : bad) {
      const auto q = Quantized(Update(1, c));
      for (size_t k = 0; k < q.size(); ++k) recovered[k] -= q[k];
    }
    if (Close(recovered, Update(1, target))) {
      report.outcome = Outcome::kSucceeded;
      report.evidence.push_back("target P" + std::to_string(target) +
                                " update recovered by subtracting colluders");
    } else {
      report.outcome = Outcome::kNoExposure;
      report.evidence.push_back("aggregate decrypted; target update not isolated");
    }
  } catch (const Error& e) {
    report.outcome = Outcome::kNoExposure;
    report.evidence.push_back(std::string(e.kind()) + ": " + e.what());
  }
  return report;
}

std::vector<std::pair<int, Outcome>> Harness::CollusionBoundary(int target) {
  std::vector<std::pair<int, Outcome>> out;
  const std::vector<int> others = Without(options_.n, target);
  for (size_t c = 0; c <= others.size(); ++c) {
    const std::vector<int> colluders(others.begin(), others.begin() + c);
    out.emplace_back(static_cast<int>(c), Isolation(target, colluders).outcome);
  }
  return out;
}

AttackReport Harness::Disaggregation(const ParticipationMatrix& crafted) {
  AttackReport report;
  report.attack = AttackKind::kDisaggregation;
  if (crafted.n() != options_.n || crafted.m() > options_.m) {
    report.outcome = Outcome::kNoExposure;
    report.evidence.push_back("crafted matrix does not fit the federation");
    return report;
  }
  for (int i = 1; i <= crafted.m(); ++i) {
    report.evidence.push_back("round " + std::to_string(i) + " row " + RowText(crafted, i));
  }
  std::vector<int> everyone = Without(options_.n, 0);
  for (const auto& v : ShowTo(crafted, everyone, report.evidence)) {
    if (v.kind != VerdictKind::kAccept) {
      report.outcome = Outcome::kBlockedByInspection;
      return report;
    }
  }

  try {
    std::vector<std::vector<dmcfe::PartialDecryptionKey>> columns;
    for (int j : everyone) columns.push_back(Fragments(crafted, j, false));
    std::vector<std::vector<double>> aggregates;
    bool all_correct = true;
    for (int i = 1; i <= crafted.m(); ++i) {
      std::vector<dmcfe::PartialDecryptionKey> row;
      for (const auto& col : columns) row.push_back(col[i - 1]);
      const auto dk = dmcfe::KeyDerComb(pp_, row);
      std::vector<dmcfe::Ciphertext> cts;
      std::vector<double> expected(options_.dimension, 0.0);
      const auto support = crafted.Support(i);
      for (int j : support) {
        cts.push_back(EncryptUpdate(j, Update(1, j), i));
        const auto q = Quantized(Update(1, j));
        for (size_t k = 0; k < q.size(); ++k) expected[k] += crafted.at(i, j).ToDouble() * q[k];
      }
      const auto b = dtc::BindRow(crafted, i, options_.encoding, encoding::FusionMode::kAverage);
      const auto raw = dmcfe::Decrypt(pp_, dk, cts, b.weights.weights,
                                      ToBytes("round-" + std::to_string(i)), solver_);
      aggregates.push_back(Decode(crafted, i, raw));
      all_correct = all_correct && Close(aggregates.back(), expected);
    }
    report.aggregate_correct = all_correct;

    const auto exposed = participation::DisaggregationRankTest(crafted);
    std::string listed;
    for (int j : exposed) listed += (listed.empty() ? "" : ",") + std::to_string(j);
    report.evidence.push_back("rank test exposes {" + listed + "}");
    report.outcome = Outcome::kNoExposure;
    for (int j : everyone) {
      const auto coeffs = SolveCombination(crafted, j);
      if (!coeffs) continue;
      std::vector<double> est(options_.dimension, 0.0);
      for (size_t i = 0; i < coeffs->size(); ++i) {
        for (size_t k = 0; k < est.size(); ++k) est[k] += (*coeffs)[i] * aggregates[i][k];
      }
      if (Close(est, Update(1, j))) {
        report.outcome = Outcome::kSucceeded;
        report.evidence.push_back("P" + std::to_string(j) + " update recovered from aggregates");
      }
    }
  } catch (const Error& e) {
    report.outcome = Outcome::kNoExposure;
    report.evidence.push_back(std::string(e.kind()) + ": " + e.what());
  }
  return report;
}

AttackReport Harness::Replay(int i1, int i2, const std::vector<int>& replayed,
                             const std::vector<int>& support) {
  AttackReport report;
  report.attack = AttackKind::kReplay;
  if (!(1 <= i1 && i1 < i2 && i2 <= options_.m)) {
    report.outcome = Outcome::kNoExposure;
    report.evidence.push_back("replay needs 1 <= i1 < i2 <= m");
    return report;
  }
  const ParticipationMatrix matrix = FromSupports(
      options_.n, std::vector<std::vector<int>>(options_.m, support), encoding::FusionMode::kAverage);
  report.evidence.push_back("rounds " + std::to_string(i1) + " and " + std::to_string(i2) +
                            " share row " + RowText(matrix, i2));
  for (const auto& v : ShowTo(matrix, Without(options_.n, 0), report.evidence)) {
    if (v.kind != VerdictKind::kAccept) {
      report.outcome = Outcome::kBlockedByInspection;
      return report;
    }
  }
  const std::set<int> replay_set(replayed.begin(), replayed.end());
  const Bytes label2 = ToBytes("round-" + std::to_string(i2));
  std::vector<dmcfe::Ciphertext> cts;
  std::vector<double> expected(options_.dimension, 0.0);
  for (int j : support) {
    const int src = replay_set.contains(j) ? i1 : i2;
    dmcfe::Ciphertext ct = EncryptUpdate(j, Update(src, j), src);
    ct.label = label2;  // relabelled; the masks still belong to round i1
    cts.push_back(std::move(ct));
    const auto q = Quantized(Update(src, j));
    for (size_t k = 0; k < q.size(); ++k) expected[k] += q[k] / support.size();
  }
  if (!replay_set.empty()) {
    std::string listed;
    for (int j : replay_set) listed += (listed.empty() ? "" : ",") + std::to_string(j);
    report.evidence.push_back("substituted round-" + std::to_string(i1) +
                              " ciphertexts of {" + listed + "}");
  }
  try {
    std::vector<dmcfe::PartialDecryptionKey> row;
    for (int j = 1; j <= options_.n; ++j) row.push_back(Fragments(matrix, j, false)[i2 - 1]);
    const auto dk = dmcfe::KeyDerComb(pp_, row);
    const auto b = dtc::BindRow(matrix, i2, options_.encoding, encoding::FusionMode::kAverage);
    const auto raw = dmcfe::Decrypt(pp_, dk, cts, b.weights.weights, label2, solver_);
    const auto mean = Decode(matrix, i2, raw);
    report.aggregate_correct = Close(mean, expected);
    if (report.aggregate_correct && !replay_set.empty()) {
      report.outcome = Outcome::kSucceeded;
      report.evidence.push_back("mixed-round aggregate decrypted");
    } else {
      report.outcome = Outcome::kNoExposure;
      report.evidence.push_back(replay_set.empty() ? "no substitution; honest decryption"
                                                   : "decryption returned garbage");
    }
  } catch (const DlogNotFound& e) {
    report.outcome = Outcome::kBlockedByLabel;
    report.evidence.push_back(std::string("DlogNotFound: ") + e.what());
  } catch (const Error& e) {
    report.outcome = Outcome::kNoExposure;
    report.evidence.push_back(std::string(e.kind()) + ": " + e.what());
  }
  return report;
}

AttackReport Harness::TwoFaced(int target, int manipulated) {
  AttackReport report;
  report.attack = AttackKind::kTwoFacedMatrix;
  const std::vector<int> all = Without(options_.n, 0);
  const ParticipationMatrix valid = FromSupports(
      options_.n, std::vector<std::vector<int>>(options_.m, all), encoding::FusionMode::kAverage);
  const ParticipationMatrix manip =
      manipulated == 0
          ? valid
          : FromSupports(options_.n,
                         std::vector<std::vector<int>>(options_.m, Without(options_.n, manipulated)),
                         encoding::FusionMode::kAverage);
  report.evidence.push_back("P" + std::to_string(target) + " shown " + RowText(valid, 1) +
                            ", others shown " + RowText(manip, 1));

  for (int j : all) {
    std::vector<std::string> ev;
    const auto v = ShowTo(j == target ? valid : manip, {j}, ev);
    report.evidence.insert(report.evidence.end(), ev.begin(), ev.end());
    if (v[0].kind != VerdictKind::kAccept) {
      report.outcome = Outcome::kBlockedByInspection;
      return report;
    }
  }
  std::vector<dmcfe::PartialDecryptionKey> row;
  for (int j : all) row.push_back(Fragments(j == target ? valid : manip, j, false)[0]);
  try {
    dmcfe::KeyDerComb(pp_, row);
    report.evidence.push_back("fragments combine under one tag");
  } catch (const Error& e) {
    report.evidence.push_back(std::string(e.kind()) + ": " + e.what());
  }
  // Combine by hand, ignoring the tag check, and try both faces.
  dmcfe::FunctionalDecryptionKey dk;
  dk.d1 = 0;
  dk.d2 = 0;
  for (const auto& f : row) {
    dk.d1 += f.d1;
    dk.d2 += f.d2;
  }
  dk.d1 %= pp_.group.q;
  dk.d2 %= pp_.group.q;

  bool any_blocked = false;
  report.outcome = Outcome::kNoExposure;
  for (const ParticipationMatrix* face : {&manip, &valid}) {
    const auto b = dtc::BindRow(*face, 1, options_.encoding, encoding::FusionMode::kAverage);
    dk.fusion_tag = b.fusion_tag;
    std::vector<dmcfe::Ciphertext> cts;
    std::vector<double> expected(options_.dimension, 0.0);
    const auto support = face->Support(1);
    for (int j : support) {
      cts.push_back(EncryptUpdate(j, Update(1, j), 1));
      const auto q = Quantized(Update(1, j));
      for (size_t k = 0; k < q.size(); ++k) expected[k] += q[k] / support.size();
    }
    try {
      const auto raw = dmcfe::Decrypt(pp_, dk, cts, b.weights.weights, ToBytes("round-1"), solver_);
      if (Close(Decode(*face, 1, raw), expected)) {
        report.aggregate_correct = true;
        if (manipulated != 0) report.outcome = Outcome::kSucceeded;
        report.evidence.push_back("decrypted under " + RowText(*face, 1));
      }
    } catch (const DlogNotFound& e) {
      any_blocked = true;
      report.evidence.push_back("DlogNotFound under " + RowText(*face, 1));
    }
    if (manipulated == 0) break;
  }
  if (report.outcome != Outcome::kSucceeded && any_blocked) {
    report.outcome = Outcome::kBlockedByKeyBinding;
  }
  return report;
}

}  // namespace detrust::adversary
