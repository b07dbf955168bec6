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

#include "detrust/participation.h"

#include <algorithm>
#include <map>
#include <set>

#include <gmpxx.h>

#include "detrust/bytes.h"
#include "detrust/errors.h"

namespace detrust::participation {
namespace {

int64_t Samples(const std::vector<int64_t>& counts, int party) {
  return counts.empty() ? 1 : counts.at(party - 1);
}

}  // namespace

ParticipationMatrix::ParticipationMatrix(int m, int n)
    : n_(n), rows_(m, std::vector<Rational>(n)) {}

ParticipationMatrix::ParticipationMatrix(std::vector<std::vector<Rational>> rows)
    : n_(rows.empty() ? 0 : static_cast<int>(rows.front().size())), rows_(std::move(rows)) {
  for (const auto& r : rows_) {
    if (static_cast<int>(r.size()) != n_) throw PreconditionError("ragged participation matrix");
  }
}

std::vector<Rational> ParticipationMatrix::column(int party) const {
  std::vector<Rational> out;
  out.reserve(rows_.size());
  for (const auto& r : rows_) out.push_back(r.at(party - 1));
  return out;
}

void ParticipationMatrix::set_column(int party, const std::vector<Rational>& col) {
  if (col.size() != rows_.size()) throw PreconditionError("column length differs from m");
  for (size_t i = 0; i < rows_.size(); ++i) rows_[i].at(party - 1) = col[i];
}

std::vector<int> ParticipationMatrix::Support(int round) const {
  std::vector<int> out;
  const auto& r = row(round);
  for (int j = 1; j <= n_; ++j) {
    if (!r[j - 1].is_zero()) out.push_back(j);
  }
  return out;
}

std::string ParticipationMatrix::Canonical() const { return MatrixToJson(*this).dump(); }

nlohmann::json MatrixToJson(const ParticipationMatrix& matrix) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 1; i <= matrix.m(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (const Rational& w : matrix.row(i)) row.push_back({w.num(), w.den()});
    rows.push_back(std::move(row));
  }
  return {{"m", matrix.m()}, {"n", matrix.n()}, {"rows", rows}};
}

ParticipationMatrix MatrixFromJson(const nlohmann::json& j) {
  try {
    const int m = j.at("m").get<int>();
    const int n = j.at("n").get<int>();
    const auto& rows = j.at("rows");
    if (!rows.is_array() || static_cast<int>(rows.size()) != m) {
      throw ProtocolError("matrix row count differs from m");
    }
    ParticipationMatrix out(m, n);
    for (int i = 0; i < m; ++i) {
      if (static_cast<int>(rows[i].size()) != n) throw ProtocolError("matrix row length differs from n");
      for (int k = 0; k < n; ++k) {
        const auto& pair = rows[i][k];
        Rational w(pair.at(0).get<int64_t>(), pair.at(1).get<int64_t>());
        if (w < Rational(0)) throw ProtocolError("negative weight in matrix");
        out.set(i + 1, k + 1, w);
      }
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed matrix: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ProtocolError(std::string("malformed matrix: ") + e.what());
  }
}

std::vector<Rational> FusionRow(int n, const std::vector<int>& support, FusionMode mode,
                                const std::vector<int64_t>& sample_counts) {
  std::vector<Rational> row(n);
  if (support.empty()) return row;
  if (mode == FusionMode::kAverage) {
    for (int j : support) row.at(j - 1) = Rational(1, static_cast<int64_t>(support.size()));
    return row;
  }
  int64_t total = 0;
  for (int j : support) total += Samples(sample_counts, j);
  for (int j : support) row.at(j - 1) = Rational(Samples(sample_counts, j), total);
  return row;
}

ParticipationMatrix FromSupports(int n, const std::vector<std::vector<int>>& supports,
                                 FusionMode mode, const std::vector<int64_t>& sample_counts) {
  std::vector<std::vector<Rational>> rows;
  for (const auto& s : supports) rows.push_back(FusionRow(n, s, mode, sample_counts));
  ParticipationMatrix out(static_cast<int>(supports.size()), n);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int j = 1; j <= n; ++j) out.set(static_cast<int>(i) + 1, j, rows[i][j - 1]);
  }
  return out;
}

void Renormalize(ParticipationMatrix& matrix, FusionMode mode,
                 const std::vector<int64_t>& sample_counts) {
  for (int i = 1; i <= matrix.m(); ++i) {
    const auto row = FusionRow(matrix.n(), matrix.Support(i), mode, sample_counts);
    for (int j = 1; j <= matrix.n(); ++j) matrix.set(i, j, row[j - 1]);
  }
}

TrustConfig MakeTrustConfig(std::vector<int> t_local, int t_bp) {
  TrustConfig trust;
  trust.t_g = t_local.empty() ? 2 : *std::max_element(t_local.begin(), t_local.end());
  trust.t_local = std::move(t_local);
  trust.t_bp = t_bp;
  return trust;
}

void Validate(const TrustConfig& trust) {
  if (trust.t_g < 2) throw ConfigError("t_g must be at least 2");
  if (trust.t_bp < 2) throw ConfigError("t_bp must be at least 2");
  for (int t : trust.t_local) {
    if (t > trust.t_g) throw ConfigError("t_g is below a local threshold");
  }
}

bool CheckBp(const ParticipationMatrix& matrix, int t_bp) {
  // Equivalence classes: parties with identical participation columns.
  std::map<std::vector<bool>, int> class_sizes;
  for (int j = 1; j <= matrix.n(); ++j) {
    std::vector<bool> pattern(matrix.m());
    for (int i = 1; i <= matrix.m(); ++i) pattern[i - 1] = matrix.Enrolled(i, j);
    ++class_sizes[pattern];
  }
  for (const auto& [pattern, size] : class_sizes) {
    const bool touched = std::find(pattern.begin(), pattern.end(), true) != pattern.end();
    if (touched && size < t_bp) return false;
  }
  return true;
}

bool RowsMeetThreshold(const ParticipationMatrix& matrix, int t_g) {
  for (int i = 1; i <= matrix.m(); ++i) {
    if (static_cast<int>(matrix.Support(i).size()) < t_g) return false;
  }
  return true;
}

bool RowWeightsConsistent(const ParticipationMatrix& matrix, FusionMode mode) {
  for (int i = 1; i <= matrix.m(); ++i) {
    Rational sum;
    std::optional<Rational> common;
    bool equal = true;
    for (const Rational& w : matrix.row(i)) {
      if (w.is_zero()) continue;
      sum = sum + w;
      if (common && !(*common == w)) equal = false;
      common = w;
    }
    if (!(sum == Rational(1))) return false;
    if (mode == FusionMode::kAverage && !equal) return false;
  }
  return true;
}

std::vector<int> DisaggregationRankTest(const ParticipationMatrix& matrix) {
  const int n = matrix.n();
  std::vector<std::vector<mpq_class>> rows;
  for (int i = 1; i <= matrix.m(); ++i) {
    std::vector<mpq_class> r(n);
    for (int j = 1; j <= n; ++j) r[j - 1] = matrix.Enrolled(i, j) ? 1 : 0;
    rows.push_back(std::move(r));
  }
  // Reduced row echelon form over Q.
  std::vector<int> pivot_cols;
  size_t rank = 0;
  for (int c = 0; c < n && rank < rows.size(); ++c) {
    size_t pivot = rank;
    while (pivot < rows.size() && rows[pivot][c] == 0) ++pivot;
    if (pivot == rows.size()) continue;
    std::swap(rows[rank], rows[pivot]);
    const mpq_class lead = rows[rank][c];
    for (auto& v : rows[rank]) v /= lead;
    for (size_t r = 0; r < rows.size(); ++r) {
      if (r == rank || rows[r][c] == 0) continue;
      const mpq_class factor = rows[r][c];
      for (int k = 0; k < n; ++k) rows[r][k] -= factor * rows[rank][k];
    }
    pivot_cols.push_back(c);
    ++rank;
  }
  std::vector<int> exposed;
  for (int j = 0; j < n; ++j) {
    std::vector<mpq_class> v(n);
    v[j] = 1;
    for (size_t r = 0; r < rank; ++r) {
      const mpq_class factor = v[pivot_cols[r]];
      if (factor == 0) continue;
      for (int k = 0; k < n; ++k) v[k] -= factor * rows[r][k];
    }
    if (std::all_of(v.begin(), v.end(), [](const mpq_class& x) { return x == 0; })) {
      exposed.push_back(j + 1);
    }
  }
  return exposed;
}

const char* VerdictName(VerdictKind kind) {
  switch (kind) {
    case VerdictKind::kAccept: return "accept";
    case VerdictKind::kRefuse: return "refuse";
    case VerdictKind::kViolateBp: return "violate-BP";
    case VerdictKind::kSuggest: return "suggest";
  }
  return "?";
}

VerdictKind ParseVerdict(const std::string& name) {
  for (auto k : {VerdictKind::kAccept, VerdictKind::kRefuse, VerdictKind::kViolateBp,
                 VerdictKind::kSuggest}) {
    if (name == VerdictName(k)) return k;
  }
  throw ProtocolError("unknown verdict '" + name + "'");
}

const char* EnrollmentName(Enrollment e) {
  switch (e) {
    case Enrollment::kAny: return "any";
    case Enrollment::kAlways: return "always";
    case Enrollment::kNever: return "never";
  }
  return "?";
}

Enrollment ParseEnrollment(const std::string& name) {
  for (auto e : {Enrollment::kAny, Enrollment::kAlways, Enrollment::kNever}) {
    if (name == EnrollmentName(e)) return e;
  }
  throw ConfigError("unknown enrollment preference '" + name + "'");
}

std::vector<Rational> ExpectedColumn(const ParticipationMatrix& matrix, int party,
                                     const WeightPolicy& policy) {
  std::vector<Rational> col(matrix.m());
  for (int i = 1; i <= matrix.m(); ++i) {
    const bool enrolled = matrix.Enrolled(i, party);
    const bool wants = policy.enrollment == Enrollment::kAlways ||
                       (policy.enrollment == Enrollment::kAny && enrolled);
    if (!wants) continue;
    std::vector<int> support = matrix.Support(i);
    if (!enrolled) {
      support.insert(std::upper_bound(support.begin(), support.end(), party), party);
    }
    col[i - 1] = FusionRow(matrix.n(), support, policy.mode, policy.sample_counts)[party - 1];
  }
  return col;
}

InspectionVerdict PartyInspect(const ParticipationMatrix& matrix, int party,
                               const TrustConfig& trust,
                               const std::vector<Rational>& expected_column) {
  if (party < 1 || party > matrix.n()) throw PreconditionError("party not in matrix");
  const int own_threshold =
      trust.t_local.empty() ? trust.t_g : trust.t_local.at(party - 1);
  if (trust.t_g < own_threshold) return {VerdictKind::kRefuse, std::nullopt};
  if (!CheckBp(matrix, trust.t_bp)) return {VerdictKind::kViolateBp, std::nullopt};
  bool mismatch = false;
  for (int i = 1; i <= matrix.m(); ++i) {
    if (static_cast<int>(matrix.Support(i).size()) < trust.t_g) {
      return {VerdictKind::kRefuse, std::nullopt};
    }
    if (!(matrix.at(i, party) == expected_column.at(i - 1))) mismatch = true;
  }
  if (mismatch) return {VerdictKind::kSuggest, expected_column};
  return {VerdictKind::kAccept, std::nullopt};
}

ParticipationMatrix ProposeMatrix(int m, int n, const TrustConfig& trust, FusionMode mode,
                                  uint64_t seed, const std::vector<int64_t>& sample_counts,
                                  const ProposalConstraints& constraints) {
  if (m < 1 || n < 1) throw PreconditionError("matrix needs m, n >= 1");
  if (trust.t_g > n) {
    throw InfeasibleConstraints("t_g=" + std::to_string(trust.t_g) + " exceeds n=" +
                                std::to_string(n));
  }
  const std::set<int> excluded(constraints.excluded.begin(), constraints.excluded.end());
  const std::set<int> pinned(constraints.pinned.begin(), constraints.pinned.end());
  for (int j : pinned) {
    if (excluded.contains(j)) {
      throw InfeasibleConstraints("party " + std::to_string(j) + " both pinned and excluded");
    }
  }
  std::vector<int> free_parties;
  for (int j = 1; j <= n; ++j) {
    if (!excluded.contains(j) && !pinned.contains(j)) free_parties.push_back(j);
  }
  const int eligible = static_cast<int>(free_parties.size() + pinned.size());
  if (eligible < trust.t_g || eligible < trust.t_bp) {
    throw InfeasibleConstraints(std::to_string(eligible) + " eligible parties cannot meet t_g=" +
                                std::to_string(trust.t_g) + ", t_bp=" +
                                std::to_string(trust.t_bp));
  }
  Drbg rng(seed);
  for (size_t i = free_parties.size(); i > 1; --i) {
    std::swap(free_parties[i - 1], free_parties[rng.NextU64() % i]);
  }

  std::vector<std::vector<int>> batches;
  size_t next = 0;
  if (!pinned.empty()) {
    std::vector<int> anchor(pinned.begin(), pinned.end());
    while (static_cast<int>(anchor.size()) < trust.t_bp) anchor.push_back(free_parties[next++]);
    batches.push_back(std::move(anchor));
  }
  const int rest = static_cast<int>(free_parties.size() - next);
  const int rest_batches = rest / trust.t_bp;
  if (rest_batches == 0) {
    if (rest > 0) {
      // Too few to stand alone: fold into the anchor batch (which exists,
      // since eligible >= t_bp).
      for (; next < free_parties.size(); ++next) batches.front().push_back(free_parties[next]);
    }
  } else {
    const size_t first_free_batch = batches.size();
    batches.resize(first_free_batch + rest_batches);
    for (int k = 0; next < free_parties.size(); ++next, ++k) {
      batches[first_free_batch + k % rest_batches].push_back(free_parties[next]);
    }
  }

  const bool anchored = !pinned.empty();
  std::vector<std::vector<int>> supports;
  for (int i = 0; i < m; ++i) {
    std::vector<int> chosen;
    for (int attempt = 0; attempt < 64 && chosen.empty(); ++attempt) {
      std::vector<int> pick;
      for (size_t b = 0; b < batches.size(); ++b) {
        const bool take = (anchored && b == 0) || (rng.NextU64() & 1);
        if (take) pick.insert(pick.end(), batches[b].begin(), batches[b].end());
      }
      if (static_cast<int>(pick.size()) >= trust.t_g) chosen = std::move(pick);
    }
    if (chosen.empty()) {
      for (const auto& b : batches) chosen.insert(chosen.end(), b.begin(), b.end());
    }
    std::sort(chosen.begin(), chosen.end());
    supports.push_back(std::move(chosen));
  }
  return FromSupports(n, supports, mode, sample_counts);
}

}  // namespace detrust::participation
