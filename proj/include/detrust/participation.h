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

#ifndef DETRUST_PARTICIPATION_H_
#define DETRUST_PARTICIPATION_H_

// The participation matrix V (rounds x parties, fusion weights), the batch
// partitioning check, the linear-algebra exposure test, and the per-party
// inspection that backs the trust negotiation. Party ids are 1-based.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "detrust/encoding.h"
#include "detrust/rational.h"
#include "json.hpp"

namespace detrust::participation {

using encoding::FusionMode;

class ParticipationMatrix {
 public:
  ParticipationMatrix() = default;
  ParticipationMatrix(int m, int n);
  explicit ParticipationMatrix(std::vector<std::vector<Rational>> rows);

  int m() const { return static_cast<int>(rows_.size()); }
  int n() const { return n_; }

  const std::vector<Rational>& row(int round) const { return rows_.at(round - 1); }
  const Rational& at(int round, int party) const { return rows_.at(round - 1).at(party - 1); }
  void set(int round, int party, Rational w) { rows_.at(round - 1).at(party - 1) = w; }

  std::vector<Rational> column(int party) const;
  void set_column(int party, const std::vector<Rational>& col);

  // Parties with a nonzero weight in `round`, ascending.
  std::vector<int> Support(int round) const;
  bool Enrolled(int round, int party) const { return !at(round, party).is_zero(); }

  // Compact JSON dump; byte-equality on this string is matrix equality.
  std::string Canonical() const;

  bool operator==(const ParticipationMatrix& o) const { return n_ == o.n_ && rows_ == o.rows_; }

 private:
  int n_ = 0;
  std::vector<std::vector<Rational>> rows_;
};

nlohmann::json MatrixToJson(const ParticipationMatrix& matrix);
// Throws ProtocolError on shape or value errors.
ParticipationMatrix MatrixFromJson(const nlohmann::json& j);

// Builds a matrix whose rows carry fusion weights for the given supports.
// Average mode: 1/|S| on S. Weighted mode: sample-proportional on S.
std::vector<Rational> FusionRow(int n, const std::vector<int>& support, FusionMode mode,
                                const std::vector<int64_t>& sample_counts);
ParticipationMatrix FromSupports(int n, const std::vector<std::vector<int>>& supports,
                                 FusionMode mode, const std::vector<int64_t>& sample_counts = {});
// Recomputes every row's weights from its support.
void Renormalize(ParticipationMatrix& matrix, FusionMode mode,
                 const std::vector<int64_t>& sample_counts = {});

struct TrustConfig {
  std::vector<int> t_local;  // index j-1 holds party j's threshold
  int t_g = 2;
  int t_bp = 2;
};

// t_g = max of local thresholds.
TrustConfig MakeTrustConfig(std::vector<int> t_local, int t_bp = 2);
void Validate(const TrustConfig& trust);

bool CheckBp(const ParticipationMatrix& matrix, int t_bp);
bool RowsMeetThreshold(const ParticipationMatrix& matrix, int t_g);
// Weighted rows sum to 1; average rows additionally carry equal weights.
bool RowWeightsConsistent(const ParticipationMatrix& matrix, FusionMode mode);

// Parties j whose indicator e_j lies in the rational row space of the 0/1
// support rows, i.e. whose contribution is linearly recoverable.
std::vector<int> DisaggregationRankTest(const ParticipationMatrix& matrix);

enum class VerdictKind { kAccept, kRefuse, kViolateBp, kSuggest };
const char* VerdictName(VerdictKind kind);
VerdictKind ParseVerdict(const std::string& name);

struct InspectionVerdict {
  VerdictKind kind = VerdictKind::kAccept;
  std::optional<std::vector<Rational>> suggested_column;
};

// How a party judges its own column.
enum class Enrollment { kAny, kAlways, kNever };
const char* EnrollmentName(Enrollment e);
Enrollment ParseEnrollment(const std::string& name);

struct WeightPolicy {
  FusionMode mode = FusionMode::kAverage;
  Enrollment enrollment = Enrollment::kAny;
  // Public per-party sample counts, used in weighted mode. Empty = all 1.
  std::vector<int64_t> sample_counts;
};

// The column the party would accept given the other parties' enrollment.
std::vector<Rational> ExpectedColumn(const ParticipationMatrix& matrix, int party,
                                     const WeightPolicy& policy);

// Checks in priority order: own threshold vs t_g, BP, then each row.
InspectionVerdict PartyInspect(const ParticipationMatrix& matrix, int party,
                               const TrustConfig& trust,
                               const std::vector<Rational>& expected_column);

struct ProposalConstraints {
  // Parties that must be enrolled in every round.
  std::vector<int> pinned;
  // Parties that must never be enrolled.
  std::vector<int> excluded;
};

// Deterministic in `seed`. Passes CheckBp and RowsMeetThreshold by
// construction; throws InfeasibleConstraints when that cannot be done.
ParticipationMatrix ProposeMatrix(int m, int n, const TrustConfig& trust, FusionMode mode,
                                  uint64_t seed,
                                  const std::vector<int64_t>& sample_counts = {},
                                  const ProposalConstraints& constraints = {});

}  // namespace detrust::participation

#endif  // DETRUST_PARTICIPATION_H_
