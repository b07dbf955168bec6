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

#ifndef DETRUST_ERRORS_H_
#define DETRUST_ERRORS_H_

#include <stdexcept>
#include <string>
#include <vector>

namespace detrust {

// Root of every error raised by the library. `kind()` is a stable
// identifier that shows up in CLI output and ABORT messages.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define DETRUST_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  }

DETRUST_DEFINE_ERROR(PreconditionError);
DETRUST_DEFINE_ERROR(SetupError);
DETRUST_DEFINE_ERROR(DlogNotFound);
DETRUST_DEFINE_ERROR(PayloadOutOfRange);
DETRUST_DEFINE_ERROR(WeightVectorLengthMismatch);
DETRUST_DEFINE_ERROR(MixedFusionTag);
DETRUST_DEFINE_ERROR(LabelMismatch);
DETRUST_DEFINE_ERROR(ZeroSupport);
DETRUST_DEFINE_ERROR(InfeasibleConstraints);
DETRUST_DEFINE_ERROR(ConsensusTimeout);
DETRUST_DEFINE_ERROR(RefusedMatrix);
DETRUST_DEFINE_ERROR(QuorumFailure);
DETRUST_DEFINE_ERROR(DecryptionFailure);
DETRUST_DEFINE_ERROR(DimensionMismatch);
DETRUST_DEFINE_ERROR(PeerDisconnected);
DETRUST_DEFINE_ERROR(ProtocolError);
DETRUST_DEFINE_ERROR(ConfigError);

#undef DETRUST_DEFINE_ERROR

// Raised by KeyDerComb when fragments are absent; carries the 1-based ids.
class MissingFragment : public Error {
 public:
  explicit MissingFragment(std::vector<int> missing);
  const std::vector<int>& missing() const { return missing_; }

 private:
  std::vector<int> missing_;
};

// Consensus could not reconcile these parties' demands.
class PartyRefusal : public Error {
 public:
  explicit PartyRefusal(std::vector<int> parties);
  const std::vector<int>& parties() const { return parties_; }

 private:
  std::vector<int> parties_;
};

}  // namespace detrust

#endif  // DETRUST_ERRORS_H_
