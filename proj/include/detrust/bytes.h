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

#ifndef DETRUST_BYTES_H_
#define DETRUST_BYTES_H_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <gmpxx.h>

namespace detrust {

using Bytes = std::vector<uint8_t>;
using Digest = std::array<uint8_t, 32>;

Bytes ToBytes(std::string_view s);
std::string ToString(std::span<const uint8_t> b);

Digest Sha256(std::span<const uint8_t> data);
Digest HmacSha256(std::span<const uint8_t> key, std::span<const uint8_t> msg);
std::string HexEncode(std::span<const uint8_t> data);

std::string Base64Encode(std::span<const uint8_t> data);
// Throws ProtocolError on malformed input.
Bytes Base64Decode(std::string_view text);

// Appends a 4-byte big-endian length prefix followed by `part`, giving an
// unambiguous concatenation for hash inputs.
void AppendFramed(Bytes& out, std::span<const uint8_t> part);
void AppendFramed(Bytes& out, std::string_view part);

// Big-endian magnitude of a non-negative integer.
Bytes MpzToBytes(const mpz_class& v);
mpz_class BytesToMpz(std::span<const uint8_t> b);

// ChaCha20-based deterministic random bit generator. Seeded instances are
// reproducible; the default constructor draws its key from the OS.
class Drbg {
 public:
  Drbg();
  explicit Drbg(uint64_t seed);
  explicit Drbg(const Digest& key);

  void Fill(std::span<uint8_t> out);
  uint64_t NextU64();
  // Uniform in [0, bound) up to a 2^-64 statistical distance.
  mpz_class UniformBelow(const mpz_class& bound);
  // Uniform double in [0, 1).
  double NextDouble();
  // Derives an independent child stream.
  Drbg Fork(std::string_view domain);

 private:
  Digest key_;
  uint64_t counter_ = 0;
};

}  // namespace detrust

#endif  // DETRUST_BYTES_H_
