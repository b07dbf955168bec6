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

#include "detrust/bytes.h"

#include <sodium.h>

#include <cstring>
#include <stdexcept>

#include "detrust/errors.h"

namespace detrust {
namespace {

struct SodiumInit {
  SodiumInit() {
    if (sodium_init() < 0) throw std::runtime_error("libsodium init failed");
  }
};

void EnsureSodium() { static SodiumInit init; }

std::string JoinIds(const std::vector<int>& ids) {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(ids[i]);
  }
  return out;
}

}  // namespace

MissingFragment::MissingFragment(std::vector<int> missing)
    : Error("MissingFragment", "no fragment from parties [" + JoinIds(missing) + "]"),
      missing_(std::move(missing)) {}

PartyRefusal::PartyRefusal(std::vector<int> parties)
    : Error("PartyRefusal", "irreconcilable parties [" + JoinIds(parties) + "]"),
      parties_(std::move(parties)) {}

Bytes ToBytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

std::string ToString(std::span<const uint8_t> b) {
  return std::string(b.begin(), b.end());
}

Digest Sha256(std::span<const uint8_t> data) {
  EnsureSodium();
  Digest out;
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

Digest HmacSha256(std::span<const uint8_t> key, std::span<const uint8_t> msg) {
  EnsureSodium();
  crypto_auth_hmacsha256_state st;
  crypto_auth_hmacsha256_init(&st, key.data(), key.size());
  crypto_auth_hmacsha256_update(&st, msg.data(), msg.size());
  Digest out;
  crypto_auth_hmacsha256_final(&st, out.data());
  return out;
}

std::string HexEncode(std::span<const uint8_t> data) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (uint8_t b : data) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

std::string Base64Encode(std::span<const uint8_t> data) {
  EnsureSodium();
  const size_t len =
      sodium_base64_encoded_len(data.size(), sodium_base64_VARIANT_ORIGINAL);
  std::string out(len, '\0');
  sodium_bin2base64(out.data(), len, data.data(), data.size(),
                    sodium_base64_VARIANT_ORIGINAL);
  out.resize(std::strlen(out.c_str()));
  return out;
}

Bytes Base64Decode(std::string_view text) {
  EnsureSodium();
  Bytes out(text.size());
  size_t out_len = 0;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(),
                        nullptr, &out_len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0) {
    throw ProtocolError("invalid base64: " + std::string(text));
  }
  out.resize(out_len);
  return out;
}

void AppendFramed(Bytes& out, std::span<const uint8_t> part) {
  const uint32_t n = static_cast<uint32_t>(part.size());
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back((n >> shift) & 0xff);
  out.insert(out.end(), part.begin(), part.end());
}

void AppendFramed(Bytes& out, std::string_view part) {
  AppendFramed(out, std::span<const uint8_t>(
                        reinterpret_cast<const uint8_t*>(part.data()), part.size()));
}

Bytes MpzToBytes(const mpz_class& v) {
  const size_t n = (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
  Bytes out(n);
  size_t written = 0;
  mpz_export(out.data(), &written, 1, 1, 1, 0, v.get_mpz_t());
  out.resize(written);
  return out;
}

mpz_class BytesToMpz(std::span<const uint8_t> b) {
  mpz_class v;
  mpz_import(v.get_mpz_t(), b.size(), 1, 1, 1, 0, b.data());
  return v;
}

Drbg::Drbg() {
  EnsureSodium();
  randombytes_buf(key_.data(), key_.size());
}

Drbg::Drbg(uint64_t seed) {
  Bytes material = ToBytes("detrust-drbg");
  for (int shift = 56; shift >= 0; shift -= 8) material.push_back((seed >> shift) & 0xff);
  key_ = Sha256(material);
}

Drbg::Drbg(const Digest& key) : key_(key) {}

void Drbg::Fill(std::span<uint8_t> out) {
  EnsureSodium();
  // Each call derives a fresh subkey so successive outputs never overlap.
  Bytes material(key_.begin(), key_.end());
  for (int shift = 56; shift >= 0; shift -= 8) material.push_back((counter_ >> shift) & 0xff);
  ++counter_;
  const Digest subkey = Sha256(material);
  randombytes_buf_deterministic(out.data(), out.size(), subkey.data());
}

uint64_t Drbg::NextU64() {
  std::array<uint8_t, 8> buf;
  Fill(buf);
  uint64_t v = 0;
  for (uint8_t b : buf) v = (v << 8) | b;
  return v;
}

mpz_class Drbg::UniformBelow(const mpz_class& bound) {
  if (bound <= 0) throw PreconditionError("UniformBelow needs a positive bound");
  const size_t bits = mpz_sizeinbase(bound.get_mpz_t(), 2) + 64;
  Bytes buf((bits + 7) / 8);
  Fill(buf);
  mpz_class v = BytesToMpz(buf);
  return v % bound;
}

double Drbg::NextDouble() {
  return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
}

Drbg Drbg::Fork(std::string_view domain) {
  Bytes material(key_.begin(), key_.end());
  AppendFramed(material, domain);
  for (int shift = 56; shift >= 0; shift -= 8) material.push_back((counter_ >> shift) & 0xff);
  ++counter_;
  return Drbg(Sha256(material));
}

}  // namespace detrust
