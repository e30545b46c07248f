#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "mg/util.hpp"

namespace mg::crypto {

using util::Bytes;

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(const Bytes& data);
Digest sha256(std::string_view data);
std::string sha256_hex(const Bytes& data);
std::string sha256_hex(std::string_view data);

// HMAC-SHA256. Keys are raw byte strings of any length; all project keys
// are 32 bytes.
Digest hmac_sha256(const Bytes& key, const Bytes& data);
Digest hmac_sha256(const Bytes& key, std::string_view data);

// AES-256-GCM with a synthetic nonce derived from (key, plaintext), so a
// given (key, message) pair always seals to the same bytes. Output layout:
// nonce (12) || ciphertext || tag (16).
Bytes aead_seal(const Bytes& key32, const Bytes& plaintext);
std::optional<Bytes> aead_open(const Bytes& key32, const Bytes& sealed);

inline constexpr char kAeadSchemeId[] = "A256GCM";

// Deterministic random source. Every node owns one, seeded by the
// deployment; simnet derives per-node seeds from the topology seed so
// reruns draw identical tokens, guids, and nonces.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  std::uint64_t below(std::uint64_t bound);  // uniform in [0, bound)
  Bytes bytes(std::size_t n);
  std::string hex(std::size_t n_bytes) { return util::hex_encode(bytes(n_bytes)); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mg::crypto
