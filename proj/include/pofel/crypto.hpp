#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pofel/model_core.hpp"

namespace pofel {

using Bytes = std::vector<std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;
using Signature = std::array<std::uint8_t, 64>;
using PublicKey = std::array<std::uint8_t, 32>;
using SecretKey = std::array<std::uint8_t, 64>;

/// Incremental SHA-256.
class Sha256 {
 public:
  Sha256();
  Sha256& update(std::span<const std::uint8_t> bytes);
  Sha256& update_u64(std::uint64_t v);  // big-endian
  Digest finish();
  std::uint64_t bytes_hashed() const { return bytes_; }

 private:
  alignas(64) std::array<std::uint8_t, 128> state_;
  std::uint64_t bytes_ = 0;
};

Digest sha256(std::span<const std::uint8_t> bytes);

/// Signing key pair for one node. Signatures are Ed25519 (deterministic).
struct KeyPair {
  NodeId node_id = 0;
  SecretKey secret_key{};
  PublicKey public_key{};

  static KeyPair generate(NodeId node_id);
  /// Fixed keys for reproducible transcripts.
  static KeyPair from_seed(NodeId node_id, std::uint64_t seed);
};

Signature sign(std::span<const std::uint8_t> message, const KeyPair& key);
bool verify_signature(const Signature& tag, const PublicKey& pk,
                      std::span<const std::uint8_t> message);

void append_u64_be(Bytes& out, std::uint64_t v);
void append_f64_be(Bytes& out, double v);

std::string to_hex(std::span<const std::uint8_t> bytes);
std::optional<Bytes> from_hex(std::string_view hex);
std::string to_base64(std::span<const std::uint8_t> bytes);
std::optional<Bytes> from_base64(std::string_view b64);

template <std::size_t N>
std::optional<std::array<std::uint8_t, N>> fixed_from_bytes(const std::optional<Bytes>& b) {
  if (!b || b->size() != N) return std::nullopt;
  std::array<std::uint8_t, N> out{};
  std::copy(b->begin(), b->end(), out.begin());
  return out;
}

}  // namespace pofel
