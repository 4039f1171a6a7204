#include "pofel/crypto.hpp"

#include <sodium.h>

#include <bit>
#include <cstring>
#include <mutex>

#include "pofel/rng.hpp"

namespace pofel {
namespace {

void ensure_sodium() {
  static std::once_flag flag;
  std::call_once(flag, [] {
    if (sodium_init() < 0) throw Error(ErrorCode::kCrypto, "libsodium initialisation failed");
  });
}

crypto_hash_sha256_state* as_state(std::array<std::uint8_t, 128>& raw) {
  static_assert(sizeof(crypto_hash_sha256_state) <= 128);
  return reinterpret_cast<crypto_hash_sha256_state*>(raw.data());
}

}  // namespace

Sha256::Sha256() {
  ensure_sodium();
  crypto_hash_sha256_init(as_state(state_));
}

Sha256& Sha256::update(std::span<const std::uint8_t> bytes) {
  crypto_hash_sha256_update(as_state(state_), bytes.data(), bytes.size());
  bytes_ += bytes.size();
  return *this;
}

Sha256& Sha256::update_u64(std::uint64_t v) {
  std::array<std::uint8_t, 8> be{};
  for (int i = 7; i >= 0; --i) {
    be[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v & 0xff);
    v >>= 8;
  }
  return update(be);
}

Digest Sha256::finish() {
  Digest out{};
  crypto_hash_sha256_final(as_state(state_), out.data());
  return out;
}

Digest sha256(std::span<const std::uint8_t> bytes) {
  return Sha256().update(bytes).finish();
}

KeyPair KeyPair::generate(NodeId node_id) {
  ensure_sodium();
  KeyPair kp;
  kp.node_id = node_id;
  crypto_sign_keypair(kp.public_key.data(), kp.secret_key.data());
  return kp;
}

KeyPair KeyPair::from_seed(NodeId node_id, std::uint64_t seed) {
  ensure_sodium();
  Bytes material;
  const char tag[] = "pofel-node-key";
  material.insert(material.end(), tag, tag + sizeof(tag) - 1);
  append_u64_be(material, seed);
  append_u64_be(material, static_cast<std::uint64_t>(node_id));
  const Digest key_seed = sha256(material);

  KeyPair kp;
  kp.node_id = node_id;
  crypto_sign_seed_keypair(kp.public_key.data(), kp.secret_key.data(), key_seed.data());
  return kp;
}

Signature sign(std::span<const std::uint8_t> message, const KeyPair& key) {
  ensure_sodium();
  Signature sig{};
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), key.secret_key.data());
  return sig;
}

bool verify_signature(const Signature& tag, const PublicKey& pk,
                      std::span<const std::uint8_t> message) {
  ensure_sodium();
  return crypto_sign_verify_detached(tag.data(), message.data(), message.size(), pk.data()) == 0;
}

void append_u64_be(Bytes& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xff));
  }
}

void append_f64_be(Bytes& out, double v) {
  append_u64_be(out, std::bit_cast<std::uint64_t>(v));
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  ensure_sodium();
  std::string out(bytes.size() * 2 + 1, '\0');
  sodium_bin2hex(out.data(), out.size(), bytes.data(), bytes.size());
  out.pop_back();
  return out;
}

std::optional<Bytes> from_hex(std::string_view hex) {
  ensure_sodium();
  if (hex.size() % 2 != 0) return std::nullopt;
  // Lower-case only, so every value has exactly one textual form.
  for (char c : hex) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return std::nullopt;
  }
  Bytes out(hex.size() / 2);
  std::size_t len = 0;
  if (sodium_hex2bin(out.data(), out.size(), hex.data(), hex.size(), nullptr, &len, nullptr) != 0 ||
      len != out.size()) {
    return std::nullopt;
  }
  return out;
}

std::string to_base64(std::span<const std::uint8_t> bytes) {
  ensure_sodium();
  const auto variant = sodium_base64_VARIANT_ORIGINAL;
  std::string out(sodium_base64_ENCODED_LEN(bytes.size(), variant), '\0');
  sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), variant);
  out.resize(std::strlen(out.c_str()));
  return out;
}

std::optional<Bytes> from_base64(std::string_view b64) {
  ensure_sodium();
  Bytes out(b64.size());
  std::size_t len = 0;
  if (sodium_base642bin(out.data(), out.size(), b64.data(), b64.size(), nullptr, &len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0) {
    return std::nullopt;
  }
  out.resize(len);
  if (to_base64(out) != b64) return std::nullopt;
  return out;
}

}  // namespace pofel
