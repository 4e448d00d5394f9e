#include "bfl/core.hpp"

#include <sodium.h>

#include <charconv>
#include <cstring>

#include "bfl/encoding.hpp"

namespace bfl {

namespace {

void ensure_sodium() {
  static const bool ready = [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
    return true;
  }();
  (void)ready;
}

constexpr char kHex[] = "0123456789abcdef";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string_view kind_name(ProcessKind kind) {
  switch (kind) {
    case ProcessKind::Client: return "client";
    case ProcessKind::Server: return "server";
    case ProcessKind::Replica: return "replica";
    case ProcessKind::ModelOwner: return "owner";
    case ProcessKind::Ledger: return "ledger";
  }
  return "unknown";
}

std::string to_string(const ProcessId& id) {
  std::string out{kind_name(id.kind)};
  out += ':';
  out += std::to_string(id.index);
  return out;
}

ProcessId parse_process_id(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("process id needs kind:index");
  const auto kind = text.substr(0, colon);
  const auto index_text = text.substr(colon + 1);
  std::uint32_t index = 0;
  auto [ptr, ec] = std::from_chars(index_text.data(), index_text.data() + index_text.size(), index);
  if (ec != std::errc{} || ptr != index_text.data() + index_text.size() || index_text.empty()) {
    throw std::invalid_argument("bad process index in '" + std::string(text) + "'");
  }
  for (auto k : {ProcessKind::Client, ProcessKind::Server, ProcessKind::Replica,
                 ProcessKind::ModelOwner, ProcessKind::Ledger}) {
    if (kind == kind_name(k)) return {k, index};
  }
  throw std::invalid_argument("unknown process kind '" + std::string(kind) + "'");
}

std::string HashKey::hex() const {
  std::string out(64, '0');
  for (std::size_t i = 0; i < digest.size(); ++i) {
    out[2 * i] = kHex[digest[i] >> 4];
    out[2 * i + 1] = kHex[digest[i] & 0x0f];
  }
  return out;
}

HashKey HashKey::from_hex(std::string_view hex) {
  if (hex.size() != 64) throw std::invalid_argument("hash-key hex must be 64 characters");
  HashKey key;
  for (std::size_t i = 0; i < 32; ++i) {
    const int hi = hex_value(hex[2 * i]);
    const int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw std::invalid_argument("non-hex character in hash-key");
    key.digest[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return key;
}

HashKey sha256(std::span<const std::uint8_t> bytes) {
  ensure_sodium();
  HashKey key;
  crypto_hash_sha256(key.digest.data(), bytes.data(), bytes.size());
  return key;
}

Signature SigningKey::sign(const HashKey& digest) const {
  ensure_sodium();
  Signature sig;
  sig.signer = owner_;
  crypto_sign_detached(sig.bytes.data(), nullptr, digest.digest.data(), digest.digest.size(),
                       secret_.data());
  return sig;
}

KeyRegistry KeyRegistry::derive(std::uint64_t seed, const Population& population) {
  ensure_sodium();
  KeyRegistry registry;
  auto add = [&](ProcessId id) {
    // seed material: domain tag || scenario seed || kind || index
    Encoder enc;
    enc.str("bfl/keypair/v1").u64(seed).u8(static_cast<std::uint8_t>(id.kind)).u32(id.index);
    const HashKey material = sha256(enc.data());
    Entry entry{};
    crypto_sign_seed_keypair(entry.pk.data(), entry.sk.data(), material.digest.data());
    registry.keys_.emplace(id, entry);
  };
  for (std::uint32_t i = 0; i < population.clients; ++i) add(ProcessId::client(i));
  for (std::uint32_t i = 0; i < population.servers; ++i) add(ProcessId::server(i));
  for (std::uint32_t i = 0; i < population.replicas; ++i) add(ProcessId::replica(i));
  add(ProcessId::owner());
  return registry;
}

const PublicKey& KeyRegistry::public_key(const ProcessId& id) const {
  auto it = keys_.find(id);
  if (it == keys_.end()) throw UnknownProcessError("no key registered for " + to_string(id));
  return it->second.pk;
}

SigningKey KeyRegistry::signing_key(const ProcessId& id) const {
  auto it = keys_.find(id);
  if (it == keys_.end()) throw UnknownProcessError("no key registered for " + to_string(id));
  return SigningKey(id, it->second.sk);
}

Signature sign(const KeyRegistry& registry, const ProcessId& signer, const HashKey& digest) {
  return registry.signing_key(signer).sign(digest);
}

bool verify(const KeyRegistry& registry, const Signature& sig, const HashKey& digest) {
  if (!registry.contains(sig.signer)) return false;
  ensure_sodium();
  const auto& pk = registry.public_key(sig.signer);
  return crypto_sign_verify_detached(sig.bytes.data(), digest.digest.data(),
                                     digest.digest.size(), pk.data()) == 0;
}

}  // namespace bfl
