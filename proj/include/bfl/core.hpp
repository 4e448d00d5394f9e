#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bfl {

using Bytes = std::vector<std::uint8_t>;

class EncodingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownProcessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ProcessKind : std::uint8_t {
  Client = 0,
  Server = 1,
  Replica = 2,
  ModelOwner = 3,
  // Simulated ledger actor; addressable by the transport, never keyed.
  Ledger = 4,
};

struct ProcessId {
  ProcessKind kind = ProcessKind::Client;
  std::uint32_t index = 0;

  auto operator<=>(const ProcessId&) const = default;

  static ProcessId client(std::uint32_t i) { return {ProcessKind::Client, i}; }
  static ProcessId server(std::uint32_t i) { return {ProcessKind::Server, i}; }
  static ProcessId replica(std::uint32_t i) { return {ProcessKind::Replica, i}; }
  static ProcessId owner() { return {ProcessKind::ModelOwner, 0}; }
  static ProcessId ledger() { return {ProcessKind::Ledger, 0}; }
};

/// "server:3", "client:0", "replica:1", "owner:0", "ledger:0".
std::string to_string(const ProcessId& id);
std::string_view kind_name(ProcessKind kind);
/// Inverse of to_string; throws std::invalid_argument on malformed input.
ProcessId parse_process_id(std::string_view text);

/// 32-byte SHA-256 digest.
struct HashKey {
  std::array<std::uint8_t, 32> digest{};

  auto operator<=>(const HashKey&) const = default;

  std::string hex() const;
  static HashKey from_hex(std::string_view hex);
};

HashKey sha256(std::span<const std::uint8_t> bytes);

struct Signature {
  ProcessId signer;
  std::array<std::uint8_t, 64> bytes{};

  bool operator==(const Signature&) const = default;
};

using PublicKey = std::array<std::uint8_t, 32>;

/// Secret half of a process keypair. Held only by the actor it belongs to.
class SigningKey {
 public:
  SigningKey(ProcessId owner, std::array<std::uint8_t, 64> secret)
      : owner_(owner), secret_(secret) {}

  const ProcessId& owner() const { return owner_; }
  Signature sign(const HashKey& digest) const;

 private:
  ProcessId owner_;
  std::array<std::uint8_t, 64> secret_;
};

struct Population {
  std::uint32_t clients = 0;
  std::uint32_t servers = 0;
  std::uint32_t replicas = 0;
};

/// Verification keys for every process of a scenario. Keypairs are derived
/// deterministically from the scenario seed, so the registry (and any
/// SigningKey) can be rebuilt offline by the auditor.
class KeyRegistry {
 public:
  static KeyRegistry derive(std::uint64_t seed, const Population& population);

  bool contains(const ProcessId& id) const { return keys_.contains(id); }
  const PublicKey& public_key(const ProcessId& id) const;
  SigningKey signing_key(const ProcessId& id) const;
  std::size_t size() const { return keys_.size(); }

 private:
  struct Entry {
    PublicKey pk;
    std::array<std::uint8_t, 64> sk;
  };
  std::map<ProcessId, Entry> keys_;
};

/// Signs with the registry-held key of `signer`.
Signature sign(const KeyRegistry& registry, const ProcessId& signer, const HashKey& digest);

/// True iff `sig` was produced by `sig.signer`'s key over exactly `digest`.
/// Unknown signers verify false.
bool verify(const KeyRegistry& registry, const Signature& sig, const HashKey& digest);

}  // namespace bfl
