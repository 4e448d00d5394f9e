#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfl/messages.hpp"
#include "bfl/proofs.hpp"
#include "bfl/simnet.hpp"

namespace bfl {

/// Timer kinds shared by every actor; each actor routes its own.
enum TimerKind : std::uint32_t {
  kTimerBlockCut = 1,
  kTimerReadDeadline = 2,
  kTimerClientTrain = 3,
};

class ProofError : public std::invalid_argument {
 public:
  explicit ProofError(const std::string& what, std::optional<std::size_t> index = std::nullopt)
      : std::invalid_argument(what), index_(index) {}
  std::optional<std::size_t> index() const { return index_; }

 private:
  std::optional<std::size_t> index_;
};

class AvailabilityTimeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ReplicaBehavior : std::uint8_t { Correct = 0, Silent = 1, GarbageReplier = 2 };

std::string_view behavior_name(ReplicaBehavior b);

/// Content-addressed map. Writes whose value does not hash to the key, or that
/// would rebind an existing key, are dropped.
class ReplicaState {
 public:
  /// True if the pair is now present (fresh or identical re-store).
  bool store(const HashKey& key, const SharedBytes& value);
  SharedBytes get(const HashKey& key) const;
  bool contains(const HashKey& key) const { return entries_.contains(key); }
  std::size_t size() const { return entries_.size(); }
  std::uint64_t rejected() const { return rejected_; }
  const std::map<HashKey, SharedBytes>& entries() const { return entries_; }

  /// "<key hex> <sha256(value) hex>" lines, sorted by key.
  std::string dump() const;

 private:
  std::map<HashKey, SharedBytes> entries_;
  std::uint64_t rejected_ = 0;
};

class ReplicaActor : public Actor {
 public:
  ReplicaActor(Simulator* sim, ProcessId self, ReplicaBehavior behavior)
      : sim_(sim), self_(self), behavior_(behavior) {}

  void on_message(const ProcessId& from, const Message& msg) override;

  const ReplicaState& state() const { return state_; }
  ReplicaBehavior behavior() const { return behavior_; }
  const ProcessId& id() const { return self_; }

 private:
  Simulator* sim_;
  ProcessId self_;
  ReplicaBehavior behavior_;
  ReplicaState state_;
  // Queries that arrived before the value; answered when it is stored.
  std::map<HashKey, std::vector<ProcessId>> waiting_;
};

struct ReadResult {
  HashKey key;
  SharedBytes value;  // null on timeout
  bool timed_out() const { return value == nullptr; }
};

/// Client side of the replicated store, embedded in an actor that forwards
/// REPLY messages and read-deadline timers to it.
class StorageReader {
 public:
  using ReadCallback = std::function<void(const ReadResult&)>;
  using GetAllCallback = std::function<void(const std::vector<ReadResult>&)>;

  StorageReader(Simulator* sim, ProcessId self, std::vector<ProcessId> replicas,
                const KeyRegistry* registry, std::uint32_t f_s, SimTime deadline);

  /// Verifies the proof (ProofError, no traffic, if it fails), then queries
  /// every replica and completes with the first reply hashing to the key.
  void read(const PoAI& proof, ReadCallback done);
  /// Unverified read by key, used for the owner-published initial model.
  void read_key(const HashKey& key, ReadCallback done);
  /// Verifies every proof first (ProofError naming the index), then reads
  /// all; results keep input order. A timeout on any key completes the call.
  void get_all(const std::vector<PoAI>& proofs, GetAllCallback done);

  /// True if the message belonged to this reader.
  bool on_reply(const ReplyMsg& reply);
  bool on_timer(const TimerMsg& timer);

  std::uint64_t queries_sent() const { return queries_sent_; }
  std::uint64_t discarded_replies() const { return discarded_; }
  std::size_t outstanding() const { return reads_.size(); }

 private:
  struct Pending {
    HashKey key;
    ReadCallback done;
  };

  void finish(std::uint64_t id, SharedBytes value);

  Simulator* sim_;
  ProcessId self_;
  std::vector<ProcessId> replicas_;
  const KeyRegistry* registry_;
  std::uint32_t f_s_;
  SimTime deadline_;
  std::uint64_t next_id_ = 0;
  std::map<std::uint64_t, Pending> reads_;
  std::uint64_t queries_sent_ = 0;
  std::uint64_t discarded_ = 0;
};

}  // namespace bfl
