#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "bfl/aggregation.hpp"
#include "bfl/core.hpp"

namespace bfl {

struct TaskId {
  std::uint64_t value = 0;
  auto operator<=>(const TaskId&) const = default;
};

/// Clients selected to train in `round`.
struct ClientSet {
  TaskId task;
  std::uint32_t round = 0;
  std::vector<ProcessId> members;

  bool contains(const ProcessId& id) const;
  bool operator==(const ClientSet&) const = default;
};

/// A client's signed update g_t^k.
struct Update {
  ProcessId client;
  TaskId task;
  std::uint32_t round = 0;
  ParamVector vector;
  std::uint64_t declared_n = 1;
  Signature signature;

  bool operator==(const Update&) const = default;
};

/// Per-client count of rounds in which the client's update was committed.
struct RewardInfo {
  TaskId task;
  std::map<ProcessId, std::uint32_t> counts;

  std::uint64_t total() const;
  bool operator==(const RewardInfo&) const = default;
};

Bytes canonical_encode(const ClientSet& v);
Bytes canonical_encode(const Update& v);
Bytes canonical_encode(const RewardInfo& v);

ClientSet decode_client_set(std::span<const std::uint8_t> bytes);
Update decode_update(std::span<const std::uint8_t> bytes);
RewardInfo decode_reward_info(std::span<const std::uint8_t> bytes);

HashKey hash_value(const ClientSet& v);
HashKey hash_value(const Update& v);
HashKey hash_value(const RewardInfo& v);

/// Digest a client signs: the update encoding without its signature.
HashKey update_signing_digest(const Update& v);
Update make_signed_update(const SigningKey& key, TaskId task, std::uint32_t round,
                          ParamVector vector, std::uint64_t declared_n);
bool verify_update(const KeyRegistry& registry, const Update& v);

/// Pure map from reward counts to per-client scores.
using RewardPayout = std::map<ProcessId, double> (*)(const RewardInfo&);
std::map<ProcessId, double> raw_count_payout(const RewardInfo& info);

}  // namespace bfl
