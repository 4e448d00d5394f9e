#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "bfl/core.hpp"
#include "bfl/encoding.hpp"
#include "bfl/values.hpp"

namespace bfl {

enum class Tag : std::uint8_t { Upd = 0, Mod = 1, Clients = 2, Reward = 3 };

std::string_view tag_name(Tag tag);

/// The statement a server signs: "(tag, hash_key) is valid for (task, round)".
struct VoteSlot {
  Tag tag = Tag::Upd;
  HashKey hash_key;
  TaskId task;
  std::uint32_t round = 0;

  auto operator<=>(const VoteSlot&) const = default;
};

HashKey vote_digest(const VoteSlot& slot);

struct LocalProof {
  VoteSlot slot;
  Signature signature;

  bool operator==(const LocalProof&) const = default;
};

/// Proof of Availability and Integrity: f_s+1 distinct server votes on one
/// slot, ordered by signer index.
struct PoAI {
  VoteSlot slot;
  std::vector<LocalProof> votes;

  const HashKey& hash_key() const { return slot.hash_key; }
  Tag tag() const { return slot.tag; }
  std::uint32_t round() const { return slot.round; }
  bool operator==(const PoAI&) const = default;
};

void encode_poai(Encoder& enc, const PoAI& p);
PoAI decode_poai(Decoder& dec);
Bytes canonical_encode(const PoAI& p);

/// "MOD <hash> [server:0,server:2]".
std::string render(const PoAI& p);

LocalProof make_local_proof(const SigningKey& server_key, Tag tag, const HashKey& hash_key,
                            TaskId task, std::uint32_t round);

/// Signer is a registered server and the signature covers the slot.
bool verify_local_proof(const KeyRegistry& registry, const LocalProof& vote);

bool verify_poai(const PoAI& p, const KeyRegistry& registry, std::uint32_t f_s);

/// Collects verified votes per slot and emits a PoAI exactly once, when the
/// (f_s+1)-th distinct signer arrives. Later votes for the slot are absorbed.
class VoteAccumulator {
 public:
  VoteAccumulator(const KeyRegistry* registry, std::uint32_t f_s) : registry_(registry), f_s_(f_s) {}

  std::optional<PoAI> accumulate(const LocalProof& vote);

  bool emitted(const VoteSlot& slot) const;
  std::size_t distinct_signers(const VoteSlot& slot) const;

  std::uint64_t dropped_invalid() const { return dropped_invalid_; }
  std::uint64_t dropped_duplicate() const { return dropped_duplicate_; }
  std::uint64_t absorbed_late() const { return absorbed_late_; }

 private:
  struct SlotVotes {
    std::map<std::uint32_t, LocalProof> by_signer;
    bool emitted = false;
  };

  const KeyRegistry* registry_;
  std::uint32_t f_s_;
  std::map<VoteSlot, SlotVotes> slots_;
  std::uint64_t dropped_invalid_ = 0;
  std::uint64_t dropped_duplicate_ = 0;
  std::uint64_t absorbed_late_ = 0;
};

}  // namespace bfl
