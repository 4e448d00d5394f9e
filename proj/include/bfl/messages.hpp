#pragma once

#include <cstdint>
#include <memory>
#include <variant>

#include "bfl/ledger.hpp"
#include "bfl/proofs.hpp"
#include "bfl/values.hpp"

namespace bfl {

using SimTime = std::int64_t;  // simulated nanoseconds
constexpr SimTime kMillisecond = 1'000'000;

using SharedBytes = std::shared_ptr<const Bytes>;

// Storage protocol.
struct StoreMsg {
  HashKey key;
  SharedBytes value;
};

struct QueryMsg {
  HashKey key;
};

struct ReplyMsg {
  HashKey key;
  SharedBytes value;
};

/// Client -> servers.
struct UpdateMsg {
  std::shared_ptr<const Update> update;
};

/// Server -> servers: <LP, tag, h(v)_i>.
struct VoteMsg {
  LocalProof vote;
};

/// Server -> servers: <MOD, v>.
struct ModelMsg {
  TaskId task;
  std::uint32_t round = 0;
  std::shared_ptr<const ParamVector> model;
};

/// Server -> selected clients: the MOD PoAI of a finished round.
struct ModelProofMsg {
  PoAI proof;
};

/// Actor -> ledger.
struct SubmitTxMsg {
  std::shared_ptr<const Transaction> tx;
  SimTime submitted_at = 0;
};

/// Ledger -> subscribers.
struct BlockMsg {
  BlockPtr block;
};

struct TimerMsg {
  std::uint32_t kind = 0;
  std::uint64_t id = 0;
};

using Message = std::variant<StoreMsg, QueryMsg, ReplyMsg, UpdateMsg, VoteMsg, ModelMsg,
                             ModelProofMsg, SubmitTxMsg, BlockMsg, TimerMsg>;

std::string_view message_name(const Message& m);

/// Bytes the message would occupy on the wire; drives bandwidth delay.
std::size_t wire_size(const Message& m);

/// StoreMsg/QueryMsg/ReplyMsg wire format (ValueKind::StoreMsg prefix).
Bytes encode_storage_message(const Message& m);
Message decode_storage_message(std::span<const std::uint8_t> bytes);

}  // namespace bfl
