#include "bfl/messages.hpp"

#include "bfl/encoding.hpp"

namespace bfl {

namespace {

// Approximate framing overhead per message, on top of its payload.
constexpr std::size_t kHeader = 48;
constexpr std::size_t kPoAIFixed = 1 + 32 + 8 + 4 + 8;
constexpr std::size_t kVoteSize = 1 + 32 + 8 + 4 + 5 + 64;

std::size_t poai_size(const PoAI& p) { return kPoAIFixed + p.votes.size() * kVoteSize; }

std::size_t client_set_size(const ClientSet& c) { return 1 + 8 + 4 + 8 + 5 * c.members.size(); }

std::size_t tx_size(const Transaction& tx) {
  const std::size_t base = 1 + 1 + 5 + 8 + 69;
  return base + std::visit(
                    [](const auto& b) -> std::size_t {
                      using T = std::decay_t<decltype(b)>;
                      if constexpr (std::is_same_v<T, NewTaskTx>) {
                        return 64 + 8 * b.params.eps.components().size() + 32;
                      } else if constexpr (std::is_same_v<T, JoinTx>) {
                        return 5 + 16;
                      } else if constexpr (std::is_same_v<T, StartTaskTx>) {
                        return client_set_size(b.first_clients) + poai_size(b.proof);
                      } else if constexpr (std::is_same_v<T, NewRoundTx>) {
                        std::size_t s = 4 + 8 + client_set_size(b.next_clients) + poai_size(b.clients_proof);
                        for (const auto& p : b.candidates) s += poai_size(p);
                        return s;
                      } else {
                        return 9 + 13 * b.reward.counts.size() + poai_size(b.reward_proof) +
                               poai_size(b.model_proof);
                      }
                    },
                    tx.body);
}

}  // namespace

std::string_view message_name(const Message& m) {
  static constexpr std::string_view names[] = {"STORE", "QUERY", "REPLY", "UPD",   "LP",
                                               "MOD",   "MODPROOF", "SUBMIT", "BLOCK", "TIMER"};
  return names[m.index()];
}

std::size_t wire_size(const Message& m) {
  return kHeader +
         std::visit(
             [](const auto& msg) -> std::size_t {
               using T = std::decay_t<decltype(msg)>;
               if constexpr (std::is_same_v<T, StoreMsg> || std::is_same_v<T, ReplyMsg>) {
                 return 32 + (msg.value ? msg.value->size() : 0);
               } else if constexpr (std::is_same_v<T, QueryMsg>) {
                 return 32;
               } else if constexpr (std::is_same_v<T, UpdateMsg>) {
                 return 1 + 5 + 8 + 4 + 8 + 8 + 8 * msg.update->vector.dimension() + 69;
               } else if constexpr (std::is_same_v<T, VoteMsg>) {
                 return kVoteSize;
               } else if constexpr (std::is_same_v<T, ModelMsg>) {
                 return 12 + 9 + 8 * msg.model->dimension();
               } else if constexpr (std::is_same_v<T, ModelProofMsg>) {
                 return poai_size(msg.proof);
               } else if constexpr (std::is_same_v<T, SubmitTxMsg>) {
                 return tx_size(*msg.tx);
               } else if constexpr (std::is_same_v<T, BlockMsg>) {
                 std::size_t s = 8 + 32 + 32 + 8;
                 for (const auto& tx : msg.block->txs) s += tx_size(tx);
                 return s;
               } else {
                 return 0;
               }
             },
             m);
}

Bytes encode_storage_message(const Message& m) {
  Encoder enc(ValueKind::StoreMsg);
  if (const auto* s = std::get_if<StoreMsg>(&m)) {
    enc.u8(0).hash(s->key).bytes(*s->value);
  } else if (const auto* q = std::get_if<QueryMsg>(&m)) {
    enc.u8(1).hash(q->key);
  } else if (const auto* r = std::get_if<ReplyMsg>(&m)) {
    enc.u8(2).hash(r->key).bytes(*r->value);
  } else {
    throw EncodingError("not a storage message");
  }
  return std::move(enc).take();
}

Message decode_storage_message(std::span<const std::uint8_t> bytes) {
  Decoder dec(bytes);
  dec.expect_kind(ValueKind::StoreMsg);
  const auto kind = dec.u8();
  const auto key = dec.hash();
  Message out;
  switch (kind) {
    case 0: out = StoreMsg{key, std::make_shared<const Bytes>(dec.bytes())}; break;
    case 1: out = QueryMsg{key}; break;
    case 2: out = ReplyMsg{key, std::make_shared<const Bytes>(dec.bytes())}; break;
    default: throw DecodeError("unknown storage message kind");
  }
  dec.expect_done();
  return out;
}

}  // namespace bfl
