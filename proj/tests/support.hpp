#pragma once

#include <utility>
#include <vector>

#include "bfl/ledger.hpp"
#include "bfl/proofs.hpp"
#include "bfl/simnet.hpp"

namespace bfl::testing {

inline PoAI quorum(const KeyRegistry& reg, std::vector<std::uint32_t> signers, Tag tag, const HashKey& key,
                   TaskId task, std::uint32_t round) {
  PoAI p;
  p.slot = VoteSlot{tag, key, task, round};
  for (auto s : signers) p.votes.push_back(make_local_proof(reg.signing_key(ProcessId::server(s)), tag, key, task, round));
  return p;
}

/// Records every delivery with its time.
class Probe : public Actor {
 public:
  explicit Probe(Simulator* sim) : sim_(sim) {}
  void on_message(const ProcessId& from, const Message& msg) override { got.push_back({sim_->now(), from, msg}); }

  struct Delivery {
    SimTime at;
    ProcessId from;
    Message msg;
  };
  std::vector<Delivery> got;

 private:
  Simulator* sim_;
};

/// Applies transactions block by block, the way the ledger actor does.
class Chain {
 public:
  Chain(const KeyRegistry* reg, std::uint32_t f_s) : state(reg, f_s) {}

  TxVerdict add(const Transaction& tx) {
    auto v = state.append_tx(tx);
    if (v) digests_.push_back(tx_digest(tx));
    return v;
  }
  void seal() {
    state.seal_block(compute_block_hash(state.height(), state.tip_hash(), digests_));
    digests_.clear();
  }
  TxVerdict add_block(const Transaction& tx) {
    auto v = add(tx);
    seal();
    return v;
  }

  LedgerState state;

 private:
  std::vector<HashKey> digests_;
};

}  // namespace bfl::testing
