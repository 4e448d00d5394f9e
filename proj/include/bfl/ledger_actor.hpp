#pragma once

#include <cstdint>
#include <map>
#include <tuple>
#include <vector>

#include "bfl/ledger.hpp"
#include "bfl/simnet.hpp"

namespace bfl {

struct RejectedTx {
  std::uint64_t height = 0;
  TxKind kind = TxKind::NewTask;
  ProcessId sender;
  std::string reason;
};

/// The trusted block producer. The first transaction to reach an empty pool
/// schedules a block cut one sampled block interval later; at the cut the
/// pool is ordered FIFO by (submission time, sender), each transaction is
/// validated against the prefix plus the block so far, and the block is sent
/// to every subscriber.
class LedgerActor : public Actor {
 public:
  LedgerActor(Simulator* sim, const KeyRegistry* registry, std::uint32_t f_s, DelayDist interval,
              std::uint64_t seed);

  void subscribe(const ProcessId& id) { subscribers_.push_back(id); }
  void on_message(const ProcessId& from, const Message& msg) override;

  const LedgerState& state() const { return state_; }
  const std::vector<BlockPtr>& blocks() const { return blocks_; }
  const std::vector<RejectedTx>& rejected() const { return rejected_; }

 private:
  void cut_block();

  struct PoolKey {
    SimTime submitted_at;
    ProcessId sender;
    std::uint64_t seq;
    auto operator<=>(const PoolKey&) const = default;
  };

  Simulator* sim_;
  LedgerState state_;
  DelayDist interval_;
  Rng rng_;
  std::vector<ProcessId> subscribers_;
  std::map<PoolKey, std::shared_ptr<const Transaction>> pool_;
  std::set<HashKey> pooled_digests_;
  std::uint64_t next_seq_ = 0;
  bool cut_scheduled_ = false;
  std::vector<BlockPtr> blocks_;
  std::vector<RejectedTx> rejected_;
};

}  // namespace bfl
