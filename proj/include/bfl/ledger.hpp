#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "bfl/aggregation.hpp"
#include "bfl/learning.hpp"
#include "bfl/proofs.hpp"
#include "bfl/values.hpp"

namespace bfl {

enum class AggregatorKind : std::uint8_t { FedAvg = 0, Median = 1, TrimmedMean = 2 };

struct AggregatorSpec {
  AggregatorKind kind = AggregatorKind::FedAvg;
  std::uint32_t trim = 0;  // TrimmedMean only
  bool operator==(const AggregatorSpec&) const = default;
};

std::string to_string(const AggregatorSpec& spec);

/// Parameters a model owner publishes with NEW_TASK.
struct TaskParams {
  std::uint32_t clients_per_round = 1;  // K
  std::uint32_t min_clients = 1;        // registrations before START_TASK
  std::uint32_t min_updates = 1;        // m: update PoAIs in a candidate set
  std::uint32_t final_round = 1;        // t_fin
  EpsilonVector eps{1e-6};
  AggregatorSpec aggregator;
  LocalTrainConfig training;
  std::uint64_t selection_seed = 0;
  std::uint32_t dimension = 1;
  std::uint64_t min_stake = 1;
};

/// Empty string when the parameters are well formed, else the first problem.
std::string check_params(const TaskParams& p);

enum class TxKind : std::uint8_t { NewTask = 0, Join = 1, StartTask = 2, NewRound = 3, Final = 4 };

std::string_view tx_kind_name(TxKind kind);

struct NewTaskTx {
  TaskId task;
  TaskParams params;
  HashKey model_hash;
};

struct JoinTx {
  TaskId task;
  ProcessId client;
  std::uint64_t stake = 0;
  std::uint64_t declared_n = 1;
};

struct StartTaskTx {
  TaskId task;
  ClientSet first_clients;
  PoAI proof;
};

struct NewRoundTx {
  TaskId task;
  std::uint32_t round = 0;
  std::vector<PoAI> candidates;
  ClientSet next_clients;
  PoAI clients_proof;
};

struct FinalTx {
  TaskId task;
  RewardInfo reward;
  PoAI reward_proof;
  PoAI model_proof;
};

using TxBody = std::variant<NewTaskTx, JoinTx, StartTaskTx, NewRoundTx, FinalTx>;

struct Transaction {
  TxBody body;
  ProcessId sender;
  Signature signature;

  TxKind kind() const { return static_cast<TxKind>(body.index()); }
  TaskId task() const;
};

Bytes canonical_encode(const Transaction& tx);
Transaction decode_transaction(std::span<const std::uint8_t> bytes);
HashKey tx_signing_digest(const Transaction& tx);
/// Digest of the full encoding, signature included.
HashKey tx_digest(const Transaction& tx);
Transaction make_signed_tx(const SigningKey& key, TxBody body);

struct Block {
  std::uint64_t height = 0;
  HashKey prev_hash;
  HashKey hash;
  std::int64_t time_ns = 0;
  std::vector<Transaction> txs;
  std::vector<HashKey> tx_digests;
};

using BlockPtr = std::shared_ptr<const Block>;

HashKey compute_block_hash(std::uint64_t height, const HashKey& prev,
                           std::span<const HashKey> tx_digests);

struct Registration {
  std::uint64_t stake = 0;
  std::uint64_t declared_n = 1;
  std::uint64_t height = 0;
};

struct CommittedRound {
  NewRoundTx nr;
  std::uint64_t height = 0;
};

struct TaskRecord {
  TaskParams params;
  HashKey model_hash;
  ProcessId owner;
  std::uint64_t created_height = 0;
  std::map<ProcessId, Registration> registrations;
  std::optional<std::uint64_t> threshold_height;  // block where min_clients was reached
  std::optional<StartTaskTx> start;
  std::uint64_t start_height = 0;
  std::map<std::uint32_t, CommittedRound> rounds;
  std::optional<FinalTx> final;
  std::uint64_t final_height = 0;

  std::uint32_t committed_rounds() const { return static_cast<std::uint32_t>(rounds.size()); }
};

struct TxVerdict {
  bool ok = true;
  std::string reason;
  explicit operator bool() const { return ok; }
};

/// State derived from a committed block prefix. Every actor keeps one in its
/// ledger view; the ledger actor uses its own copy to judge validity.
class LedgerState {
 public:
  LedgerState(const KeyRegistry* registry, std::uint32_t f_s) : registry_(registry), f_s_(f_s) {}

  TxVerdict validate_tx(const Transaction& tx) const;
  /// Appends a block whose transactions were already validated in order.
  void apply_block(const Block& block);

  /// Block producer path: validates `tx` against the committed prefix plus
  /// the transactions already appended to the open block, and applies it if
  /// valid. `seal_block` closes the open block.
  TxVerdict append_tx(const Transaction& tx);
  void seal_block(const HashKey& hash);

  /// Number of sealed blocks, which is also the height of the open block.
  std::uint64_t height() const { return block_hashes_.size(); }
  const HashKey& block_hash(std::uint64_t height) const { return block_hashes_.at(height); }
  HashKey tip_hash() const { return block_hashes_.empty() ? HashKey{} : block_hashes_.back(); }
  const TaskRecord* task(TaskId id) const;
  const std::map<TaskId, TaskRecord>& tasks() const { return tasks_; }
  bool seen(const HashKey& tx_digest) const { return seen_.contains(tx_digest); }
  std::uint32_t f_s() const { return f_s_; }
  const KeyRegistry& registry() const { return *registry_; }

 private:
  TxVerdict validate_body(const NewTaskTx& tx, const Transaction& outer) const;
  TxVerdict validate_body(const JoinTx& tx, const Transaction& outer) const;
  TxVerdict validate_body(const StartTaskTx& tx, const Transaction& outer) const;
  TxVerdict validate_body(const NewRoundTx& tx, const Transaction& outer) const;
  TxVerdict validate_body(const FinalTx& tx, const Transaction& outer) const;
  void apply_tx(const Transaction& tx, std::uint64_t height);

  const KeyRegistry* registry_;
  std::uint32_t f_s_;
  std::vector<HashKey> block_hashes_;
  std::map<TaskId, TaskRecord> tasks_;
  std::set<HashKey> seen_;
};

class NotEnoughClientsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Height of the block whose hash seeds the selection of round `round`:
/// the registration-threshold block for round 1, START_TASK's block for
/// round 2, and NR(round-2)'s block after that. Empty if not yet committed.
std::optional<std::uint64_t> selection_anchor(const TaskRecord& task, std::uint32_t round);

/// K distinct registrants, sampled without replacement by a PRF keyed on
/// (selection_seed, round, anchor block hash) over the sorted list of
/// clients registered at or before the anchor block.
ClientSet select_clients(const LedgerState& state, TaskId task, std::uint32_t round);

/// In-order application of blocks that may arrive out of order.
class LedgerView {
 public:
  LedgerView(const KeyRegistry* registry, std::uint32_t f_s) : state_(registry, f_s) {}

  /// Buffers `block`; returns the blocks that became applicable, in order.
  std::vector<BlockPtr> on_block(BlockPtr block);

  const LedgerState& state() const { return state_; }
  std::uint64_t next_height() const { return state_.height(); }

 private:
  LedgerState state_;
  std::map<std::uint64_t, BlockPtr> pending_;
};

/// "000004 NR server:1 <payload digest hex>".
std::string transcript_line(std::uint64_t height, const Transaction& tx, const HashKey& digest);

}  // namespace bfl
