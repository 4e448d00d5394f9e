#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bfl/ledger.hpp"
#include "bfl/learning.hpp"
#include "bfl/messages.hpp"
#include "bfl/proofs.hpp"
#include "bfl/simnet.hpp"
#include "bfl/storage.hpp"

namespace bfl {

/// Process layout every actor of a run agrees on.
struct Deployment {
  Simulator* sim = nullptr;
  const KeyRegistry* registry = nullptr;
  std::uint32_t f_s = 0;
  std::vector<ProcessId> servers;
  std::vector<ProcessId> replicas;
  SimTime read_deadline = 0;
};

enum class ServerBehavior : std::uint8_t {
  Correct = 0,
  Silent = 1,
  Equivocator = 2,
  ModelCorruptor = 3,
  BogusNRSender = 4,
};

std::string_view behavior_name(ServerBehavior b);

struct ServerConfig {
  ServerBehavior behavior = ServerBehavior::Correct;
  /// Other ModelCorruptors; their corrupted models get this server's vote.
  std::set<ProcessId> colluders;
};

/// The model a ModelCorruptor publishes: w + 100 * eps.
ParamVector corrupt_model(const ParamVector& w, const EpsilonVector& eps);

/// The second hash key an Equivocator signs for every slot it votes on.
HashKey equivocal_key(const HashKey& key);

/// Commit-set updates in the order server `rotation` sums them: at most one
/// per client (lowest hash key wins), sorted by client id, then rotated left
/// by `rotation`.
std::vector<WeightedUpdate> aggregation_order(const std::vector<std::shared_ptr<const Update>>& updates,
                                              const TaskRecord& task, std::size_t rotation);

/// w_t from w_{t-1} with the task's aggregator.
ParamVector aggregate(const AggregatorSpec& spec, const ParamVector& prev,
                      std::span<const WeightedUpdate> ordered);

/// Per-client count of rounds whose committed set holds one of its updates.
/// `client_of` maps committed UPD keys to their client.
RewardInfo reward_info(const TaskRecord& task, TaskId id,
                       const std::map<HashKey, ProcessId>& client_of);

class ServerActor : public Actor {
 public:
  ServerActor(const Deployment& dep, std::uint32_t index, ServerConfig cfg);

  void on_message(const ProcessId& from, const Message& msg) override;

  const ProcessId& id() const { return self_; }
  bool correct() const { return cfg_.behavior == ServerBehavior::Correct; }
  const ServerConfig& config() const { return cfg_; }
  const LedgerState& ledger() const { return view_.state(); }

  /// Own aggregate per round (round 0 is the initial model).
  const std::map<std::uint32_t, std::shared_ptr<const ParamVector>>& models() const { return models_; }
  /// First MOD PoAI per round completed at this server.
  const std::map<std::uint32_t, PoAI>& model_proofs() const { return mod_poai_; }
  /// Every PoAI this server's accumulator emitted, in emission order.
  const std::vector<PoAI>& emitted() const { return emitted_; }
  /// Model values seen under each hash key (own and received).
  std::shared_ptr<const ParamVector> model_by_key(const HashKey& key) const;
  const VoteAccumulator& accumulator() const { return acc_; }
  std::optional<std::string> failure() const { return failure_; }
  std::uint64_t storage_reads() const { return reader_.queries_sent(); }
  /// Keys of committed updates this server fetched from storage.
  std::uint64_t fetched_updates() const { return fetched_; }

  using PoAIHook = std::function<void(const ProcessId&, const PoAI&)>;
  void set_poai_hook(PoAIHook hook) { poai_hook_ = std::move(hook); }

 private:
  struct RoundState {
    std::optional<ClientSet> selected;
    std::set<ProcessId> processed;
    std::vector<std::shared_ptr<const Update>> early;  // before selected is known
    std::vector<PoAI> cand;
    std::set<HashKey> cand_keys;
    bool nr_fired = false;
    std::vector<PoAI> cand_snapshot;
    std::optional<ClientSet> next;
    std::shared_ptr<const Transaction> my_nr;
    bool fetching = false;
    std::vector<std::pair<ProcessId, ModelMsg>> early_models;
    std::set<HashKey> voted_models;
    bool fanned_out = false;
  };

  void on_block(const BlockPtr& block);
  void on_tx(const Transaction& tx, const Block& block);
  void on_update(const std::shared_ptr<const Update>& u);
  void process_update(RoundState& rs, const std::shared_ptr<const Update>& u);
  void on_vote(const LocalProof& vote);
  void on_poai(const PoAI& p);
  void on_model(const ProcessId& from, const ModelMsg& m);
  void judge_model(RoundState& rs, const ProcessId& from, const ModelMsg& m);
  void try_progress();
  void try_start_task();
  void try_fire(std::uint32_t round);
  void try_aggregate();
  void finish_aggregation(std::uint32_t round);
  void try_fan_out(std::uint32_t round);
  void try_final();
  void resubmit();

  void cast_vote(Tag tag, const HashKey& key, std::uint32_t round);
  void store_value(const HashKey& key, SharedBytes value);
  void submit(std::shared_ptr<const Transaction> tx);
  void bogus_nr(std::uint32_t round);
  void mark(std::uint32_t round, Milestone m, std::optional<SimTime> at = std::nullopt);
  const PoAI* find_poai(Tag tag, const HashKey& key, std::uint32_t round) const;
  void fail(const std::string& why);
  const TaskRecord* record() const;

  Deployment dep_;
  std::uint32_t index_;
  ProcessId self_;
  ServerConfig cfg_;
  SigningKey key_;
  LedgerView view_;
  VoteAccumulator acc_;
  StorageReader reader_;

  std::optional<TaskId> task_;
  bool initial_requested_ = false;
  std::map<std::uint32_t, RoundState> rounds_;
  std::map<HashKey, std::shared_ptr<const Update>> held_;
  std::map<std::uint32_t, std::shared_ptr<const ParamVector>> models_;
  std::map<HashKey, std::shared_ptr<const ParamVector>> known_models_;
  std::map<std::uint32_t, PoAI> mod_poai_;
  std::vector<PoAI> emitted_;
  std::map<VoteSlot, PoAI> poais_;
  std::uint32_t aggregated_ = 0;  // highest round with an own aggregate

  // START_TASK.
  std::optional<ClientSet> first_clients_;
  std::shared_ptr<const Transaction> my_start_;

  // FINAL.
  std::optional<RewardInfo> reward_;
  std::shared_ptr<const Transaction> my_final_;

  std::set<std::uint32_t> bogus_sent_;
  std::uint64_t fetched_ = 0;
  std::optional<std::string> failure_;
  PoAIHook poai_hook_;
};

enum class ClientBehavior : std::uint8_t { Honest = 0, Attacker = 1, Silent = 2 };

std::string_view behavior_name(ClientBehavior b);

struct ClientConfig {
  ClientBehavior behavior = ClientBehavior::Honest;
  AttackConfig attack;
  TaskKind task_kind = TaskKind::LinearRegression;
  std::uint64_t stake = 1;
  /// Simulated compute time between receiving a model and sending the update.
  SimTime train_time = 0;
  std::uint64_t seed = 0;
};

class ClientActor : public Actor {
 public:
  ClientActor(const Deployment& dep, std::uint32_t index, ClientConfig cfg, ClientDataset data);

  void on_message(const ProcessId& from, const Message& msg) override;

  const ProcessId& id() const { return self_; }
  std::uint64_t rounds_trained() const { return trained_; }
  std::uint64_t stragglers() const { return stragglers_; }

 private:
  void on_block(const BlockPtr& block);
  void on_model_proof(const PoAI& p);
  void try_start_round(std::uint32_t round);
  void train(std::uint32_t round, const SharedBytes& model_bytes);
  void straggle(std::uint32_t round, std::string_view why);

  Deployment dep_;
  ProcessId self_;
  ClientConfig cfg_;
  ClientDataset data_;
  SigningKey key_;
  LedgerView view_;
  StorageReader reader_;
  std::optional<TaskId> task_;
  bool joined_ = false;
  // Round r is trained from the certified model of round r-1.
  std::map<std::uint32_t, PoAI> proofs_;  // keyed by the round the proof certifies
  std::set<std::uint32_t> started_;
  std::map<std::uint64_t, std::shared_ptr<const Update>> pending_send_;
  std::uint64_t trained_ = 0;
  std::uint64_t stragglers_ = 0;
};

struct OwnerConfig {
  TaskId task;
  TaskParams params;
  ParamVector initial_model;
};

class ModelOwnerActor : public Actor {
 public:
  ModelOwnerActor(const Deployment& dep, OwnerConfig cfg);

  void on_start() override;
  void on_message(const ProcessId& from, const Message& msg) override;

  bool done() const { return final_model_ != nullptr; }
  std::shared_ptr<const ParamVector> final_model() const { return final_model_; }
  const std::optional<FinalTx>& final_tx() const { return final_; }
  SimTime finished_at() const { return finished_at_; }
  std::optional<std::string> failure() const { return failure_; }
  std::uint64_t forged_finals() const { return forged_finals_; }

 private:
  Deployment dep_;
  OwnerConfig cfg_;
  SigningKey key_;
  LedgerView view_;
  StorageReader reader_;
  std::optional<FinalTx> final_;
  std::shared_ptr<const ParamVector> final_model_;
  SimTime finished_at_ = 0;
  std::optional<std::string> failure_;
  std::uint64_t forged_finals_ = 0;
};

}  // namespace bfl
