#include "bfl/ledger.hpp"

#include <algorithm>
#include <cstdio>

#include "bfl/encoding.hpp"
#include "bfl/rng.hpp"

namespace bfl {

std::string to_string(const AggregatorSpec& spec) {
  switch (spec.kind) {
    case AggregatorKind::FedAvg: return "fedavg";
    case AggregatorKind::Median: return "median";
    case AggregatorKind::TrimmedMean: return "trimmed_mean(" + std::to_string(spec.trim) + ")";
  }
  return "?";
}

std::string check_params(const TaskParams& p) {
  if (p.clients_per_round == 0) return "clients_per_round (K) must be >= 1";
  if (p.clients_per_round > p.min_clients) return "clients_per_round (K) must not exceed min_clients";
  if (p.min_updates == 0) return "min_updates (m) must be >= 1";
  if (p.min_updates > p.clients_per_round) return "min_updates (m) must not exceed clients_per_round (K)";
  if (p.final_round == 0) return "final_round (t_fin) must be >= 1";
  if (p.dimension == 0) return "dimension must be >= 1";
  if (!p.eps.is_scalar() && p.eps.components().size() != p.dimension) {
    return "eps vector length must equal the model dimension";
  }
  if (p.training.epochs == 0) return "epochs must be >= 1";
  if (p.training.batch == 0) return "batch must be >= 1";
  if (!(p.training.learning_rate >= 0.0)) return "learning_rate must be >= 0";
  if (p.aggregator.kind == AggregatorKind::TrimmedMean && p.min_updates <= 2 * p.aggregator.trim) {
    return "trimmed mean needs min_updates (m) > 2 * trim";
  }
  return {};
}

std::string_view tx_kind_name(TxKind kind) {
  switch (kind) {
    case TxKind::NewTask: return "NEW_TASK";
    case TxKind::Join: return "JOIN";
    case TxKind::StartTask: return "START_TASK";
    case TxKind::NewRound: return "NR";
    case TxKind::Final: return "FINAL";
  }
  return "?";
}

TaskId Transaction::task() const {
  return std::visit([](const auto& b) { return b.task; }, body);
}

namespace {

void encode_params(Encoder& enc, const TaskParams& p) {
  enc.u32(p.clients_per_round).u32(p.min_clients).u32(p.min_updates).u32(p.final_round);
  enc.f64s(p.eps.components());
  enc.u8(static_cast<std::uint8_t>(p.aggregator.kind)).u32(p.aggregator.trim);
  enc.u32(p.training.epochs).u32(p.training.batch).f64(p.training.learning_rate);
  enc.u64(p.selection_seed).u32(p.dimension).u64(p.min_stake);
}

TaskParams decode_params(Decoder& dec) {
  TaskParams p;
  p.clients_per_round = dec.u32();
  p.min_clients = dec.u32();
  p.min_updates = dec.u32();
  p.final_round = dec.u32();
  auto eps = dec.f64s();
  p.eps = eps.size() == 1 ? EpsilonVector(eps[0]) : EpsilonVector(std::move(eps));
  const auto agg = dec.u8();
  if (agg > static_cast<std::uint8_t>(AggregatorKind::TrimmedMean)) throw DecodeError("bad aggregator");
  p.aggregator.kind = static_cast<AggregatorKind>(agg);
  p.aggregator.trim = dec.u32();
  p.training.epochs = dec.u32();
  p.training.batch = dec.u32();
  p.training.learning_rate = dec.f64();
  p.selection_seed = dec.u64();
  p.dimension = dec.u32();
  p.min_stake = dec.u64();
  return p;
}

void encode_client_set(Encoder& enc, const ClientSet& c) { enc.bytes(canonical_encode(c)); }
ClientSet decode_client_set_field(Decoder& dec) {
  const auto b = dec.bytes();
  return decode_client_set(b);
}

void encode_body(Encoder& enc, const Transaction& tx) {
  enc.u8(static_cast<std::uint8_t>(tx.kind())).process(tx.sender);
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        enc.u64(b.task.value);
        if constexpr (std::is_same_v<T, NewTaskTx>) {
          encode_params(enc, b.params);
          enc.hash(b.model_hash);
        } else if constexpr (std::is_same_v<T, JoinTx>) {
          enc.process(b.client).u64(b.stake).u64(b.declared_n);
        } else if constexpr (std::is_same_v<T, StartTaskTx>) {
          encode_client_set(enc, b.first_clients);
          encode_poai(enc, b.proof);
        } else if constexpr (std::is_same_v<T, NewRoundTx>) {
          enc.u32(b.round).u64(b.candidates.size());
          for (const auto& p : b.candidates) encode_poai(enc, p);
          encode_client_set(enc, b.next_clients);
          encode_poai(enc, b.clients_proof);
        } else {
          enc.bytes(canonical_encode(b.reward));
          encode_poai(enc, b.reward_proof);
          encode_poai(enc, b.model_proof);
        }
      },
      tx.body);
}

}  // namespace

Bytes canonical_encode(const Transaction& tx) {
  Encoder enc(ValueKind::Transaction);
  encode_body(enc, tx);
  enc.signature(tx.signature);
  return std::move(enc).take();
}

Transaction decode_transaction(std::span<const std::uint8_t> bytes) {
  Decoder dec(bytes);
  dec.expect_kind(ValueKind::Transaction);
  Transaction tx;
  const auto kind = dec.u8();
  tx.sender = dec.process();
  TaskId task{dec.u64()};
  switch (kind) {
    case static_cast<std::uint8_t>(TxKind::NewTask): {
      NewTaskTx b;
      b.task = task;
      b.params = decode_params(dec);
      b.model_hash = dec.hash();
      tx.body = b;
      break;
    }
    case static_cast<std::uint8_t>(TxKind::Join): {
      JoinTx b;
      b.task = task;
      b.client = dec.process();
      b.stake = dec.u64();
      b.declared_n = dec.u64();
      tx.body = b;
      break;
    }
    case static_cast<std::uint8_t>(TxKind::StartTask): {
      StartTaskTx b;
      b.task = task;
      b.first_clients = decode_client_set_field(dec);
      b.proof = decode_poai(dec);
      tx.body = b;
      break;
    }
    case static_cast<std::uint8_t>(TxKind::NewRound): {
      NewRoundTx b;
      b.task = task;
      b.round = dec.u32();
      const auto n = dec.u64();
      if (n > bytes.size()) throw DecodeError("candidate count exceeds input");
      for (std::uint64_t i = 0; i < n; ++i) b.candidates.push_back(decode_poai(dec));
      b.next_clients = decode_client_set_field(dec);
      b.clients_proof = decode_poai(dec);
      tx.body = b;
      break;
    }
    case static_cast<std::uint8_t>(TxKind::Final): {
      FinalTx b;
      b.task = task;
      b.reward = decode_reward_info(dec.bytes());
      b.reward_proof = decode_poai(dec);
      b.model_proof = decode_poai(dec);
      tx.body = b;
      break;
    }
    default:
      throw DecodeError("unknown transaction kind");
  }
  tx.signature = dec.signature();
  dec.expect_done();
  return tx;
}

HashKey tx_signing_digest(const Transaction& tx) {
  Encoder enc(ValueKind::Transaction);
  encode_body(enc, tx);
  return sha256(enc.data());
}

HashKey tx_digest(const Transaction& tx) { return sha256(canonical_encode(tx)); }

Transaction make_signed_tx(const SigningKey& key, TxBody body) {
  Transaction tx;
  tx.body = std::move(body);
  tx.sender = key.owner();
  tx.signature = key.sign(tx_signing_digest(tx));
  return tx;
}

HashKey compute_block_hash(std::uint64_t height, const HashKey& prev,
                           std::span<const HashKey> tx_digests) {
  Encoder enc(ValueKind::BlockHeader);
  enc.u64(height).hash(prev).u64(tx_digests.size());
  for (const auto& d : tx_digests) enc.hash(d);
  return sha256(enc.data());
}

const TaskRecord* LedgerState::task(TaskId id) const {
  auto it = tasks_.find(id);
  return it == tasks_.end() ? nullptr : &it->second;
}

namespace {

TxVerdict reject(std::string reason) { return TxVerdict{false, std::move(reason)}; }

TxVerdict check_proof(const PoAI& p, Tag tag, TaskId task, std::uint32_t round,
                      const KeyRegistry& registry, std::uint32_t f_s, std::string_view what) {
  if (p.slot.tag != tag) return reject(std::string(what) + ": wrong proof tag");
  if (p.slot.task != task) return reject(std::string(what) + ": proof for another task");
  if (p.slot.round != round) return reject(std::string(what) + ": proof for another round");
  if (!verify_poai(p, registry, f_s)) return reject(std::string(what) + ": proof does not verify");
  return {};
}

}  // namespace

namespace {

// A selection that cannot be computed yet matches no proposed client set.
ClientSet selection_or_empty(const LedgerState& state, TaskId task, std::uint32_t round) {
  try {
    return select_clients(state, task, round);
  } catch (const NotEnoughClientsError&) {
    return ClientSet{task, round, {}};
  }
}

}  // namespace

TxVerdict LedgerState::validate_tx(const Transaction& tx) const {
  if (!verify(*registry_, tx.signature, tx_signing_digest(tx)) || tx.signature.signer != tx.sender) {
    return reject("bad transaction signature");
  }
  if (seen_.contains(tx_digest(tx))) return reject("duplicate transaction");
  return std::visit([&](const auto& b) { return validate_body(b, tx); }, tx.body);
}

TxVerdict LedgerState::validate_body(const NewTaskTx& b, const Transaction& outer) const {
  if (outer.sender.kind != ProcessKind::ModelOwner) return reject("NEW_TASK must come from a model owner");
  if (tasks_.contains(b.task)) return reject("task id already in use");
  if (auto problem = check_params(b.params); !problem.empty()) return reject("bad task params: " + problem);
  return {};
}

TxVerdict LedgerState::validate_body(const JoinTx& b, const Transaction& outer) const {
  const auto* t = task(b.task);
  if (!t) return reject("JOIN for unknown task");
  if (t->final) return reject("JOIN for a finished task");
  if (outer.sender != b.client || b.client.kind != ProcessKind::Client) return reject("JOIN sender mismatch");
  if (b.stake < t->params.min_stake) return reject("stake below threshold");
  if (b.declared_n == 0) return reject("declared sample count must be >= 1");
  if (t->registrations.contains(b.client)) return reject("client already registered");
  return {};
}

TxVerdict LedgerState::validate_body(const StartTaskTx& b, const Transaction& outer) const {
  const auto* t = task(b.task);
  if (!t) return reject("START_TASK for unknown task");
  if (outer.sender.kind != ProcessKind::Server) return reject("START_TASK must come from a server");
  if (t->start) return reject("task already started");
  if (!t->threshold_height) return reject("not enough registered clients");
  if (auto v = check_proof(b.proof, Tag::Clients, b.task, 0, *registry_, f_s_, "START_TASK"); !v) return v;
  if (hash_value(b.first_clients) != b.proof.slot.hash_key) return reject("START_TASK proof does not cover C_1");
  if (b.first_clients != selection_or_empty(*this, b.task, 1)) {
    return reject("C_1 differs from deterministic selection");
  }
  return {};
}

TxVerdict LedgerState::validate_body(const NewRoundTx& b, const Transaction& outer) const {
  const auto* t = task(b.task);
  if (!t) return reject("NR for unknown task");
  if (outer.sender.kind != ProcessKind::Server) return reject("NR must come from a server");
  if (!t->start) return reject("NR before START_TASK");
  if (t->rounds.contains(b.round)) return reject("NR already committed for this round");
  if (b.round != t->committed_rounds() + 1) return reject("NR out of round order");
  if (b.round > t->params.final_round) return reject("NR beyond the final round");
  std::set<HashKey> keys;
  for (const auto& p : b.candidates) {
    if (auto v = check_proof(p, Tag::Upd, b.task, b.round, *registry_, f_s_, "NR candidate"); !v) return v;
    if (!keys.insert(p.slot.hash_key).second) return reject("NR candidate listed twice");
  }
  if (keys.size() < t->params.min_updates) return reject("NR candidate set smaller than m");
  if (auto v = check_proof(b.clients_proof, Tag::Clients, b.task, b.round, *registry_, f_s_, "NR clients"); !v) {
    return v;
  }
  if (hash_value(b.next_clients) != b.clients_proof.slot.hash_key) {
    return reject("NR clients proof does not cover the next client set");
  }
  if (b.round == t->params.final_round) {
    if (!b.next_clients.members.empty() || b.next_clients.round != b.round + 1 ||
        b.next_clients.task != b.task) {
      return reject("final-round NR must carry an empty next client set");
    }
  } else if (b.next_clients != selection_or_empty(*this, b.task, b.round + 1)) {
    return reject("next client set differs from deterministic selection");
  }
  return {};
}

TxVerdict LedgerState::validate_body(const FinalTx& b, const Transaction& outer) const {
  const auto* t = task(b.task);
  if (!t) return reject("FINAL for unknown task");
  if (outer.sender.kind != ProcessKind::Server) return reject("FINAL must come from a server");
  if (t->final) return reject("FINAL already committed");
  const auto fin = t->params.final_round;
  if (!t->rounds.contains(fin)) return reject("FINAL before the final round committed");
  if (auto v = check_proof(b.reward_proof, Tag::Reward, b.task, fin, *registry_, f_s_, "FINAL reward"); !v) return v;
  if (auto v = check_proof(b.model_proof, Tag::Mod, b.task, fin, *registry_, f_s_, "FINAL model"); !v) return v;
  if (b.reward.task != b.task || hash_value(b.reward) != b.reward_proof.slot.hash_key) {
    return reject("FINAL reward proof does not cover the reward info");
  }
  return {};
}

void LedgerState::apply_tx(const Transaction& tx, std::uint64_t height) {
  seen_.insert(tx_digest(tx));
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, NewTaskTx>) {
          TaskRecord rec;
          rec.params = b.params;
          rec.model_hash = b.model_hash;
          rec.owner = tx.sender;
          rec.created_height = height;
          tasks_.emplace(b.task, std::move(rec));
        } else {
          auto& rec = tasks_.at(b.task);
          if constexpr (std::is_same_v<T, JoinTx>) {
            rec.registrations[b.client] = Registration{b.stake, b.declared_n, height};
            if (!rec.threshold_height && rec.registrations.size() >= rec.params.min_clients) {
              rec.threshold_height = height;
            }
          } else if constexpr (std::is_same_v<T, StartTaskTx>) {
            rec.start = b;
            rec.start_height = height;
          } else if constexpr (std::is_same_v<T, NewRoundTx>) {
            rec.rounds[b.round] = CommittedRound{b, height};
          } else {
            rec.final = b;
            rec.final_height = height;
          }
        }
      },
      tx.body);
}

TxVerdict LedgerState::append_tx(const Transaction& tx) {
  auto verdict = validate_tx(tx);
  if (verdict) apply_tx(tx, height());
  return verdict;
}

void LedgerState::seal_block(const HashKey& hash) { block_hashes_.push_back(hash); }

void LedgerState::apply_block(const Block& block) {
  if (block.height != height()) throw std::logic_error("ledger blocks applied out of order");
  block_hashes_.push_back(block.hash);
  for (const auto& tx : block.txs) apply_tx(tx, block.height);
}

std::optional<std::uint64_t> selection_anchor(const TaskRecord& task, std::uint32_t round) {
  if (round == 0) return std::nullopt;
  if (round == 1) return task.threshold_height;
  if (round == 2) {
    if (!task.start) return std::nullopt;
    return task.start_height;
  }
  auto it = task.rounds.find(round - 2);
  if (it == task.rounds.end()) return std::nullopt;
  return it->second.height;
}

ClientSet select_clients(const LedgerState& state, TaskId task_id, std::uint32_t round) {
  const TaskRecord* task = state.task(task_id);
  if (!task) throw NotEnoughClientsError("selection for an unknown task");
  const auto anchor = selection_anchor(*task, round);
  if (!anchor || *anchor >= state.height()) {
    throw NotEnoughClientsError("selection anchor block not committed yet");
  }
  std::vector<ProcessId> registrants;
  for (const auto& [client, reg] : task->registrations) {
    if (reg.height <= *anchor) registrants.push_back(client);
  }
  const std::uint32_t k = task->params.clients_per_round;
  if (registrants.size() < task->params.min_clients || registrants.size() < k) {
    throw NotEnoughClientsError("only " + std::to_string(registrants.size()) +
                                " clients registered, need " + std::to_string(k));
  }
  Encoder prf;
  prf.str("bfl/select/v1").u64(task->params.selection_seed).u64(task_id.value).u32(round);
  prf.hash(state.block_hash(*anchor));
  const HashKey seed = sha256(prf.data());
  std::uint64_t s = 0;
  for (int i = 0; i < 8; ++i) s |= static_cast<std::uint64_t>(seed.digest[i]) << (8 * i);
  Rng rng(s);
  // Registrants come out of std::map already sorted; partial Fisher-Yates.
  for (std::uint32_t i = 0; i < k; ++i) {
    const auto pick = i + rng.below(registrants.size() - i);
    std::swap(registrants[i], registrants[pick]);
  }
  ClientSet out;
  out.task = task_id;
  out.round = round;
  out.members.assign(registrants.begin(), registrants.begin() + k);
  std::sort(out.members.begin(), out.members.end());
  return out;
}

std::vector<BlockPtr> LedgerView::on_block(BlockPtr block) {
  std::vector<BlockPtr> applied;
  if (block->height < state_.height()) return applied;
  pending_.emplace(block->height, std::move(block));
  while (!pending_.empty() && pending_.begin()->first == state_.height()) {
    auto next = pending_.begin()->second;
    pending_.erase(pending_.begin());
    state_.apply_block(*next);
    applied.push_back(std::move(next));
  }
  return applied;
}

std::string transcript_line(std::uint64_t height, const Transaction& tx, const HashKey& digest) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06llu", static_cast<unsigned long long>(height));
  std::string line = buf;
  line += ' ';
  line += tx_kind_name(tx.kind());
  line += ' ';
  line += to_string(tx.sender);
  line += ' ';
  line += digest.hex();
  return line;
}

}  // namespace bfl
