#include "bfl/storage.hpp"

#include <memory>

namespace bfl {

std::string_view behavior_name(ReplicaBehavior b) {
  switch (b) {
    case ReplicaBehavior::Correct: return "correct";
    case ReplicaBehavior::Silent: return "silent";
    case ReplicaBehavior::GarbageReplier: return "garbage";
  }
  return "?";
}

bool ReplicaState::store(const HashKey& key, const SharedBytes& value) {
  if (!value || sha256(*value) != key) {
    ++rejected_;
    return false;
  }
  auto [it, fresh] = entries_.try_emplace(key, value);
  if (!fresh && *it->second != *value) {
    ++rejected_;
    return false;
  }
  return true;
}

SharedBytes ReplicaState::get(const HashKey& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : it->second;
}

std::string ReplicaState::dump() const {
  std::string out;
  for (const auto& [key, value] : entries_) {
    out += key.hex();
    out += ' ';
    out += sha256(*value).hex();
    out += '\n';
  }
  return out;
}

void ReplicaActor::on_message(const ProcessId& from, const Message& msg) {
  if (behavior_ == ReplicaBehavior::Silent) return;
  if (const auto* s = std::get_if<StoreMsg>(&msg)) {
    const auto before = state_.rejected();
    if (!state_.store(s->key, s->value)) {
      if (state_.rejected() > before) sim_->metrics().count("storage_rejections");
      return;
    }
    if (behavior_ != ReplicaBehavior::Correct) return;
    auto it = waiting_.find(s->key);
    if (it == waiting_.end()) return;
    for (const auto& reader : it->second) sim_->send(self_, reader, ReplyMsg{s->key, s->value});
    waiting_.erase(it);
  } else if (const auto* q = std::get_if<QueryMsg>(&msg)) {
    if (behavior_ == ReplicaBehavior::GarbageReplier) {
      // A well-formed reply whose value does not hash to the key.
      Bytes junk(q->key.digest.begin(), q->key.digest.end());
      junk.push_back(0xff);
      sim_->send(self_, from, ReplyMsg{q->key, std::make_shared<const Bytes>(std::move(junk))});
      return;
    }
    if (auto v = state_.get(q->key)) {
      sim_->send(self_, from, ReplyMsg{q->key, std::move(v)});
    } else {
      waiting_[q->key].push_back(from);
    }
  }
}

StorageReader::StorageReader(Simulator* sim, ProcessId self, std::vector<ProcessId> replicas,
                             const KeyRegistry* registry, std::uint32_t f_s, SimTime deadline)
    : sim_(sim),
      self_(self),
      replicas_(std::move(replicas)),
      registry_(registry),
      f_s_(f_s),
      deadline_(deadline) {}

void StorageReader::read(const PoAI& proof, ReadCallback done) {
  if (!verify_poai(proof, *registry_, f_s_)) throw ProofError("read: proof does not verify");
  read_key(proof.hash_key(), std::move(done));
}

void StorageReader::read_key(const HashKey& key, ReadCallback done) {
  const std::uint64_t id = next_id_++;
  reads_.emplace(id, Pending{key, std::move(done)});
  for (const auto& r : replicas_) {
    sim_->send(self_, r, QueryMsg{key});
    ++queries_sent_;
  }
  sim_->set_timer(self_, deadline_, TimerMsg{kTimerReadDeadline, id});
}

void StorageReader::get_all(const std::vector<PoAI>& proofs, GetAllCallback done) {
  for (std::size_t i = 0; i < proofs.size(); ++i) {
    if (!verify_poai(proofs[i], *registry_, f_s_)) {
      throw ProofError("get_all: proof " + std::to_string(i) + " does not verify", i);
    }
  }
  if (proofs.empty()) {
    done({});
    return;
  }
  struct Gather {
    std::vector<ReadResult> results;
    std::size_t remaining;
    bool finished = false;
    GetAllCallback done;
  };
  auto g = std::make_shared<Gather>();
  g->results.resize(proofs.size());
  g->remaining = proofs.size();
  g->done = std::move(done);
  for (std::size_t i = 0; i < proofs.size(); ++i) {
    g->results[i].key = proofs[i].hash_key();
    read_key(proofs[i].hash_key(), [g, i](const ReadResult& r) {
      if (g->finished) return;
      g->results[i] = r;
      if (r.timed_out() || --g->remaining == 0) {
        g->finished = true;
        g->done(g->results);
      }
    });
  }
}

void StorageReader::finish(std::uint64_t id, SharedBytes value) {
  auto it = reads_.find(id);
  if (it == reads_.end()) return;
  Pending p = std::move(it->second);
  reads_.erase(it);
  p.done(ReadResult{p.key, std::move(value)});
}

bool StorageReader::on_reply(const ReplyMsg& reply) {
  bool mine = false;
  bool checked = false;
  bool matches = false;
  // Completing one read may start others, so collect ids first.
  std::vector<std::uint64_t> ids;
  for (const auto& [id, p] : reads_) {
    if (p.key != reply.key) continue;
    mine = true;
    if (!checked) {
      checked = true;
      matches = reply.value && sha256(*reply.value) == reply.key;
    }
    if (matches) ids.push_back(id);
  }
  if (mine && !matches) ++discarded_;
  for (auto id : ids) finish(id, reply.value);
  return mine;
}

bool StorageReader::on_timer(const TimerMsg& timer) {
  if (timer.kind != kTimerReadDeadline) return false;
  finish(timer.id, nullptr);
  return true;
}

}  // namespace bfl
