#include "bfl/protocol.hpp"

#include <algorithm>

#include "bfl/encoding.hpp"

namespace bfl {

namespace {

constexpr std::size_t kMaxBuffered = 4096;

std::shared_ptr<const Bytes> share(Bytes b) { return std::make_shared<const Bytes>(std::move(b)); }

}  // namespace

std::string_view behavior_name(ServerBehavior b) {
  switch (b) {
    case ServerBehavior::Correct: return "correct";
    case ServerBehavior::Silent: return "silent";
    case ServerBehavior::Equivocator: return "equivocator";
    case ServerBehavior::ModelCorruptor: return "model_corruptor";
    case ServerBehavior::BogusNRSender: return "bogus_nr";
  }
  return "?";
}

std::string_view behavior_name(ClientBehavior b) {
  switch (b) {
    case ClientBehavior::Honest: return "honest";
    case ClientBehavior::Attacker: return "attacker";
    case ClientBehavior::Silent: return "silent";
  }
  return "?";
}

ParamVector corrupt_model(const ParamVector& w, const EpsilonVector& eps) {
  ParamVector out = w;
  for (std::size_t i = 0; i < out.dimension(); ++i) {
    // eps may be zero; keep the offset visible either way.
    out[i] += 100.0 * std::max(eps.at(i), 1e-9);
  }
  return out;
}

HashKey equivocal_key(const HashKey& key) {
  Encoder enc(ValueKind::Digest);
  enc.str("equivocate").hash(key);
  return sha256(enc.data());
}

std::vector<WeightedUpdate> aggregation_order(const std::vector<std::shared_ptr<const Update>>& updates,
                                              const TaskRecord& task, std::size_t rotation) {
  std::map<ProcessId, std::pair<HashKey, const Update*>> best;
  for (const auto& u : updates) {
    const HashKey key = hash_value(*u);
    auto [it, fresh] = best.try_emplace(u->client, key, u.get());
    if (!fresh && key < it->second.first) it->second = {key, u.get()};
  }
  std::vector<WeightedUpdate> out;
  out.reserve(best.size());
  for (const auto& [client, entry] : best) {
    auto reg = task.registrations.find(client);
    const std::uint64_t weight = reg == task.registrations.end() ? 1 : reg->second.declared_n;
    out.push_back(WeightedUpdate{entry.second->vector, weight, client, entry.second->round});
  }
  if (!out.empty()) {
    std::rotate(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(rotation % out.size()), out.end());
  }
  return out;
}

ParamVector aggregate(const AggregatorSpec& spec, const ParamVector& prev,
                      std::span<const WeightedUpdate> ordered) {
  switch (spec.kind) {
    case AggregatorKind::FedAvg: return fedavg_step(prev, ordered);
    case AggregatorKind::Median: return median_step(prev, ordered);
    case AggregatorKind::TrimmedMean: return trimmed_mean_step(prev, ordered, spec.trim);
  }
  throw std::invalid_argument("unknown aggregator");
}

RewardInfo reward_info(const TaskRecord& task, TaskId id, const std::map<HashKey, ProcessId>& client_of) {
  RewardInfo info;
  info.task = id;
  for (const auto& [round, committed] : task.rounds) {
    std::set<ProcessId> contributors;
    for (const auto& p : committed.nr.candidates) {
      auto it = client_of.find(p.hash_key());
      if (it != client_of.end()) contributors.insert(it->second);
    }
    for (const auto& c : contributors) ++info.counts[c];
  }
  return info;
}

// ---------------------------------------------------------------------------
// Server

ServerActor::ServerActor(const Deployment& dep, std::uint32_t index, ServerConfig cfg)
    : dep_(dep),
      index_(index),
      self_(ProcessId::server(index)),
      cfg_(std::move(cfg)),
      key_(dep.registry->signing_key(self_)),
      view_(dep.registry, dep.f_s),
      acc_(dep.registry, dep.f_s),
      reader_(dep.sim, self_, dep.replicas, dep.registry, dep.f_s, dep.read_deadline) {}

std::shared_ptr<const ParamVector> ServerActor::model_by_key(const HashKey& key) const {
  auto it = known_models_.find(key);
  return it == known_models_.end() ? nullptr : it->second;
}

const TaskRecord* ServerActor::record() const { return task_ ? view_.state().task(*task_) : nullptr; }

void ServerActor::mark(std::uint32_t round, Milestone m, std::optional<SimTime> at) {
  if (correct()) dep_.sim->metrics().mark(round, m, at.value_or(dep_.sim->now()));
}

void ServerActor::fail(const std::string& why) {
  if (!failure_) failure_ = why;
  dep_.sim->log(self_, "failure: " + why);
}

const PoAI* ServerActor::find_poai(Tag tag, const HashKey& key, std::uint32_t round) const {
  auto it = poais_.find(VoteSlot{tag, key, *task_, round});
  return it == poais_.end() ? nullptr : &it->second;
}

void ServerActor::on_message(const ProcessId& from, const Message& msg) {
  if (cfg_.behavior == ServerBehavior::Silent) return;
  if (const auto* b = std::get_if<BlockMsg>(&msg)) {
    on_block(b->block);
  } else if (const auto* u = std::get_if<UpdateMsg>(&msg)) {
    // Updates are accepted only first-hand from the client that signed them.
    if (u->update && u->update->client == from) on_update(u->update);
  } else if (const auto* v = std::get_if<VoteMsg>(&msg)) {
    on_vote(v->vote);
  } else if (const auto* m = std::get_if<ModelMsg>(&msg)) {
    on_model(from, *m);
  } else if (const auto* r = std::get_if<ReplyMsg>(&msg)) {
    reader_.on_reply(*r);
  } else if (const auto* t = std::get_if<TimerMsg>(&msg)) {
    reader_.on_timer(*t);
  }
  try_progress();
}

void ServerActor::on_block(const BlockPtr& block) {
  const auto applied = view_.on_block(block);
  for (const auto& b : applied) {
    for (const auto& tx : b->txs) on_tx(tx, *b);
  }
  if (!applied.empty()) resubmit();
}

void ServerActor::on_tx(const Transaction& tx, const Block& block) {
  if (const auto* nt = std::get_if<NewTaskTx>(&tx.body)) {
    if (task_) return;
    task_ = nt->task;
    initial_requested_ = true;
    reader_.read_key(nt->model_hash, [this](const ReadResult& r) {
      if (r.timed_out()) return fail("initial model unavailable");
      try {
        auto w = std::make_shared<const ParamVector>(decode_param_vector(*r.value));
        known_models_[r.key] = w;
        models_[0] = std::move(w);
      } catch (const std::exception& e) {
        fail(std::string("initial model undecodable: ") + e.what());
      }
    });
    return;
  }
  if (!task_ || tx.task() != *task_) return;
  const auto* rec = record();
  if (const auto* st = std::get_if<StartTaskTx>(&tx.body)) {
    auto& rs = rounds_[1];
    rs.selected = st->first_clients;
    mark(1, Milestone::RoundStart, block.time_ns);
    auto early = std::move(rs.early);
    rs.early.clear();
    for (const auto& u : early) process_update(rs, u);
    bogus_nr(1);
  } else if (const auto* nr = std::get_if<NewRoundTx>(&tx.body)) {
    mark(nr->round, Milestone::NrDelivered);
    if (nr->round < rec->params.final_round) {
      auto& rs = rounds_[nr->round + 1];
      rs.selected = nr->next_clients;
      auto early = std::move(rs.early);
      rs.early.clear();
      for (const auto& u : early) process_update(rs, u);
      bogus_nr(nr->round + 1);
    }
  }
}

void ServerActor::on_update(const std::shared_ptr<const Update>& u) {
  const auto* rec = record();
  if (!rec || u->task != *task_ || u->round == 0 || u->round > rec->params.final_round ||
      rec->rounds.contains(u->round)) {
    if (correct()) dep_.sim->metrics().count("dropped_updates");
    return;
  }
  auto& rs = rounds_[u->round];
  if (!rs.selected) {
    if (rs.early.size() < kMaxBuffered) rs.early.push_back(u);
    return;
  }
  process_update(rs, u);
}

void ServerActor::process_update(RoundState& rs, const std::shared_ptr<const Update>& u) {
  const auto* rec = record();
  const bool valid = rs.selected->contains(u->client) && !rs.processed.contains(u->client) &&
                     u->vector.dimension() == rec->params.dimension && u->vector.all_finite() &&
                     verify_update(*dep_.registry, *u);
  if (!valid) {
    if (correct()) dep_.sim->metrics().count("dropped_updates");
    return;
  }
  rs.processed.insert(u->client);
  auto bytes = share(canonical_encode(*u));
  const HashKey key = sha256(*bytes);
  held_[key] = u;
  store_value(key, std::move(bytes));
  cast_vote(Tag::Upd, key, u->round);
  mark(u->round, Milestone::FirstUpdate);
}

void ServerActor::store_value(const HashKey& key, SharedBytes value) {
  for (const auto& r : dep_.replicas) dep_.sim->send(self_, r, StoreMsg{key, value});
}

void ServerActor::cast_vote(Tag tag, const HashKey& key, std::uint32_t round) {
  const auto vote = make_local_proof(key_, tag, key, *task_, round);
  for (const auto& s : dep_.servers) dep_.sim->send(self_, s, VoteMsg{vote});
  if (cfg_.behavior == ServerBehavior::Equivocator) {
    const auto other = make_local_proof(key_, tag, equivocal_key(key), *task_, round);
    for (const auto& s : dep_.servers) dep_.sim->send(self_, s, VoteMsg{other});
  }
}

void ServerActor::submit(std::shared_ptr<const Transaction> tx) {
  dep_.sim->send(self_, ProcessId::ledger(), SubmitTxMsg{std::move(tx), dep_.sim->now()});
}

void ServerActor::on_vote(const LocalProof& vote) {
  const auto invalid = acc_.dropped_invalid();
  const auto duplicate = acc_.dropped_duplicate();
  auto p = acc_.accumulate(vote);
  if (correct()) {
    auto& m = dep_.sim->metrics();
    if (acc_.dropped_invalid() > invalid) m.count("dropped_votes_invalid");
    if (acc_.dropped_duplicate() > duplicate) m.count("dropped_votes_duplicate");
  }
  if (p) on_poai(*p);
}

void ServerActor::on_poai(const PoAI& p) {
  emitted_.push_back(p);
  poais_.emplace(p.slot, p);
  dep_.sim->log(self_, "poai " + render(p));
  if (poai_hook_) poai_hook_(self_, p);
  if (!task_ || p.slot.task != *task_) return;
  if (p.tag() == Tag::Upd) {
    auto& rs = rounds_[p.round()];
    if (rs.cand_keys.insert(p.hash_key()).second) rs.cand.push_back(p);
  } else if (p.tag() == Tag::Mod) {
    if (mod_poai_.emplace(p.round(), p).second) {
      mark(p.round(), Milestone::ModelCertified);
      mark(p.round() + 1, Milestone::RoundStart);
    }
  }
}

void ServerActor::on_model(const ProcessId& from, const ModelMsg& m) {
  const auto* rec = record();
  if (!rec || !m.model || m.task != *task_ || m.round == 0 || m.round > rec->params.final_round) return;
  auto& rs = rounds_[m.round];
  if (!models_.contains(m.round)) {
    if (rs.early_models.size() < kMaxBuffered) rs.early_models.emplace_back(from, m);
    return;
  }
  judge_model(rs, from, m);
}

void ServerActor::judge_model(RoundState& rs, const ProcessId& from, const ModelMsg& m) {
  const auto& params = record()->params;
  const auto& own = *models_.at(m.round);
  SharedBytes bytes;
  HashKey key;
  try {
    bytes = share(canonical_encode(*m.model));
    key = sha256(*bytes);
  } catch (const EncodingError&) {
    if (correct()) dep_.sim->metrics().count("rejected_models");
    return;
  }
  if (rs.voted_models.contains(key)) return;
  bool accept = false;
  if (cfg_.behavior == ServerBehavior::ModelCorruptor) {
    accept = cfg_.colluders.contains(from);
  } else {
    try {
      accept = epsilon_close(*m.model, own, params.eps);
    } catch (const DimensionError&) {
      accept = false;
    }
    if (accept && correct()) {
      dep_.sim->metrics().gauge_max("max_model_divergence", max_abs_difference(*m.model, own));
    }
    if (!accept && correct()) dep_.sim->metrics().count("rejected_models");
  }
  if (!accept) return;
  rs.voted_models.insert(key);
  known_models_.emplace(key, m.model);
  store_value(key, std::move(bytes));
  cast_vote(Tag::Mod, key, m.round);
}

void ServerActor::try_progress() {
  if (failure_ || !task_ || !record()) return;
  try_start_task();
  const auto fin = record()->params.final_round;
  for (std::uint32_t r = 1; r <= fin; ++r) {
    if (!rounds_.contains(r)) continue;
    try_fire(r);
  }
  try_aggregate();
  for (const auto& [r, p] : mod_poai_) try_fan_out(r);
  try_final();
}

void ServerActor::try_start_task() {
  const auto* rec = record();
  if (rec->start || !rec->threshold_height) return;
  if (!first_clients_) {
    try {
      first_clients_ = select_clients(view_.state(), *task_, 1);
    } catch (const NotEnoughClientsError&) {
      return;
    }
    cast_vote(Tag::Clients, hash_value(*first_clients_), 0);
  }
  if (my_start_) return;
  if (const auto* p = find_poai(Tag::Clients, hash_value(*first_clients_), 0)) {
    my_start_ = std::make_shared<const Transaction>(
        make_signed_tx(key_, StartTaskTx{*task_, *first_clients_, *p}));
    submit(my_start_);
  }
}

void ServerActor::try_fire(std::uint32_t round) {
  const auto* rec = record();
  if (rec->rounds.contains(round)) return;
  auto& rs = rounds_[round];
  if (!rs.nr_fired) {
    if (rs.cand.size() < rec->params.min_updates) return;
    ClientSet next{*task_, round + 1, {}};
    if (round < rec->params.final_round) {
      try {
        next = select_clients(view_.state(), *task_, round + 1);
      } catch (const NotEnoughClientsError&) {
        return;  // anchor block not seen yet
      }
    }
    rs.nr_fired = true;
    rs.cand_snapshot = rs.cand;
    std::sort(rs.cand_snapshot.begin(), rs.cand_snapshot.end(),
              [](const PoAI& a, const PoAI& b) { return a.hash_key() < b.hash_key(); });
    rs.next = next;
    cast_vote(Tag::Clients, hash_value(next), round);
  }
  if (rs.my_nr) return;
  if (const auto* p = find_poai(Tag::Clients, hash_value(*rs.next), round)) {
    rs.my_nr = std::make_shared<const Transaction>(
        make_signed_tx(key_, NewRoundTx{*task_, round, rs.cand_snapshot, *rs.next, *p}));
    submit(rs.my_nr);
    mark(round, Milestone::NrSubmitted);
    dep_.sim->log(self_, "submit NR " + std::to_string(round) + " with " + std::to_string(rs.cand_snapshot.size()) +
                             " updates");
  }
}

void ServerActor::try_aggregate() {
  const auto* rec = record();
  while (!failure_) {
    const std::uint32_t r = aggregated_ + 1;
    if (r > rec->params.final_round || !models_.contains(r - 1)) return;
    auto committed = rec->rounds.find(r);
    if (committed == rec->rounds.end()) return;
    auto& rs = rounds_[r];
    std::vector<PoAI> missing;
    for (const auto& p : committed->second.nr.candidates) {
      if (!held_.contains(p.hash_key())) missing.push_back(p);
    }
    if (missing.empty()) {
      finish_aggregation(r);
      continue;
    }
    if (rs.fetching) return;
    rs.fetching = true;
    try {
      reader_.get_all(missing, [this, r](const std::vector<ReadResult>& results) {
        for (const auto& res : results) {
          if (res.timed_out()) return fail("AvailabilityTimeout fetching round " + std::to_string(r));
        }
        for (const auto& res : results) {
          try {
            held_[res.key] = std::make_shared<const Update>(decode_update(*res.value));
            ++fetched_;
          } catch (const std::exception& e) {
            return fail(std::string("committed update undecodable: ") + e.what());
          }
        }
      });
    } catch (const ProofError& e) {
      fail(e.what());
    }
    return;
  }
}

void ServerActor::finish_aggregation(std::uint32_t r) {
  const auto* rec = record();
  mark(r, Milestone::FetchDone);
  std::vector<std::shared_ptr<const Update>> updates;
  for (const auto& p : rec->rounds.at(r).nr.candidates) updates.push_back(held_.at(p.hash_key()));
  const auto ordered = aggregation_order(updates, *rec, index_);
  std::shared_ptr<const ParamVector> w;
  try {
    w = std::make_shared<const ParamVector>(aggregate(rec->params.aggregator, *models_.at(r - 1), ordered));
  } catch (const std::invalid_argument& e) {
    return fail(std::string("aggregation failed: ") + e.what());
  }
  if (!w->all_finite()) return fail("aggregate of round " + std::to_string(r) + " is not finite");
  models_[r] = w;
  aggregated_ = r;
  dep_.sim->log(self_, "aggregate " + std::to_string(r) + " " + hash_value(*w).hex());

  auto published = w;
  if (cfg_.behavior == ServerBehavior::ModelCorruptor) {
    published = std::make_shared<const ParamVector>(corrupt_model(*w, rec->params.eps));
  }
  auto bytes = share(canonical_encode(*published));
  const HashKey key = sha256(*bytes);
  known_models_[key] = published;
  auto& rs = rounds_[r];
  rs.voted_models.insert(key);
  store_value(key, std::move(bytes));
  for (const auto& s : dep_.servers) {
    if (s != self_) dep_.sim->send(self_, s, ModelMsg{*task_, r, published});
  }
  cast_vote(Tag::Mod, key, r);
  auto early = std::move(rs.early_models);
  rs.early_models.clear();
  for (const auto& [from, m] : early) judge_model(rs, from, m);
}

void ServerActor::try_fan_out(std::uint32_t round) {
  const auto* rec = record();
  auto& rs = rounds_[round];
  if (rs.fanned_out || round >= rec->params.final_round) return;
  auto committed = rec->rounds.find(round);
  if (committed == rec->rounds.end()) return;
  rs.fanned_out = true;
  for (const auto& c : committed->second.nr.next_clients.members) {
    dep_.sim->send(self_, c, ModelProofMsg{mod_poai_.at(round)});
  }
}

void ServerActor::try_final() {
  const auto* rec = record();
  const auto fin = rec->params.final_round;
  if (rec->final || !mod_poai_.contains(fin) || aggregated_ < fin) return;
  if (!reward_) {
    std::map<HashKey, ProcessId> client_of;
    for (const auto& [round, committed] : rec->rounds) {
      for (const auto& p : committed.nr.candidates) client_of[p.hash_key()] = held_.at(p.hash_key())->client;
    }
    reward_ = reward_info(*rec, *task_, client_of);
    cast_vote(Tag::Reward, hash_value(*reward_), fin);
  }
  if (my_final_) return;
  if (const auto* p = find_poai(Tag::Reward, hash_value(*reward_), fin)) {
    my_final_ = std::make_shared<const Transaction>(
        make_signed_tx(key_, FinalTx{*task_, *reward_, *p, mod_poai_.at(fin)}));
    submit(my_final_);
    dep_.sim->log(self_, "submit FINAL");
  }
}

void ServerActor::resubmit() {
  const auto* rec = record();
  if (!rec) return;
  if (my_start_ && !rec->start) submit(my_start_);
  for (const auto& [round, rs] : rounds_) {
    if (rs.my_nr && !rec->rounds.contains(round)) submit(rs.my_nr);
  }
  if (my_final_ && !rec->final) submit(my_final_);
}

void ServerActor::bogus_nr(std::uint32_t round) {
  if (cfg_.behavior != ServerBehavior::BogusNRSender || !bogus_sent_.insert(round).second) return;
  const auto* rec = record();
  // Votes are real signatures by this server with the signer field rewritten
  // for the others, so only the first one verifies.
  auto forge = [&](Tag tag, const HashKey& key) {
    PoAI p;
    p.slot = VoteSlot{tag, key, *task_, round};
    for (std::uint32_t i = 0; i <= dep_.f_s; ++i) {
      auto vote = make_local_proof(key_, tag, key, *task_, round);
      vote.signature.signer = ProcessId::server(i);
      p.votes.push_back(vote);
    }
    return p;
  };
  NewRoundTx nr;
  nr.task = *task_;
  nr.round = round;
  for (std::uint32_t i = 0; i < rec->params.min_updates; ++i) {
    Encoder enc(ValueKind::Digest);
    enc.str("bogus").u32(round).u32(i);
    nr.candidates.push_back(forge(Tag::Upd, sha256(enc.data())));
  }
  nr.next_clients = ClientSet{*task_, round + 1, {}};
  nr.clients_proof = forge(Tag::Clients, hash_value(nr.next_clients));
  submit(std::make_shared<const Transaction>(make_signed_tx(key_, nr)));
  dep_.sim->metrics().count("bogus_nr_submitted");
}

// ---------------------------------------------------------------------------
// Client

ClientActor::ClientActor(const Deployment& dep, std::uint32_t index, ClientConfig cfg, ClientDataset data)
    : dep_(dep),
      self_(ProcessId::client(index)),
      cfg_(cfg),
      data_(std::move(data)),
      key_(dep.registry->signing_key(self_)),
      view_(dep.registry, dep.f_s),
      reader_(dep.sim, self_, dep.replicas, dep.registry, dep.f_s, dep.read_deadline) {}

void ClientActor::on_message(const ProcessId&, const Message& msg) {
  if (const auto* b = std::get_if<BlockMsg>(&msg)) {
    on_block(b->block);
  } else if (const auto* p = std::get_if<ModelProofMsg>(&msg)) {
    on_model_proof(p->proof);
  } else if (const auto* r = std::get_if<ReplyMsg>(&msg)) {
    reader_.on_reply(*r);
  } else if (const auto* t = std::get_if<TimerMsg>(&msg)) {
    if (t->kind == kTimerClientTrain) {
      auto it = pending_send_.find(t->id);
      if (it == pending_send_.end()) return;
      for (const auto& s : dep_.servers) dep_.sim->send(self_, s, UpdateMsg{it->second});
      pending_send_.erase(it);
    } else {
      reader_.on_timer(*t);
    }
  }
}

void ClientActor::on_block(const BlockPtr& block) {
  for (const auto& b : view_.on_block(block)) {
    for (const auto& tx : b->txs) {
      if (const auto* nt = std::get_if<NewTaskTx>(&tx.body)) {
        if (task_) continue;
        task_ = nt->task;
        if (!joined_) {
          joined_ = true;
          JoinTx join{nt->task, self_, cfg_.stake, std::max<std::uint64_t>(data_.size(), 1)};
          auto jt = std::make_shared<const Transaction>(make_signed_tx(key_, join));
          dep_.sim->send(self_, ProcessId::ledger(), SubmitTxMsg{jt, dep_.sim->now()});
        }
      } else if (!task_ || tx.task() != *task_) {
        continue;
      } else if (const auto* st = std::get_if<StartTaskTx>(&tx.body)) {
        if (st->first_clients.contains(self_)) try_start_round(1);
      } else if (const auto* nr = std::get_if<NewRoundTx>(&tx.body)) {
        if (nr->next_clients.contains(self_)) try_start_round(nr->round + 1);
      }
    }
  }
}

void ClientActor::on_model_proof(const PoAI& p) {
  if (!task_ || p.slot.task != *task_ || p.tag() != Tag::Mod || proofs_.contains(p.round())) return;
  if (!verify_poai(p, *dep_.registry, dep_.f_s)) {
    dep_.sim->metrics().count("client_rejected_proofs");
    return;
  }
  proofs_.emplace(p.round(), p);
  try_start_round(p.round() + 1);
}

void ClientActor::try_start_round(std::uint32_t round) {
  if (cfg_.behavior == ClientBehavior::Silent || started_.contains(round) || !task_) return;
  const auto* rec = view_.state().task(*task_);
  if (!rec) return;
  auto on_read = [this, round](const ReadResult& r) {
    if (r.timed_out()) return straggle(round, "model read timed out");
    train(round, r.value);
  };
  if (round == 1) {
    if (!rec->start || !rec->start->first_clients.contains(self_)) return;
    started_.insert(round);
    reader_.read_key(rec->model_hash, on_read);
    return;
  }
  auto nr = rec->rounds.find(round - 1);
  if (nr == rec->rounds.end() || !nr->second.nr.next_clients.contains(self_)) return;
  auto proof = proofs_.find(round - 1);
  if (proof == proofs_.end()) return;
  started_.insert(round);
  reader_.read(proof->second, on_read);
}

void ClientActor::train(std::uint32_t round, const SharedBytes& model_bytes) {
  const auto* rec = view_.state().task(*task_);
  ParamVector g;
  try {
    const ParamVector w = decode_param_vector(*model_bytes);
    Rng rng = Rng::stream(cfg_.seed, "train", self_.index, round);
    g = local_update(cfg_.task_kind, data_, w, rec->params.training, rng);
  } catch (const TrainingDivergedError&) {
    return straggle(round, "training diverged");
  } catch (const std::exception& e) {
    return straggle(round, e.what());
  }
  if (cfg_.behavior == ClientBehavior::Attacker) g = apply_attack(g, cfg_.attack);
  if (!g.all_finite()) return straggle(round, "update not finite");
  auto upd = std::make_shared<const Update>(
      make_signed_update(key_, *task_, round, std::move(g), std::max<std::uint64_t>(data_.size(), 1)));
  ++trained_;
  dep_.sim->log(self_, "update round " + std::to_string(round) + " " + hash_value(*upd).hex());
  if (cfg_.train_time > 0) {
    const std::uint64_t id = round;
    pending_send_[id] = upd;
    dep_.sim->set_timer(self_, cfg_.train_time, TimerMsg{kTimerClientTrain, id});
    return;
  }
  for (const auto& s : dep_.servers) dep_.sim->send(self_, s, UpdateMsg{upd});
}

void ClientActor::straggle(std::uint32_t round, std::string_view why) {
  ++stragglers_;
  dep_.sim->metrics().count("stragglers");
  dep_.sim->log(self_, "straggler round " + std::to_string(round) + ": " + std::string(why));
}

// ---------------------------------------------------------------------------
// Model owner

ModelOwnerActor::ModelOwnerActor(const Deployment& dep, OwnerConfig cfg)
    : dep_(dep),
      cfg_(std::move(cfg)),
      key_(dep.registry->signing_key(ProcessId::owner())),
      view_(dep.registry, dep.f_s),
      reader_(dep.sim, ProcessId::owner(), dep.replicas, dep.registry, dep.f_s, dep.read_deadline) {}

void ModelOwnerActor::on_start() {
  auto bytes = share(canonical_encode(cfg_.initial_model));
  const HashKey key = sha256(*bytes);
  for (const auto& r : dep_.replicas) dep_.sim->send(ProcessId::owner(), r, StoreMsg{key, bytes});
  auto tx = std::make_shared<const Transaction>(make_signed_tx(key_, NewTaskTx{cfg_.task, cfg_.params, key}));
  dep_.sim->send(ProcessId::owner(), ProcessId::ledger(), SubmitTxMsg{tx, dep_.sim->now()});
}

void ModelOwnerActor::on_message(const ProcessId&, const Message& msg) {
  if (const auto* r = std::get_if<ReplyMsg>(&msg)) {
    reader_.on_reply(*r);
    return;
  }
  if (const auto* t = std::get_if<TimerMsg>(&msg)) {
    reader_.on_timer(*t);
    return;
  }
  const auto* b = std::get_if<BlockMsg>(&msg);
  if (!b) return;
  for (const auto& block : view_.on_block(b->block)) {
    for (const auto& tx : block->txs) {
      const auto* fin = std::get_if<FinalTx>(&tx.body);
      if (!fin || fin->task != cfg_.task || final_) continue;
      const auto& reg = *dep_.registry;
      const auto t_fin = cfg_.params.final_round;
      const bool ok = fin->model_proof.tag() == Tag::Mod && fin->model_proof.round() == t_fin &&
                      fin->reward_proof.tag() == Tag::Reward && fin->reward_proof.round() == t_fin &&
                      verify_poai(fin->model_proof, reg, dep_.f_s) &&
                      verify_poai(fin->reward_proof, reg, dep_.f_s) &&
                      hash_value(fin->reward) == fin->reward_proof.hash_key();
      if (!ok) {
        ++forged_finals_;
        continue;
      }
      final_ = *fin;
      reader_.read(fin->model_proof, [this](const ReadResult& r) {
        if (r.timed_out()) {
          failure_ = "final model unavailable";
          return;
        }
        try {
          final_model_ = std::make_shared<const ParamVector>(decode_param_vector(*r.value));
          finished_at_ = dep_.sim->now();
          dep_.sim->log(ProcessId::owner(), "final model " + r.key.hex());
        } catch (const std::exception& e) {
          failure_ = std::string("final model undecodable: ") + e.what();
        }
      });
    }
  }
}

}  // namespace bfl
