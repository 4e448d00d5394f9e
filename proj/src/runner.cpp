#include "bfl/runner.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>

#include "bfl/encoding.hpp"
#include "json.hpp"

namespace bfl {

namespace fs = std::filesystem;

std::string_view outcome_name(Outcome o) {
  return o == Outcome::Finished ? "finished" : "liveness_failure";
}

Simulation::Simulation(const Scenario& scenario)
    : scenario_(scenario),
      registry_(KeyRegistry::derive(scenario.seed, scenario.population())) {
  if (auto e = validate_scenario(scenario_); !e.empty()) throw ConfigError(0, e);
  const auto& s = scenario_;
  sim_ = std::make_unique<Simulator>(s.seed, s.network);

  Rng data_rng = Rng::stream(s.seed, "data");
  task_ = make_task(s.data.kind, s.params.dimension, s.data.noise, data_rng);
  datasets_ = make_client_datasets(task_, s.clients, s.data.samples_per_client, s.data.partition, data_rng);
  initial_ = ParamVector::zeros(s.params.dimension);
  if (s.instahide) {
    for (std::uint32_t i = 0; i < s.clients; ++i) {
      Rng rng = Rng::stream(s.seed, "instahide", i);
      encodings_.push_back(instahide_encode(datasets_[i], InstaHideConfig{s.mix_count, i}, rng));
    }
  }

  Deployment dep;
  dep.sim = sim_.get();
  dep.registry = &registry_;
  dep.f_s = s.f_s;
  for (std::uint32_t i = 0; i < s.servers(); ++i) dep.servers.push_back(ProcessId::server(i));
  for (std::uint32_t i = 0; i < s.replicas(); ++i) dep.replicas.push_back(ProcessId::replica(i));
  dep.read_deadline = s.effective_read_deadline();

  ledger_ = std::make_unique<LedgerActor>(sim_.get(), &registry_, s.f_s, s.block_interval, s.seed);
  sim_->add_actor(ProcessId::ledger(), ledger_.get());

  for (const auto& id : dep.replicas) {
    auto it = s.faults.replicas.find(id);
    const auto behavior = it == s.faults.replicas.end() ? ReplicaBehavior::Correct : it->second;
    replicas_.push_back(std::make_unique<ReplicaActor>(sim_.get(), id, behavior));
    sim_->add_actor(id, replicas_.back().get());
  }

  std::set<ProcessId> corruptors;
  for (const auto& [id, b] : s.faults.servers) {
    if (b == ServerBehavior::ModelCorruptor) corruptors.insert(id);
  }
  for (std::uint32_t i = 0; i < s.servers(); ++i) {
    const auto id = ProcessId::server(i);
    ServerConfig cfg;
    auto it = s.faults.servers.find(id);
    if (it != s.faults.servers.end()) cfg.behavior = it->second;
    if (cfg.behavior == ServerBehavior::ModelCorruptor) {
      cfg.colluders = corruptors;
      cfg.colluders.erase(id);
    }
    servers_.push_back(std::make_unique<ServerActor>(dep, i, cfg));
    sim_->add_actor(id, servers_.back().get());
    ledger_->subscribe(id);
  }

  for (std::uint32_t i = 0; i < s.clients; ++i) {
    const auto id = ProcessId::client(i);
    ClientConfig cfg;
    auto it = s.faults.clients.find(id);
    if (it != s.faults.clients.end()) cfg.behavior = it->second;
    if (cfg.behavior == ClientBehavior::Attacker) {
      cfg.attack = AttackConfig{AttackKind::SignFlipBoost, s.faults.lambda_boost};
    }
    cfg.task_kind = s.data.kind;
    auto stake = s.faults.stakes.find(id);
    cfg.stake = stake == s.faults.stakes.end() ? std::max<std::uint64_t>(s.params.min_stake, 1) : stake->second;
    cfg.train_time = s.train_time;
    cfg.seed = s.seed;
    ClientDataset data = s.instahide ? encodings_[i].encoded : datasets_[i];
    clients_.push_back(std::make_unique<ClientActor>(dep, i, cfg, std::move(data)));
    sim_->add_actor(id, clients_.back().get());
    ledger_->subscribe(id);
  }

  owner_ = std::make_unique<ModelOwnerActor>(dep, OwnerConfig{kDefaultTask, s.params, initial_});
  sim_->add_actor(ProcessId::owner(), owner_.get());
  ledger_->subscribe(ProcessId::owner());
}

Simulation::~Simulation() = default;

RunResult Simulation::run() {
  const auto status = sim_->run(scenario_.horizon, [this] { return owner_->done() || owner_->failure(); });
  RunResult r;
  r.end_time = sim_->now();
  if (const auto* rec = ledger_->state().task(kDefaultTask)) r.committed_rounds = rec->committed_rounds();
  if (owner_->done()) {
    r.outcome = Outcome::Finished;
    r.final_model = owner_->final_model();
    r.reward = owner_->final_tx()->reward;
  } else {
    r.outcome = Outcome::LivenessFailure;
    std::string report;
    switch (status) {
      case Simulator::Status::Quiescent: report = "no events left"; break;
      case Simulator::Status::Horizon: report = "time horizon reached"; break;
      case Simulator::Status::Stopped: report = "stopped"; break;
    }
    report += " before FINAL; " + std::to_string(r.committed_rounds) + " of " +
              std::to_string(scenario_.params.final_round) + " rounds committed";
    if (auto f = owner_->failure()) report += "; owner: " + *f;
    for (const auto& s : servers_) {
      if (auto f = s->failure()) report += "; " + to_string(s->id()) + ": " + *f;
    }
    r.report = report;
  }
  r.losses = round_losses();
  if (scenario_.data.loss_threshold) {
    for (std::size_t t = 0; t < r.losses.size(); ++t) {
      if (r.losses[t] <= *scenario_.data.loss_threshold) {
        r.rounds_to_threshold = static_cast<std::uint32_t>(t);
        break;
      }
    }
  }
  return r;
}

std::vector<double> Simulation::round_losses() const {
  const auto kind = scenario_.data.kind;
  std::vector<double> losses{global_loss(kind, datasets_, initial_)};
  const auto fin = scenario_.params.final_round;
  for (std::uint32_t t = 1; t <= fin; ++t) {
    std::shared_ptr<const ParamVector> w;
    if (t == fin && owner_->done()) w = owner_->final_model();
    // The model certified first at a correct server stands for the round.
    for (const auto& s : servers_) {
      if (w) break;
      if (!s->correct()) continue;
      auto it = s->model_proofs().find(t);
      if (it != s->model_proofs().end()) w = s->model_by_key(it->second.hash_key());
    }
    if (!w) break;
    losses.push_back(global_loss(kind, datasets_, *w));
  }
  return losses;
}

Bytes encode_blocks(const std::vector<BlockPtr>& blocks) {
  Encoder enc(ValueKind::BlockHeader);
  enc.u64(blocks.size());
  for (const auto& b : blocks) {
    enc.u64(b->height).hash(b->prev_hash).hash(b->hash).i64(b->time_ns).u64(b->txs.size());
    for (const auto& tx : b->txs) enc.bytes(canonical_encode(tx));
  }
  return std::move(enc).take();
}

std::vector<BlockPtr> decode_blocks(std::span<const std::uint8_t> bytes) {
  Decoder dec(bytes);
  dec.expect_kind(ValueKind::BlockHeader);
  const auto n = dec.u64();
  std::vector<BlockPtr> out;
  for (std::uint64_t i = 0; i < n; ++i) {
    auto b = std::make_shared<Block>();
    b->height = dec.u64();
    b->prev_hash = dec.hash();
    b->hash = dec.hash();
    b->time_ns = dec.i64();
    const auto ntx = dec.u64();
    for (std::uint64_t j = 0; j < ntx; ++j) {
      const Bytes raw = dec.bytes();
      b->txs.push_back(decode_transaction(raw));
      b->tx_digests.push_back(sha256(raw));
    }
    out.push_back(std::move(b));
  }
  dec.expect_done();
  return out;
}

Bytes encode_store(const std::map<HashKey, SharedBytes>& entries) {
  Encoder enc(ValueKind::StoreMsg);
  enc.u64(entries.size());
  for (const auto& [key, value] : entries) enc.hash(key).bytes(*value);
  return std::move(enc).take();
}

std::map<HashKey, SharedBytes> decode_store(std::span<const std::uint8_t> bytes) {
  Decoder dec(bytes);
  dec.expect_kind(ValueKind::StoreMsg);
  std::map<HashKey, SharedBytes> out;
  const auto n = dec.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto key = dec.hash();
    out[key] = std::make_shared<const Bytes>(dec.bytes());
  }
  dec.expect_done();
  return out;
}

Bytes encode_certificates(const std::vector<PoAI>& proofs) {
  Encoder enc(ValueKind::PoAI);
  enc.u64(proofs.size());
  for (const auto& p : proofs) encode_poai(enc, p);
  return std::move(enc).take();
}

std::vector<PoAI> decode_certificates(std::span<const std::uint8_t> bytes) {
  Decoder dec(bytes);
  dec.expect_kind(ValueKind::PoAI);
  std::vector<PoAI> out;
  const auto n = dec.u64();
  for (std::uint64_t i = 0; i < n; ++i) out.push_back(decode_poai(dec));
  dec.expect_done();
  return out;
}

std::vector<std::string> ledger_lines(const std::vector<BlockPtr>& blocks) {
  std::vector<std::string> out;
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i < b->txs.size(); ++i) out.push_back(transcript_line(b->height, b->txs[i], b->tx_digests[i]));
  }
  return out;
}

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void Simulation::write_transcript(const fs::path& dir, const RunResult& result) const {
  fs::create_directories(dir);
  const auto& blocks = ledger_->blocks();

  std::string log = "# ledger\n";
  for (const auto& line : ledger_lines(blocks)) log += line + "\n";
  log += "# rejected\n";
  for (const auto& r : ledger_->rejected()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06" PRIu64, r.height);
    log += std::string(buf) + " " + std::string(tx_kind_name(r.kind)) + " " + to_string(r.sender) + " " + r.reason + "\n";
  }
  for (const auto& rep : replicas_) {
    log += "# storage " + to_string(rep->id()) + " " + std::string(behavior_name(rep->behavior())) + "\n";
    log += rep->state().dump();
  }
  log += "# events\n";
  for (const auto& line : sim_->event_log()) log += line + "\n";
  log += "# result\n";
  log += "outcome " + std::string(outcome_name(result.outcome)) + "\n";
  log += "rounds " + std::to_string(result.committed_rounds) + "\n";
  if (result.final_model) log += "final_model " + hash_value(*result.final_model).hex() + "\n";
  if (result.reward) {
    for (const auto& [c, n] : result.reward->counts) log += "reward " + to_string(c) + " " + std::to_string(n) + "\n";
  }
  write_text(dir / kTranscriptLog, log);

  write_file(dir / kLedgerBin, encode_blocks(blocks));

  std::map<HashKey, SharedBytes> stored;
  for (const auto& rep : replicas_) {
    if (rep->behavior() != ReplicaBehavior::Correct) continue;
    for (const auto& [k, v] : rep->state().entries()) stored.emplace(k, v);
  }
  write_file(dir / kStorageBin, encode_store(stored));

  std::map<Bytes, PoAI> certs;
  for (const auto& s : servers_) {
    for (const auto& p : s->emitted()) certs.emplace(canonical_encode(p), p);
  }
  std::vector<PoAI> cert_list;
  for (auto& [enc, p] : certs) cert_list.push_back(p);
  write_file(dir / kCertificatesBin, encode_certificates(cert_list));

  write_text(dir / kScenarioJson, dump_scenario(scenario_));
  write_text(dir / kMetricsCsv, sim_->metrics().to_csv());

  std::string loss = "round,loss\n";
  for (std::size_t t = 0; t < result.losses.size(); ++t) loss += std::to_string(t) + "," + fmt_double(result.losses[t]) + "\n";
  write_text(dir / kLossCsv, loss);

  nlohmann::ordered_json j;
  j["scenario"] = scenario_.name;
  j["seed"] = scenario_.seed;
  j["outcome"] = outcome_name(result.outcome);
  j["report"] = result.report;
  j["rounds"] = result.committed_rounds;
  j["final_round"] = scenario_.params.final_round;
  j["end_time_ns"] = result.end_time;
  j["final_digest"] = result.final_model ? nlohmann::ordered_json(hash_value(*result.final_model).hex())
                                         : nlohmann::ordered_json(nullptr);
  j["final_loss"] = result.losses.empty() ? nlohmann::ordered_json(nullptr)
                                          : nlohmann::ordered_json(fmt_double(result.losses.back()));
  nlohmann::ordered_json reward = nlohmann::ordered_json::object();
  if (result.reward) {
    for (const auto& [c, n] : result.reward->counts) reward[to_string(c)] = n;
  }
  j["reward"] = reward;
  write_text(dir / kResultJson, j.dump(2) + "\n");

  if (result.final_model) {
    write_file(dir / kFinalModelBin, canonical_encode(*result.final_model));
  } else {
    fs::remove(dir / kFinalModelBin);
  }
}

}  // namespace bfl
