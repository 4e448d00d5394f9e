#include "bfl/audit.hpp"

#include <sstream>

#include "bfl/runner.hpp"
#include "json.hpp"

namespace bfl {

namespace fs = std::filesystem;

namespace {

struct AuditFailure {
  std::string check;
  std::string detail;
};

[[noreturn]] void fail(const std::string& check, const std::string& detail) {
  throw AuditFailure{check, detail};
}

std::vector<std::string> section(const std::string& log, const std::string& header) {
  std::vector<std::string> out;
  std::istringstream in(log);
  std::string line;
  bool inside = false;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) {
      inside = line == header;
      continue;
    }
    if (inside) out.push_back(line);
  }
  return out;
}

void run_checks(const fs::path& dir, AuditReport& report) {
  auto pass = [&](const char* name) { report.passed.emplace_back(name); };

  Scenario scenario;
  try {
    const Bytes raw = read_file(dir / kScenarioJson);
    scenario = parse_scenario(std::string(raw.begin(), raw.end()));
  } catch (const std::exception& e) {
    fail("scenario", e.what());
  }
  const auto registry = KeyRegistry::derive(scenario.seed, scenario.population());
  const auto f_s = scenario.f_s;
  pass("scenario");

  std::vector<BlockPtr> blocks;
  std::map<HashKey, SharedBytes> store;
  std::vector<PoAI> certs;
  std::string log;
  try {
    blocks = decode_blocks(read_file(dir / kLedgerBin));
    store = decode_store(read_file(dir / kStorageBin));
    certs = decode_certificates(read_file(dir / kCertificatesBin));
    const Bytes raw = read_file(dir / kTranscriptLog);
    log.assign(raw.begin(), raw.end());
  } catch (const std::exception& e) {
    fail("files", e.what());
  }
  pass("files");

  HashKey prev;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = *blocks[i];
    if (b.height != i) fail("chain", "block " + std::to_string(i) + " has height " + std::to_string(b.height));
    if (b.prev_hash != prev) fail("chain", "block " + std::to_string(i) + " does not link to its parent");
    for (std::size_t j = 0; j < b.txs.size(); ++j) {
      if (tx_digest(b.txs[j]) != b.tx_digests[j]) fail("chain", "transaction digest mismatch in block " + std::to_string(i));
    }
    if (compute_block_hash(b.height, b.prev_hash, b.tx_digests) != b.hash) {
      fail("chain", "block " + std::to_string(i) + " hash mismatch");
    }
    prev = b.hash;
  }
  pass("chain");

  if (section(log, "# ledger") != ledger_lines(blocks)) fail("transcript", "ledger lines differ from ledger.bin");
  pass("transcript");

  LedgerState state(&registry, f_s);
  for (const auto& b : blocks) {
    for (const auto& tx : b->txs) {
      if (auto v = state.append_tx(tx); !v) {
        fail("replay", "block " + std::to_string(b->height) + " " + std::string(tx_kind_name(tx.kind())) + ": " + v.reason);
      }
    }
    state.seal_block(b->hash);
  }
  pass("replay");

  for (const auto& [key, value] : store) {
    if (sha256(*value) != key) fail("storage", "value under " + key.hex() + " does not hash to its key");
  }
  pass("storage");

  const Bytes result_raw = read_file(dir / kResultJson);
  const auto result = nlohmann::json::parse(std::string(result_raw.begin(), result_raw.end()), nullptr, false);
  if (result.is_discarded()) fail("result", "result.json is not valid JSON");
  const bool finished = result.value("outcome", "") == "finished";

  const TaskRecord* rec = state.task(kDefaultTask);
  if (!rec) {
    if (finished) fail("rounds", "no task on the ledger");
    pass("rounds");
    return;
  }
  const auto t_fin = rec->params.final_round;
  for (std::uint32_t t = 1; t <= rec->committed_rounds(); ++t) {
    if (!rec->rounds.contains(t)) fail("rounds", "round " + std::to_string(t) + " missing");
  }
  if (rec->committed_rounds() > t_fin) fail("rounds", "more rounds than final_round");
  if (finished && (rec->committed_rounds() != t_fin || !rec->final)) {
    fail("rounds", "finished run without " + std::to_string(t_fin) + " rounds and FINAL");
  }
  if (result.value("rounds", 0u) != rec->committed_rounds()) fail("rounds", "result.json round count disagrees");
  pass("rounds");

  for (const auto& p : certs) {
    if (!verify_poai(p, registry, f_s)) fail("certificates", "invalid PoAI " + render(p));
  }
  pass("certificates");

  // Every certified model must be close to the audit's own recomputation.
  std::map<std::uint32_t, std::set<HashKey>> certified;
  for (const auto& p : certs) {
    if (p.tag() == Tag::Mod && p.slot.task == kDefaultTask) certified[p.round()].insert(p.hash_key());
  }
  if (rec->final) certified[t_fin].insert(rec->final->model_proof.hash_key());

  auto lookup = [&](const HashKey& key, const char* check) -> const Bytes& {
    auto it = store.find(key);
    if (it == store.end()) fail(check, "value " + key.hex() + " missing from storage");
    return *it->second;
  };

  std::map<HashKey, ProcessId> client_of;
  ParamVector w;
  try {
    w = decode_param_vector(lookup(rec->model_hash, "aggregates"));
  } catch (const AuditFailure&) {
    throw;
  } catch (const std::exception& e) {
    fail("aggregates", std::string("initial model: ") + e.what());
  }
  for (std::uint32_t t = 1; t <= rec->committed_rounds(); ++t) {
    std::vector<std::shared_ptr<const Update>> updates;
    for (const auto& p : rec->rounds.at(t).nr.candidates) {
      Update u;
      try {
        u = decode_update(lookup(p.hash_key(), "aggregates"));
      } catch (const AuditFailure&) {
        throw;
      } catch (const std::exception& e) {
        fail("aggregates", "round " + std::to_string(t) + " update: " + e.what());
      }
      if (!verify_update(registry, u) || u.round != t || u.task != kDefaultTask) {
        fail("aggregates", "round " + std::to_string(t) + " holds an invalid update");
      }
      client_of[p.hash_key()] = u.client;
      updates.push_back(std::make_shared<const Update>(std::move(u)));
    }
    w = aggregate(rec->params.aggregator, w, aggregation_order(updates, *rec, 0));
    for (const auto& key : certified[t]) {
      ParamVector got;
      try {
        got = decode_param_vector(lookup(key, "aggregates"));
      } catch (const AuditFailure&) {
        throw;
      } catch (const std::exception& e) {
        fail("aggregates", std::string("certified model: ") + e.what());
      }
      if (got.dimension() != w.dimension() || !epsilon_close(got, w, rec->params.eps)) {
        fail("aggregates", "certified model of round " + std::to_string(t) + " deviates by " +
                               std::to_string(got.dimension() == w.dimension() ? max_abs_difference(got, w) : -1.0));
      }
    }
  }
  pass("aggregates");

  if (rec->final) {
    const auto& fin = *rec->final;
    const RewardInfo expected = reward_info(*rec, kDefaultTask, client_of);
    if (fin.reward != expected) fail("reward", "FINAL reward differs from recomputed counts");
    std::uint64_t committed = 0;
    for (const auto& [t, c] : rec->rounds) {
      std::set<ProcessId> seen;
      for (const auto& p : c.nr.candidates) seen.insert(client_of.at(p.hash_key()));
      committed += seen.size();
    }
    if (fin.reward.total() != committed) fail("reward", "reward total differs from committed contributors");
    for (const auto& [c, n] : fin.reward.counts) {
      if (n > t_fin) fail("reward", to_string(c) + " rewarded for more than final_round rounds");
    }
    if (fin.reward_proof.hash_key() != hash_value(fin.reward)) fail("reward", "REWARD proof does not cover the reward");
  }
  pass("reward");

  if (finished) {
    Bytes model;
    try {
      model = read_file(dir / kFinalModelBin);
    } catch (const std::exception& e) {
      fail("final_model", e.what());
    }
    const HashKey digest = sha256(model);
    if (digest != rec->final->model_proof.hash_key()) fail("final_model", "final_model.bin is not the FINAL model");
    if (result.value("final_digest", "") != digest.hex()) fail("final_model", "result.json digest disagrees");
  }
  pass("final_model");
}

}  // namespace

AuditReport audit_transcript(const fs::path& dir) {
  AuditReport report;
  try {
    run_checks(dir, report);
  } catch (const AuditFailure& f) {
    report.ok = false;
    report.check = f.check;
    report.detail = f.detail;
  } catch (const std::exception& e) {
    report.ok = false;
    report.check = "files";
    report.detail = e.what();
  }
  return report;
}

}  // namespace bfl
