#include <gtest/gtest.h>

#include "bfl/runner.hpp"

using namespace bfl;

namespace {

Scenario small(std::uint32_t clients, std::uint32_t k, std::uint32_t t_fin, std::uint64_t seed = 3) {
  Scenario s;
  s.name = "protocol";
  s.seed = seed;
  s.clients = clients;
  s.f_s = 1;
  s.f_r = 1;
  s.params.clients_per_round = k;
  s.params.min_clients = clients;
  s.params.min_updates = k;
  s.params.final_round = t_fin;
  s.params.dimension = 4;
  s.params.training = LocalTrainConfig{1, 5, 0.05};
  s.data.samples_per_client = 10;
  s.data.noise = 0.1;
  s.network.base = DelayDist::uniform(kMillisecond, 20 * kMillisecond);
  s.network.max_delay = 20 * kMillisecond;
  return s;
}

const TaskId kTask = kDefaultTask;

struct Sent {
  SimTime at;
  ProcessId from, to;
  Message msg;
};


template <typename M>
std::size_t count_from(const std::vector<Sent>& log, const ProcessId& from) {
  std::size_t n = 0;
  for (const auto& s : log) n += s.from == from && std::holds_alternative<M>(s.msg);
  return n;
}

}  // namespace

TEST(Protocol, HonestRunCommitsOneNrPerRoundAndFinal) {
  Simulation sim(small(6, 3, 3));
  const auto r = sim.run();
  ASSERT_EQ(r.outcome, Outcome::Finished) << r.report;
  std::map<TxKind, int> kinds;
  for (const auto& b : sim.ledger().blocks()) {
    for (const auto& tx : b->txs) ++kinds[tx.kind()];
  }
  EXPECT_EQ(kinds[TxKind::NewRound], 3);
  EXPECT_EQ(kinds[TxKind::Final], 1);
  EXPECT_EQ(kinds[TxKind::StartTask], 1);
  EXPECT_EQ(kinds[TxKind::Join], 6);
}

TEST(Protocol, OwnerModelMatchesFinalProofAndRewardIdentity) {
  Simulation sim(small(8, 4, 4));
  const auto r = sim.run();
  ASSERT_EQ(r.outcome, Outcome::Finished) << r.report;
  const auto& fin = *sim.owner().final_tx();
  EXPECT_EQ(hash_value(*r.final_model), fin.model_proof.hash_key());
  const auto* rec = sim.ledger().state().task(kTask);
  std::uint64_t committed = 0;
  for (const auto& [t, c] : rec->rounds) committed += c.nr.candidates.size();
  EXPECT_EQ(fin.reward.total(), committed);
  EXPECT_EQ(committed, 4u * 4u);
}

TEST(Protocol, CorrectServersAgreeWithinEpsilon) {
  Simulation sim(small(10, 10, 5));
  const auto r = sim.run();
  ASSERT_EQ(r.outcome, Outcome::Finished);
  const auto& a = sim.servers()[0]->models();
  for (std::size_t s = 1; s < sim.servers().size(); ++s) {
    for (const auto& [round, w] : sim.servers()[s]->models()) {
      EXPECT_TRUE(epsilon_close(*w, *a.at(round), sim.scenario().params.eps)) << "round " << round;
    }
  }
  const auto& gauges = sim.sim().metrics().gauges();
  auto it = gauges.find("max_model_divergence");
  ASSERT_NE(it, gauges.end());
  EXPECT_LE(it->second, 1e-6);
  std::printf("measured max model divergence: %.3g\n", it->second);
}

TEST(Protocol, FanOutReachesExactlyTheNextClients) {
  Simulation sim(small(8, 3, 3));
  std::map<std::uint32_t, std::set<ProcessId>> recipients;
  sim.sim().set_send_observer([&](SimTime, const ProcessId& from, const ProcessId& to, const Message& m) {
    if (const auto* p = std::get_if<ModelProofMsg>(&m); p && from == ProcessId::server(0)) {
      recipients[p->proof.round()].insert(to);
    }
  });
  const auto r = sim.run();
  ASSERT_EQ(r.outcome, Outcome::Finished);
  const auto* rec = sim.ledger().state().task(kTask);
  for (std::uint32_t t = 1; t < 3; ++t) {
    const auto& next = rec->rounds.at(t).nr.next_clients.members;
    EXPECT_EQ(recipients[t], std::set<ProcessId>(next.begin(), next.end()));
    EXPECT_EQ(recipients[t].size(), 3u);
  }
  EXPECT_FALSE(recipients.contains(3));
}

TEST(Protocol, ServersHoldingAllUpdatesDoNotRead) {
  Simulation sim(small(6, 3, 3));
  ASSERT_EQ(sim.run().outcome, Outcome::Finished);
  for (const auto& s : sim.servers()) EXPECT_EQ(s->fetched_updates(), 0u);
}

TEST(Protocol, ServerMissingTwoUpdatesFetchesTwo) {
  Scenario s = small(4, 4, 1);
  s.network.base = DelayDist::fixed(2 * kMillisecond);
  s.network.max_delay = 400 * kMillisecond;
  s.block_interval = DelayDist::fixed(10 * kMillisecond);
  s.read_deadline = 5000 * kMillisecond;
  for (std::uint32_t c : {1u, 3u}) s.network.overrides[{ProcessId::client(c), ProcessId::server(2)}] = DelayDist::fixed(400 * kMillisecond);
  Simulation sim(s);
  ASSERT_EQ(sim.run().outcome, Outcome::Finished);
  EXPECT_EQ(sim.servers()[2]->fetched_updates(), 2u);
  EXPECT_EQ(sim.servers()[0]->fetched_updates(), 0u);
}

TEST(Protocol, CorruptedModelIsNotCertified) {
  Scenario s = small(6, 3, 3);
  s.faults.servers[ProcessId::server(1)] = ServerBehavior::ModelCorruptor;
  Simulation sim(s);
  const auto r = sim.run();
  ASSERT_EQ(r.outcome, Outcome::Finished) << r.report;
  EXPECT_GT(sim.sim().metrics().counter("rejected_models"), 0u);
  for (std::uint32_t t = 1; t <= 3; ++t) {
    const auto& proof = sim.servers()[0]->model_proofs().at(t);
    for (const auto& v : proof.votes) EXPECT_NE(v.signature.signer, ProcessId::server(1));
    const auto key = proof.hash_key();
    EXPECT_TRUE(key == hash_value(*sim.servers()[0]->models().at(t)) || key == hash_value(*sim.servers()[2]->models().at(t)));
    EXPECT_NE(key, hash_value(*sim.servers()[1]->models().at(t)));
  }
}

TEST(Protocol, AttackerSendsBoostedNegatedUpdate) {
  Scenario s = small(4, 4, 1);
  s.faults.clients[ProcessId::client(2)] = ClientBehavior::Attacker;
  s.faults.lambda_boost = 5;
  Simulation sim(s);
  std::shared_ptr<const Update> sent;
  sim.sim().set_send_observer([&](SimTime, const ProcessId& from, const ProcessId&, const Message& m) {
    if (const auto* u = std::get_if<UpdateMsg>(&m); u && from == ProcessId::client(2)) sent = u->update;
  });
  ASSERT_EQ(sim.run().outcome, Outcome::Finished);
  ASSERT_TRUE(sent);
  Rng rng = Rng::stream(s.seed, "train", 2, 1);
  const ParamVector g = local_update(s.data.kind, sim.datasets()[2], sim.initial_model(), s.params.training, rng);
  for (std::size_t i = 0; i < g.dimension(); ++i) EXPECT_DOUBLE_EQ(sent->vector[i], -5.0 * g[i]);
}

TEST(Protocol, HonestClientSendsPlainUpdateToEveryServer) {
  Scenario s = small(4, 4, 1);
  Simulation sim(s);
  std::set<ProcessId> to_servers;
  std::shared_ptr<const Update> sent;
  sim.sim().set_send_observer([&](SimTime, const ProcessId& from, const ProcessId& to, const Message& m) {
    if (const auto* u = std::get_if<UpdateMsg>(&m); u && from == ProcessId::client(0)) {
      sent = u->update;
      to_servers.insert(to);
    }
  });
  ASSERT_EQ(sim.run().outcome, Outcome::Finished);
  EXPECT_EQ(to_servers.size(), 3u);
  Rng rng = Rng::stream(s.seed, "train", 0, 1);
  EXPECT_EQ(sent->vector, local_update(s.data.kind, sim.datasets()[0], sim.initial_model(), s.params.training, rng));
}

// Servers fed by hand: every client is silent, so after START_TASK nothing
// moves unless the test injects it.
class ServerUnderTest : public ::testing::Test {
 protected:
  void SetUp() override {
    Scenario s = small(5, 2, 2);
    for (std::uint32_t c = 0; c < 5; ++c) s.faults.clients[ProcessId::client(c)] = ClientBehavior::Silent;
    sim = std::make_unique<Simulation>(s);
    sim->sim().set_send_observer([this](SimTime at, const ProcessId& from, const ProcessId& to, const Message& m) {
      sends.push_back({at, from, to, m});
    });
    sim->sim().run(60'000 * kMillisecond, [this] {
      const auto* rec = sim->servers()[0]->ledger().task(kTask);
      return rec && rec->start;
    });
    const auto* rec = sim->servers()[0]->ledger().task(kTask);
    ASSERT_TRUE(rec && rec->start);
    selected = rec->start->first_clients.members;
    for (std::uint32_t c = 0; c < 5; ++c) {
      if (!rec->start->first_clients.contains(ProcessId::client(c))) outsider = ProcessId::client(c);
    }
    sends.clear();
  }

  std::shared_ptr<const Update> update_from(const ProcessId& c, double v) {
    const auto key = sim->registry().signing_key(c);
    return std::make_shared<const Update>(make_signed_update(key, kTask, 1, ParamVector{v, v, v, v}, 10));
  }

  void deliver(const ProcessId& c, std::shared_ptr<const Update> u) {
    sim->sim().send(c, ProcessId::server(0), UpdateMsg{std::move(u)});
    sim->sim().run(sim->sim().now() + 200 * kMillisecond);
  }

  std::size_t upd_votes_for(const HashKey& key) const {
    std::size_t n = 0;
    for (const auto& s : sends) {
      const auto* v = std::get_if<VoteMsg>(&s.msg);
      n += s.from == ProcessId::server(0) && v && v->vote.slot.tag == Tag::Upd && v->vote.slot.hash_key == key;
    }
    return n;
  }
  std::size_t stores_for(const HashKey& key) const {
    std::size_t n = 0;
    for (const auto& s : sends) {
      const auto* m = std::get_if<StoreMsg>(&s.msg);
      n += s.from == ProcessId::server(0) && m && m->key == key;
    }
    return n;
  }

  std::unique_ptr<Simulation> sim;
  std::vector<Sent> sends;
  std::vector<ProcessId> selected;
  ProcessId outsider;
};

TEST_F(ServerUnderTest, SelectedUpdateIsStoredAndVoted) {
  const auto u = update_from(selected[0], 0.25);
  deliver(selected[0], u);
  EXPECT_EQ(stores_for(hash_value(*u)), 2u);     // f_r + 1 replicas
  EXPECT_EQ(upd_votes_for(hash_value(*u)), 3u);  // 2 f_s + 1 servers, self included
}

TEST_F(ServerUnderTest, OutsiderUpdateIgnored) {
  const auto u = update_from(outsider, 0.25);
  deliver(outsider, u);
  EXPECT_EQ(stores_for(hash_value(*u)), 0u);
  EXPECT_EQ(upd_votes_for(hash_value(*u)), 0u);
}

TEST_F(ServerUnderTest, SecondUpdateFromSameClientIgnored) {
  const auto a = update_from(selected[0], 0.25);
  const auto b = update_from(selected[0], 0.5);
  deliver(selected[0], a);
  deliver(selected[0], b);
  EXPECT_EQ(upd_votes_for(hash_value(*a)), 3u);
  EXPECT_EQ(upd_votes_for(hash_value(*b)), 0u);
}

TEST_F(ServerUnderTest, UpdateSignedByAnotherClientIgnored) {
  const auto u = update_from(selected[1], 0.25);
  deliver(selected[0], u);  // transport sender differs from the signer
  EXPECT_EQ(upd_votes_for(hash_value(*u)), 0u);
}

TEST_F(ServerUnderTest, VotesAreDeterministic) {
  const auto u = update_from(selected[0], 0.25);
  const auto vote = make_local_proof(sim->registry().signing_key(ProcessId::server(0)), Tag::Upd, hash_value(*u), kTask, 1);
  deliver(selected[0], u);
  bool found = false;
  for (const auto& s : sends) {
    if (const auto* v = std::get_if<VoteMsg>(&s.msg); v && s.from == ProcessId::server(0)) found |= v->vote == vote;
  }
  EXPECT_TRUE(found);
}

TEST_F(ServerUnderTest, CandidateThresholdFiresOnce) {
  // Both selected clients deliver to all servers so UPD PoAIs form.
  for (const auto& c : selected) {
    const auto u = update_from(c, 0.1);
    for (std::uint32_t s = 0; s < 3; ++s) sim->sim().send(c, ProcessId::server(s), UpdateMsg{u});
  }
  sim->sim().run(sim->sim().now() + 2000 * kMillisecond);
  std::size_t clients_votes = 0;
  for (const auto& s : sends) {
    const auto* v = std::get_if<VoteMsg>(&s.msg);
    clients_votes += s.from == ProcessId::server(0) && s.to == ProcessId::server(0) && v &&
                     v->vote.slot.tag == Tag::Clients && v->vote.slot.round == 1;
  }
  EXPECT_EQ(clients_votes, 1u);
  const auto* rec = sim->servers()[0]->ledger().task(kTask);
  ASSERT_TRUE(rec->rounds.contains(1));
  EXPECT_EQ(rec->rounds.at(1).nr.candidates.size(), 2u);
}

TEST_F(ServerUnderTest, UnselectedClientIgnoresStrayProof) {
  // Drive round 1 to a MOD PoAI, then hand it to a client not chosen for round 2.
  for (const auto& c : selected) {
    const auto u = update_from(c, 0.1);
    for (std::uint32_t s = 0; s < 3; ++s) sim->sim().send(c, ProcessId::server(s), UpdateMsg{u});
  }
  sim->sim().run(sim->sim().now() + 5000 * kMillisecond);
  const auto& proofs = sim->servers()[0]->model_proofs();
  ASSERT_TRUE(proofs.contains(1));
  const auto* rec = sim->servers()[0]->ledger().task(kTask);
  ProcessId stray;
  for (std::uint32_t c = 0; c < 5; ++c) {
    if (!rec->rounds.at(1).nr.next_clients.contains(ProcessId::client(c))) stray = ProcessId::client(c);
  }
  sends.clear();
  sim->sim().send(ProcessId::server(0), stray, ModelProofMsg{proofs.at(1)});
  sim->sim().run(sim->sim().now() + 1000 * kMillisecond);
  EXPECT_EQ(count_from<QueryMsg>(sends, stray), 0u);
  EXPECT_EQ(count_from<UpdateMsg>(sends, stray), 0u);
}
