#include <gtest/gtest.h>

#include "bfl/ledger.hpp"
#include "bfl/ledger_actor.hpp"
#include "support.hpp"

using namespace bfl;
using bfl::testing::Chain;
using bfl::testing::Probe;
using bfl::testing::quorum;

namespace {

const TaskId kTask{1};

TaskParams small_params() {
  TaskParams p;
  p.clients_per_round = 2;
  p.min_clients = 3;
  p.min_updates = 1;
  p.final_round = 2;
  p.min_stake = 2;
  p.dimension = 1;
  return p;
}

class LedgerFlow : public ::testing::Test {
 protected:
  KeyRegistry reg = KeyRegistry::derive(17, Population{4, 3, 2});
  Chain chain{&reg, 1};

  Transaction signed_by(const ProcessId& who, TxBody body) { return make_signed_tx(reg.signing_key(who), std::move(body)); }

  Transaction join(std::uint32_t c, std::uint64_t stake = 2) {
    return signed_by(ProcessId::client(c), JoinTx{kTask, ProcessId::client(c), stake, 10});
  }

  void open_task() {
    ASSERT_TRUE(chain.add_block(signed_by(ProcessId::owner(), NewTaskTx{kTask, small_params(), hash_value(ParamVector{0.0})})));
    for (std::uint32_t c = 0; c < 3; ++c) ASSERT_TRUE(chain.add(join(c)));
    chain.seal();
  }

  Transaction start_task() {
    const ClientSet c1 = select_clients(chain.state, kTask, 1);
    return signed_by(ProcessId::server(0),
                     StartTaskTx{kTask, c1, quorum(reg, {0, 1}, Tag::Clients, hash_value(c1), kTask, 0)});
  }

  PoAI upd(std::uint32_t round, double v) {
    return quorum(reg, {1, 2}, Tag::Upd, hash_value(ParamVector{v}), kTask, round);
  }

  Transaction new_round(std::uint32_t round, std::uint32_t sender = 0, double v = 0.5) {
    ClientSet next{kTask, round + 1, {}};
    if (round < small_params().final_round) next = select_clients(chain.state, kTask, round + 1);
    return signed_by(ProcessId::server(sender),
                     NewRoundTx{kTask, round, {upd(round, v)}, next,
                                quorum(reg, {0, 2}, Tag::Clients, hash_value(next), kTask, round)});
  }

  Transaction final_tx() {
    RewardInfo r{kTask, {{ProcessId::client(0), 2}}};
    return signed_by(ProcessId::server(2),
                     FinalTx{kTask, r, quorum(reg, {0, 1}, Tag::Reward, hash_value(r), kTask, 2),
                             quorum(reg, {1, 2}, Tag::Mod, hash_value(ParamVector{1.0}), kTask, 2)});
  }
};

}  // namespace

TEST_F(LedgerFlow, HonestTaskLifecycle) {
  open_task();
  ASSERT_TRUE(chain.add_block(start_task()));
  ASSERT_TRUE(chain.add_block(new_round(1)));
  ASSERT_TRUE(chain.add_block(new_round(2)));
  auto v = chain.add_block(final_tx());
  ASSERT_TRUE(v) << v.reason;
  const auto* rec = chain.state.task(kTask);
  EXPECT_EQ(rec->committed_rounds(), 2u);
  EXPECT_TRUE(rec->final);
  EXPECT_EQ(rec->threshold_height, 1u);
}

TEST_F(LedgerFlow, JoinBelowStakeRejected) {
  ASSERT_TRUE(chain.add_block(signed_by(ProcessId::owner(), NewTaskTx{kTask, small_params(), {}})));
  auto v = chain.add(join(0, 1));
  EXPECT_FALSE(v);
  EXPECT_EQ(v.reason, "stake below threshold");
  EXPECT_TRUE(chain.add(join(0, 2)));
  EXPECT_FALSE(chain.add(join(0, 3)));
}

TEST_F(LedgerFlow, JoinMustBeSignedByTheClient) {
  ASSERT_TRUE(chain.add_block(signed_by(ProcessId::owner(), NewTaskTx{kTask, small_params(), {}})));
  EXPECT_FALSE(chain.add(signed_by(ProcessId::client(1), JoinTx{kTask, ProcessId::client(0), 2, 1})));
  auto tx = join(0);
  tx.signature.bytes[0] ^= 0x80;
  EXPECT_FALSE(chain.add(tx));
}

TEST_F(LedgerFlow, NewTaskOnlyFromOwner) {
  EXPECT_FALSE(chain.add(signed_by(ProcessId::server(0), NewTaskTx{kTask, small_params(), {}})));
  auto bad = small_params();
  bad.min_updates = 3;
  EXPECT_FALSE(chain.add(signed_by(ProcessId::owner(), NewTaskTx{kTask, bad, {}})));
}

TEST_F(LedgerFlow, StartTaskNeedsThresholdAndSelection) {
  ASSERT_TRUE(chain.add_block(signed_by(ProcessId::owner(), NewTaskTx{kTask, small_params(), {}})));
  ASSERT_TRUE(chain.add_block(join(0)));
  ClientSet fake{kTask, 1, {ProcessId::client(0)}};
  EXPECT_FALSE(chain.add(signed_by(ProcessId::server(0),
                                   StartTaskTx{kTask, fake, quorum(reg, {0, 1}, Tag::Clients, hash_value(fake), kTask, 0)})));
  ASSERT_TRUE(chain.add(join(1)));
  ASSERT_TRUE(chain.add(join(2)));
  chain.seal();
  ClientSet wrong{kTask, 1, {ProcessId::client(0), ProcessId::client(1), ProcessId::client(2)}};
  auto v = chain.add(signed_by(ProcessId::server(0),
                               StartTaskTx{kTask, wrong, quorum(reg, {0, 1}, Tag::Clients, hash_value(wrong), kTask, 0)}));
  EXPECT_FALSE(v);
  EXPECT_TRUE(chain.add(start_task()));
}

TEST_F(LedgerFlow, NrForCommittedRoundRejected) {
  open_task();
  ASSERT_TRUE(chain.add_block(start_task()));
  ASSERT_TRUE(chain.add_block(new_round(1)));
  auto v = chain.add(new_round(1, 1, 0.7));
  EXPECT_FALSE(v);
  EXPECT_EQ(v.reason, "NR already committed for this round");
}

TEST_F(LedgerFlow, TwoNrsInOneBlockOnlyFirstLands) {
  open_task();
  ASSERT_TRUE(chain.add_block(start_task()));
  EXPECT_TRUE(chain.add(new_round(1, 0, 0.5)));
  EXPECT_FALSE(chain.add(new_round(1, 2, 0.6)));
  chain.seal();
  EXPECT_EQ(chain.state.task(kTask)->rounds.at(1).nr.candidates[0].hash_key(), hash_value(ParamVector{0.5}));
}

TEST_F(LedgerFlow, NrWithForgedCandidateRejected) {
  open_task();
  ASSERT_TRUE(chain.add_block(start_task()));
  auto tx = new_round(1);
  auto& nr = std::get<NewRoundTx>(tx.body);
  nr.candidates[0].votes[1].signature = nr.candidates[0].votes[0].signature;
  nr.candidates[0].votes[1].signature.signer = ProcessId::server(2);
  tx = signed_by(ProcessId::server(0), nr);
  auto v = chain.add(tx);
  EXPECT_FALSE(v);
  EXPECT_EQ(v.reason, "NR candidate: proof does not verify");
}

TEST_F(LedgerFlow, NrSkippingRoundOrWrongNextSetRejected) {
  open_task();
  ASSERT_TRUE(chain.add_block(start_task()));
  EXPECT_FALSE(chain.add(new_round(2)));
  auto tx = new_round(1);
  auto nr = std::get<NewRoundTx>(tx.body);
  nr.next_clients.members = {ProcessId::client(3)};
  nr.clients_proof = quorum(reg, {0, 1}, Tag::Clients, hash_value(nr.next_clients), kTask, 1);
  EXPECT_FALSE(chain.add(signed_by(ProcessId::server(0), nr)));
}

TEST_F(LedgerFlow, DuplicateTransactionRejected) {
  open_task();
  const auto st = start_task();
  ASSERT_TRUE(chain.add_block(st));
  auto v = chain.add(st);
  EXPECT_FALSE(v);
  EXPECT_EQ(v.reason, "duplicate transaction");
}

TEST_F(LedgerFlow, FinalRequiresAllRounds) {
  open_task();
  ASSERT_TRUE(chain.add_block(start_task()));
  ASSERT_TRUE(chain.add_block(new_round(1)));
  EXPECT_FALSE(chain.add(final_tx()));
}

TEST_F(LedgerFlow, SelectionIsDeterministicAndSized) {
  open_task();
  Chain other(&reg, 1);
  ASSERT_TRUE(other.add_block(signed_by(ProcessId::owner(), NewTaskTx{kTask, small_params(), hash_value(ParamVector{0.0})})));
  for (std::uint32_t c = 0; c < 3; ++c) ASSERT_TRUE(other.add(join(c)));
  other.seal();
  const auto a = select_clients(chain.state, kTask, 1);
  EXPECT_EQ(a, select_clients(other.state, kTask, 1));
  EXPECT_EQ(a.members.size(), 2u);
  EXPECT_THROW(select_clients(chain.state, kTask, 2), NotEnoughClientsError);
}

TEST_F(LedgerFlow, SelectionTakesEveryoneWhenRegisteredEqualsK) {
  auto p = small_params();
  p.clients_per_round = 3;
  ASSERT_TRUE(chain.add_block(signed_by(ProcessId::owner(), NewTaskTx{kTask, p, {}})));
  for (std::uint32_t c = 0; c < 3; ++c) ASSERT_TRUE(chain.add(join(c)));
  chain.seal();
  const auto s = select_clients(chain.state, kTask, 1);
  EXPECT_EQ(s.members, (std::vector<ProcessId>{ProcessId::client(0), ProcessId::client(1), ProcessId::client(2)}));
}

TEST(Params, Checks) {
  TaskParams p;
  EXPECT_EQ(check_params(p), "");
  p.clients_per_round = 2;
  EXPECT_NE(check_params(p), "");  // K > min_clients
  p.min_clients = 2;
  p.min_updates = 3;
  EXPECT_NE(check_params(p), "");
  p.min_updates = 2;
  p.aggregator = {AggregatorKind::TrimmedMean, 1};
  EXPECT_NE(check_params(p), "");
  p.final_round = 0;
  p.aggregator = {};
  EXPECT_NE(check_params(p), "");
}

TEST_F(LedgerFlow, TransactionEncodingRoundTrip) {
  open_task();
  const auto tx = start_task();
  const Bytes b = canonical_encode(tx);
  const Transaction back = decode_transaction(b);
  EXPECT_EQ(canonical_encode(back), b);
  EXPECT_EQ(tx_digest(back), tx_digest(tx));
  const std::string line = transcript_line(4, tx, tx_digest(tx));
  EXPECT_EQ(line.substr(0, 26), "000004 START_TASK server:0");
}

TEST_F(LedgerFlow, ViewAppliesBlocksInOrder) {
  auto mk = [&](std::uint64_t h, const HashKey& prev, Transaction tx) {
    auto b = std::make_shared<Block>();
    b->height = h;
    b->prev_hash = prev;
    b->tx_digests = {tx_digest(tx)};
    b->txs = {std::move(tx)};
    b->hash = compute_block_hash(h, prev, b->tx_digests);
    return BlockPtr(b);
  };
  const auto b0 = mk(0, {}, signed_by(ProcessId::owner(), NewTaskTx{kTask, small_params(), {}}));
  const auto b1 = mk(1, b0->hash, join(0));
  LedgerView view(&reg, 1);
  EXPECT_TRUE(view.on_block(b1).empty());
  const auto applied = view.on_block(b0);
  ASSERT_EQ(applied.size(), 2u);
  EXPECT_EQ(applied[0]->height, 0u);
  EXPECT_EQ(view.next_height(), 2u);
}

// Ledger actor in the simulator.

class LedgerActorTest : public LedgerFlow {
 protected:
  Simulator sim{1, DelayModel{}};
  LedgerActor ledger{&sim, &reg, 1, DelayDist::fixed(100 * kMillisecond), 1};
  Probe a{&sim}, b{&sim};

  void SetUp() override {
    sim.add_actor(ProcessId::ledger(), &ledger);
    sim.add_actor(ProcessId::server(0), &a);
    sim.add_actor(ProcessId::server(1), &b);
    ledger.subscribe(ProcessId::server(0));
    ledger.subscribe(ProcessId::server(1));
  }

  void submit(const ProcessId& from, const Transaction& tx) {
    sim.send(from, ProcessId::ledger(), SubmitTxMsg{std::make_shared<const Transaction>(tx), sim.now()});
  }

  static std::vector<std::uint64_t> heights(const Probe& p) {
    std::vector<std::uint64_t> out;
    for (const auto& d : p.got) {
      if (const auto* m = std::get_if<BlockMsg>(&d.msg)) out.push_back(m->block->height);
    }
    return out;
  }
};

TEST_F(LedgerActorTest, EmptyLedgerProducesNoBlocks) {
  sim.run(10'000 * kMillisecond);
  EXPECT_TRUE(ledger.blocks().empty());
  EXPECT_TRUE(a.got.empty());
}

TEST_F(LedgerActorTest, CommitsWithinOneIntervalAndDeliversToAll) {
  submit(ProcessId::server(0), signed_by(ProcessId::owner(), NewTaskTx{kTask, small_params(), {}}));
  sim.run(10'000 * kMillisecond);
  ASSERT_EQ(ledger.blocks().size(), 1u);
  ASSERT_EQ(a.got.size(), 1u);
  const SimTime max_delay = DelayModel{}.max_delay;
  EXPECT_LE(ledger.blocks()[0]->time_ns, max_delay + 100 * kMillisecond);
  EXPECT_GE(a.got[0].at, ledger.blocks()[0]->time_ns);
  EXPECT_EQ(heights(a), heights(b));
}

TEST_F(LedgerActorTest, CompetingNrsCommitOnceAndResubmissionIsRejected) {
  for (const auto& tx : {signed_by(ProcessId::owner(), NewTaskTx{kTask, small_params(), hash_value(ParamVector{0.0})}),
                         join(0), join(1), join(2)}) {
    submit(ProcessId::server(0), tx);
    sim.run(sim.now() + 1000 * kMillisecond);
  }
  ASSERT_EQ(ledger.state().height(), 4u);
  const ClientSet c1 = select_clients(ledger.state(), kTask, 1);
  submit(ProcessId::server(0), signed_by(ProcessId::server(0),
                                         StartTaskTx{kTask, c1, quorum(reg, {0, 1}, Tag::Clients, hash_value(c1), kTask, 0)}));
  sim.run(sim.now() + 1000 * kMillisecond);
  ASSERT_TRUE(ledger.state().task(kTask)->start);

  const ClientSet next = select_clients(ledger.state(), kTask, 2);
  auto nr_from = [&](std::uint32_t s, double v) {
    return signed_by(ProcessId::server(s),
                     NewRoundTx{kTask, 1, {upd(1, v)}, next, quorum(reg, {0, 2}, Tag::Clients, hash_value(next), kTask, 1)});
  };
  const auto winner = nr_from(0, 0.2);
  submit(ProcessId::server(1), nr_from(1, 0.1));
  submit(ProcessId::server(0), winner);
  sim.run(sim.now() + 1000 * kMillisecond);
  const auto* rec = ledger.state().task(kTask);
  ASSERT_EQ(rec->committed_rounds(), 1u);
  // Same submission time: the pool breaks the tie by sender.
  EXPECT_EQ(rec->rounds.at(1).nr.candidates[0].hash_key(), hash_value(ParamVector{0.2}));
  ASSERT_EQ(ledger.rejected().size(), 1u);
  EXPECT_EQ(ledger.rejected()[0].reason, "NR already committed for this round");

  submit(ProcessId::server(0), winner);
  sim.run(sim.now() + 1000 * kMillisecond);
  ASSERT_EQ(ledger.rejected().size(), 2u);
  EXPECT_EQ(ledger.rejected()[1].reason, "duplicate transaction");
  EXPECT_EQ(heights(a), heights(b));
}
