#include <gtest/gtest.h>

#include "bfl/storage.hpp"
#include "support.hpp"

using namespace bfl;
using bfl::testing::quorum;

namespace {

const TaskId kTask{1};

SharedBytes value_bytes(double v) { return std::make_shared<const Bytes>(canonical_encode(ParamVector{v})); }

/// Actor hosting a StorageReader.
class Reader : public Actor {
 public:
  Reader(Simulator* sim, ProcessId self, std::vector<ProcessId> replicas, const KeyRegistry* reg, SimTime deadline)
      : reader(sim, self, std::move(replicas), reg, 1, deadline) {}
  void on_message(const ProcessId&, const Message& msg) override {
    if (const auto* r = std::get_if<ReplyMsg>(&msg)) reader.on_reply(*r);
    if (const auto* t = std::get_if<TimerMsg>(&msg)) reader.on_timer(*t);
  }
  StorageReader reader;
};

struct Deploy {
  explicit Deploy(std::vector<ReplicaBehavior> behaviors, std::uint64_t seed = 1, DelayModel net = DelayModel{})
      : reg(KeyRegistry::derive(seed, Population{1, 3, static_cast<std::uint32_t>(behaviors.size())})),
        sim(seed, net) {
    std::vector<ProcessId> ids;
    for (std::uint32_t i = 0; i < behaviors.size(); ++i) {
      ids.push_back(ProcessId::replica(i));
      replicas.push_back(std::make_unique<ReplicaActor>(&sim, ids.back(), behaviors[i]));
      sim.add_actor(ids.back(), replicas.back().get());
    }
    reader = std::make_unique<Reader>(&sim, ProcessId::server(0), ids, &reg, 500 * kMillisecond);
    sim.add_actor(ProcessId::server(0), reader.get());
  }

  void store_everywhere(const HashKey& key, SharedBytes v) {
    for (const auto& r : replicas) sim.send(ProcessId::server(1), r->id(), StoreMsg{key, v});
  }

  KeyRegistry reg;
  Simulator sim;
  std::vector<std::unique_ptr<ReplicaActor>> replicas;
  std::unique_ptr<Reader> reader;
};

}  // namespace

TEST(ReplicaState, ContentAddressed) {
  ReplicaState s;
  const auto v = value_bytes(1.0);
  const auto key = sha256(*v);
  EXPECT_TRUE(s.store(key, v));
  EXPECT_TRUE(s.contains(key));
  EXPECT_TRUE(s.store(key, value_bytes(1.0)));  // identical re-store
  EXPECT_EQ(s.size(), 1u);
  EXPECT_FALSE(s.store(key, value_bytes(2.0)));
  EXPECT_EQ(*s.get(key), *v);
  EXPECT_EQ(s.rejected(), 1u);
  EXPECT_EQ(s.get(hash_value(ParamVector{3.0})), nullptr);
}

TEST(Storage, GarbageReplierIsIgnored) {
  Deploy d({ReplicaBehavior::GarbageReplier, ReplicaBehavior::Correct});
  const auto v = value_bytes(4.0);
  const auto key = sha256(*v);
  d.store_everywhere(key, v);
  const auto proof = quorum(d.reg, {0, 1}, Tag::Upd, key, kTask, 1);
  std::optional<ReadResult> got;
  d.reader->reader.read(proof, [&](const ReadResult& r) { got = r; });
  d.sim.run(10'000 * kMillisecond);
  ASSERT_TRUE(got);
  ASSERT_FALSE(got->timed_out());
  EXPECT_EQ(*got->value, *v);
}

TEST(Storage, AllCorrectReturnsValue) {
  Deploy d({ReplicaBehavior::Correct, ReplicaBehavior::Correct, ReplicaBehavior::Correct});
  const auto v = value_bytes(5.0);
  d.store_everywhere(sha256(*v), v);
  std::optional<ReadResult> got;
  d.reader->reader.read(quorum(d.reg, {1, 2}, Tag::Mod, sha256(*v), kTask, 1), [&](const ReadResult& r) { got = r; });
  d.sim.run(10'000 * kMillisecond);
  ASSERT_TRUE(got && !got->timed_out());
  EXPECT_EQ(*got->value, *v);
  EXPECT_EQ(d.reader->reader.outstanding(), 0u);
}

TEST(Storage, ForgedProofSendsNothing) {
  Deploy d({ReplicaBehavior::Correct, ReplicaBehavior::Correct});
  auto proof = quorum(d.reg, {0}, Tag::Upd, hash_value(ParamVector{1.0}), kTask, 1);
  EXPECT_THROW(d.reader->reader.read(proof, [](const ReadResult&) {}), ProofError);
  EXPECT_EQ(d.reader->reader.queries_sent(), 0u);
}

TEST(Storage, AllReplicasByzantineTimesOut) {
  Deploy d({ReplicaBehavior::Silent, ReplicaBehavior::GarbageReplier});
  const auto v = value_bytes(6.0);
  d.store_everywhere(sha256(*v), v);
  std::optional<ReadResult> got;
  d.reader->reader.read_key(sha256(*v), [&](const ReadResult& r) { got = r; });
  d.sim.run(10'000 * kMillisecond);
  ASSERT_TRUE(got);
  EXPECT_TRUE(got->timed_out());
}

TEST(Storage, QueryBeforeStoreIsAnsweredLater) {
  DelayModel net;
  net.max_delay = 100 * kMillisecond;
  net.overrides[{ProcessId::server(1), ProcessId::replica(0)}] = DelayDist::fixed(80 * kMillisecond);
  Deploy d({ReplicaBehavior::Correct}, 1, net);
  const auto v = value_bytes(7.0);
  d.store_everywhere(sha256(*v), v);
  std::optional<ReadResult> got;
  d.reader->reader.read_key(sha256(*v), [&](const ReadResult& r) { got = r; });
  d.sim.run(10'000 * kMillisecond);
  ASSERT_TRUE(got && !got->timed_out());
  EXPECT_EQ(*got->value, *v);
}

TEST(Storage, GetAllEmptyCompletesImmediately) {
  Deploy d({ReplicaBehavior::Correct});
  bool called = false;
  d.reader->reader.get_all({}, [&](const std::vector<ReadResult>& r) {
    called = true;
    EXPECT_TRUE(r.empty());
  });
  EXPECT_TRUE(called);
}

TEST(Storage, GetAllMixedStoreTimes) {
  DelayModel net;
  net.base = DelayDist::uniform(kMillisecond, 30 * kMillisecond);
  net.max_delay = 30 * kMillisecond;
  Deploy d({ReplicaBehavior::Correct, ReplicaBehavior::Silent}, 4, net);
  std::vector<PoAI> proofs;
  std::vector<SharedBytes> values;
  for (int i = 0; i < 6; ++i) {
    values.push_back(value_bytes(i));
    proofs.push_back(quorum(d.reg, {0, 2}, Tag::Upd, sha256(*values.back()), kTask, 1));
  }
  // Half stored up front, half stored while the reads are in flight.
  for (int i = 0; i < 3; ++i) d.store_everywhere(proofs[i].hash_key(), values[i]);
  d.sim.run(100 * kMillisecond);
  std::optional<std::vector<ReadResult>> got;
  d.reader->reader.get_all(proofs, [&](const std::vector<ReadResult>& r) { got = r; });
  for (int i = 3; i < 6; ++i) d.store_everywhere(proofs[i].hash_key(), values[i]);
  d.sim.run(10'000 * kMillisecond);
  ASSERT_TRUE(got);
  ASSERT_EQ(got->size(), 6u);
  for (int i = 0; i < 6; ++i) {
    ASSERT_FALSE((*got)[i].timed_out());
    EXPECT_EQ(*(*got)[i].value, *values[i]);
  }
}

TEST(Storage, GetAllNamesForgedIndex) {
  Deploy d({ReplicaBehavior::Correct});
  std::vector<PoAI> proofs{quorum(d.reg, {0, 1}, Tag::Upd, hash_value(ParamVector{1.0}), kTask, 1),
                           quorum(d.reg, {0, 0}, Tag::Upd, hash_value(ParamVector{2.0}), kTask, 1)};
  try {
    d.reader->reader.get_all(proofs, [](const std::vector<ReadResult>&) {});
    FAIL() << "expected ProofError";
  } catch (const ProofError& e) {
    ASSERT_TRUE(e.index());
    EXPECT_EQ(*e.index(), 1u);
  }
  EXPECT_EQ(d.reader->reader.queries_sent(), 0u);
}

TEST(StorageMessages, WireRoundTrip) {
  const auto v = value_bytes(3.5);
  const Message m = StoreMsg{sha256(*v), v};
  const Message back = decode_storage_message(encode_storage_message(m));
  const auto& s = std::get<StoreMsg>(back);
  EXPECT_EQ(s.key, sha256(*v));
  EXPECT_EQ(*s.value, *v);
}
