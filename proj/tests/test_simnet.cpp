#include <gtest/gtest.h>

#include "bfl/simnet.hpp"
#include "support.hpp"

using namespace bfl;
using bfl::testing::Probe;

namespace {

DelayModel fixed_ms(SimTime ms) {
  DelayModel m;
  m.base = DelayDist::fixed(ms * kMillisecond);
  m.max_delay = ms * kMillisecond;
  return m;
}

Message query() { return QueryMsg{hash_value(ParamVector{1.0})}; }

}  // namespace

TEST(Simulator, FixedDelayDelivery) {
  Simulator sim(1, fixed_ms(5));
  Probe a(&sim), b(&sim);
  sim.add_actor(ProcessId::server(0), &a);
  sim.add_actor(ProcessId::server(1), &b);
  sim.send(ProcessId::server(0), ProcessId::server(1), query());
  EXPECT_EQ(sim.run(kMillisecond * 1000), Simulator::Status::Quiescent);
  ASSERT_EQ(b.got.size(), 1u);
  EXPECT_EQ(b.got[0].at, 5 * kMillisecond);
  EXPECT_EQ(b.got[0].from, ProcessId::server(0));
  EXPECT_TRUE(a.got.empty());
}

TEST(Simulator, ExactlyOnceAndFifoOnTies) {
  Simulator sim(1, fixed_ms(5));
  Probe a(&sim), b(&sim);
  sim.add_actor(ProcessId::server(0), &a);
  sim.add_actor(ProcessId::server(1), &b);
  for (std::uint64_t i = 0; i < 100; ++i) {
    sim.send(ProcessId::server(0), ProcessId::server(1), TimerMsg{0, i});
  }
  sim.run(kMillisecond * 1000);
  ASSERT_EQ(b.got.size(), 100u);
  for (std::uint64_t i = 0; i < 100; ++i) EXPECT_EQ(std::get<TimerMsg>(b.got[i].msg).id, i);
  EXPECT_EQ(sim.delivered(), 100u);
}

TEST(DelayDist, UniformStaysInBounds) {
  Rng rng(5);
  const auto d = DelayDist::uniform(3 * kMillisecond, 9 * kMillisecond);
  SimTime lo_seen = d.hi, hi_seen = d.lo;
  for (int i = 0; i < 100000; ++i) {
    const SimTime t = d.sample(rng);
    ASSERT_GE(t, d.lo);
    ASSERT_LE(t, d.hi);
    lo_seen = std::min(lo_seen, t);
    hi_seen = std::max(hi_seen, t);
  }
  EXPECT_LT(lo_seen - d.lo, kMillisecond / 10);
  EXPECT_LT(d.hi - hi_seen, kMillisecond / 10);
}

TEST(DelayModel, Validation) {
  DelayModel m = fixed_ms(5);
  EXPECT_EQ(m.check(), "");
  m.base = DelayDist::fixed(0);
  EXPECT_NE(m.check(), "");
  m = fixed_ms(5);
  m.base = DelayDist::uniform(kMillisecond, 6 * kMillisecond);
  EXPECT_NE(m.check(), "");
  m = fixed_ms(5);
  m.bandwidth = -1;
  EXPECT_NE(m.check(), "");
  EXPECT_THROW(Simulator(1, m), std::invalid_argument);
}

TEST(DelayModel, LinkOverrideAndBandwidth) {
  DelayModel m = fixed_ms(5);
  m.max_delay = 50 * kMillisecond;
  m.overrides[{ProcessId::server(0), ProcessId::server(1)}] = DelayDist::fixed(40 * kMillisecond);
  m.bandwidth = 1e6;  // 1 byte per microsecond
  Simulator sim(1, m);
  Probe a(&sim), b(&sim);
  sim.add_actor(ProcessId::server(0), &a);
  sim.add_actor(ProcessId::server(1), &b);
  const Message msg = query();
  const SimTime tx = static_cast<SimTime>(wire_size(msg)) * 1000;
  sim.send(ProcessId::server(0), ProcessId::server(1), msg);
  sim.send(ProcessId::server(1), ProcessId::server(0), msg);
  sim.run(kMillisecond * 1000);
  ASSERT_EQ(b.got.size(), 1u);
  ASSERT_EQ(a.got.size(), 1u);
  EXPECT_EQ(b.got[0].at, 40 * kMillisecond + tx);
  EXPECT_EQ(a.got[0].at, 5 * kMillisecond + tx);
}

TEST(Simulator, UnknownDestinationThrows) {
  Simulator sim(1, fixed_ms(5));
  EXPECT_THROW(sim.send(ProcessId::server(0), ProcessId::server(7), query()), UnknownProcessError);
}

TEST(Simulator, TimersAndHorizon) {
  Simulator sim(1, fixed_ms(5));
  Probe a(&sim);
  sim.add_actor(ProcessId::server(0), &a);
  sim.set_timer(ProcessId::server(0), 30 * kMillisecond, TimerMsg{1, 9});
  sim.set_timer(ProcessId::server(0), 300 * kMillisecond, TimerMsg{1, 10});
  EXPECT_EQ(sim.run(100 * kMillisecond), Simulator::Status::Horizon);
  ASSERT_EQ(a.got.size(), 1u);
  EXPECT_EQ(a.got[0].at, 30 * kMillisecond);
  EXPECT_EQ(a.got[0].from, ProcessId::server(0));
  EXPECT_EQ(sim.run(1000 * kMillisecond, [&] { return a.got.size() == 2; }), Simulator::Status::Stopped);
}

TEST(Simulator, SameSeedSameSchedule) {
  auto run_once = [] {
    DelayModel m;
    m.base = DelayDist::uniform(kMillisecond, 20 * kMillisecond);
    Simulator sim(77, m);
    Probe a(&sim), b(&sim);
    sim.add_actor(ProcessId::server(0), &a);
    sim.add_actor(ProcessId::server(1), &b);
    for (std::uint64_t i = 0; i < 50; ++i) sim.send(ProcessId::server(0), ProcessId::server(1), TimerMsg{0, i});
    sim.run(kMillisecond * 1000);
    std::vector<std::pair<SimTime, std::uint64_t>> out;
    for (const auto& d : b.got) out.emplace_back(d.at, std::get<TimerMsg>(d.msg).id);
    return out;
  };
  EXPECT_EQ(run_once(), run_once());
}

TEST(Metrics, SegmentsPartitionTheRound) {
  Metrics m;
  m.mark(1, Milestone::RoundStart, 100);
  m.mark(1, Milestone::FirstUpdate, 150);
  m.mark(1, Milestone::NrSubmitted, 140);  // earlier than FirstUpdate: clamped
  m.mark(1, Milestone::NrDelivered, 400);
  m.mark(1, Milestone::FetchDone, 400);
  m.mark(1, Milestone::ModelCertified, 470);
  m.mark(1, Milestone::ModelCertified, 460);  // earliest wins
  m.mark(2, Milestone::RoundStart, 460);      // unfinished round
  const auto segs = m.segments();
  ASSERT_EQ(segs.size(), 1u);
  SimTime sum = 0;
  for (auto s : segs[0].segments) {
    EXPECT_GE(s, 0);
    sum += s;
  }
  EXPECT_EQ(segs[0].total, 360);
  EXPECT_EQ(sum, segs[0].total);
  EXPECT_EQ(segs[0].segments[0], 50);
  EXPECT_EQ(segs[0].segments[1], 0);
}

TEST(Metrics, CsvLayout) {
  Metrics m;
  for (std::size_t i = 0; i < kMilestones; ++i) m.mark(1, static_cast<Milestone>(i), 10 * static_cast<SimTime>(i));
  m.count("blocks", 3);
  m.gauge_max("max_model_divergence", 1e-12);
  m.gauge_max("max_model_divergence", 5e-13);
  const std::string csv = m.to_csv();
  EXPECT_EQ(csv.rfind("kind,round,name,value\nsegment,1,client_train,10\n", 0), 0u);
  EXPECT_NE(csv.find("segment,1,total,50\n"), std::string::npos);
  EXPECT_NE(csv.find("counter,,blocks,3\n"), std::string::npos);
  EXPECT_NE(csv.find("gauge,,max_model_divergence,9.9999999999999998e-13\n"), std::string::npos);
}

TEST(FormatTime, Milliseconds) {
  EXPECT_EQ(format_time(0), "0.000000");
  EXPECT_EQ(format_time(12 * kMillisecond + 34), "12.000034");
}
