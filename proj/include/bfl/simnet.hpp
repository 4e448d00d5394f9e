#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "bfl/core.hpp"
#include "bfl/messages.hpp"
#include "bfl/rng.hpp"

namespace bfl {

/// Latency distribution for one link, or for the ledger's block interval.
struct DelayDist {
  enum class Kind : std::uint8_t { Fixed, Uniform };
  Kind kind = Kind::Fixed;
  SimTime lo = kMillisecond;
  SimTime hi = kMillisecond;

  static DelayDist fixed(SimTime d) { return {Kind::Fixed, d, d}; }
  static DelayDist uniform(SimTime lo, SimTime hi) { return {Kind::Uniform, lo, hi}; }

  SimTime sample(Rng& rng) const;
  SimTime upper() const { return hi; }
};

/// Link latencies plus a size-proportional transmission delay.
struct DelayModel {
  DelayDist base = DelayDist::fixed(5 * kMillisecond);
  std::map<std::pair<ProcessId, ProcessId>, DelayDist> overrides;
  SimTime max_delay = 20 * kMillisecond;
  /// Bytes per simulated second; 0 disables the transmission term.
  double bandwidth = 0.0;

  /// Empty string when every sampled latency lies in (0, max_delay].
  std::string check() const;
  const DelayDist& link(const ProcessId& from, const ProcessId& to) const;
  SimTime transmission(std::size_t bytes) const;
};

/// Round milestones, in protocol order. The segment between two consecutive
/// milestones is one slice of the round latency.
enum class Milestone : std::uint8_t {
  RoundStart = 0,   // model for the round is certified (START_TASK for round 1)
  FirstUpdate,      // a correct server accepted a selected client's update
  NrSubmitted,      // first NR submission by a correct server
  NrDelivered,      // NR block delivered to a correct server
  FetchDone,        // a correct server holds every committed update
  ModelCertified,   // first MOD PoAI at a correct server
};
constexpr std::size_t kMilestones = 6;

inline constexpr std::string_view kSegmentNames[kMilestones - 1] = {
    "client_train", "update_collection", "block_time", "fetch", "aggregation"};

struct RoundSegments {
  std::uint32_t round = 0;
  SimTime segments[kMilestones - 1] = {};
  SimTime total = 0;
};

class Metrics {
 public:
  /// Keeps the earliest time per (round, milestone).
  void mark(std::uint32_t round, Milestone m, SimTime t);
  void count(const std::string& name, std::uint64_t by = 1) { counters_[name] += by; }
  void gauge_max(const std::string& name, double value);

  /// Rounds whose first and last milestones were both reached. Milestones are
  /// clamped to be non-decreasing, so the segments sum exactly to the total.
  std::vector<RoundSegments> segments() const;
  const std::map<std::string, std::uint64_t>& counters() const { return counters_; }
  const std::map<std::string, double>& gauges() const { return gauges_; }
  std::uint64_t counter(const std::string& name) const;

  /// kind,round,name,value rows: segments first, then counters and gauges.
  std::string to_csv() const;

 private:
  std::map<std::uint32_t, std::array<std::optional<SimTime>, kMilestones>> marks_;
  std::map<std::string, std::uint64_t> counters_;
  std::map<std::string, double> gauges_;
};

class Simulator;

class Actor {
 public:
  virtual ~Actor() = default;
  virtual void on_start() {}
  virtual void on_message(const ProcessId& from, const Message& msg) = 0;
};

/// Single-threaded discrete-event loop. Events run in (time, seq) order and
/// seq is assigned at scheduling time, so a seed fixes the whole execution.
class Simulator {
 public:
  Simulator(std::uint64_t seed, DelayModel network);

  void add_actor(const ProcessId& id, Actor* actor);
  bool has_actor(const ProcessId& id) const { return actors_.contains(id); }

  /// Delivers at now + sampled latency + size/bandwidth. The transport never
  /// rewrites `from`.
  void send(const ProcessId& from, const ProcessId& to, Message msg);
  void set_timer(const ProcessId& owner, SimTime delay, TimerMsg timer);

  enum class Status { Stopped, Quiescent, Horizon };
  /// Runs until `stop` returns true after an event, the queue drains, or
  /// simulated time would pass `horizon`.
  Status run(SimTime horizon, const std::function<bool()>& stop = {});

  SimTime now() const { return now_; }
  Metrics& metrics() { return metrics_; }
  const Metrics& metrics() const { return metrics_; }
  const DelayModel& network() const { return network_; }

  /// Appends "<time> <actor> <text>" to the event log.
  void log(const ProcessId& actor, std::string_view text);
  const std::vector<std::string>& event_log() const { return log_; }

  using SendObserver = std::function<void(SimTime, const ProcessId&, const ProcessId&, const Message&)>;
  void set_send_observer(SendObserver obs) { observer_ = std::move(obs); }

  std::uint64_t delivered() const { return delivered_; }

 private:
  struct Event {
    SimTime time;
    std::uint64_t seq;
    ProcessId from;
    ProcessId to;
    Message msg;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  void schedule(SimTime at, const ProcessId& from, const ProcessId& to, Message msg);

  DelayModel network_;
  Rng rng_;
  SimTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t delivered_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::map<ProcessId, Actor*> actors_;
  Metrics metrics_;
  std::vector<std::string> log_;
  SendObserver observer_;
  bool started_ = false;
};

std::string format_time(SimTime t);

}  // namespace bfl
