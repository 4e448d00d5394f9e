#include "bfl/simnet.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace bfl {

SimTime DelayDist::sample(Rng& rng) const {
  if (kind == Kind::Fixed || hi <= lo) return lo;
  // Inclusive of both ends.
  return lo + static_cast<SimTime>(rng.below(static_cast<std::uint64_t>(hi - lo) + 1));
}

std::string DelayModel::check() const {
  auto check_one = [&](const DelayDist& d, const std::string& what) -> std::string {
    if (d.lo <= 0) return what + ": delays must be positive";
    if (d.hi < d.lo) return what + ": upper bound below lower bound";
    if (d.hi > max_delay) return what + ": exceeds max_delay";
    return {};
  };
  if (max_delay <= 0) return "max_delay must be positive";
  if (bandwidth < 0 || !std::isfinite(bandwidth)) return "bandwidth must be finite and >= 0";
  if (auto e = check_one(base, "base delay"); !e.empty()) return e;
  for (const auto& [link, d] : overrides) {
    auto e = check_one(d, "link " + to_string(link.first) + "->" + to_string(link.second));
    if (!e.empty()) return e;
  }
  return {};
}

const DelayDist& DelayModel::link(const ProcessId& from, const ProcessId& to) const {
  auto it = overrides.find({from, to});
  return it == overrides.end() ? base : it->second;
}

SimTime DelayModel::transmission(std::size_t bytes) const {
  if (bandwidth <= 0) return 0;
  return static_cast<SimTime>(std::ceil(static_cast<double>(bytes) * 1e9 / bandwidth));
}

void Metrics::mark(std::uint32_t round, Milestone m, SimTime t) {
  auto& slot = marks_[round][static_cast<std::size_t>(m)];
  if (!slot || t < *slot) slot = t;
}

void Metrics::gauge_max(const std::string& name, double value) {
  auto [it, fresh] = gauges_.try_emplace(name, value);
  if (!fresh) it->second = std::max(it->second, value);
}

std::uint64_t Metrics::counter(const std::string& name) const {
  auto it = counters_.find(name);
  return it == counters_.end() ? 0 : it->second;
}

std::vector<RoundSegments> Metrics::segments() const {
  std::vector<RoundSegments> out;
  for (const auto& [round, marks] : marks_) {
    if (!marks.front() || !marks.back()) continue;
    const SimTime start = *marks.front();
    const SimTime end = std::max(start, *marks.back());
    RoundSegments rs;
    rs.round = round;
    SimTime prev = start;
    for (std::size_t i = 1; i < kMilestones; ++i) {
      // A missing intermediate milestone contributes an empty segment.
      SimTime t = marks[i] ? *marks[i] : prev;
      t = std::clamp(t, prev, end);
      if (i == kMilestones - 1) t = end;
      rs.segments[i - 1] = t - prev;
      prev = t;
    }
    rs.total = end - start;
    out.push_back(rs);
  }
  return out;
}

std::string Metrics::to_csv() const {
  std::string out = "kind,round,name,value\n";
  char buf[256];
  for (const auto& rs : segments()) {
    for (std::size_t i = 0; i + 1 < kMilestones; ++i) {
      std::snprintf(buf, sizeof buf, "segment,%u,%s,%" PRId64 "\n", rs.round,
                    std::string(kSegmentNames[i]).c_str(), rs.segments[i]);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "segment,%u,total,%" PRId64 "\n", rs.round, rs.total);
    out += buf;
  }
  for (const auto& [name, value] : counters_) {
    std::snprintf(buf, sizeof buf, "counter,,%s,%" PRIu64 "\n", name.c_str(), value);
    out += buf;
  }
  for (const auto& [name, value] : gauges_) {
    std::snprintf(buf, sizeof buf, "gauge,,%s,%.17g\n", name.c_str(), value);
    out += buf;
  }
  return out;
}

Simulator::Simulator(std::uint64_t seed, DelayModel network)
    : network_(std::move(network)), rng_(Rng::stream(seed, "network")) {
  if (auto err = network_.check(); !err.empty()) throw std::invalid_argument(err);
}

void Simulator::add_actor(const ProcessId& id, Actor* actor) {
  if (!actors_.emplace(id, actor).second) {
    throw std::invalid_argument("duplicate actor " + to_string(id));
  }
}

void Simulator::schedule(SimTime at, const ProcessId& from, const ProcessId& to, Message msg) {
  queue_.push(Event{at, next_seq_++, from, to, std::move(msg)});
}

void Simulator::send(const ProcessId& from, const ProcessId& to, Message msg) {
  if (!actors_.contains(to)) throw UnknownProcessError("send to unregistered " + to_string(to));
  const SimTime delay =
      network_.link(from, to).sample(rng_) + network_.transmission(wire_size(msg));
  if (observer_) observer_(now_, from, to, msg);
  schedule(now_ + delay, from, to, std::move(msg));
}

void Simulator::set_timer(const ProcessId& owner, SimTime delay, TimerMsg timer) {
  schedule(now_ + std::max<SimTime>(delay, 0), owner, owner, timer);
}

Simulator::Status Simulator::run(SimTime horizon, const std::function<bool()>& stop) {
  if (!started_) {
    started_ = true;
    for (auto& [id, actor] : actors_) actor->on_start();
    if (stop && stop()) return Status::Stopped;
  }
  while (!queue_.empty()) {
    if (queue_.top().time > horizon) return Status::Horizon;
    // priority_queue::top is const; the event is copied out before popping.
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.time;
    ++delivered_;
    actors_.at(ev.to)->on_message(ev.from, ev.msg);
    if (stop && stop()) return Status::Stopped;
  }
  return Status::Quiescent;
}

void Simulator::log(const ProcessId& actor, std::string_view text) {
  std::string line = format_time(now_);
  line += ' ';
  line += to_string(actor);
  line += ' ';
  line += text;
  log_.push_back(std::move(line));
}

std::string format_time(SimTime t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%" PRId64 ".%06" PRId64, t / kMillisecond, t % kMillisecond);
  return buf;
}

}  // namespace bfl
