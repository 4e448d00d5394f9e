#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfl/ledger.hpp"
#include "bfl/learning.hpp"
#include "bfl/protocol.hpp"
#include "bfl/simnet.hpp"
#include "bfl/storage.hpp"

namespace bfl {

/// Configuration problem with the 1-based line it was found on (0 if the
/// problem is not tied to one line).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::size_t line, const std::string& message)
      : std::runtime_error(message), line_(line) {}
  std::size_t line() const { return line_; }
  /// "<source>:<line>: <message>".
  std::string render(const std::string& source) const;

 private:
  std::size_t line_;
};

struct DataConfig {
  TaskKind kind = TaskKind::LinearRegression;
  double noise = 0.0;
  std::uint32_t samples_per_client = 20;
  Partition partition = Partition::Iid;
  /// Rounds-to-threshold target for sweeps; absent means "not tracked".
  std::optional<double> loss_threshold;
};

struct FaultPlan {
  std::map<ProcessId, ServerBehavior> servers;
  std::map<ProcessId, ReplicaBehavior> replicas;
  std::map<ProcessId, ClientBehavior> clients;
  std::map<ProcessId, std::uint64_t> stakes;
  double lambda_boost = 5.0;
};

enum class Expectation : std::uint8_t { Terminate = 0, Failure = 1 };

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 0;
  std::uint32_t clients = 1;
  std::uint32_t f_s = 0;
  std::uint32_t f_r = 0;
  TaskParams params;
  bool min_updates_explicit = false;
  DataConfig data;
  DelayModel network;
  DelayDist block_interval = DelayDist::fixed(100 * kMillisecond);
  std::optional<SimTime> read_deadline;
  SimTime train_time = 0;
  FaultPlan faults;
  bool instahide = false;
  std::uint32_t mix_count = 2;
  Expectation expect = Expectation::Terminate;
  SimTime horizon = 3600'000 * kMillisecond;

  std::uint32_t servers() const { return 2 * f_s + 1; }
  std::uint32_t replicas() const { return f_r + 1; }
  Population population() const { return {clients, servers(), replicas()}; }
  /// Explicit value, or 10 x (max link delay + transmission of one model).
  SimTime effective_read_deadline() const;
};

/// Parses and validates; throws ConfigError.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
/// Semantic checks shared by the parser and programmatic construction.
/// Returns an empty string when the scenario is runnable.
std::string validate_scenario(const Scenario& s);
/// JSON text that parse_scenario maps back to an equal scenario.
std::string dump_scenario(const Scenario& s);

/// Sweep axes: n_s, K, model_dim, lambda_boost, f_c.
Scenario apply_axis(const Scenario& base, const std::string& axis, double value);
bool known_axis(const std::string& axis);

}  // namespace bfl
