#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bfl/ledger_actor.hpp"
#include "bfl/protocol.hpp"
#include "bfl/scenario.hpp"

namespace bfl {

enum class Outcome : std::uint8_t { Finished = 0, LivenessFailure = 1 };

std::string_view outcome_name(Outcome o);

struct RunResult {
  Outcome outcome = Outcome::LivenessFailure;
  std::string report;  // why the run did not finish
  std::uint32_t committed_rounds = 0;
  SimTime end_time = 0;
  std::shared_ptr<const ParamVector> final_model;
  std::optional<RewardInfo> reward;
  /// Global loss of the initial model, then of each round's certified model.
  std::vector<double> losses;
  std::optional<std::uint32_t> rounds_to_threshold;
};

/// One scenario wired up: keys, datasets, actors, ledger and network.
class Simulation {
 public:
  explicit Simulation(const Scenario& scenario);
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  RunResult run();

  const Scenario& scenario() const { return scenario_; }
  Simulator& sim() { return *sim_; }
  const Simulator& sim() const { return *sim_; }
  const KeyRegistry& registry() const { return registry_; }
  const LedgerActor& ledger() const { return *ledger_; }
  const std::vector<std::unique_ptr<ServerActor>>& servers() const { return servers_; }
  const std::vector<std::unique_ptr<ClientActor>>& clients() const { return clients_; }
  const std::vector<std::unique_ptr<ReplicaActor>>& replicas() const { return replicas_; }
  const ModelOwnerActor& owner() const { return *owner_; }
  const SyntheticTask& task() const { return task_; }
  /// Unencoded client datasets; losses are always measured on these.
  const std::vector<ClientDataset>& datasets() const { return datasets_; }
  const std::vector<InstaHideResult>& encodings() const { return encodings_; }
  const ParamVector& initial_model() const { return initial_; }

  /// Transcript directory contents; see write_transcript.
  void write_transcript(const std::filesystem::path& dir, const RunResult& result) const;

 private:
  std::vector<double> round_losses() const;

  Scenario scenario_;
  KeyRegistry registry_;
  std::unique_ptr<Simulator> sim_;
  SyntheticTask task_;
  std::vector<ClientDataset> datasets_;
  std::vector<InstaHideResult> encodings_;
  ParamVector initial_;
  std::unique_ptr<LedgerActor> ledger_;
  std::vector<std::unique_ptr<ServerActor>> servers_;
  std::vector<std::unique_ptr<ClientActor>> clients_;
  std::vector<std::unique_ptr<ReplicaActor>> replicas_;
  std::unique_ptr<ModelOwnerActor> owner_;
};

constexpr TaskId kDefaultTask{1};

// Transcript files.
inline constexpr const char* kTranscriptLog = "transcript.log";
inline constexpr const char* kLedgerBin = "ledger.bin";
inline constexpr const char* kStorageBin = "storage.bin";
inline constexpr const char* kCertificatesBin = "certificates.bin";
inline constexpr const char* kScenarioJson = "scenario.json";
inline constexpr const char* kMetricsCsv = "metrics.csv";
inline constexpr const char* kLossCsv = "loss.csv";
inline constexpr const char* kResultJson = "result.json";
inline constexpr const char* kFinalModelBin = "final_model.bin";

Bytes encode_blocks(const std::vector<BlockPtr>& blocks);
std::vector<BlockPtr> decode_blocks(std::span<const std::uint8_t> bytes);
Bytes encode_store(const std::map<HashKey, SharedBytes>& entries);
std::map<HashKey, SharedBytes> decode_store(std::span<const std::uint8_t> bytes);
Bytes encode_certificates(const std::vector<PoAI>& proofs);
std::vector<PoAI> decode_certificates(std::span<const std::uint8_t> bytes);

/// The ledger section of transcript.log: one line per committed transaction.
std::vector<std::string> ledger_lines(const std::vector<BlockPtr>& blocks);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace bfl
