#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace bfl {

struct AuditReport {
  bool ok = true;
  std::string check;   // first failing check, empty when ok
  std::string detail;
  std::vector<std::string> passed;  // names of checks that passed, in order
};

/// Re-verifies a transcript directory written by Simulation::write_transcript
/// using nothing but its files: block chain, ledger replay, every PoAI,
/// recomputed aggregates, reward accounting and the final model digest.
AuditReport audit_transcript(const std::filesystem::path& dir);

}  // namespace bfl
