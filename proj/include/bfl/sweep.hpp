#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bfl/runner.hpp"
#include "bfl/scenario.hpp"

namespace bfl {

/// Means over rounds (and over repeats) of one sweep cell, in milliseconds.
struct SweepRow {
  std::string axis;
  double value = 0;
  double segments_ms[kMilestones - 1] = {};
  double total_ms = 0;
  double final_loss = 0;
  /// Mean over repeats that reached the threshold; absent if none did.
  std::optional<double> rounds_to_threshold;
  std::uint32_t reached = 0;  // repeats that reached the threshold
  /// Per-round loss averaged over repeats, up to the shortest repeat.
  std::vector<double> mean_losses;
  /// First round at which mean_losses is at or below the threshold.
  std::optional<std::uint32_t> curve_rounds_to_threshold;
  std::uint32_t finished = 0;
  std::uint32_t repeats = 0;
};

struct SweepOptions {
  std::string axis;
  std::vector<double> values;
  /// Repeat r uses selection_seed + r: same data and network, different
  /// client draws.
  std::uint32_t repeats = 1;
  /// When set, each cell's first repeat writes a transcript to out/<axis>_<value>.
  std::optional<std::filesystem::path> out;
};

std::vector<SweepRow> run_sweep(const Scenario& base, const SweepOptions& options);

/// CSV with a header row; one line per cell.
std::string sweep_csv(const std::vector<SweepRow>& rows);

std::string format_axis_value(double v);

}  // namespace bfl
