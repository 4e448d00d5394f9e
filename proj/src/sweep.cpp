#include "bfl/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace bfl {

std::string format_axis_value(double v) {
  char buf[64];
  if (v == std::floor(v) && std::fabs(v) < 1e15) {
    std::snprintf(buf, sizeof buf, "%.0f", v);
  } else {
    std::snprintf(buf, sizeof buf, "%g", v);
  }
  return buf;
}

std::vector<SweepRow> run_sweep(const Scenario& base, const SweepOptions& options) {
  if (!known_axis(options.axis)) throw ConfigError(0, "unknown sweep axis '" + options.axis + "'");
  if (options.repeats == 0) throw ConfigError(0, "repeats must be positive");
  std::vector<SweepRow> rows;
  for (double v : options.values) {
    SweepRow row;
    row.axis = options.axis;
    row.value = v;
    row.repeats = options.repeats;
    double rtt_sum = 0;
    std::uint32_t rtt_n = 0;
    std::vector<std::vector<double>> curves;
    for (std::uint32_t rep = 0; rep < options.repeats; ++rep) {
      Scenario s = apply_axis(base, options.axis, v);
      s.params.selection_seed = base.params.selection_seed + rep;
      Simulation sim(s);
      const RunResult r = sim.run();
      if (rep == 0 && options.out) {
        sim.write_transcript(*options.out / (options.axis + "_" + format_axis_value(v)), r);
      }
      if (r.outcome == Outcome::Finished) ++row.finished;
      const auto segs = sim.sim().metrics().segments();
      double seg[kMilestones - 1] = {};
      double total = 0;
      for (const auto& rs : segs) {
        for (std::size_t i = 0; i + 1 < kMilestones; ++i) seg[i] += static_cast<double>(rs.segments[i]);
        total += static_cast<double>(rs.total);
      }
      const double n = segs.empty() ? 1.0 : static_cast<double>(segs.size());
      for (std::size_t i = 0; i + 1 < kMilestones; ++i) row.segments_ms[i] += seg[i] / n / 1e6;
      row.total_ms += total / n / 1e6;
      row.final_loss += r.losses.empty() ? NAN : r.losses.back();
      curves.push_back(r.losses);
      if (r.rounds_to_threshold) {
        rtt_sum += *r.rounds_to_threshold;
        ++rtt_n;
      }
    }
    const double reps = options.repeats;
    for (auto& s : row.segments_ms) s /= reps;
    row.total_ms /= reps;
    row.final_loss /= reps;
    row.reached = rtt_n;
    if (rtt_n > 0) row.rounds_to_threshold = rtt_sum / rtt_n;
    std::size_t len = curves.front().size();
    for (const auto& c : curves) len = std::min(len, c.size());
    row.mean_losses.assign(len, 0.0);
    for (const auto& c : curves) {
      for (std::size_t t = 0; t < len; ++t) row.mean_losses[t] += c[t] / reps;
    }
    if (const auto thr = base.data.loss_threshold) {
      for (std::size_t t = 0; t < len; ++t) {
        if (row.mean_losses[t] <= *thr) {
          row.curve_rounds_to_threshold = static_cast<std::uint32_t>(t);
          break;
        }
      }
    }
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "axis,value";
  for (auto name : kSegmentNames) out += "," + std::string(name) + "_ms";
  out += ",total_ms,final_loss,rounds_to_threshold,curve_rounds_to_threshold,reached,finished,repeats\n";
  char buf[64];
  for (const auto& r : rows) {
    out += r.axis + "," + format_axis_value(r.value);
    for (double s : r.segments_ms) {
      std::snprintf(buf, sizeof buf, ",%.6f", s);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, ",%.6f,%.17g,", r.total_ms, r.final_loss);
    out += buf;
    if (r.rounds_to_threshold) {
      std::snprintf(buf, sizeof buf, "%.6g", *r.rounds_to_threshold);
      out += buf;
    }
    out += ",";
    if (r.curve_rounds_to_threshold) out += std::to_string(*r.curve_rounds_to_threshold);
    out += "," + std::to_string(r.reached) + "," + std::to_string(r.finished) + "," + std::to_string(r.repeats) + "\n";
  }
  return out;
}

}  // namespace bfl
