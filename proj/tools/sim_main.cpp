// sim: run, audit and sweep scenarios.
#include <cstdio>
#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "bfl/audit.hpp"
#include "bfl/runner.hpp"
#include "bfl/sweep.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitLiveness = 3;
constexpr int kExitAudit = 4;

bfl::Scenario load(const std::string& path) {
  bfl::Scenario s = bfl::load_scenario(path);
  if (const char* env = std::getenv("SIM_SEED")) {
    char* end = nullptr;
    const unsigned long long seed = std::strtoull(env, &end, 0);
    if (*env == '\0' || *end != '\0') throw bfl::ConfigError(0, std::string("SIM_SEED is not an integer: ") + env);
    s.seed = seed;
  }
  return s;
}

int cmd_run(const std::string& cfg, const std::string& out) {
  const bfl::Scenario s = load(cfg);
  bfl::Simulation sim(s);
  const bfl::RunResult r = sim.run();
  sim.write_transcript(out, r);
  if (r.outcome != bfl::Outcome::Finished) {
    std::cerr << "liveness failure: " << r.report << "\n";
    return kExitLiveness;
  }
  std::printf("%s: finished %u rounds at %s ms, final loss %.6g\n", s.name.c_str(), r.committed_rounds,
              bfl::format_time(r.end_time).c_str(), r.losses.empty() ? 0.0 : r.losses.back());
  return kExitOk;
}

int cmd_audit(const std::string& dir) {
  const bfl::AuditReport rep = bfl::audit_transcript(dir);
  if (!rep.ok) {
    std::cerr << "audit failed: " << rep.check << ": " << rep.detail << "\n";
    return kExitAudit;
  }
  std::printf("audit ok (%zu checks)\n", rep.passed.size());
  return kExitOk;
}

int cmd_sweep(const std::string& cfg, bfl::SweepOptions opt) {
  const bfl::Scenario base = load(cfg);
  const auto rows = bfl::run_sweep(base, opt);
  const std::string csv = bfl::sweep_csv(rows);
  std::filesystem::create_directories(*opt.out);
  bfl::write_text(*opt.out / "sweep.csv", csv);
  std::cout << csv;
  for (const auto& r : rows) {
    if (r.finished != r.repeats) return kExitLiveness;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulator of ledger-coordinated Byzantine-tolerant federated learning"};
  app.require_subcommand(1);

  std::string cfg, out, dir;
  auto* run = app.add_subcommand("run", "Run one scenario and write its transcript");
  run->add_option("config", cfg, "Scenario file")->required();
  run->add_option("-o,--out", out, "Transcript directory")->required();

  auto* audit = app.add_subcommand("audit", "Re-verify a transcript directory");
  audit->add_option("dir", dir, "Transcript directory")->required();

  bfl::SweepOptions opt;
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "Run one scenario per axis value");
  sweep->add_option("config", cfg, "Scenario file")->required();
  sweep->add_option("--axis", opt.axis, "n_s, K, model_dim, lambda_boost or f_c")->required();
  sweep->add_option("--values", opt.values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("--repeats", opt.repeats, "Seeds per value, averaged");
  sweep->add_option("-o,--out", sweep_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(cfg, out);
    if (*audit) return cmd_audit(dir);
    opt.out = sweep_out;
    return cmd_sweep(cfg, opt);
  } catch (const bfl::ConfigError& e) {
    std::cerr << e.render(cfg) << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
