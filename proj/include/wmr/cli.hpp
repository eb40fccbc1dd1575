#pragma once

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wmr/attack.hpp"
#include "wmr/bench.hpp"
#include "wmr/rsi.hpp"
#include "wmr/scenarios.hpp"

namespace wmr::cli {

// Stable exit code contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitSafetyFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitUnknownEntity = 3;
inline constexpr int kExitKernelUnreachable = 4;

struct Args {
  std::string command;
  std::vector<std::string> positional;
  Seed seed{0};
  std::string config_path;
  std::string out_path;
  Autonomy level = Autonomy::A5;
  std::string kernel_endpoint = "inproc";
};

inline const char* kLineageDirEnv = "WMR_LINEAGE_DIR";

inline std::string lineage_file() {
  const char* dir = std::getenv(kLineageDirEnv);
  return std::string(dir && *dir ? dir : ".") + "/lineage.log";
}

inline bool parse_args(int argc, const char* const* argv, Args& args,
                       std::string& error) {
  if (argc < 2) {
    error = "usage: wmr <scenario|replay|lineage|rsi|attack|bench> [args]";
    return false;
  }
  args.command = argv[1];
  for (int i = 2; i < argc; ++i) {
    std::string a = argv[i];
    auto next = [&](const char* flag) -> const char* {
      if (i + 1 >= argc) {
        error = std::string(flag) + " needs a value";
        return nullptr;
      }
      return argv[++i];
    };
    if (a == "--seed") {
      const char* v = next("--seed");
      if (!v) return false;
      char* end = nullptr;
      args.seed.value = std::strtoull(v, &end, 10);
      if (!end || *end) {
        error = "bad --seed value";
        return false;
      }
    } else if (a == "--config") {
      const char* v = next("--config");
      if (!v) return false;
      args.config_path = v;
    } else if (a == "--out") {
      const char* v = next("--out");
      if (!v) return false;
      args.out_path = v;
    } else if (a == "--level") {
      const char* v = next("--level");
      if (!v) return false;
      auto lvl = autonomy_from(v);
      if (!lvl) {
        error = "bad --level, expected A1..A6";
        return false;
      }
      args.level = *lvl;
    } else if (a == "--kernel") {
      const char* v = next("--kernel");
      if (!v) return false;
      args.kernel_endpoint = v;
    } else if (!a.empty() && a[0] == '-') {
      error = "unknown flag: " + a;
      return false;
    } else {
      args.positional.push_back(a);
    }
  }
  return true;
}

// Config files are sorted key=value text, one pair per line.
inline bool load_config(const std::string& path, std::map<std::string, double>& out,
                        std::string& error) {
  if (path.empty()) return true;
  std::ifstream f(path);
  if (!f) {
    error = "cannot open config: " + path;
    return false;
  }
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      error = "bad config line: " + line;
      return false;
    }
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    char* end = nullptr;
    double d = std::strtod(val.c_str(), &end);
    if (!end || *end || val.empty()) {
      error = "bad config value: " + line;
      return false;
    }
    out[key] = d;
  }
  return true;
}

inline void write_report(const std::string& path, const std::vector<std::string>& lines) {
  if (path.empty()) return;
  std::ofstream f(path, std::ios::trunc);
  for (const auto& l : lines) f << l << "\n";
}

namespace detail {

inline int cmd_scenario(const Args& args, const std::map<std::string, double>& config,
                        std::ostream& out, std::ostream& err) {
  if (args.positional.empty()) {
    err << "scenario needs a name\n";
    return kExitConfig;
  }
  World world = World::create(true);
  std::ifstream probe(lineage_file());
  if (probe.good()) world.lineage->load(lineage_file());
  ScenarioReport rep;
  try {
    rep = run_scenario(world, args.positional[0], config, args.seed);
  } catch (const UnknownModel& e) {
    err << e.what() << "\n";
    return kExitUnknownEntity;
  }
  std::vector<std::string> report = rep.lines;
  report.push_back("run_id " + rep.run_id);
  report.push_back("digest " + rep.digest());
  for (const auto& l : report) out << l << "\n";
  write_report(args.out_path, report);
  world.lineage->save(lineage_file());
  return rep.exit_code;
}

inline int cmd_replay(const Args& args, std::ostream& out, std::ostream& err) {
  if (args.positional.empty()) {
    err << "replay needs a run id\n";
    return kExitConfig;
  }
  World world = World::create(true);
  std::ifstream probe(lineage_file());
  if (probe.good()) world.lineage->load(lineage_file());
  try {
    auto r = replay_run(world, args.positional[0]);
    out << r.detail << "\n";
    return r.match ? kExitOk : kExitSafetyFailure;
  } catch (const UnknownRun& e) {
    err << e.what() << "\n";
    return kExitUnknownEntity;
  }
}

inline int cmd_lineage(const Args& args, std::ostream& out, std::ostream& err) {
  if (args.positional.empty()) {
    err << "lineage needs a run id\n";
    return kExitConfig;
  }
  World world = World::create(true);
  std::ifstream probe(lineage_file());
  if (probe.good()) world.lineage->load(lineage_file());
  try {
    for (const auto& rec : world.lineage->lineage_chain(args.positional[0]))
      out << LineageStore::format_line(rec) << "\n";
    return kExitOk;
  } catch (const UnknownRun& e) {
    err << e.what() << "\n";
    return kExitUnknownEntity;
  }
}

inline int cmd_rsi(const Args& args, const std::map<std::string, double>& config,
                   std::ostream& out, std::ostream& err) {
  if (args.kernel_endpoint != "inproc") {
    err << "kernel unreachable: " << args.kernel_endpoint << "\n";
    return kExitKernelUnreachable;
  }
  // fixed-geometry beam: deflection is linear in F, the learned model starts
  // 10% off the solver coefficient
  const double L = 2.0, E = 200e9, I = 8e-6;
  const double true_w0 = L * L * L / (3.0 * E * I);

  World world = World::create(true);
  NanoModelSpec spec;
  spec.model_id = "beam_lin";
  spec.architecture_class = ArchClass::LinearModel;
  spec.glassbox = true;
  spec.cdai = true;
  spec.param_count = kParamCountLo;
  ModelArtifact art;
  art.spec = spec;
  art.parameters.assign(kParamCountLo, 0.0);
  art.parameters[0] = true_w0 * 1.1;
  world.registry->register_model(spec, art);
  world.envelopes["beam_lin"] = Envelope{"beam_deflection", 0.02};

  KernelService kernel(Seed{derive_seed(args.seed, "cli/rsi").value}, "cli-operator");
  Gauntlet gauntlet(world, kernel, args.level);

  RsiConfig cfg;
  cfg.target_model = "beam_lin";
  cfg.solver = "beam_deflection";
  cfg.generations = int(wmr::detail::cfg(config, "generations", 40));
  cfg.population = std::size_t(wmr::detail::cfg(config, "population", 20));
  for (int i = 0; i < 20; ++i) {
    double F = 50.0 + i * 5.0;
    cfg.eval_set.push_back({{{"F", F}, {"L", L}, {"E", E}, {"I", I}}, {{"x0", F}}});
  }

  std::vector<Trajectory> trajectories{{"beam_lin/main", 0, 0, true, {}}};
  auto rep = rsi_cycle(world, gauntlet, kernel, trajectories, cfg, args.seed);

  std::vector<std::string> report;
  report.push_back("trajectory " + rep.trajectory_id);
  report.push_back("initial_best " + canon_double(rep.initial_best));
  report.push_back("final_best " + canon_double(rep.final_best));
  report.push_back(std::string("gauntlet_approved ") + (rep.gauntlet_approved ? "1" : "0"));
  report.push_back(std::string("canary ") +
                   (!rep.canary ? "none"
                    : *rep.canary == CanaryOutcome::Promoted ? "Promoted"
                                                             : "RolledBack"));
  report.push_back("new_version " + (rep.new_version ? canon_u64(*rep.new_version) : "none"));
  for (const auto& l : report) out << l << "\n";
  write_report(args.out_path, report);
  world.lineage->save(lineage_file());
  return kExitOk;
}

inline int cmd_attack(const Args& args, std::ostream& out, std::ostream& err) {
  if (args.kernel_endpoint != "inproc") {
    err << "kernel unreachable: " << args.kernel_endpoint << "\n";
    return kExitKernelUnreachable;
  }
  auto summary = run_attack_suite(false);
  std::vector<std::string> report;
  for (const auto& o : summary.outcomes)
    report.push_back((o.bypassed ? "succeeded " : "blocked   ") + o.name);
  report.push_back("total " + canon_u64(summary.total()));
  report.push_back("bypasses " + canon_u64(summary.bypasses()));
  for (const auto& l : report) out << l << "\n";
  write_report(args.out_path, report);
  return summary.bypasses() == 0 ? kExitOk : kExitSafetyFailure;
}

inline int cmd_bench(const Args& args, std::ostream& out, std::ostream&) {
  auto rep = run_bench();
  std::vector<std::string> report;
  report.push_back("solver_p50_ms " + canon_double(rep.solver_p50_ms));
  report.push_back("solver_p99_ms " + canon_double(rep.solver_p99_ms));
  report.push_back("belief_updates_per_s " + canon_double(rep.belief_updates_per_s));
  report.push_back("activation_fraction " + canon_double(rep.activation_fraction));
  report.push_back("train_nano_s " + canon_double(rep.train_nano_s));
  report.push_back("loop_tick_p50_ms " + canon_double(rep.loop_tick_p50_ms));
  report.push_back(rep.canonical());
  for (const auto& l : report) out << l << "\n";
  write_report(args.out_path, report);
  return kExitOk;
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv, std::ostream& out,
                    std::ostream& err) {
  Args args;
  std::string error;
  if (!parse_args(argc, argv, args, error)) {
    err << error << "\n";
    return kExitConfig;
  }
  std::map<std::string, double> config;
  if (!load_config(args.config_path, config, error)) {
    err << error << "\n";
    return kExitConfig;
  }
  try {
    if (args.command == "scenario") return detail::cmd_scenario(args, config, out, err);
    if (args.command == "replay") return detail::cmd_replay(args, out, err);
    if (args.command == "lineage") return detail::cmd_lineage(args, out, err);
    if (args.command == "rsi") return detail::cmd_rsi(args, config, out, err);
    if (args.command == "attack") return detail::cmd_attack(args, out, err);
    if (args.command == "bench") return detail::cmd_bench(args, out, err);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitConfig;
  }
  err << "unknown command: " << args.command << "\n";
  return kExitConfig;
}

}  // namespace wmr::cli
