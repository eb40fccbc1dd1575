#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wmr/cli.hpp"

using namespace wmr;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run_cli(std::vector<std::string> argv_in) {
  std::vector<const char*> argv{"wmr"};
  for (const auto& a : argv_in) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = cli::cli_main(int(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// each test case gets its own lineage directory
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("wmr_cli_" + std::to_string(std::rand()));
    std::filesystem::create_directories(path);
    setenv(cli::kLineageDirEnv, path.c_str(), 1);
  }
  ~TempDir() {
    unsetenv(cli::kLineageDirEnv);
    std::filesystem::remove_all(path);
  }
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("argument and config errors exit 2") {
  TempDir tmp;
  CHECK(run_cli({}).code == cli::kExitConfig);
  CHECK(run_cli({"frobnicate"}).code == cli::kExitConfig);
  CHECK(run_cli({"scenario", "cascade", "--bogus"}).code == cli::kExitConfig);
  CHECK(run_cli({"scenario", "cascade", "--seed", "abc"}).code == cli::kExitConfig);
  CHECK(run_cli({"scenario", "cascade", "--level", "A9"}).code == cli::kExitConfig);
  CHECK(run_cli({"scenario"}).code == cli::kExitConfig);
  CHECK(run_cli({"scenario", "cascade", "--config", "/no/such/file"}).code ==
        cli::kExitConfig);

  auto bad = tmp.path / "bad.cfg";
  std::ofstream(bad) << "load=abc\n";
  CHECK(run_cli({"scenario", "cascade", "--config", bad.string()}).code ==
        cli::kExitConfig);
  std::ofstream(bad) << "no equals sign\n";
  CHECK(run_cli({"scenario", "cascade", "--config", bad.string()}).code ==
        cli::kExitConfig);
}

TEST_CASE("scenario: runs, reports, and is bit-reproducible") {
  TempDir tmp;
  auto cfg = tmp.path / "beam.cfg";
  std::ofstream(cfg) << "# beam config\nF=2000\nL=3\n";
  auto out1 = tmp.path / "r1.txt";
  auto out2 = tmp.path / "r2.txt";

  auto r1 = run_cli({"scenario", "beam-design", "--config", cfg.string(), "--seed",
                     "7", "--out", out1.string()});
  CHECK(r1.code == 0);
  CHECK(r1.out.find("verdict Pass") != std::string::npos);
  CHECK(r1.out.find("digest ") != std::string::npos);

  auto r2 = run_cli({"scenario", "beam-design", "--config", cfg.string(), "--seed",
                     "7", "--out", out2.string()});
  CHECK(r2.code == 0);
  // report files identical except the fresh run id line
  auto strip = [](std::string s) {
    std::istringstream in(s);
    std::string line, acc;
    while (std::getline(in, line))
      if (line.rfind("run_id ", 0) != 0) acc += line + "\n";
    return acc;
  };
  CHECK(strip(slurp(out1)) == strip(slurp(out2)));

  CHECK(run_cli({"scenario", "warp-drive"}).code == cli::kExitUnknownEntity);
}

TEST_CASE("thermal halt is exit 0") {
  TempDir tmp;
  auto cfg = tmp.path / "hot.cfg";
  std::ofstream(cfg) << "T0=550\nT_max=600\n";
  auto r = run_cli({"scenario", "thermal-runaway", "--config", cfg.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("verdict Halted") != std::string::npos);
}

TEST_CASE("replay and lineage read the persisted store") {
  TempDir tmp;
  auto r = run_cli({"scenario", "cascade", "--seed", "3"});
  REQUIRE(r.code == 0);
  std::string run_id;
  std::istringstream in(r.out);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("run_id ", 0) == 0) run_id = line.substr(7);
  REQUIRE_FALSE(run_id.empty());

  auto rep = run_cli({"replay", run_id});
  CHECK(rep.code == 0);
  CHECK(rep.out == "MATCH\n");

  auto lin = run_cli({"lineage", run_id});
  CHECK(lin.code == 0);
  CHECK(lin.out.find("run_id=" + canon_escape(run_id)) != std::string::npos);

  CHECK(run_cli({"replay", "ghost/1"}).code == cli::kExitUnknownEntity);
  CHECK(run_cli({"lineage", "ghost/1"}).code == cli::kExitUnknownEntity);
  CHECK(run_cli({"replay"}).code == cli::kExitConfig);
}

TEST_CASE("attack: full corpus blocked, table printed, exit 0") {
  TempDir tmp;
  auto r = run_cli({"attack"});
  CHECK(r.code == 0);
  std::istringstream in(r.out);
  std::string line;
  std::size_t blocked = 0, succeeded = 0, total = 0;
  while (std::getline(in, line)) {
    if (line.rfind("blocked", 0) == 0) ++blocked;
    if (line.rfind("succeeded", 0) == 0) ++succeeded;
    if (line.rfind("total ", 0) == 0) total = std::stoul(line.substr(6));
  }
  CHECK(total >= 40);
  CHECK(blocked == total);
  CHECK(succeeded == 0);

  CHECK(run_cli({"attack", "--kernel", "tcp://nowhere:1"}).code ==
        cli::kExitKernelUnreachable);
}

TEST_CASE("rsi: cycle promotes and is reproducible") {
  TempDir tmp;
  auto cfg = tmp.path / "rsi.cfg";
  std::ofstream(cfg) << "generations=25\npopulation=16\n";
  auto out1 = tmp.path / "rsi1.txt";
  auto out2 = tmp.path / "rsi2.txt";
  auto r1 = run_cli({"rsi", "--seed", "5", "--level", "A6", "--config",
                     cfg.string(), "--out", out1.string()});
  CHECK(r1.code == 0);
  CHECK(r1.out.find("gauntlet_approved 1") != std::string::npos);
  CHECK(r1.out.find("canary Promoted") != std::string::npos);

  auto r2 = run_cli({"rsi", "--seed", "5", "--level", "A6", "--config",
                     cfg.string(), "--out", out2.string()});
  CHECK(slurp(out1) == slurp(out2));

  auto low = run_cli({"rsi", "--seed", "5", "--level", "A5", "--config", cfg.string()});
  CHECK(low.code == 0);
  CHECK(low.out.find("gauntlet_approved 0") != std::string::npos);

  CHECK(run_cli({"rsi", "--kernel", "tcp://nowhere:1"}).code ==
        cli::kExitKernelUnreachable);
}

TEST_CASE("bench: metrics within contract") {
  TempDir tmp;
  auto out = tmp.path / "bench.txt";
  auto r = run_cli({"bench", "--out", out.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("activation_fraction 0.125") != std::string::npos);
  std::istringstream in(r.out);
  std::string line;
  double p50 = -1, tick = -1;
  while (std::getline(in, line)) {
    if (line.rfind("solver_p50_ms ", 0) == 0) p50 = std::stod(line.substr(14));
    if (line.rfind("loop_tick_p50_ms ", 0) == 0) tick = std::stod(line.substr(17));
  }
  CHECK(p50 >= 0);
  CHECK(p50 < 1.0);
  CHECK(tick >= 0);
  CHECK(tick < 100.0);
  CHECK(!slurp(out).empty());
}
