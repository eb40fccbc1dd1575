#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <random>
#include <set>

#include "wmr/canonical.hpp"
#include "wmr/lineage.hpp"
#include "wmr/seed.hpp"

using namespace wmr;

TEST_CASE("derive_seed is pure and label-sensitive") {
  CHECK(derive_seed({0}, "a") == derive_seed({0}, "a"));
  CHECK_FALSE(derive_seed({0}, "a") == derive_seed({0}, "b"));
  CHECK_FALSE(derive_seed({0}, "a") == derive_seed({1}, "a"));
  CHECK_THROWS_AS(derive_seed({0}, ""), InvalidLabel);

  // golden constant, captured once from an independent transcription of the
  // pinned hash mix
  CHECK(derive_seed({7}, "rsi/gen0").value == 242740171279239385ULL);
  CHECK(derive_seed({0}, "a").value == 15472264560319405867ULL);
  CHECK(derive_seed({0}, "b").value == 14498678068644030473ULL);
}

TEST_CASE("derive_seed has no global state: interleaving does not matter") {
  auto a1 = derive_seed({42}, "x");
  auto b1 = derive_seed({42}, "y");
  auto a2 = derive_seed({42}, "x");
  auto b2 = derive_seed({42}, "y");
  CHECK(a1 == a2);
  CHECK(b1 == b2);

  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i)
    seen.insert(derive_seed({0}, "label-" + std::to_string(i)).value);
  CHECK(seen.size() == 2000);
}

TEST_CASE("canonical doubles are shortest round-trip") {
  CHECK(canon_double(2.0) == "2");
  CHECK(canon_double(0.1) == "0.1");
  CHECK(canon_double(1.6666666666666667e-4) ==
        canon_double(std::strtod("1.6666666666666667e-4", nullptr)));
  double vals[] = {1.0 / 3.0, 1e300, -2.5e-17, 0.0, 12345.6789};
  for (double v : vals)
    CHECK(std::strtod(canon_double(v).c_str(), nullptr) == v);
}

TEST_CASE("canonical records sort keys and round-trip escapes") {
  std::map<std::string, std::string> kv{{"b", "2"}, {"a", "1"}, {"weird=;\\", "x\ny"}};
  auto line = canon_record(kv);
  CHECK(line.find("a=1") < line.find("b=2"));
  CHECK(parse_record(line) == kv);
}

TEST_CASE("inputs digest is stable under key insertion order") {
  std::map<std::string, double> a{{"x", 1.5}, {"y", 2.0}};
  std::map<std::string, double> b{{"y", 2.0}, {"x", 1.5}};
  CHECK(inputs_digest(a) == inputs_digest(b));
  b["y"] = 2.0000001;
  CHECK(inputs_digest(a) != inputs_digest(b));
}

TEST_CASE("record_run appends, rejects duplicates and unknown parents") {
  LineageStore store;
  RunRecord r;
  r.run_id = "r1";
  r.seed = {1};
  r.inputs_digest = inputs_digest({{"x", 1.0}});
  r.outputs = {3.14};
  store.record_run(r);
  CHECK(store.run_count() == 1);
  CHECK_THROWS_AS(store.record_run(r), DuplicateRun);

  RunRecord bad;
  bad.run_id = "r2";
  bad.parent_run = "nope";
  bad.outputs = {1.0};
  CHECK_THROWS_AS(store.record_run(bad), UnknownParent);

  RunRecord child;
  child.run_id = "r2";
  child.parent_run = "r1";
  child.outputs = {1.0};
  store.record_run(child);
  auto chain = store.lineage_chain("r2");
  REQUIRE(chain.size() == 2);
  CHECK(chain[0].run_id == "r2");
  CHECK(chain[1].run_id == "r1");
}

TEST_CASE("timestamps are logical and monotone") {
  LineageStore store;
  for (int i = 0; i < 5; ++i) {
    RunRecord r;
    r.run_id = "r" + std::to_string(i);
    r.outputs = {double(i)};
    store.record_run(r);
  }
  std::uint64_t last = 0;
  for (const auto& id : store.run_ids_in_order()) {
    auto rec = store.get_run(id);
    CHECK(rec.timestamp >= last);
    last = rec.timestamp + 1;
  }
}

TEST_CASE("outcome records must reference existing runs") {
  LineageStore store;
  RunRecord r;
  r.run_id = "r1";
  r.outputs = {1.0};
  store.record_run(r);
  store.record_outcome({"r1", "accuracy", 0.99, true});
  CHECK(store.outcomes().size() == 1);
  CHECK_THROWS_AS(store.record_outcome({"zzz", "m", 0, false}), UnknownRun);
}

TEST_CASE("lineage file round-trips with fixed field order") {
  LineageStore store;
  RunRecord r;
  r.run_id = "run/1";
  r.seed = {12345};
  r.inputs_digest = store.put_inputs({{"F", 100.0}, {"L", 2.0}});
  r.model_versions = {{"beam_deflection", 1}};
  r.outputs = {1.6666666666666667e-4};
  store.record_run(r);

  auto line = LineageStore::format_line(store.get_run("run/1"));
  CHECK(line.rfind("run_id=", 0) == 0);
  CHECK(line.find("parent_run=") < line.find("seed="));
  CHECK(line.find("seed=") < line.find("inputs_digest="));
  CHECK(line.find("model_versions=") < line.find("outputs="));
  CHECK(line.find("outputs=") < line.find("timestamp="));

  const std::string path = "/tmp/wmr_test_lineage.jsonl";
  store.save(path);
  LineageStore loaded;
  loaded.load(path);
  auto rec = loaded.get_run("run/1");
  CHECK(rec.seed.value == 12345);
  CHECK(rec.model_versions.at("beam_deflection") == 1);
  CHECK(rec.outputs == std::vector<double>{1.6666666666666667e-4});
  CHECK(loaded.get_inputs(rec.inputs_digest).at("F") == 100.0);
  std::remove(path.c_str());
  std::remove((path + ".inputs").c_str());
}

TEST_CASE("line format round-trip property") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    RunRecord r;
    r.run_id = "id-" + std::to_string(rng() % 100000);
    if (rng() % 2) r.parent_run = "parent-" + std::to_string(rng() % 100);
    r.seed = {rng()};
    r.inputs_digest = sha256_hex(std::to_string(rng()));
    r.model_versions = {{"m" + std::to_string(rng() % 10), rng() % 1000}};
    int n = 1 + int(rng() % 5);
    for (int j = 0; j < n; ++j)
      r.outputs.push_back(std::uniform_real_distribution<double>(-1e6, 1e6)(rng));
    r.timestamp = rng() % 100000;
    auto back = LineageStore::parse_line(LineageStore::format_line(r));
    CHECK(back.run_id == r.run_id);
    CHECK(back.parent_run == r.parent_run);
    CHECK(back.seed.value == r.seed.value);
    CHECK(back.inputs_digest == r.inputs_digest);
    CHECK(back.model_versions == r.model_versions);
    CHECK(back.outputs == r.outputs);
    CHECK(back.timestamp == r.timestamp);
  }
}
