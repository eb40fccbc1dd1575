#include <catch2/catch_amalgamated.hpp>

#include "wmr/aara.hpp"

using namespace wmr;

namespace {

struct Fixture {
  World world = World::create(true);
  KernelService kernel{Seed{0xDAE40}, "operator-secret"};
  BeliefNetwork beliefs;

  Fixture() {
    world.graph.add_node({"plant/heater", NodeKind::Entity, 0.1});
    world.graph.add_node({"plant/temp", NodeKind::Entity, 300.0});
    world.graph.add_node({"plant/output", NodeKind::Entity, 10.0});
    world.graph.add_edge({"plant/heater", "plant/temp", EdgeRelation::Dependency, 100.0});
    world.graph.add_edge({"plant/heater", "plant/output", EdgeRelation::Dependency, 20.0});
    world.constraints->add_constraint(
        {"max-temp", Severity::INVIOLABLE, {"plant/temp"},
         [](const std::map<std::string, double>& s) { return s.at("plant/temp") <= 400.0; },
         "temperature ceiling"});
  }

  Policy cool_policy() {
    Policy p;
    p.policy_id = "cool";
    p.event_pattern = "sensor/";
    p.belief_id = "cool-works";
    p.target_node = "plant/heater";
    p.magnitude = 1.0;  // temp 100, well under the ceiling
    p.objective_node = "plant/output";
    return p;
  }

  Policy overheat_policy() {
    Policy p;
    p.policy_id = "overheat";
    p.event_pattern = "sensor/";
    p.belief_id = "overheat-works";
    p.target_node = "plant/heater";
    p.magnitude = 5.0;  // temp 500: predicted post-state violates max-temp
    p.objective_node = "plant/output";
    return p;
  }

  Event sensor_event(const std::string& id = "sensor/t1") {
    return {id, EventSource::Synthetic, sha256_hex(id), 0};
  }
};

}  // namespace

TEST_CASE("sense drains in arrival order under budget") {
  Fixture f;
  Daemon d(f.world, f.kernel, f.beliefs, Autonomy::A1);
  for (int i = 0; i < 5; ++i)
    d.push_event({"e" + std::to_string(i), EventSource::Schedule, "", 0});
  auto batch = d.sense(3);
  REQUIRE(batch.size() == 3);
  CHECK(batch[0].event_id == "e0");
  CHECK(batch[2].event_id == "e2");
  CHECK(d.sense(10).size() == 2);
  CHECK(d.sense(10).empty());
}

TEST_CASE("safety filter: predicted violators never enter the plan") {
  Fixture f;
  Daemon d(f.world, f.kernel, f.beliefs, Autonomy::A5);
  d.add_policy(f.cool_policy());
  d.add_policy(f.overheat_policy());

  auto plan = d.decide({f.sensor_event()});
  REQUIRE(plan.actions.size() == 1);
  CHECK(plan.actions[0].policy_id == "cool");
  CHECK(plan.actions[0].predicted_verdict != Verdict::Halted);
}

TEST_CASE("plan ranks by belief-weighted utility") {
  Fixture f;
  f.world.graph.add_node({"a", NodeKind::Entity, 0.0});
  f.world.graph.add_node({"obj_a", NodeKind::Entity, 0.0});
  f.world.graph.add_edge({"a", "obj_a", EdgeRelation::Dependency, 1.0});
  f.world.graph.add_node({"b", NodeKind::Entity, 0.0});
  f.world.graph.add_node({"obj_b", NodeKind::Entity, 0.0});
  f.world.graph.add_edge({"b", "obj_b", EdgeRelation::Dependency, 1.0});

  // means 0.9 and 0.4 via conjugate counts
  for (int i = 0; i < 8; ++i) f.beliefs.update({"bel-hi", true, 1.0});
  f.beliefs.update({"bel-lo", true, 1.0});
  f.beliefs.update({"bel-lo", false, 2.0});

  Daemon d(f.world, f.kernel, f.beliefs, Autonomy::A5);
  Policy lo;
  lo.policy_id = "lo";
  lo.event_pattern = "sensor/";
  lo.belief_id = "bel-lo";
  lo.target_node = "b";
  lo.magnitude = 1.0;
  lo.objective_node = "obj_b";
  d.add_policy(lo);
  Policy hi = lo;
  hi.policy_id = "hi";
  hi.belief_id = "bel-hi";
  hi.target_node = "a";
  hi.objective_node = "obj_a";
  d.add_policy(hi);

  auto plan = d.decide({f.sensor_event()});
  REQUIRE(plan.actions.size() == 2);
  CHECK(plan.actions[0].policy_id == "hi");
  CHECK_THAT(plan.actions[0].predicted_utility, Catch::Matchers::WithinAbs(0.9, 1e-12));
  CHECK_THAT(plan.actions[1].predicted_utility, Catch::Matchers::WithinAbs(0.4, 1e-12));
}

TEST_CASE("unknown beliefs rank at the uniform prior mean") {
  Fixture f;
  Daemon d(f.world, f.kernel, f.beliefs, Autonomy::A5);
  d.add_policy(f.cool_policy());
  auto plan = d.decide({f.sensor_event()});
  REQUIRE(plan.actions.size() == 1);
  // improvement (20 - 10) x prior mean 0.5
  CHECK_THAT(plan.actions[0].predicted_utility, Catch::Matchers::WithinAbs(5.0, 1e-12));
}

TEST_CASE("A2: nonempty plan, zero state changes") {
  Fixture f;
  Daemon d(f.world, f.kernel, f.beliefs, Autonomy::A2);
  d.add_policy(f.cool_policy());

  std::string before = f.world.graph.state_digest();
  auto plan = d.decide({f.sensor_event()});
  REQUIRE_FALSE(plan.actions.empty());
  auto receipts = d.act(plan);
  REQUIRE(receipts.size() == 1);
  CHECK_FALSE(receipts[0].executed);
  CHECK(receipts[0].detail == "proposal");
  CHECK(f.world.graph.state_digest() == before);
  CHECK(KernelClient(f.kernel).health().issued == 0);

  // the proposal itself is on the record
  bool logged = false;
  for (const auto& oc : f.world.lineage->outcomes())
    if (oc.metric_name == "plan:proposal:cool") logged = true;
  CHECK(logged);
}

TEST_CASE("A1 logs only") {
  Fixture f;
  Daemon d(f.world, f.kernel, f.beliefs, Autonomy::A1);
  d.add_policy(f.cool_policy());
  auto receipts = d.act(d.decide({f.sensor_event()}));
  REQUIRE(receipts.size() == 1);
  CHECK_FALSE(receipts[0].executed);
  CHECK(receipts[0].detail == "logged");
  CHECK(KernelClient(f.kernel).health().issued == 0);
}

TEST_CASE("A3 executes only operator-approved actions") {
  Fixture f;
  Daemon d(f.world, f.kernel, f.beliefs, Autonomy::A3);
  auto unapproved = f.cool_policy();
  auto approved = f.cool_policy();
  approved.policy_id = "cool-approved";
  approved.operator_approved = true;
  d.add_policy(unapproved);
  d.add_policy(approved);

  auto receipts = d.act(d.decide({f.sensor_event()}));
  REQUIRE(receipts.size() == 2);
  int executed = 0;
  for (const auto& r : receipts) {
    if (r.executed) {
      ++executed;
      CHECK(r.policy_id == "cool-approved");
    } else {
      CHECK(r.detail == "awaiting operator approval");
    }
  }
  CHECK(executed == 1);
}

TEST_CASE("A4: one action yields one execution and one notification record") {
  Fixture f;
  Daemon d(f.world, f.kernel, f.beliefs, Autonomy::A4);
  d.add_policy(f.cool_policy());

  auto receipts = d.act(d.decide({f.sensor_event()}));
  REQUIRE(receipts.size() == 1);
  CHECK(receipts[0].executed);
  CHECK(f.world.graph.node("plant/output").value == 20.0);
  CHECK(f.world.graph.node("plant/temp").value == 100.0);

  int notifications = 0;
  for (const auto& oc : f.world.lineage->outcomes())
    if (oc.metric_name.rfind("notification:", 0) == 0) ++notifications;
  CHECK(notifications == 1);
  CHECK(KernelClient(f.kernel).health().issued == 1);
}

TEST_CASE("emergency: every receipt is a denial, nothing executes") {
  Fixture f;
  Daemon d(f.world, f.kernel, f.beliefs, Autonomy::A5);
  d.add_policy(f.cool_policy());
  auto plan = d.decide({f.sensor_event()});
  REQUIRE_FALSE(plan.actions.empty());

  KernelClient(f.kernel).emergency_stop();
  std::string before = f.world.graph.state_digest();
  auto receipts = d.act(plan);
  for (const auto& r : receipts) {
    CHECK_FALSE(r.executed);
    CHECK(r.detail == "denied: emergency");
  }
  CHECK(f.world.graph.state_digest() == before);
}

TEST_CASE("learn: accurate prediction raises belief, gap lowers it") {
  Fixture f;
  Daemon d(f.world, f.kernel, f.beliefs, Autonomy::A5);
  d.add_policy(f.cool_policy());

  auto receipts = d.act(d.decide({f.sensor_event()}));
  REQUIRE(receipts.size() == 1);
  REQUIRE(receipts[0].executed);

  SECTION("exact prediction is a success") {
    auto s = d.learn(receipts);
    CHECK(s.successes == 1);
    CHECK(s.failures == 0);
    CHECK(s.knowledge_gaps.empty());
    CHECK(f.beliefs.query("cool-works").mean > 0.5);
  }

  SECTION("prediction off by more than twice the envelope tolerance is a gap") {
    auto bad = receipts;
    bad[0].predicted_objective *= 3.0;
    auto s = d.learn(bad);
    CHECK(s.successes == 0);
    CHECK(s.failures == 1);
    REQUIRE(s.knowledge_gaps.size() == 1);
    CHECK(s.knowledge_gaps[0] == "cool");
    CHECK(f.beliefs.query("cool-works").mean < 0.5);
  }

  SECTION("error just inside twice the tolerance still counts as success") {
    auto near = receipts;
    double actual = *f.world.graph.node("plant/output").value;
    near[0].predicted_objective = actual * (1.0 + 2.0 * Envelope{}.tolerance_rel - 1e-9);
    auto s = d.learn(near);
    CHECK(s.successes == 1);
  }

  SECTION("receipt for an unknown run is rejected") {
    auto forged = receipts;
    forged[0].run_id = "nope/123";
    CHECK_THROWS_AS(d.learn(forged), DanglingReceipt);
  }
}

TEST_CASE("autonomy ladder: executed actions are monotone in level") {
  std::size_t prev = 0;
  for (auto level : {Autonomy::A1, Autonomy::A2, Autonomy::A3, Autonomy::A4,
                     Autonomy::A5}) {
    Fixture f;
    Daemon d(f.world, f.kernel, f.beliefs, level);
    d.add_policy(f.cool_policy());
    auto receipts = d.act(d.decide({f.sensor_event()}));
    std::size_t executed = 0;
    for (const auto& r : receipts) executed += r.executed;
    CHECK(executed >= prev);
    prev = executed;
  }
  CHECK(prev == 1);
}

TEST_CASE("every execution is token-mediated") {
  Fixture f;
  Daemon d(f.world, f.kernel, f.beliefs, Autonomy::A5);
  d.add_policy(f.cool_policy());
  std::vector<ActReceipt> all;
  for (int i = 0; i < 4; ++i) {
    auto r = d.act(d.decide({f.sensor_event("sensor/e" + std::to_string(i))}));
    all.insert(all.end(), r.begin(), r.end());
  }
  std::size_t executed = 0;
  for (const auto& r : all) {
    if (!r.executed) continue;
    ++executed;
    CHECK(f.world.lineage->has_run(r.run_id));
  }
  CHECK(executed == 4);
  CHECK(KernelClient(f.kernel).health().issued == executed);
}

TEST_CASE("autonomy level changes require a verified token") {
  Fixture f;
  Daemon d(f.world, f.kernel, f.beliefs, Autonomy::A2);
  KernelClient client(f.kernel);

  auto good = client.authorize(d.autonomy_descriptor(Autonomy::A4));
  REQUIRE(good.authorized());
  CHECK(d.set_autonomy(Autonomy::A4, *good.token));
  CHECK(d.level() == Autonomy::A4);

  // token minted for a different transition does not carry over
  auto stale = client.authorize(d.autonomy_descriptor(Autonomy::A5));
  REQUIRE(stale.authorized());
  CHECK_FALSE(d.set_autonomy(Autonomy::A6, *stale.token));
  CHECK(d.level() == Autonomy::A4);
}

TEST_CASE("run_loop: deterministic, bounded latency, emergency truncation") {
  auto gen = [](std::uint64_t tick, Seed seed) {
    std::vector<Event> out;
    out.push_back({"sensor/s" + canon_u64(tick), EventSource::Synthetic,
                   sha256_hex(canon_u64(seed.value) + "|" + canon_u64(tick)), tick});
    return out;
  };

  auto run_once = [&](std::uint64_t ticks) {
    Fixture f;
    Daemon d(f.world, f.kernel, f.beliefs, Autonomy::A5);
    d.add_policy(f.cool_policy());
    d.add_policy(f.overheat_policy());
    return d.run_loop(ticks, Seed{42}, gen);
  };

  auto a = run_once(25);
  auto b = run_once(25);
  REQUIRE(a.ticks.size() == 25);
  CHECK(a.digest() == b.digest());
  for (const auto& t : a.ticks) CHECK(t.latency_ms < 100.0);

  SECTION("emergency stops the loop and snapshots state") {
    Fixture f;
    Daemon d(f.world, f.kernel, f.beliefs, Autonomy::A5);
    d.add_policy(f.cool_policy());
    d.run_loop(3, Seed{42}, gen);
    KernelClient(f.kernel).emergency_stop();
    auto r = d.run_loop(10, Seed{42}, gen);
    CHECK(r.stopped_by_emergency);
    CHECK(r.ticks.empty());
    bool snap = false;
    for (const auto& oc : f.world.lineage->outcomes())
      if (oc.metric_name == "snapshot:emergency") snap = true;
    CHECK(snap);
  }
}

TEST_CASE("post-state safety audit over a sustained run") {
  Fixture f;
  Daemon d(f.world, f.kernel, f.beliefs, Autonomy::A5);
  d.add_policy(f.cool_policy());
  d.add_policy(f.overheat_policy());
  auto gen = [](std::uint64_t tick, Seed) {
    return std::vector<Event>{
        {"sensor/s" + canon_u64(tick), EventSource::Synthetic, "", tick}};
  };
  auto report = d.run_loop(200, Seed{7}, gen);
  REQUIRE(report.ticks.size() == 200);

  // audit from lineage: every executed post-state satisfies every
  // safety-critical constraint
  std::size_t audited = 0;
  for (const auto& id : f.world.lineage->run_ids_in_order()) {
    if (id.rfind("aara/cool", 0) != 0 && id.rfind("aara/overheat", 0) != 0) continue;
    auto run = f.world.lineage->get_run(id);
    auto post = f.world.lineage->get_inputs(run.inputs_digest);
    if (post.count("plant/temp")) {
      CHECK(post.at("plant/temp") <= 400.0);
      ++audited;
    }
  }
  CHECK(audited == 200);  // cool executed every tick, overheat never
}
