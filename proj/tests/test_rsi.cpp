#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "wmr/rsi.hpp"

using namespace wmr;

namespace {

// beam with fixed geometry: deflection is linear in F, so a one-weight
// linear model can match the solver exactly
constexpr double kL = 2.0, kE = 200e9, kI = 8e-6;
const double kTrueW0 = kL * kL * kL / (3.0 * kE * kI);

std::vector<EvalPoint> beam_eval_set(int n = 20) {
  std::vector<EvalPoint> pts;
  for (int i = 0; i < n; ++i) {
    double F = 50.0 + i * 5.0;
    pts.push_back({{{"F", F}, {"L", kL}, {"E", kE}, {"I", kI}}, {{"x0", F}}});
  }
  return pts;
}

struct Fix {
  World world = World::create();
  KernelService kernel{Seed{99}, "op-secret"};
  Gauntlet gauntlet{world, kernel, Autonomy::A6};

  Fix(double w0_factor = 1.1) {
    NanoModelSpec spec;
    spec.model_id = "beam_lin";
    spec.architecture_class = ArchClass::LinearModel;
    spec.glassbox = true;
    spec.cdai = true;
    spec.param_count = kParamCountLo;
    ModelArtifact art;
    art.spec = spec;
    art.parameters.assign(kParamCountLo, 0.0);
    art.parameters[0] = kTrueW0 * w0_factor;  // seeded off the solver coefficient
    world.registry->register_model(spec, art);
    world.envelopes["beam_lin"] = Envelope{"beam_deflection", 0.02};
  }

  Genome prod_genome() {
    auto art = world.registry->get_artifact("beam_lin",
                                            world.registry->latest_version("beam_lin"));
    Genome g;
    g.target_model = "beam_lin";
    g.values = {art.parameters[0], 0.0};
    g.bounds = {{0.0, kTrueW0 * 3}, {-1e-6, 1e-6}};
    return g;
  }
};

}  // namespace

TEST_CASE("propose: size, determinism, elitism, bounds") {
  Fix f;
  Individual seed;
  seed.id = "seed";
  seed.genome = f.prod_genome();
  seed.fitness = -0.1;
  Individual other;
  other.id = "other";
  other.genome = seed.genome;
  other.genome.values[0] *= 0.5;
  other.fitness = -0.4;
  std::vector<Individual> archive{other, seed};

  auto c1 = propose(archive, 30, Seed{7});
  auto c2 = propose(archive, 30, Seed{7});
  REQUIRE(c1.size() == 30);
  // determinism
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(c1[i].genome.values == c2[i].genome.values);
    CHECK(c1[i].parents == c2[i].parents);
  }
  // elite: ceil(10% of 30) = 3 slots, filled by the fitness-ranked archive
  CHECK(c1[0].parents == std::vector<std::string>{"seed"});
  CHECK(c1[0].genome.values == seed.genome.values);
  CHECK(c1[1].parents == std::vector<std::string>{"other"});
  CHECK(c1[1].genome.values == other.genome.values);
  CHECK(c1[2].parents.size() == 2);  // archive exhausted, crossover takes over
  // bounds preserved everywhere
  for (const auto& ind : c1) CHECK(ind.genome.within_bounds());

  auto c3 = propose(archive, 30, Seed{8});
  bool any_diff = false;
  for (std::size_t i = 0; i < 30; ++i)
    if (c3[i].genome.values != c1[i].genome.values) any_diff = true;
  CHECK(any_diff);

  CHECK_THROWS_AS(propose({}, 30, Seed{1}), EmptyArchive);
}

TEST_CASE("mutation of an at-bound gene stays within bounds") {
  Fix f;
  Individual seed;
  seed.id = "s";
  seed.genome = f.prod_genome();
  seed.genome.values[0] = seed.genome.bounds[0].second;  // at the hi bound
  seed.fitness = 0.0;
  for (int s = 0; s < 20; ++s) {
    auto cands = propose({seed}, 30, Seed{std::uint64_t(s)});
    for (const auto& c : cands) CHECK(c.genome.within_bounds());
  }
}

TEST_CASE("evaluate fitness semantics") {
  Fix f;
  auto pts = beam_eval_set();

  Genome perfect = f.prod_genome();
  perfect.values[0] = kTrueW0;
  CHECK_THAT(evaluate(perfect, pts, *f.world.registry, "beam_deflection"),
             Catch::Matchers::WithinAbs(0.0, 1e-12));

  Genome doubled = perfect;
  doubled.values[0] = 2 * kTrueW0;
  CHECK_THAT(evaluate(doubled, pts, *f.world.registry, "beam_deflection"),
             Catch::Matchers::WithinAbs(-1.0, 1e-12));

  SECTION("matches an independent 3-point error loop") {
    std::vector<EvalPoint> three(pts.begin(), pts.begin() + 3);
    Genome g = perfect;
    g.values[0] = kTrueW0 * 1.07;
    double acc = 0;
    for (const auto& pt : three) {
      double truth = pt.solver_inputs.at("F") * kTrueW0;
      double pred = g.values[0] * pt.model_inputs.at("x0");
      acc += std::abs(pred - truth) / truth;
    }
    CHECK_THAT(evaluate(g, three, *f.world.registry, "beam_deflection"),
               Catch::Matchers::WithinRel(-acc / 3.0, 1e-9));
  }

  SECTION("domain errors skip points; all-skipped throws") {
    auto bad = pts;
    bad[0].solver_inputs["L"] = -1.0;  // solver rejects
    std::size_t skipped = 0;
    evaluate(perfect, bad, *f.world.registry, "beam_deflection", &skipped);
    CHECK(skipped == 1);

    std::vector<EvalPoint> all_bad{bad[0]};
    CHECK_THROWS_AS(evaluate(perfect, all_bad, *f.world.registry, "beam_deflection"),
                    NoValidPoints);
    CHECK_THROWS_AS(evaluate(perfect, {}, *f.world.registry, "beam_deflection"),
                    NoValidPoints);
  }
}

TEST_CASE("ucb1 selection") {
  SECTION("golden two-arm example") {
    std::vector<Trajectory> ts(2);
    ts[0] = {"a", 1, 0.5, true, {}};
    ts[1] = {"b", 1, 0.4, true, {}};
    // scores 0.5 + sqrt(2 ln2) = 1.677 vs 0.4 + 1.177... = 1.577
    CHECK(ucb1_select(ts) == "a");
  }
  SECTION("unpulled arm first, lexicographic among unpulled") {
    std::vector<Trajectory> ts(3);
    ts[0] = {"z", 5, 0.9, true, {}};
    ts[1] = {"m", 0, 0, true, {}};
    ts[2] = {"c", 0, 0, true, {}};
    CHECK(ucb1_select(ts) == "c");
  }
  SECTION("equal stats tie-break") {
    std::vector<Trajectory> ts(2);
    ts[0] = {"beta", 3, 0.5, true, {}};
    ts[1] = {"alpha", 3, 0.5, true, {}};
    CHECK(ucb1_select(ts) == "alpha");
  }
  SECTION("inactive arms invisible") {
    std::vector<Trajectory> ts(2);
    ts[0] = {"a", 0, 0, false, {}};
    ts[1] = {"b", 2, 0.1, true, {}};
    CHECK(ucb1_select(ts) == "b");
    ts[1].active = false;
    CHECK_THROWS_AS(ucb1_select(ts), NoTrajectories);
  }
}

TEST_CASE("ucb1 bandit: best arm dominates") {
  // 3-armed Bernoulli bandit 0.9 / 0.5 / 0.1
  std::mt19937_64 rng(424242);
  std::vector<Trajectory> ts(3);
  ts[0] = {"arm0", 0, 0, true, {}};
  ts[1] = {"arm1", 0, 0, true, {}};
  ts[2] = {"arm2", 0, 0, true, {}};
  const double p[] = {0.9, 0.5, 0.1};
  std::uniform_real_distribution<double> unit(0, 1);
  std::map<std::string, int> pulls;
  for (int i = 0; i < 10'000; ++i) {
    auto id = ucb1_select(ts);
    ++pulls[id];
    for (auto& t : ts) {
      if (t.trajectory_id != id) continue;
      double reward = unit(rng) < p[&t - ts.data()] ? 1.0 : 0.0;
      ++t.pulls;
      t.mean_reward += (reward - t.mean_reward) / double(t.pulls);
    }
  }
  CHECK(pulls["arm0"] > 5'000);
}

TEST_CASE("stop-loss") {
  Trajectory t{"t", 0, 0, true, {}};
  for (int i = 0; i < 9; ++i) {
    t.best_history.push_back(-0.5);
    ++t.pulls;
    CHECK(stop_loss(t));
  }
  t.best_history.push_back(-0.5);  // 10th flat pull
  ++t.pulls;
  CHECK_FALSE(stop_loss(t));
  CHECK_FALSE(t.active);

  Trajectory improving{"i", 0, 0, true, {}};
  for (int i = 0; i < 9; ++i) improving.best_history.push_back(-0.5);
  improving.best_history.push_back(-0.5 + 1e-3);
  CHECK(stop_loss(improving));
  CHECK(improving.active);

  // permanence
  t.best_history.push_back(10.0);
  CHECK_FALSE(stop_loss(t));
}

TEST_CASE("canary routing is a pure function") {
  auto d = inputs_digest({{"x0", 100.0}});
  for (int i = 0; i < 5; ++i)
    CHECK(canary_routes_to_candidate(d, 1, 0.5) ==
          canary_routes_to_candidate(d, 1, 0.5));
  // fraction 1.0 routes everything
  for (int i = 0; i < 50; ++i)
    CHECK(canary_routes_to_candidate(inputs_digest({{"x0", double(i)}}), 2, 1.0));
  // measured fraction near epsilon
  int hits = 0;
  for (int i = 0; i < 2000; ++i)
    hits += canary_routes_to_candidate(inputs_digest({{"x0", double(i)}}), 0, 0.1);
  CHECK(hits > 100);
  CHECK(hits < 320);
}

TEST_CASE("canary: promote equal candidate, roll back degraded one") {
  auto approval_for = [](Fix& f, const Genome& g) {
    Proposal p;
    p.proposal_id = "canary-prop";
    p.kind = ProposalKind::ParamChange;
    p.target = "beam_lin";
    p.payload["p0"] = canon_double(g.values[0]);
    auto r = f.gauntlet.run_gauntlet(p);
    REQUIRE(r.approved);
    return r.approval_id;
  };

  SECTION("equal-accuracy candidate promoted after full schedule") {
    Fix f;
    Genome cand = f.prod_genome();  // identical to production
    auto id = approval_for(f, cand);
    auto prod_v = f.world.registry->latest_version("beam_lin");
    auto rep = apply_canary(f.world, f.gauntlet, f.kernel, cand, "beam_deflection",
                            beam_eval_set(), id);
    CHECK(rep.outcome == CanaryOutcome::Promoted);
    CHECK(rep.fractions_run == std::vector<double>{0.1, 0.5, 1.0});
    REQUIRE(rep.new_version.has_value());
    CHECK(*rep.new_version > prod_v);
    // old version retained for replay
    CHECK_NOTHROW(f.world.registry->get_artifact("beam_lin", prod_v));
  }

  SECTION("+10% error candidate rolled back in window 1") {
    Fix f;
    Genome bad = f.prod_genome();
    bad.values[0] *= 1.1 / 1.1 * 1.21;  // push error well past baseline + 2%
    auto id = approval_for(f, bad);
    auto digest_before = f.world.digest();
    auto rep = apply_canary(f.world, f.gauntlet, f.kernel, bad, "beam_deflection",
                            beam_eval_set(100), id);
    CHECK(rep.outcome == CanaryOutcome::RolledBack);
    CHECK(rep.fractions_run.size() == 1);
    CHECK(f.world.digest() == digest_before);
  }

  SECTION("approval ids are single use and mandatory") {
    Fix f;
    Genome cand = f.prod_genome();
    auto id = approval_for(f, cand);
    apply_canary(f.world, f.gauntlet, f.kernel, cand, "beam_deflection",
                 beam_eval_set(), id);
    CHECK_THROWS_AS(apply_canary(f.world, f.gauntlet, f.kernel, cand,
                                 "beam_deflection", beam_eval_set(), id),
                    Unauthorized);
    CHECK_THROWS_AS(apply_canary(f.world, f.gauntlet, f.kernel, cand,
                                 "beam_deflection", beam_eval_set(), "fabricated"),
                    Unauthorized);
  }
}

TEST_CASE("rsi_cycle: improvement, monotonicity, fail-closed, determinism") {
  RsiConfig cfg;
  cfg.target_model = "beam_lin";
  cfg.solver = "beam_deflection";
  cfg.generations = 40;
  cfg.population = 20;
  cfg.eval_set = beam_eval_set();

  Fix f;
  std::vector<Trajectory> ts{{"main", 0, 0, true, {}}};
  auto report = rsi_cycle(f.world, f.gauntlet, f.kernel, ts, cfg, Seed{5});

  CHECK(report.trajectory_id == "main");
  CHECK(report.final_best >= report.initial_best);
  for (std::size_t i = 1; i < report.best_per_generation.size(); ++i)
    CHECK(report.best_per_generation[i] >= report.best_per_generation[i - 1]);
  CHECK(report.gauntlet_approved);
  REQUIRE(report.canary.has_value());
  CHECK(*report.canary == CanaryOutcome::Promoted);
  CHECK(ts[0].pulls == 1);

  SECTION("same seed on a fresh world reproduces the trace") {
    Fix f2;
    Gauntlet g2{f2.world, f2.kernel, Autonomy::A6};
    std::vector<Trajectory> ts2{{"main", 0, 0, true, {}}};
    auto r2 = rsi_cycle(f2.world, g2, f2.kernel, ts2, cfg, Seed{5});
    CHECK(r2.best_per_generation == report.best_per_generation);
    CHECK(r2.final_best == report.final_best);
  }

  SECTION("gauntlet rejection means no canary and no production change") {
    Fix f3;
    // a gauntlet below required autonomy rejects at stage 3
    Gauntlet g5{f3.world, f3.kernel, Autonomy::A5};
    std::vector<Trajectory> ts3{{"main", 0, 0, true, {}}};
    auto before = f3.world.digest();
    auto r3 = rsi_cycle(f3.world, g5, f3.kernel, ts3, cfg, Seed{5});
    CHECK_FALSE(r3.gauntlet_approved);
    CHECK_FALSE(r3.canary.has_value());
    CHECK(f3.world.digest() == before);
  }
}
