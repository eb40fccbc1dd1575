#pragma once

#include <algorithm>
#include <chrono>
#include <random>
#include <string>
#include <vector>

#include "wmr/aara.hpp"
#include "wmr/world.hpp"

namespace wmr {

struct BenchReport {
  double solver_p50_ms = 0;
  double solver_p99_ms = 0;
  double belief_updates_per_s = 0;
  double activation_fraction = 0;
  double train_nano_s = 0;
  double loop_tick_p50_ms = 0;

  std::string canonical() const {
    return canon_record({{"activation_fraction", canon_double(activation_fraction)},
                         {"belief_updates_per_s", canon_double(belief_updates_per_s)},
                         {"loop_tick_p50_ms", canon_double(loop_tick_p50_ms)},
                         {"solver_p50_ms", canon_double(solver_p50_ms)},
                         {"solver_p99_ms", canon_double(solver_p99_ms)},
                         {"train_nano_s", canon_double(train_nano_s)}});
  }
};

namespace detail {

inline double percentile(std::vector<double> xs, double p) {
  std::sort(xs.begin(), xs.end());
  if (xs.empty()) return 0;
  std::size_t i = std::size_t(p * double(xs.size() - 1));
  return xs[i];
}

}  // namespace detail

// Builds the reference sparse-activation graph: 8 independent chains of 5
// model nodes (40 models), so one chain tip activates exactly 5 of 40.
inline ContextGraph golden_activation_graph() {
  ContextGraph g;
  for (int c = 0; c < 8; ++c)
    for (int i = 0; i < 5; ++i) {
      ContextNode n;
      n.node_id = "chain" + std::to_string(c) + "/n" + std::to_string(i);
      n.kind = NodeKind::Model;
      n.bound_model = "m";
      g.add_node(n);
      if (i > 0)
        g.add_edge({"chain" + std::to_string(c) + "/n" + std::to_string(i - 1),
                    n.node_id});
    }
  return g;
}

inline BenchReport run_bench(std::size_t solver_iters = 2000,
                             std::size_t belief_n = 100'000,
                             std::size_t train_rows = 50'000,
                             std::size_t train_features = 200,
                             std::uint64_t loop_ticks = 50) {
  BenchReport rep;
  World world = World::create(true);

  {
    std::vector<double> lat;
    lat.reserve(solver_iters);
    auto version = world.registry->latest_version("beam_deflection");
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> fdist(100, 10'000);
    for (std::size_t i = 0; i < solver_iters; ++i) {
      std::map<std::string, double> in{
          {"F", fdist(rng)}, {"L", 2.0}, {"E", 200e9}, {"I", 8e-6}};
      auto t0 = std::chrono::steady_clock::now();
      world.registry->invoke("beam_deflection", version, in, Seed{0}, nullptr, false);
      lat.push_back(std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count());
    }
    rep.solver_p50_ms = detail::percentile(lat, 0.50);
    rep.solver_p99_ms = detail::percentile(lat, 0.99);
  }

  {
    BeliefNetwork bn;
    std::mt19937_64 rng(2);
    std::vector<Evidence> batch;
    batch.reserve(belief_n);
    for (std::size_t i = 0; i < belief_n; ++i)
      batch.push_back({"b" + std::to_string(rng() % belief_n), bool(rng() % 2), 1.0});
    auto t0 = std::chrono::steady_clock::now();
    bn.batch_update(batch);
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.belief_updates_per_s = double(belief_n) / secs;
  }

  rep.activation_fraction = golden_activation_graph().activate({"chain3/n4"}).fraction;

  {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> xdist(-1, 1);
    Dataset ds;
    ds.num_features = train_features;
    for (std::size_t i = 0; i < train_rows; ++i) {
      std::vector<std::pair<std::uint32_t, double>> row;
      double y = 0.5;
      for (int k = 0; k < 5; ++k) {
        std::uint32_t j = std::uint32_t(rng() % train_features);
        double v = xdist(rng);
        row.push_back({j, v});
        y += double(j % 7) * v;
      }
      ds.rows.push_back(std::move(row));
      ds.targets.push_back(y);
    }
    auto t0 = std::chrono::steady_clock::now();
    train_nano(ds, "bench_model", Seed{3});
    rep.train_nano_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  {
    world.graph.add_node({"plant/heater", NodeKind::Entity, 0.1});
    world.graph.add_node({"plant/temp", NodeKind::Entity, 300.0});
    world.graph.add_edge({"plant/heater", "plant/temp", EdgeRelation::Dependency, 100.0});
    world.constraints->add_constraint(
        {"bench/max-temp", Severity::INVIOLABLE, {"plant/temp"},
         [](const std::map<std::string, double>& s) { return s.at("plant/temp") <= 400.0; },
         "temperature ceiling"});
    KernelService kernel(Seed{0xBE7C4}, "bench-credential");
    BeliefNetwork beliefs;
    Daemon daemon(world, kernel, beliefs, Autonomy::A5);
    Policy p;
    p.policy_id = "bench";
    p.event_pattern = "tick/";
    p.belief_id = "bench-works";
    p.target_node = "plant/heater";
    p.magnitude = 1.0;
    p.objective_node = "plant/temp";
    daemon.add_policy(p);
    auto gen = [](std::uint64_t tick, Seed) {
      return std::vector<Event>{{"tick/" + canon_u64(tick), EventSource::Schedule, "", tick}};
    };
    auto report = daemon.run_loop(loop_ticks, Seed{4}, gen);
    std::vector<double> lat;
    for (const auto& t : report.ticks) lat.push_back(t.latency_ms);
    rep.loop_tick_p50_ms = detail::percentile(lat, 0.50);
  }

  return rep;
}

}  // namespace wmr
