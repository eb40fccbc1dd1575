#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wmr/gauntlet.hpp"
#include "wmr/world.hpp"

namespace wmr {

struct Genome {
  std::string target_model;
  std::vector<double> values;                    // maps onto parameter indices 0..k-1
  std::vector<std::pair<double, double>> bounds;  // per-gene [lo, hi]

  void clip() {
    for (std::size_t i = 0; i < values.size(); ++i)
      values[i] = std::clamp(values[i], bounds[i].first, bounds[i].second);
  }

  bool within_bounds() const {
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i] < bounds[i].first || values[i] > bounds[i].second) return false;
    return true;
  }
};

struct Individual {
  std::string id;
  Genome genome;
  std::optional<double> fitness;
  std::vector<std::string> parents;  // up to 2
  int generation = 0;
};

struct Trajectory {
  std::string trajectory_id;
  std::uint64_t pulls = 0;
  double mean_reward = 0;
  bool active = true;
  std::vector<double> best_history;  // best fitness after each pull
};

// One held-out point: what the ground-truth solver sees and what the learned
// model sees.
struct EvalPoint {
  std::map<std::string, double> solver_inputs;
  std::map<std::string, double> model_inputs;  // features x0..x(k-2)
};

inline constexpr std::size_t kDefaultPopulation = 30;
inline constexpr int kDefaultGenerations = 200;
inline constexpr double kMutationRate = 0.1;
inline constexpr double kMutationSigmaFrac = 0.05;
inline constexpr std::size_t kTournamentSize = 3;
inline constexpr double kUcb1C = 1.4142135623730951;
inline constexpr std::size_t kStopLossWindow = 10;
inline constexpr double kStopLossMinDelta = 1e-6;

// Genome executes with registry LinearModel semantics: weights over x0..,
// last gene is the intercept.
inline double genome_eval(const Genome& g, const std::map<std::string, double>& feats) {
  if (g.values.empty()) return 0.0;
  double acc = g.values.back();
  for (std::size_t j = 0; j + 1 < g.values.size(); ++j) {
    auto it = feats.find("x" + canon_u64(j));
    if (it != feats.end()) acc += g.values[j] * it->second;
  }
  return acc;
}

inline std::vector<Individual> propose(const std::vector<Individual>& archive,
                                       std::size_t population_size, Seed seed) {
  if (archive.empty()) throw EmptyArchive("propose needs a seeded archive");
  std::vector<const Individual*> ranked;
  for (const auto& ind : archive) ranked.push_back(&ind);
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto* a, const auto* b) {
    double fa = a->fitness.value_or(-std::numeric_limits<double>::infinity());
    double fb = b->fitness.value_or(-std::numeric_limits<double>::infinity());
    if (fa != fb) return fa > fb;
    return a->id < b->id;
  });

  std::mt19937_64 rng(seed.value);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int next_gen = 0;
  for (const auto& ind : archive) next_gen = std::max(next_gen, ind.generation + 1);

  std::vector<Individual> out;
  out.reserve(population_size);
  std::size_t elite = (population_size + 9) / 10;  // ceil 10 %
  for (std::size_t i = 0; i < elite && i < ranked.size() && out.size() < population_size;
       ++i) {
    Individual copy = *ranked[i];
    copy.id = "g" + canon_i64(next_gen) + "/e" + canon_u64(i);
    copy.parents = {ranked[i]->id};
    copy.generation = next_gen;
    out.push_back(std::move(copy));
  }

  auto tournament = [&]() -> const Individual* {
    const Individual* best = nullptr;
    for (std::size_t t = 0; t < kTournamentSize; ++t) {
      const Individual* pick = ranked[rng() % ranked.size()];
      double pf = pick->fitness.value_or(-std::numeric_limits<double>::infinity());
      double bf = best ? best->fitness.value_or(-std::numeric_limits<double>::infinity())
                       : -std::numeric_limits<double>::infinity();
      if (!best || pf > bf || (pf == bf && pick->id < best->id)) best = pick;
    }
    return best;
  };

  while (out.size() < population_size) {
    const Individual* a = tournament();
    const Individual* b = tournament();
    Individual child;
    child.genome = a->genome;
    for (std::size_t j = 0; j < child.genome.values.size(); ++j)
      if (unit(rng) < 0.5) child.genome.values[j] = b->genome.values[j];
    for (std::size_t j = 0; j < child.genome.values.size(); ++j) {
      if (unit(rng) < kMutationRate) {
        double range = child.genome.bounds[j].second - child.genome.bounds[j].first;
        child.genome.values[j] += gauss(rng) * kMutationSigmaFrac * range;
      }
    }
    child.genome.clip();
    child.id = "g" + canon_i64(next_gen) + "/c" + canon_u64(out.size());
    child.parents = {a->id, b->id};
    child.generation = next_gen;
    out.push_back(std::move(child));
  }
  return out;
}

// Fitness = -mean relative error vs the ground-truth solver; pure simulation.
inline double evaluate(const Genome& g, const std::vector<EvalPoint>& eval_set,
                       Registry& registry, const std::string& solver,
                       std::size_t* skipped = nullptr) {
  if (eval_set.empty()) throw NoValidPoints("empty eval set");
  double total = 0;
  std::size_t used = 0, skip = 0;
  auto version = registry.latest_version(solver);
  for (const auto& pt : eval_set) {
    double truth;
    try {
      truth = registry.invoke(solver, version, pt.solver_inputs, Seed{0}, nullptr,
                              false)[0];
    } catch (const DomainError&) {
      ++skip;
      continue;
    }
    double pred = genome_eval(g, pt.model_inputs);
    total += std::abs(pred - truth) / std::max(std::abs(truth), 1e-12);
    ++used;
  }
  if (skipped) *skipped = skip;
  if (used == 0) throw NoValidPoints("all eval points skipped");
  return -total / double(used);
}

inline std::string ucb1_select(const std::vector<Trajectory>& trajectories,
                               double c = kUcb1C) {
  std::vector<const Trajectory*> active;
  for (const auto& t : trajectories)
    if (t.active) active.push_back(&t);
  if (active.empty()) throw NoTrajectories("no active trajectories");

  std::sort(active.begin(), active.end(), [](const auto* a, const auto* b) {
    return a->trajectory_id < b->trajectory_id;
  });
  for (const auto* t : active)
    if (t->pulls == 0) return t->trajectory_id;

  std::uint64_t total = 0;
  for (const auto* t : active) total += t->pulls;
  const Trajectory* best = nullptr;
  double best_score = 0;
  for (const auto* t : active) {
    double score =
        t->mean_reward + c * std::sqrt(std::log(double(total)) / double(t->pulls));
    if (!best || score > best_score) {
      best = t;
      best_score = score;
    }
  }
  return best->trajectory_id;
}

// Permanent deactivation when best fitness stalls across the window.
inline bool stop_loss(Trajectory& t, std::size_t window = kStopLossWindow,
                      double min_delta = kStopLossMinDelta) {
  if (!t.active) return false;
  if (t.best_history.size() >= window) {
    double improvement =
        t.best_history.back() - t.best_history[t.best_history.size() - window];
    if (improvement < min_delta) t.active = false;
  }
  return t.active;
}

enum class CanaryOutcome { Promoted, RolledBack };

struct CanaryReport {
  CanaryOutcome outcome = CanaryOutcome::RolledBack;
  std::vector<double> fractions_run;
  std::vector<double> candidate_error;
  std::vector<double> baseline_error;
  std::optional<std::uint64_t> new_version;
};

inline bool canary_routes_to_candidate(const std::string& input_digest,
                                       std::size_t schedule_step, double fraction) {
  std::string h = sha256_hex(input_digest + "|" + canon_u64(schedule_step));
  std::uint64_t v = std::strtoull(h.substr(0, 8).c_str(), nullptr, 16);
  return double(v % 10000) < fraction * 10000.0;
}

inline void record_canary(World& world, const Genome& g, const std::string& verdict,
                          std::size_t step);

// Gradual rollout over simulated evaluation traffic. Production changes only
// on promotion, and only through a verified kernel token.
inline CanaryReport apply_canary(World& world, Gauntlet& gauntlet,
                                 KernelService& kernel, const Genome& candidate,
                                 const std::string& solver,
                                 const std::vector<EvalPoint>& traffic,
                                 const std::string& approval_id,
                                 const std::vector<double>& schedule = {0.1, 0.5, 1.0},
                                 std::size_t window = 100, double threshold = 0.02) {
  if (!gauntlet.consume_approval(approval_id))
    throw Unauthorized("approval id unknown or already consumed");

  KernelClient client(kernel);
  ActionDescriptor d;
  d.action_class = ActionClass::RSIApply;
  d.target = candidate.target_model;
  d.params_digest = sha256_hex(canon_values(candidate.values));
  d.requester = "rsi";
  d.autonomy_level = Autonomy::A6;
  auto auth = client.authorize(d, {{"approval_id", approval_id}});
  if (!auth.authorized()) throw Unauthorized("kernel denied: " + auth.denial_reason);

  auto& registry = *world.registry;
  auto prod_version = registry.latest_version(candidate.target_model);
  auto prod_art = registry.get_artifact(candidate.target_model, prod_version);
  Genome baseline = candidate;
  for (std::size_t j = 0; j < baseline.values.size() && j < prod_art.parameters.size();
       ++j)
    baseline.values[j] = j + 1 == baseline.values.size()
                             ? prod_art.parameters.back()
                             : prod_art.parameters[j];

  CanaryReport report;
  auto solver_version = registry.latest_version(solver);
  std::size_t cursor = 0;
  double last_base = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t step = 0; step < schedule.size(); ++step) {
    double eps = schedule[step];
    double cand_total = 0, base_total = 0;
    std::size_t cand_n = 0, base_n = 0;
    for (std::size_t i = 0; i < window; ++i) {
      const EvalPoint& pt = traffic[cursor++ % traffic.size()];
      double truth;
      try {
        truth = registry.invoke(solver, solver_version, pt.solver_inputs, Seed{0},
                                nullptr, false)[0];
      } catch (const DomainError&) {
        continue;
      }
      bool to_candidate =
          canary_routes_to_candidate(inputs_digest(pt.model_inputs), step, eps);
      const Genome& g = to_candidate ? candidate : baseline;
      double err = std::abs(genome_eval(g, pt.model_inputs) - truth) /
                   std::max(std::abs(truth), 1e-12);
      if (to_candidate) {
        cand_total += err;
        ++cand_n;
      } else {
        base_total += err;
        ++base_n;
      }
    }
    double cand_err = cand_n ? cand_total / double(cand_n) : 0.0;
    // at full rollout the baseline sees no traffic; compare against its last
    // measured window instead
    if (base_n) last_base = base_total / double(base_n);
    double base_err = last_base;
    report.fractions_run.push_back(eps);
    report.candidate_error.push_back(cand_err);
    report.baseline_error.push_back(base_err);
    if (cand_n && !std::isnan(base_err) && cand_err > base_err + threshold) {
      report.outcome = CanaryOutcome::RolledBack;
      record_canary(world, candidate, "RolledBack", step);
      return report;
    }
  }

  // promote: verified token gates the registry write; old version retained
  GovernedExecutor exec{KernelClient(kernel)};
  auto art = prod_art;
  for (std::size_t j = 0; j < candidate.values.size() && j < art.parameters.size(); ++j) {
    if (j + 1 == candidate.values.size())
      art.parameters.back() = candidate.values[j];
    else
      art.parameters[j] = candidate.values[j];
  }
  std::uint64_t new_version = 0;
  auto receipt = exec.execute(d, *auth.token, [&] {
    new_version = registry.register_model(art.spec, art);
  });
  if (!receipt.executed) throw Unauthorized("kernel token failed verification");
  report.outcome = CanaryOutcome::Promoted;
  report.new_version = new_version;
  record_canary(world, candidate, "Promoted", schedule.size());
  return report;
}

inline void record_canary(World& world, const Genome& g, const std::string& verdict,
                          std::size_t step) {
  if (!world.lineage) return;
  RunRecord rec;
  rec.run_id = world.lineage->fresh_run_id("canary/" + g.target_model);
  rec.seed = Seed{0};
  std::map<std::string, double> meta{{"step", double(step)}};
  world.lineage->put_inputs(meta);
  rec.inputs_digest = inputs_digest(meta);
  rec.outputs = g.values;
  world.lineage->record_run(rec);
  OutcomeRecord oc;
  oc.run_id = rec.run_id;
  oc.metric_name = "canary:" + verdict;
  oc.value = double(step);
  oc.success = verdict == "Promoted";
  world.lineage->record_outcome(oc);
}

struct RsiConfig {
  std::string target_model;
  std::string solver;  // envelope ground truth
  int generations = kDefaultGenerations;
  std::size_t population = kDefaultPopulation;
  std::vector<EvalPoint> eval_set;
  std::vector<double> canary_schedule = {0.1, 0.5, 1.0};
  std::size_t canary_window = 100;
  double canary_threshold = 0.02;
};

struct CycleReport {
  std::string trajectory_id;
  double initial_best = 0;
  double final_best = 0;
  std::vector<double> best_per_generation;
  bool gauntlet_approved = false;
  std::optional<CanaryOutcome> canary;
  std::optional<std::uint64_t> new_version;
  double reward = 0;
};

// One full propose -> evaluate -> validate -> apply cycle on the UCB1-chosen
// trajectory.
inline CycleReport rsi_cycle(World& world, Gauntlet& gauntlet, KernelService& kernel,
                             std::vector<Trajectory>& trajectories,
                             const RsiConfig& cfg, Seed seed) {
  CycleReport report;
  report.trajectory_id = ucb1_select(trajectories);
  Trajectory* traj = nullptr;
  for (auto& t : trajectories)
    if (t.trajectory_id == report.trajectory_id) traj = &t;

  auto& registry = *world.registry;
  auto version = registry.latest_version(cfg.target_model);
  auto art = registry.get_artifact(cfg.target_model, version);

  // production genome: leading weights + intercept of the padded artifact
  std::size_t genes = cfg.eval_set.empty() ? 1 : cfg.eval_set[0].model_inputs.size() + 1;
  Genome prod;
  prod.target_model = cfg.target_model;
  for (std::size_t j = 0; j < genes; ++j) {
    double v = j + 1 == genes ? art.parameters.back() : art.parameters[j];
    prod.values.push_back(v);
    double span = std::abs(v) > 0 ? std::abs(v) * 2.0 : 1.0;
    prod.bounds.push_back({v - span, v + span});
  }

  Individual seed_ind;
  seed_ind.id = "seed";
  seed_ind.genome = prod;
  seed_ind.fitness = evaluate(prod, cfg.eval_set, registry, cfg.solver);
  std::vector<Individual> archive{seed_ind};
  report.initial_best = *seed_ind.fitness;
  double best = report.initial_best;
  Individual best_ind = seed_ind;

  for (int gen = 0; gen < cfg.generations; ++gen) {
    auto candidates =
        propose(archive, cfg.population, derive_seed(seed, "gen" + canon_i64(gen)));
    for (auto& c : candidates)
      c.fitness = evaluate(c.genome, cfg.eval_set, registry, cfg.solver);
    for (auto& c : candidates) {
      if (*c.fitness > best) {
        best = *c.fitness;
        best_ind = c;
      }
    }
    archive = std::move(candidates);
    // elitist archive: keep the best-ever individual in the pool
    archive.push_back(best_ind);
    report.best_per_generation.push_back(best);
  }
  report.final_best = best;

  // validate: declarative diff for the winning genome
  Proposal p;
  p.proposal_id = "rsi/" + cfg.target_model + "/" + canon_u64(seed.value);
  p.kind = ProposalKind::ParamChange;
  p.target = cfg.target_model;
  p.provenance = report.trajectory_id;
  for (std::size_t j = 0; j < best_ind.genome.values.size(); ++j) {
    std::size_t idx = j + 1 == best_ind.genome.values.size() ? art.parameters.size() - 1 : j;
    p.payload["p" + canon_u64(idx)] = canon_double(best_ind.genome.values[j]);
  }
  auto gr = gauntlet.run_gauntlet(p);
  report.gauntlet_approved = gr.approved;
  if (gr.approved) {
    auto canary = apply_canary(world, gauntlet, kernel, best_ind.genome, cfg.solver,
                               cfg.eval_set, gr.approval_id, cfg.canary_schedule,
                               cfg.canary_window, cfg.canary_threshold);
    report.canary = canary.outcome;
    report.new_version = canary.new_version;
  }

  report.reward = std::clamp(report.final_best - report.initial_best, 0.0, 1.0);
  if (traj) {
    ++traj->pulls;
    traj->mean_reward += (report.reward - traj->mean_reward) / double(traj->pulls);
    double prev_best = traj->best_history.empty()
                           ? -std::numeric_limits<double>::infinity()
                           : traj->best_history.back();
    traj->best_history.push_back(std::max(prev_best, report.final_best));
    stop_loss(*traj);
  }

  if (world.lineage) {
    RunRecord rec;
    rec.run_id = world.lineage->fresh_run_id("rsi/cycle");
    rec.seed = seed;
    std::map<std::string, double> meta{{"generations", double(cfg.generations)},
                                       {"population", double(cfg.population)}};
    world.lineage->put_inputs(meta);
    rec.inputs_digest = inputs_digest(meta);
    rec.outputs = {report.initial_best, report.final_best,
                   report.gauntlet_approved ? 1.0 : 0.0};
    world.lineage->record_run(rec);
  }
  return report;
}

}  // namespace wmr
