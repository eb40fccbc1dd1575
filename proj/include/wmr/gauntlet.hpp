#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "wmr/kernel.hpp"
#include "wmr/world.hpp"

namespace wmr {

enum class ProposalKind { ParamChange, GraphRewire, NewModel, EnvelopeTolerance };

inline const char* to_string(ProposalKind k) {
  switch (k) {
    case ProposalKind::ParamChange: return "ParamChange";
    case ProposalKind::GraphRewire: return "GraphRewire";
    case ProposalKind::NewModel: return "NewModel";
    case ProposalKind::EnvelopeTolerance: return "EnvelopeTolerance";
  }
  return "?";
}

struct GridAxis {
  std::string field;
  double lo = 0, hi = 0;
  std::size_t steps = 0;  // grid points along this axis
};

struct InvariantClaim {
  std::string check_name;
  std::vector<GridAxis> domain;
};

// Self-modification proposals are declarative diffs, never code.
struct Proposal {
  std::string proposal_id;
  ProposalKind kind = ProposalKind::ParamChange;
  std::string target;
  std::map<std::string, std::string> payload;
  std::vector<InvariantClaim> claims;
  std::string provenance;  // originating trajectory id

  std::string digest() const {
    auto kv = payload;
    kv["__id"] = proposal_id;
    kv["__kind"] = to_string(kind);
    kv["__target"] = target;
    kv["__provenance"] = provenance;
    return sha256_hex(canon_record(kv));
  }
};

struct StageResult {
  int stage = 0;
  std::string name;
  bool passed = false;
  std::string reason;
  std::uint64_t duration_us = 0;
  std::vector<std::string> counterexamples;
};

struct GauntletReport {
  std::string proposal_id;
  std::vector<StageResult> stages;
  bool approved = false;
  std::string approval_id;

  int rejected_stage() const {
    for (const auto& s : stages)
      if (!s.passed) return s.stage;
    return 0;
  }
};

// Hard resource budgets for sandboxed execution. Steps and bytes are charged
// cooperatively by the code under test; wall time is enforced on every charge.
struct Budget {
  std::uint64_t step_limit = 1'000'000'000;
  std::size_t byte_limit = 512ull << 20;
  std::chrono::steady_clock::time_point deadline;
  std::uint64_t steps = 0;
  std::size_t bytes = 0;

  explicit Budget(double wall_seconds = 30.0)
      : deadline(std::chrono::steady_clock::now() +
                 std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                     std::chrono::duration<double>(wall_seconds))) {}

  void charge(std::uint64_t n = 1) {
    steps += n;
    if (steps > step_limit) throw BudgetExhausted("budget");
    if (std::chrono::steady_clock::now() > deadline) throw BudgetExhausted("budget");
  }

  void charge_bytes(std::size_t n) {
    bytes += n;
    if (bytes > byte_limit) throw BudgetExhausted("budget");
  }
};

inline constexpr double kToleranceCeiling = 0.05;
inline constexpr std::size_t kMaxGridPoints = 1'000'000;

// Applies a declarative proposal to a world. Throws on any malformed or
// illegal change; callers treat exceptions as verdict failures.
inline void apply_proposal(World& w, const Proposal& p) {
  auto need = [&](const char* key) -> const std::string& {
    auto it = p.payload.find(key);
    if (it == p.payload.end())
      throw MalformedDescriptor(std::string("payload missing: ") + key);
    return it->second;
  };
  switch (p.kind) {
    case ProposalKind::ParamChange: {
      auto version = w.registry->latest_version(p.target);
      auto art = w.registry->get_artifact(p.target, version);
      for (const auto& [k, v] : p.payload) {
        if (k.size() < 2 || k[0] != 'p') continue;
        std::size_t idx = std::strtoull(k.c_str() + 1, nullptr, 10);
        if (idx >= art.parameters.size())
          throw MalformedDescriptor("parameter index out of range: " + k);
        art.parameters[idx] = std::strtod(v.c_str(), nullptr);
      }
      w.registry->register_model(art.spec, art);
      break;
    }
    case ProposalKind::GraphRewire: {
      if (need("op") != "add_edge") throw MalformedDescriptor("unsupported rewire op");
      ContextEdge e;
      e.from = need("from");
      e.to = need("to");
      e.relation = EdgeRelation::Causal;
      e.gain = std::strtod(need("gain").c_str(), nullptr);
      w.graph.add_edge(e);
      break;
    }
    case ProposalKind::NewModel: {
      NanoModelSpec spec;
      spec.model_id = p.target;
      spec.architecture_class = ArchClass::LinearModel;
      spec.glassbox = true;
      spec.cdai = true;
      spec.param_count = std::strtoll(need("param_count").c_str(), nullptr, 10);
      ModelArtifact art;
      art.spec = spec;
      art.parameters = parse_values(need("params"));
      art.parameters.resize(std::size_t(std::max<std::int64_t>(spec.param_count, 0)), 0.0);
      w.registry->register_model(spec, art);
      break;
    }
    case ProposalKind::EnvelopeTolerance: {
      auto it = w.envelopes.find(p.target);
      if (it == w.envelopes.end()) throw UnknownModel("no envelope for: " + p.target);
      double tol = std::strtod(need("tolerance_rel").c_str(), nullptr);
      if (!(tol > 0)) throw MalformedDescriptor("tolerance_rel must be positive");
      it->second.tolerance_rel = tol;
      break;
    }
  }
}

class Gauntlet {
 public:
  using InvariantFn = std::function<bool(World&, const std::map<std::string, double>&)>;
  using ScenarioFn = std::function<void(World&, Budget&)>;
  using DigestFn = std::function<std::string(World&)>;

  Gauntlet(World& live, KernelService& kernel, Autonomy level)
      : live_(live), kernel_(kernel), client_(kernel), level_(level) {
    register_regression_check("solver-oracle-sweep", "", [](World& w) {
      std::string acc;
      const std::map<std::string, std::map<std::string, double>> points{
          {"beam_deflection", {{"F", 100}, {"L", 2}, {"E", 200e9}, {"I", 8e-6}}},
          {"convection", {{"h", 100}, {"A", 2}, {"dT", 30}}},
          {"radiation", {{"eps", 1}, {"A", 1}, {"T", 400}, {"T_amb", 300}}},
          {"arps_decline", {{"qi", 1000}, {"Di", 0.1}, {"b", 0.5}, {"t", 5}}},
          {"stokes_velocity",
           {{"r", 1e-4}, {"rho_p", 2650}, {"rho_f", 1000}, {"mu", 1e-3}}}};
      for (const auto& [model, in] : points)
        acc += canon_values(w.registry->invoke(model, w.registry->latest_version(model),
                                               in, Seed{0}, nullptr, false)) +
               "\n";
      return sha256_hex(acc);
    });
  }

  void register_invariant(const std::string& name, InvariantFn fn) {
    invariants_[name] = std::move(fn);
  }

  void register_golden_scenario(const std::string& name, ScenarioFn fn) {
    scenarios_.push_back({name, std::move(fn)});
  }

  struct RegressionCheck {
    std::string name;
    std::string owner;  // proposals targeting the owner may change this digest
    DigestFn fn;
  };

  void register_regression_check(const std::string& name, const std::string& owner,
                                 DigestFn fn) {
    regressions_.push_back({name, owner, std::move(fn)});
  }

  StageResult stage_static(const Proposal& p) {
    return timed(1, "static", [&](StageResult& r) {
      if (p.proposal_id.empty()) return fail(r, "missing proposal id");
      if (live_.registry->is_pinned(p.target)) return fail(r, "immutable");
      switch (p.kind) {
        case ProposalKind::ParamChange: {
          if (!live_.registry->has_model(p.target)) return fail(r, "unknown target");
          bool any = false;
          auto version = live_.registry->latest_version(p.target);
          auto art = live_.registry->get_artifact(p.target, version);
          for (const auto& [k, v] : p.payload) {
            if (k.size() < 2 || k[0] != 'p') continue;
            char* end = nullptr;
            std::size_t idx = std::strtoull(k.c_str() + 1, &end, 10);
            if (*end != '\0') return fail(r, "malformed parameter key: " + k);
            if (idx >= art.parameters.size()) return fail(r, "parameter out of range");
            std::strtod(v.c_str(), &end);
            if (end == v.c_str()) return fail(r, "non-numeric parameter value");
            any = true;
          }
          if (!any) return fail(r, "empty parameter diff");
          break;
        }
        case ProposalKind::GraphRewire: {
          for (const char* key : {"op", "from", "to", "gain"})
            if (!p.payload.count(key)) return fail(r, std::string("missing ") + key);
          if (p.payload.at("op") != "add_edge") return fail(r, "unsupported op");
          if (!live_.graph.has_node(p.payload.at("from")) ||
              !live_.graph.has_node(p.payload.at("to")))
            return fail(r, "unknown node");
          break;
        }
        case ProposalKind::NewModel: {
          if (live_.registry->has_model(p.target)) return fail(r, "target exists");
          for (const char* key : {"param_count", "params"})
            if (!p.payload.count(key)) return fail(r, std::string("missing ") + key);
          break;
        }
        case ProposalKind::EnvelopeTolerance: {
          if (!live_.envelopes.count(p.target)) return fail(r, "unknown envelope");
          if (!p.payload.count("tolerance_rel")) return fail(r, "missing tolerance_rel");
          break;
        }
      }
      for (const auto& claim : p.claims)
        if (!invariants_.count(claim.check_name))
          return fail(r, "unknown invariant check: " + claim.check_name);
      r.passed = true;
    });
  }

  StageResult stage_verify(const Proposal& p) {
    return timed(2, "verify", [&](StageResult& r) {
      World shadow = live_.clone_isolated();
      auto safety_before = shadow.constraints->safety_critical_ids();
      try {
        apply_proposal(shadow, p);
      } catch (const Error& e) {
        r.counterexamples.push_back(std::string("apply: ") + e.what());
        return fail(r, "proposal fails to apply");
      }
      // global invariants
      for (const auto& [id, env] : shadow.envelopes)
        if (env.tolerance_rel > kToleranceCeiling)
          r.counterexamples.push_back(
              canon_record({{"invariant", "tolerance_ceiling"},
                            {"envelope", id},
                            {"tolerance_rel", canon_double(env.tolerance_rel)}}));
      if (shadow.constraints->safety_critical_ids() != safety_before)
        r.counterexamples.push_back(
            canon_record({{"invariant", "severity_irremovability"}}));
      // acyclicity is structural: add_edge throws on cycles, re-assert anyway
      try {
        shadow.graph.topological_order();
      } catch (const Error&) {
        r.counterexamples.push_back(canon_record({{"invariant", "acyclicity"}}));
      }
      // claimed invariants over their bounded grids
      for (const auto& claim : p.claims) {
        std::vector<std::map<std::string, double>> grid;
        try {
          grid = enumerate_grid(claim.domain);
        } catch (const UnverifiableInvariant& e) {
          return fail(r, std::string("unverifiable: ") + e.what());
        }
        const auto& fn = invariants_.at(claim.check_name);
        for (const auto& point : grid) {
          if (!fn(shadow, point)) {
            std::map<std::string, std::string> kv{{"check", claim.check_name}};
            for (const auto& [k, v] : point) kv[k] = canon_double(v);
            r.counterexamples.push_back(canon_record(kv));
          }
        }
      }
      if (!r.counterexamples.empty()) return fail(r, "counterexamples found");
      verification_digest_ = sha256_hex("verified:" + p.digest());
      kernel_.register_gauntlet_evidence(verification_digest_);
      r.passed = true;
    });
  }

  StageResult stage_authorize(const Proposal& p) {
    return timed(3, "authorize", [&](StageResult& r) {
      ActionDescriptor d;
      d.action_class = ActionClass::RSIApply;
      d.target = p.target;
      d.params_digest = p.digest();
      d.requester = "gauntlet";
      d.autonomy_level = level_;
      try {
        auto res = client_.authorize(d, {{"gauntlet_evidence", verification_digest_}});
        if (!res.authorized()) return fail(r, res.denial_reason);
        stage_token_ = res.token;
      } catch (const std::exception& e) {
        return fail(r, std::string("kernel unreachable: ") + e.what());  // fail closed
      }
      r.passed = true;
    });
  }

  StageResult stage_sandbox(const Proposal& p) {
    return timed(4, "sandbox", [&](StageResult& r) {
      World sandbox = live_.clone_isolated();
      Budget budget(sandbox_wall_seconds_);
      try {
        apply_proposal(sandbox, p);
        for (const auto& [name, fn] : scenarios_) fn(sandbox, budget);
      } catch (const BudgetExhausted&) {
        return fail(r, "budget");
      } catch (const std::exception& e) {
        return fail(r, std::string("fault: ") + e.what());
      }
      r.passed = true;
    });
  }

  StageResult stage_regression(const Proposal& p) {
    return timed(5, "regression", [&](StageResult& r) {
      World base = live_.clone_isolated();
      World modified = live_.clone_isolated();
      try {
        apply_proposal(modified, p);
      } catch (const std::exception& e) {
        return fail(r, std::string("fault: ") + e.what());
      }
      for (const auto& check : regressions_) {
        if (!check.owner.empty() && check.owner == p.target) continue;
        std::string want, got;
        try {
          want = check.fn(base);
          got = check.fn(modified);
        } catch (const std::exception& e) {
          return fail(r, check.name + ": " + e.what());
        }
        if (want != got) return fail(r, "digest mismatch: " + check.name);
      }
      r.passed = true;
    });
  }

  GauntletReport run_gauntlet(const Proposal& p) {
    GauntletReport report;
    report.proposal_id = p.proposal_id;
    verification_digest_.clear();
    stage_token_.reset();
    using StageFn = StageResult (Gauntlet::*)(const Proposal&);
    const StageFn stages[] = {&Gauntlet::stage_static, &Gauntlet::stage_verify,
                              &Gauntlet::stage_authorize, &Gauntlet::stage_sandbox,
                              &Gauntlet::stage_regression};
    bool ok = true;
    for (auto fn : stages) {
      auto res = (this->*fn)(p);
      bool passed = res.passed;
      report.stages.push_back(std::move(res));
      if (!passed) {
        ok = false;
        break;
      }
    }
    report.approved = ok;
    if (ok) {
      report.approval_id = "approval/" + p.digest().substr(0, 16);
      approvals_.insert(report.approval_id);
      kernel_.register_approval(report.approval_id);
    }
    persist(report);
    return report;
  }

  // Approved reports are consumable exactly once by the apply step.
  bool consume_approval(const std::string& approval_id) {
    return approvals_.erase(approval_id) > 0;
  }

  const std::optional<AuthToken>& stage_token() const { return stage_token_; }

  void set_sandbox_wall_seconds(double s) { sandbox_wall_seconds_ = s; }

  // Exposed so tests can assert counterexample-set equivalence against an
  // independently coded sweeper.
  static std::vector<std::map<std::string, double>> enumerate_grid(
      const std::vector<GridAxis>& domain) {
    std::size_t total = 1;
    for (const auto& ax : domain) {
      if (ax.steps == 0) throw UnverifiableInvariant("zero-step axis: " + ax.field);
      if (!std::isfinite(ax.lo) || !std::isfinite(ax.hi) || ax.hi < ax.lo)
        throw UnverifiableInvariant("unbounded axis: " + ax.field);
      if (total > kMaxGridPoints / ax.steps)
        throw UnverifiableInvariant("grid too large");
      total *= ax.steps;
    }
    std::vector<std::map<std::string, double>> grid;
    grid.reserve(total);
    std::vector<std::size_t> idx(domain.size(), 0);
    for (std::size_t n = 0; n < total; ++n) {
      std::map<std::string, double> point;
      for (std::size_t a = 0; a < domain.size(); ++a) {
        const auto& ax = domain[a];
        double t = ax.steps == 1 ? 0.0 : double(idx[a]) / double(ax.steps - 1);
        point[ax.field] = ax.lo + t * (ax.hi - ax.lo);
      }
      grid.push_back(std::move(point));
      for (std::size_t a = 0; a < domain.size(); ++a) {
        if (++idx[a] < domain[a].steps) break;
        idx[a] = 0;
      }
    }
    return grid;
  }

 private:
  static void fail(StageResult& r, std::string reason) {
    r.passed = false;
    r.reason = std::move(reason);
  }

  StageResult timed(int stage, const char* name,
                    const std::function<void(StageResult&)>& body) {
    StageResult r;
    r.stage = stage;
    r.name = name;
    auto t0 = std::chrono::steady_clock::now();
    body(r);
    r.duration_us = std::uint64_t(std::chrono::duration_cast<std::chrono::microseconds>(
                                      std::chrono::steady_clock::now() - t0)
                                      .count());
    return r;
  }

  void persist(const GauntletReport& report) {
    if (!live_.lineage) return;
    RunRecord rec;
    rec.run_id = live_.lineage->fresh_run_id("gauntlet/" + report.proposal_id);
    rec.seed = Seed{0};
    std::map<std::string, double> meta{{"approved", report.approved ? 1.0 : 0.0},
                                       {"stages_run", double(report.stages.size())}};
    live_.lineage->put_inputs(meta);
    rec.inputs_digest = inputs_digest(meta);
    for (const auto& s : report.stages) rec.outputs.push_back(s.passed ? 1.0 : 0.0);
    live_.lineage->record_run(rec);
    OutcomeRecord oc;
    oc.run_id = rec.run_id;
    oc.metric_name = report.approved
                         ? "gauntlet:Approved"
                         : "gauntlet:Rejected@" + canon_i64(report.rejected_stage());
    oc.value = double(report.stages.size());
    oc.success = report.approved;
    live_.lineage->record_outcome(oc);
  }

  World& live_;
  KernelService& kernel_;
  KernelClient client_;
  Autonomy level_;
  double sandbox_wall_seconds_ = 30.0;
  std::map<std::string, InvariantFn> invariants_;
  std::vector<std::pair<std::string, ScenarioFn>> scenarios_;
  std::vector<RegressionCheck> regressions_;
  std::set<std::string> approvals_;
  std::string verification_digest_;
  std::optional<AuthToken> stage_token_;
};

}  // namespace wmr
