#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wmr/errors.hpp"
#include "wmr/kernel.hpp"
#include "wmr/registry.hpp"

namespace wmr {

enum class Severity { INVIOLABLE, EMERGENCY, CRITICAL, ADVISORY };

inline const char* to_string(Severity s) {
  switch (s) {
    case Severity::INVIOLABLE: return "INVIOLABLE";
    case Severity::EMERGENCY: return "EMERGENCY";
    case Severity::CRITICAL: return "CRITICAL";
    case Severity::ADVISORY: return "ADVISORY";
  }
  return "?";
}

inline bool is_safety_critical(Severity s) {
  return s == Severity::INVIOLABLE || s == Severity::EMERGENCY;
}

struct Constraint {
  std::string constraint_id;
  Severity severity = Severity::ADVISORY;
  std::vector<std::string> inputs;  // state keys the predicate reads
  std::function<bool(const std::map<std::string, double>&)> predicate;
  std::string description;
};

struct Envelope {
  std::string ground_truth_solver;
  double tolerance_rel = 0.02;
  bool substitute = true;  // false: bare rejection instead of substitution
};

enum class Verdict { Pass, Substituted, Halted, Advisory, Rejected };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "Pass";
    case Verdict::Substituted: return "Substituted";
    case Verdict::Halted: return "Halted";
    case Verdict::Advisory: return "Advisory";
    case Verdict::Rejected: return "Rejected";
  }
  return "?";
}

struct ValidationResult {
  Verdict verdict = Verdict::Pass;
  std::vector<std::string> violated;
  std::optional<double> substituted_value;
  double delivered = 0.0;  // the value a downstream consumer must use
};

struct RelaxReceipt {
  bool relaxed = false;
  std::string constraint_id;
  std::string requester;
  std::string refusal_reason;
};

inline constexpr double kEnvelopeEps = 1e-12;

class ConstraintLayer {
 public:
  explicit ConstraintLayer(std::shared_ptr<Registry> registry,
                           std::shared_ptr<LineageStore> lineage = nullptr)
      : registry_(std::move(registry)), lineage_(std::move(lineage)) {}

  void add_constraint(Constraint c) {
    if (c.constraint_id.empty() || !c.predicate)
      throw SpecViolation("constraint needs id and predicate");
    if (constraints_.count(c.constraint_id))
      throw SpecViolation("duplicate constraint: " + c.constraint_id);
    constraints_.emplace(c.constraint_id, std::move(c));
  }

  bool has_constraint(const std::string& id) const { return constraints_.count(id) > 0; }

  const Constraint& constraint(const std::string& id) const {
    auto it = constraints_.find(id);
    if (it == constraints_.end()) throw UnknownConstraint(id);
    return it->second;
  }

  std::size_t constraint_count() const { return constraints_.size(); }

  // Compares a model output against the ground-truth solver; out-of-envelope
  // outputs are replaced by the solver value (or rejected if so configured).
  ValidationResult validate_output(double output,
                                   const std::map<std::string, double>& inputs,
                                   const Envelope& env) const {
    double truth = solve(env, inputs);
    ValidationResult r;
    double rel = std::abs(output - truth) / std::max(std::abs(truth), kEnvelopeEps);
    if (rel <= env.tolerance_rel) {
      r.verdict = Verdict::Pass;
      r.delivered = output;
    } else if (env.substitute) {
      r.verdict = Verdict::Substituted;
      r.substituted_value = truth;
      r.delivered = truth;
    } else {
      r.verdict = Verdict::Rejected;
      r.delivered = truth;
    }
    record_validation("validate_output", to_string(r.verdict), inputs, r.delivered);
    return r;
  }

  ValidationResult validate_vector(const std::vector<double>& outputs,
                                   const std::vector<std::map<std::string, double>>& inputs,
                                   const Envelope& env) const {
    ValidationResult agg;
    agg.verdict = Verdict::Pass;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      auto r = validate_output(outputs[i], inputs[i], env);
      if (r.verdict != Verdict::Pass) agg.verdict = r.verdict;
    }
    return agg;
  }

  ValidationResult check_constraints(const std::map<std::string, double>& state) const {
    std::vector<const Constraint*> all;
    all.reserve(constraints_.size());
    for (const auto& [id, c] : constraints_) all.push_back(&c);
    return check_constraints(state, all);
  }

  ValidationResult check_constraints(const std::map<std::string, double>& state,
                                     const std::vector<const Constraint*>& subset) const {
    ValidationResult r;
    bool halted = false, critical = false, advisory = false;
    for (const Constraint* c : subset) {
      for (const auto& key : c->inputs)
        if (!state.count(key))
          throw IncompleteState(c->constraint_id + " needs " + key);
      if (c->predicate(state)) continue;
      r.violated.push_back(c->constraint_id);
      if (is_safety_critical(c->severity))
        halted = true;
      else if (c->severity == Severity::CRITICAL)
        critical = true;
      else
        advisory = true;
    }
    if (halted)
      r.verdict = Verdict::Halted;
    else if (critical)
      r.verdict = Verdict::Advisory;  // carried, execution may proceed per policy
    else if (advisory)
      r.verdict = Verdict::Advisory;
    else
      r.verdict = Verdict::Pass;
    record_validation("check_constraints", to_string(r.verdict), state,
                      double(r.violated.size()));
    return r;
  }

  // Safety-critical constraints are never relaxable; the rest need a verified
  // kernel token for a ConstraintRelaxation action on this constraint.
  RelaxReceipt relax_constraint(const std::string& constraint_id,
                                const std::string& requester,
                                KernelClient* kernel = nullptr,
                                const std::optional<AuthToken>& token = std::nullopt) {
    auto it = constraints_.find(constraint_id);
    if (it == constraints_.end()) throw UnknownConstraint(constraint_id);
    RelaxReceipt receipt;
    receipt.constraint_id = constraint_id;
    receipt.requester = requester;
    if (is_safety_critical(it->second.severity)) {
      receipt.refusal_reason = "safety-critical constraints cannot be relaxed";
      refusals_.push_back(receipt);
      return receipt;
    }
    if (!kernel || !token) throw Unauthorized("relaxation requires a kernel token");
    ActionDescriptor d;
    d.action_class = ActionClass::ConstraintRelaxation;
    d.target = constraint_id;
    d.params_digest = sha256_hex("relax:" + constraint_id);
    d.requester = requester;
    d.autonomy_level = Autonomy::A3;
    if (!kernel->verify(*token, d)) throw Unauthorized("token verification failed");
    constraints_.erase(it);
    receipt.relaxed = true;
    return receipt;
  }

  const std::vector<RelaxReceipt>& refusals() const { return refusals_; }

  // Sandbox clones re-point at their isolated registry/lineage copies.
  void rebind(std::shared_ptr<Registry> registry, std::shared_ptr<LineageStore> lineage) {
    registry_ = std::move(registry);
    lineage_ = std::move(lineage);
  }

  std::vector<std::string> safety_critical_ids() const {
    std::vector<std::string> ids;
    for (const auto& [id, c] : constraints_)
      if (is_safety_critical(c.severity)) ids.push_back(id);
    return ids;
  }

  std::vector<std::string> export_registry() const {
    std::vector<std::string> lines;
    for (const auto& [id, c] : constraints_)
      lines.push_back(canon_record({{"constraint_id", id},
                                    {"severity", to_string(c.severity)},
                                    {"description", c.description}}));
    return lines;
  }

 private:
  double solve(const Envelope& env, const std::map<std::string, double>& inputs) const {
    if (!registry_ || !registry_->has_model(env.ground_truth_solver))
      throw UnknownModel(env.ground_truth_solver);
    auto out = registry_->invoke(env.ground_truth_solver,
                                 registry_->latest_version(env.ground_truth_solver),
                                 inputs, Seed{0}, nullptr, false);
    if (out.size() != 1) throw SchemaError("envelope solver must emit one value");
    return out[0];
  }

  void record_validation(const std::string& what, const std::string& verdict,
                         const std::map<std::string, double>& inputs,
                         double value) const {
    if (!lineage_) return;
    RunRecord rec;
    rec.run_id = lineage_->fresh_run_id(what);
    rec.seed = Seed{0};
    lineage_->put_inputs(inputs);
    rec.inputs_digest = inputs_digest(inputs);
    rec.outputs = {value};
    lineage_->record_run(rec);
    OutcomeRecord oc;
    oc.run_id = rec.run_id;
    oc.metric_name = what + ":" + verdict;
    oc.value = value;
    oc.success = verdict != "Halted" && verdict != "Rejected";
    lineage_->record_outcome(oc);
  }

  std::shared_ptr<Registry> registry_;
  std::shared_ptr<LineageStore> lineage_;
  std::map<std::string, Constraint> constraints_;
  std::vector<RelaxReceipt> refusals_;
};

}  // namespace wmr
