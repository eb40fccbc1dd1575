#pragma once

#include <algorithm>
#include <chrono>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wmr/belief.hpp"
#include "wmr/constraints.hpp"
#include "wmr/kernel.hpp"
#include "wmr/world.hpp"

namespace wmr {

enum class EventSource { FileChange, Schedule, Webhook, Synthetic };

struct Event {
  std::string event_id;
  EventSource source = EventSource::Synthetic;
  std::string payload_digest;
  std::uint64_t arrival_tick = 0;
};

// Declarative policy: event pattern -> intervention template, tied to the
// belief proposition tracking the policy's success rate.
struct Policy {
  std::string policy_id;
  std::string event_pattern;  // prefix match on event_id
  std::string belief_id;
  std::string target_node;
  double magnitude = 0;
  std::string objective_node;  // utility measures predicted movement here
  ActionClass action_class = ActionClass::GraphMutation;
  bool operator_approved = false;  // A3 approval record attached
};

struct ActionRequest {
  ActionDescriptor descriptor;
  std::string event_id;
  std::string policy_id;
  std::string target_node;
  double magnitude = 0;
  double predicted_utility = 0;
  double predicted_objective = 0;
  Verdict predicted_verdict = Verdict::Pass;
  bool operator_approved = false;
};

struct Plan {
  std::vector<ActionRequest> actions;
};

struct ActReceipt {
  std::string event_id;
  std::string policy_id;
  bool executed = false;
  std::string detail;  // "executed", "logged", "proposal", or a denial reason
  std::string run_id;
  double predicted_objective = 0;
  std::string objective_node;
};

struct LearnSummary {
  std::size_t successes = 0;
  std::size_t failures = 0;
  std::vector<std::string> knowledge_gaps;
};

struct TickReport {
  std::uint64_t tick = 0;
  std::size_t events = 0;
  std::vector<ActReceipt> receipts;
  double latency_ms = 0;
};

struct LoopReport {
  std::vector<TickReport> ticks;
  bool stopped_by_emergency = false;

  std::string digest() const {
    std::string acc;
    for (const auto& t : ticks) {
      acc += canon_u64(t.tick) + ":" + canon_u64(t.events);
      for (const auto& r : t.receipts)
        acc += ";" + r.event_id + "," + r.policy_id + "," +
               (r.executed ? "1" : "0") + "," + r.detail + "," + r.run_id;
      acc += "\n";
    }
    return sha256_hex(acc);
  }
};

class Daemon {
 public:
  using EventGen = std::function<std::vector<Event>(std::uint64_t tick, Seed)>;

  Daemon(World& world, KernelService& kernel, BeliefNetwork& beliefs,
         Autonomy level = Autonomy::A1)
      : world_(world), kernel_(kernel), client_(kernel), beliefs_(beliefs),
        level_(level) {}

  Autonomy level() const { return level_; }

  // Level changes are themselves governed actions.
  bool set_autonomy(Autonomy next, const AuthToken& token) {
    ActionDescriptor d = autonomy_descriptor(next);
    if (!client_.verify(token, d)) return false;
    level_ = next;
    return true;
  }

  ActionDescriptor autonomy_descriptor(Autonomy next) const {
    ActionDescriptor d;
    d.action_class = ActionClass::ConstraintRelaxation;
    d.target = "aara/autonomy";
    d.params_digest = sha256_hex("level:" + to_string(next));
    d.requester = "operator";
    d.autonomy_level = level_;
    return d;
  }

  void add_policy(Policy p) { policies_.push_back(std::move(p)); }

  void push_event(Event e) {
    e.arrival_tick = tick_;
    queue_.push_back(std::move(e));
  }

  std::vector<Event> sense(std::size_t budget) {
    std::vector<Event> batch;
    while (!queue_.empty() && batch.size() < budget) {
      batch.push_back(std::move(queue_.front()));
      queue_.pop_front();
    }
    return batch;
  }

  // Candidate actions are simulated on the graph snapshot; any candidate
  // whose predicted post-state halts on a safety constraint never enters the
  // plan (CMDP filter). Survivors rank by belief-weighted improvement.
  Plan decide(const std::vector<Event>& events) {
    Plan plan;
    for (const auto& ev : events) {
      for (const auto& pol : policies_) {
        if (ev.event_id.rfind(pol.event_pattern, 0) != 0) continue;
        if (!world_.graph.has_node(pol.target_node)) continue;

        auto trace = world_.graph.intervene(pol.target_node, pol.magnitude);
        auto post = current_state();
        for (const auto& hop : trace.hops) post[hop.node_id] = hop.magnitude;
        Verdict verdict;
        try {
          verdict = world_.constraints->check_constraints(post).verdict;
        } catch (const IncompleteState&) {
          continue;  // cannot certify safety: fail closed
        }
        if (verdict == Verdict::Halted) continue;

        double before = node_value(pol.objective_node);
        double after = post.count(pol.objective_node) ? post.at(pol.objective_node)
                                                      : before;
        double improvement = after - before;
        double mean = beliefs_.has_belief(pol.belief_id)
                          ? beliefs_.query(pol.belief_id).mean
                          : 0.5;
        ActionRequest req;
        req.descriptor.action_class = pol.action_class;
        req.descriptor.target = pol.target_node;
        req.descriptor.params_digest =
            sha256_hex(pol.policy_id + ":" + canon_double(pol.magnitude));
        req.descriptor.requester = "aara/" + pol.policy_id;
        req.descriptor.autonomy_level = level_;
        req.event_id = ev.event_id;
        req.policy_id = pol.policy_id;
        req.target_node = pol.target_node;
        req.magnitude = pol.magnitude;
        req.predicted_objective = after;
        req.predicted_utility = improvement * mean;
        req.predicted_verdict = verdict;
        req.operator_approved = pol.operator_approved;
        plan.actions.push_back(std::move(req));
      }
    }
    std::stable_sort(plan.actions.begin(), plan.actions.end(),
                     [](const ActionRequest& a, const ActionRequest& b) {
                       return a.predicted_utility > b.predicted_utility;
                     });
    return plan;
  }

  std::vector<ActReceipt> act(const Plan& plan) {
    std::vector<ActReceipt> receipts;
    for (const auto& req : plan.actions) {
      ActReceipt r;
      r.event_id = req.event_id;
      r.policy_id = req.policy_id;
      r.predicted_objective = req.predicted_objective;
      r.objective_node = objective_of(req.policy_id);
      if (level_ == Autonomy::A1) {
        r.detail = "logged";
        log_plan_entry(req, "logged");
      } else if (level_ == Autonomy::A2) {
        r.detail = "proposal";
        log_plan_entry(req, "proposal");
      } else if (level_ == Autonomy::A3 && !req.operator_approved) {
        r.detail = "awaiting operator approval";
      } else {
        execute(req, r);
      }
      receipts.push_back(std::move(r));
    }
    return receipts;
  }

  LearnSummary learn(const std::vector<ActReceipt>& receipts) {
    LearnSummary s;
    for (const auto& r : receipts) {
      if (!r.executed) continue;
      if (!world_.lineage->has_run(r.run_id))
        throw DanglingReceipt("receipt references unknown run: " + r.run_id);
      double actual = node_value(r.objective_node);
      double gap = std::abs(r.predicted_objective - actual) /
                   std::max(std::abs(actual), 1e-12);
      bool success = gap <= 2.0 * Envelope{}.tolerance_rel;
      beliefs_.update({belief_of(r.policy_id), success, 1.0});
      success ? ++s.successes : ++s.failures;
      if (!success) s.knowledge_gaps.push_back(r.policy_id);
      OutcomeRecord oc;
      oc.run_id = r.run_id;
      oc.metric_name = "aara:" + r.policy_id;
      oc.value = actual;
      oc.success = success;
      world_.lineage->record_outcome(oc);
    }
    return s;
  }

  LoopReport run_loop(std::uint64_t max_ticks, Seed seed, EventGen gen = nullptr,
                      std::size_t sense_budget = 4) {
    LoopReport report;
    for (std::uint64_t i = 0; i < max_ticks; ++i) {
      if (client_.health().emergency) {
        report.stopped_by_emergency = true;
        snapshot("emergency");
        break;
      }
      auto t0 = std::chrono::steady_clock::now();
      TickReport tr;
      tr.tick = tick_;
      if (gen)
        for (auto& e : gen(tick_, seed)) push_event(std::move(e));
      auto events = sense(sense_budget);
      tr.events = events.size();
      auto plan = decide(events);
      tr.receipts = act(plan);
      learn(tr.receipts);
      tr.latency_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
      report.ticks.push_back(std::move(tr));
      ++tick_;
    }
    return report;
  }

  std::uint64_t tick() const { return tick_; }

 private:
  std::map<std::string, double> current_state() const {
    std::map<std::string, double> state;
    for (const auto& id : world_.graph.topological_order()) {
      const auto& nd = world_.graph.node(id);
      if (nd.value) state[id] = *nd.value;
    }
    return state;
  }

  double node_value(const std::string& id) const {
    if (!world_.graph.has_node(id)) return 0.0;
    const auto& nd = world_.graph.node(id);
    return nd.value.value_or(0.0);
  }

  std::string objective_of(const std::string& policy_id) const {
    for (const auto& p : policies_)
      if (p.policy_id == policy_id) return p.objective_node;
    return "";
  }

  std::string belief_of(const std::string& policy_id) const {
    for (const auto& p : policies_)
      if (p.policy_id == policy_id) return p.belief_id;
    return policy_id;
  }

  void execute(const ActionRequest& req, ActReceipt& r) {
    std::map<std::string, std::string> extra;
    if (req.operator_approved) extra["operator_approval"] = "recorded";
    auto auth = client_.authorize(req.descriptor, extra);
    if (!auth.authorized()) {
      r.detail = "denied: " + auth.denial_reason;
      return;
    }
    if (!client_.verify(*auth.token, req.descriptor)) {
      r.detail = "denied: token verification failed";
      return;
    }
    // apply the intervention to the live graph and record the run
    auto trace = world_.graph.intervene(req.target_node, req.magnitude);
    for (const auto& hop : trace.hops)
      world_.graph.set_value(hop.node_id, hop.magnitude);

    RunRecord rec;
    rec.run_id = world_.lineage->fresh_run_id("aara/" + req.policy_id);
    rec.seed = Seed{0};
    std::map<std::string, double> post;
    for (const auto& hop : trace.hops) post[hop.node_id] = hop.magnitude;
    world_.lineage->put_inputs(post);
    rec.inputs_digest = inputs_digest(post);
    for (const auto& hop : trace.hops) rec.outputs.push_back(hop.magnitude);
    world_.lineage->record_run(rec);
    r.run_id = rec.run_id;
    r.executed = true;
    r.detail = "executed";
    if (level_ == Autonomy::A4) {
      OutcomeRecord note;
      note.run_id = rec.run_id;
      note.metric_name = "notification:" + req.policy_id;
      note.value = req.magnitude;
      note.success = true;
      world_.lineage->record_outcome(note);
    }
  }

  void log_plan_entry(const ActionRequest& req, const std::string& kind) {
    RunRecord rec;
    rec.run_id = world_.lineage->fresh_run_id("aara/plan");
    rec.seed = Seed{0};
    std::map<std::string, double> meta{{"magnitude", req.magnitude},
                                       {"utility", req.predicted_utility}};
    world_.lineage->put_inputs(meta);
    rec.inputs_digest = inputs_digest(meta);
    world_.lineage->record_run(rec);
    OutcomeRecord oc;
    oc.run_id = rec.run_id;
    oc.metric_name = "plan:" + kind + ":" + req.policy_id;
    oc.value = req.predicted_utility;
    oc.success = true;
    world_.lineage->record_outcome(oc);
  }

  void snapshot(const std::string& why) {
    RunRecord rec;
    rec.run_id = world_.lineage->fresh_run_id("aara/snapshot");
    rec.seed = Seed{0};
    std::map<std::string, double> state = current_state();
    world_.lineage->put_inputs(state);
    rec.inputs_digest = inputs_digest(state);
    world_.lineage->record_run(rec);
    OutcomeRecord oc;
    oc.run_id = rec.run_id;
    oc.metric_name = "snapshot:" + why;
    oc.value = double(tick_);
    oc.success = true;
    world_.lineage->record_outcome(oc);
  }

  World& world_;
  KernelService& kernel_;
  KernelClient client_;
  BeliefNetwork& beliefs_;
  Autonomy level_;
  std::vector<Policy> policies_;
  std::deque<Event> queue_;
  std::uint64_t tick_ = 0;
};

}  // namespace wmr
