#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "wmr/errors.hpp"
#include "wmr/registry.hpp"

namespace wmr {

enum class NodeKind { Entity, Model, Constraint };
enum class EdgeRelation { Dependency, Causal, ConstraintBinding };

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Entity: return "Entity";
    case NodeKind::Model: return "Model";
    case NodeKind::Constraint: return "Constraint";
  }
  return "?";
}

struct ContextNode {
  std::string node_id;  // hierarchical path, e.g. plant/reactor/temp
  NodeKind kind = NodeKind::Entity;
  std::optional<double> value;
  std::optional<std::string> bound_model;
  std::map<std::string, std::string> metadata;
};

struct ContextEdge {
  std::string from;
  std::string to;
  EdgeRelation relation = EdgeRelation::Dependency;
  double gain = 1.0;
};

struct CascadeHop {
  std::string node_id;
  double magnitude = 0;
  int hop = 0;
};

struct CascadeTrace {
  std::string trigger;
  std::vector<CascadeHop> hops;
};

struct MutationReceipt {
  std::uint64_t mutation_id = 0;
  std::string description;
};

struct ActivationSet {
  std::vector<std::string> nodes;  // ancestors closure, topological order
  double fraction = 0;             // |model nodes in set| / |all model nodes|
  std::size_t visited_nodes = 0;
  std::size_t visited_edges = 0;
};

struct EvaluationResult {
  std::map<std::string, double> values;
  std::vector<std::string> invocation_log;  // model nodes in invocation order
  std::string run_id;
  bool halted = false;  // set by governed pipelines on constraint halt
};

// The Context Network: a hierarchical dependency DAG with undo/redo history.
// Mutations are serialized by the caller (single writer); reads and
// simulations work on value-semantic copies.
class ContextGraph {
 public:
  MutationReceipt add_node(ContextNode node) {
    validate_node(node);
    if (nodes_.count(node.node_id)) throw DuplicateNode("duplicate node: " + node.node_id);
    apply_add_node(node);
    return push_history({MutType::AddNode, node, {}});
  }

  MutationReceipt add_edge(ContextEdge edge) {
    if (!nodes_.count(edge.from)) throw UnknownNode("unknown node: " + edge.from);
    if (!nodes_.count(edge.to)) throw UnknownNode("unknown node: " + edge.to);
    if (edge.from == edge.to) throw CycleRejected("self-edge: " + edge.from);
    if (reachable(edge.to, edge.from))
      throw CycleRejected("edge would create cycle: " + edge.from + " -> " + edge.to);
    if (has_edge(edge.from, edge.to)) throw DuplicateNode("duplicate edge");
    apply_add_edge(edge);
    return push_history({MutType::AddEdge, {}, edge});
  }

  MutationReceipt set_value(const std::string& node_id, double value) {
    auto it = nodes_.find(node_id);
    if (it == nodes_.end()) throw UnknownNode("unknown node: " + node_id);
    Mutation m{MutType::SetValue, it->second, {}};
    it->second.value = value;
    return push_history(std::move(m));
  }

  MutationReceipt undo() {
    if (undo_.empty()) throw NothingToUndo("undo stack empty");
    Mutation m = undo_.back();
    undo_.pop_back();
    revert(m);
    redo_.push_back(std::move(m));
    return {++mutation_counter_, "undo"};
  }

  MutationReceipt redo() {
    if (redo_.empty()) throw NothingToRedo("redo stack empty");
    Mutation m = redo_.back();
    redo_.pop_back();
    reapply(m);
    undo_.push_back(std::move(m));
    return {++mutation_counter_, "redo"};
  }

  bool has_node(const std::string& id) const { return nodes_.count(id) > 0; }

  const ContextNode& node(const std::string& id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw UnknownNode("unknown node: " + id);
    return it->second;
  }

  std::size_t node_count() const { return nodes_.size(); }

  std::size_t model_node_count() const {
    std::size_t n = 0;
    for (const auto& [id, nd] : nodes_)
      if (nd.kind == NodeKind::Model) ++n;
    return n;
  }

  std::vector<ContextEdge> edges() const {
    std::vector<ContextEdge> out;
    for (const auto& [from, tos] : out_)
      for (const auto& [to, e] : tos) out.push_back(e);
    return out;
  }

  // Kahn's algorithm with a lexicographic min-heap; deterministic.
  std::vector<std::string> topological_order(const std::set<std::string>& subset) const {
    std::map<std::string, int> indeg;
    for (const auto& id : subset) indeg[id] = 0;
    for (const auto& id : subset) {
      auto it = out_.find(id);
      if (it == out_.end()) continue;
      for (const auto& [to, e] : it->second)
        if (subset.count(to)) ++indeg[to];
    }
    std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
    for (const auto& [id, d] : indeg)
      if (d == 0) ready.push(id);
    std::vector<std::string> order;
    while (!ready.empty()) {
      auto id = ready.top();
      ready.pop();
      order.push_back(id);
      auto it = out_.find(id);
      if (it == out_.end()) continue;
      for (const auto& [to, e] : it->second)
        if (subset.count(to) && --indeg[to] == 0) ready.push(to);
    }
    return order;
  }

  std::vector<std::string> topological_order() const {
    std::set<std::string> all;
    for (const auto& [id, nd] : nodes_) all.insert(id);
    return topological_order(all);
  }

  // Ancestors closure of the targets; explores only incoming edges, so cost
  // is bounded by the closure plus its edge fringe.
  ActivationSet activate(const std::set<std::string>& targets) const {
    for (const auto& t : targets)
      if (!nodes_.count(t)) throw UnknownNode("unknown target: " + t);
    ActivationSet act;
    std::set<std::string> closure(targets.begin(), targets.end());
    std::deque<std::string> frontier(targets.begin(), targets.end());
    act.visited_nodes = targets.size();
    while (!frontier.empty()) {
      auto id = frontier.front();
      frontier.pop_front();
      auto it = in_.find(id);
      if (it == in_.end()) continue;
      for (const auto& [from, e] : it->second) {
        ++act.visited_edges;
        if (closure.insert(from).second) {
          ++act.visited_nodes;
          frontier.push_back(from);
        }
      }
    }
    act.nodes = topological_order(closure);
    std::size_t total_models = model_node_count();
    std::size_t active_models = 0;
    for (const auto& id : act.nodes)
      if (nodes_.at(id).kind == NodeKind::Model) ++active_models;
    act.fraction = total_models ? double(active_models) / double(total_models) : 0.0;
    return act;
  }

  // Composite evaluation: activated model nodes are invoked exactly once, in
  // topological order, each fed by its parents' values. Entity values come
  // from the graph or the per-call overrides.
  EvaluationResult evaluate(const std::set<std::string>& targets,
                            const std::map<std::string, double>& entity_overrides,
                            Seed seed, Registry& registry,
                            LineageStore* lineage = nullptr) const {
    ActivationSet act = activate(targets);
    EvaluationResult res;
    for (const auto& id : act.nodes) {
      const ContextNode& nd = nodes_.at(id);
      if (nd.kind == NodeKind::Model) {
        if (!nd.bound_model || !registry.has_model(*nd.bound_model))
          throw UnboundModel("model node without bound model: " + id);
        std::map<std::string, double> inputs = model_inputs(nd, res.values, entity_overrides);
        auto version = registry.latest_version(*nd.bound_model);
        Seed node_seed = derive_seed(seed, id);
        auto out = registry.invoke(*nd.bound_model, version, inputs, node_seed,
                                   nullptr, false);
        res.values[id] = out.empty() ? 0.0 : out[0];
        res.invocation_log.push_back(id);
      } else if (nd.kind == NodeKind::Entity) {
        auto ov = entity_overrides.find(id);
        if (ov != entity_overrides.end())
          res.values[id] = ov->second;
        else if (nd.value)
          res.values[id] = *nd.value;
      }
    }
    if (lineage) {
      RunRecord rec;
      rec.run_id = lineage->fresh_run_id("evaluate");
      rec.seed = seed;
      rec.inputs_digest = lineage->put_inputs(entity_overrides);
      for (const auto& id : act.nodes) {
        const ContextNode& nd = nodes_.at(id);
        if (nd.kind == NodeKind::Model && nd.bound_model)
          rec.model_versions[*nd.bound_model] = registry.latest_version(*nd.bound_model);
      }
      for (const auto& [id, v] : res.values) rec.outputs.push_back(v);
      lineage->record_run(rec);
      res.run_id = rec.run_id;
    }
    return res;
  }

  // do-operator intervention: incoming edges of the trigger are severed for
  // this simulation, magnitude propagates by linear edge gains with additive
  // fan-in. The persistent graph is untouched.
  CascadeTrace intervene(const std::string& node_id, double forced_value,
                         std::size_t* hop_limit = nullptr) const {
    if (!nodes_.count(node_id)) throw UnknownNode("unknown node: " + node_id);
    std::set<std::string> descendants{node_id};
    std::deque<std::string> frontier{node_id};
    while (!frontier.empty()) {
      auto id = frontier.front();
      frontier.pop_front();
      auto it = out_.find(id);
      if (it == out_.end()) continue;
      for (const auto& [to, e] : it->second)
        if (descendants.insert(to).second) frontier.push_back(to);
    }
    auto order = topological_order(descendants);
    std::map<std::string, double> magnitude;
    std::map<std::string, int> hop;
    magnitude[node_id] = forced_value;
    hop[node_id] = 0;
    CascadeTrace trace;
    trace.trigger = node_id;
    for (const auto& id : order) {
      if (id != node_id) {
        double m = 0;
        int h = 0;
        auto it = in_.find(id);
        if (it != in_.end()) {
          for (const auto& [from, e] : it->second) {
            if (!magnitude.count(from)) continue;
            m += magnitude[from] * e.gain;
            h = std::max(h, hop[from] + 1);
          }
        }
        magnitude[id] = m;
        hop[id] = h;
      }
      trace.hops.push_back({id, magnitude[id], hop[id]});
      if (hop_limit && trace.hops.size() >= *hop_limit) break;
    }
    std::stable_sort(trace.hops.begin(), trace.hops.end(),
                     [](const CascadeHop& a, const CascadeHop& b) { return a.hop < b.hop; });
    return trace;
  }

  // Canonical export: nodes then edges, sorted.
  std::vector<std::string> export_records() const {
    std::vector<std::string> lines;
    for (const auto& [id, nd] : nodes_) {
      std::map<std::string, std::string> kv;
      kv["t"] = "node";
      kv["id"] = id;
      kv["kind"] = to_string(nd.kind);
      if (nd.value) kv["value"] = canon_double(*nd.value);
      if (nd.bound_model) kv["model"] = *nd.bound_model;
      lines.push_back(canon_record(kv));
    }
    std::vector<std::string> edge_lines;
    for (const auto& e : edges()) {
      std::map<std::string, std::string> kv;
      kv["t"] = "edge";
      kv["from"] = e.from;
      kv["to"] = e.to;
      kv["gain"] = canon_double(e.gain);
      edge_lines.push_back(canon_record(kv));
    }
    std::sort(edge_lines.begin(), edge_lines.end());
    lines.insert(lines.end(), edge_lines.begin(), edge_lines.end());
    return lines;
  }

  std::string state_digest() const {
    std::string all;
    for (const auto& l : export_records()) all += l + "\n";
    return sha256_hex(all);
  }

 private:
  enum class MutType { AddNode, AddEdge, SetValue };
  struct Mutation {
    MutType type;
    ContextNode node;  // AddNode payload / SetValue prior state
    ContextEdge edge;
  };

  static void validate_node(const ContextNode& n) {
    if (n.node_id.empty()) throw DuplicateNode("empty node id");
  }

  bool has_edge(const std::string& from, const std::string& to) const {
    auto it = out_.find(from);
    return it != out_.end() && it->second.count(to);
  }

  bool reachable(const std::string& from, const std::string& to) const {
    if (from == to) return true;
    std::set<std::string> seen{from};
    std::deque<std::string> frontier{from};
    while (!frontier.empty()) {
      auto id = frontier.front();
      frontier.pop_front();
      auto it = out_.find(id);
      if (it == out_.end()) continue;
      for (const auto& [next, e] : it->second) {
        if (next == to) return true;
        if (seen.insert(next).second) frontier.push_back(next);
      }
    }
    return false;
  }

  void apply_add_node(const ContextNode& n) { nodes_[n.node_id] = n; }
  void apply_add_edge(const ContextEdge& e) {
    out_[e.from][e.to] = e;
    in_[e.to][e.from] = e;
  }

  // SetValue records hold whichever node state is currently displaced; undo
  // and redo both just swap it with the live node.
  void revert(Mutation& m) {
    switch (m.type) {
      case MutType::AddNode:
        nodes_.erase(m.node.node_id);
        break;
      case MutType::AddEdge:
        out_[m.edge.from].erase(m.edge.to);
        in_[m.edge.to].erase(m.edge.from);
        break;
      case MutType::SetValue:
        std::swap(nodes_[m.node.node_id], m.node);
        break;
    }
  }

  void reapply(Mutation& m) {
    switch (m.type) {
      case MutType::AddNode:
        apply_add_node(m.node);
        break;
      case MutType::AddEdge:
        apply_add_edge(m.edge);
        break;
      case MutType::SetValue:
        std::swap(nodes_[m.node.node_id], m.node);
        break;
    }
  }

  std::map<std::string, double> model_inputs(
      const ContextNode& nd, const std::map<std::string, double>& values,
      const std::map<std::string, double>& overrides) const {
    // Parents feed the model under their leaf name, unless the edge's target
    // field is renamed via node metadata "in:<parent-leaf>" -> field.
    std::map<std::string, double> inputs;
    auto it = in_.find(nd.node_id);
    if (it != in_.end()) {
      for (const auto& [from, e] : it->second) {
        double v = 0;
        auto vit = values.find(from);
        if (vit != values.end()) {
          v = vit->second;
        } else {
          auto ov = overrides.find(from);
          if (ov != overrides.end())
            v = ov->second;
          else if (nodes_.at(from).value)
            v = *nodes_.at(from).value;
          else
            continue;
        }
        std::string leaf = from.substr(from.rfind('/') + 1);
        auto alias = nd.metadata.find("in:" + leaf);
        inputs[alias != nd.metadata.end() ? alias->second : leaf] = v;
      }
    }
    // Fixed model inputs can be carried as metadata "arg:<field>" = value.
    for (const auto& [k, v] : nd.metadata)
      if (k.rfind("arg:", 0) == 0)
        inputs[k.substr(4)] = std::strtod(v.c_str(), nullptr);
    return inputs;
  }

  MutationReceipt push_history(Mutation m) {
    undo_.push_back(std::move(m));
    redo_.clear();
    return {++mutation_counter_, "ok"};
  }

  std::map<std::string, ContextNode> nodes_;
  std::map<std::string, std::map<std::string, ContextEdge>> out_;
  std::map<std::string, std::map<std::string, ContextEdge>> in_;
  std::vector<Mutation> undo_;
  std::vector<Mutation> redo_;
  std::uint64_t mutation_counter_ = 0;
};

}  // namespace wmr
