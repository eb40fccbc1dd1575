#pragma once

#include <map>
#include <memory>
#include <string>

#include "wmr/constraints.hpp"
#include "wmr/context.hpp"
#include "wmr/lineage.hpp"
#include "wmr/registry.hpp"

namespace wmr {

// The mutable world state every governed pipeline operates on: models, the
// context graph, constraints/envelopes, and the provenance log. Value-style
// cloning gives sandboxes and shadow copies full isolation.
struct World {
  std::shared_ptr<LineageStore> lineage;
  std::shared_ptr<Registry> registry;
  std::shared_ptr<ConstraintLayer> constraints;
  ContextGraph graph;
  std::map<std::string, Envelope> envelopes;  // model_id -> envelope

  static World create(bool with_solvers = true) {
    World w;
    w.lineage = std::make_shared<LineageStore>();
    w.registry = std::make_shared<Registry>(w.lineage);
    if (with_solvers) w.registry->register_all_solvers();
    w.constraints = std::make_shared<ConstraintLayer>(w.registry, w.lineage);
    return w;
  }

  // Deep copy with a fresh lineage store: nothing the clone does can reach
  // the originals.
  World clone_isolated() const {
    World w;
    w.lineage = std::make_shared<LineageStore>();
    w.registry = std::make_shared<Registry>(*registry);
    w.registry->set_lineage(w.lineage);
    w.constraints = std::make_shared<ConstraintLayer>(*constraints);
    w.constraints->rebind(w.registry, w.lineage);
    w.graph = graph;
    w.envelopes = envelopes;
    return w;
  }

  std::string digest() const {
    std::string all = registry->state_digest();
    all += graph.state_digest();
    for (const auto& line : constraints->export_registry()) all += line + "\n";
    for (const auto& [id, env] : envelopes)
      all += id + "=" + env.ground_truth_solver + ":" + canon_double(env.tolerance_rel) +
             ":" + (env.substitute ? "1" : "0") + "\n";
    return sha256_hex(all);
  }
};

}  // namespace wmr
