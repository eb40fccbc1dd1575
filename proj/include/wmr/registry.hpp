#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wmr/canonical.hpp"
#include "wmr/errors.hpp"
#include "wmr/lineage.hpp"
#include "wmr/seed.hpp"
#include "wmr/solvers.hpp"

namespace wmr {

enum class ArchClass { RulesEngine, PhysicsSolver, LinearModel, DecisionTree, NeuralNet, Composite };

inline const char* to_string(ArchClass c) {
  switch (c) {
    case ArchClass::RulesEngine: return "RulesEngine";
    case ArchClass::PhysicsSolver: return "PhysicsSolver";
    case ArchClass::LinearModel: return "LinearModel";
    case ArchClass::DecisionTree: return "DecisionTree";
    case ArchClass::NeuralNet: return "NeuralNet";
    case ArchClass::Composite: return "Composite";
  }
  return "?";
}

inline bool is_learned_class(ArchClass c) {
  return c == ArchClass::LinearModel || c == ArchClass::DecisionTree ||
         c == ArchClass::NeuralNet || c == ArchClass::Composite;
}

inline bool is_glassbox_class(ArchClass c) {
  return c == ArchClass::RulesEngine || c == ArchClass::PhysicsSolver ||
         c == ArchClass::LinearModel;
}

struct NanoModelSpec {
  std::string model_id;
  std::uint64_t version = 0;  // assigned by the registry
  ArchClass architecture_class = ArchClass::PhysicsSolver;
  bool glassbox = true;
  bool cdai = true;
  std::int64_t param_count = 0;
  double latency_target_ms = 200.0;
  double accuracy_target = 0.95;
  std::vector<std::string> input_schema;   // "field:unit"
  std::vector<std::string> output_schema;
};

inline constexpr std::int64_t kParamCountLo = 10'000;
inline constexpr std::int64_t kParamCountHi = 100'000;

inline void validate_spec(const NanoModelSpec& s) {
  if (s.model_id.empty()) throw SpecViolation("empty model_id");
  if (is_glassbox_class(s.architecture_class)) {
    if (!s.glassbox || !s.cdai)
      throw SpecViolation(std::string(to_string(s.architecture_class)) +
                          " must be glassbox and cdai");
  }
  if (is_learned_class(s.architecture_class)) {
    if (s.param_count < kParamCountLo || s.param_count > kParamCountHi)
      throw SpecViolation("param_count " + canon_i64(s.param_count) +
                          " outside [10000,100000] for learned class");
  }
  if (s.accuracy_target < 0.95)
    throw SpecViolation("accuracy_target below 0.95");
}

// Learned-class artifacts carry a parameter vector (last entry is the
// intercept); solver classes carry fixed coefficients only.
struct ModelArtifact {
  NanoModelSpec spec;
  std::vector<double> parameters;
  std::map<std::string, double> coefficients;
  std::optional<std::string> training_digest;
};

struct ImmutablePin {
  std::string module_id;
  std::string content_hash;
};

// Sparse training rows: (feature index, value) pairs plus target.
struct Dataset {
  std::size_t num_features = 0;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows;
  std::vector<double> targets;
};

inline constexpr double kRidgeFloor = 1e-12;

namespace detail {

// Dense normal-equation solve for small feature counts.
inline std::vector<double> ols_dense(const Dataset& ds) {
  const std::size_t p = ds.num_features + 1;  // + intercept
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd x(p);
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    x.setZero();
    for (auto [j, v] : ds.rows[i]) x[j] = v;
    x[p - 1] = 1.0;  // intercept column
    A.noalias() += x * x.transpose();
    b.noalias() += ds.targets[i] * x;
  }
  A.diagonal().array() += kRidgeFloor;
  Eigen::VectorXd w = A.ldlt().solve(b);
  return std::vector<double>(w.data(), w.data() + p);
}

// Matrix-free conjugate gradient on (X^T X + lambda I) w = X^T y for wide
// feature spaces where the dense normal matrix would not fit.
inline std::vector<double> ols_cg(const Dataset& ds) {
  const std::size_t p = ds.num_features + 1;
  const std::size_t n = ds.rows.size();
  auto matvec = [&](const std::vector<double>& w, std::vector<double>& out) {
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = w[p - 1];
      for (auto [j, v] : ds.rows[i]) acc += v * w[j];
      t[i] = acc;
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double ti = t[i];
      for (auto [j, v] : ds.rows[i]) out[j] += v * ti;
      out[p - 1] += ti;
    }
    for (std::size_t j = 0; j < p; ++j) out[j] += kRidgeFloor * w[j];
  };
  std::vector<double> rhs(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto [j, v] : ds.rows[i]) rhs[j] += v * ds.targets[i];
    rhs[p - 1] += ds.targets[i];
  }
  std::vector<double> w(p, 0.0), r = rhs, d = rhs, q(p);
  double rr = 0;
  for (double v : r) rr += v * v;
  const double rr0 = rr;
  for (int iter = 0; iter < 500 && rr > 1e-24 * std::max(rr0, 1.0); ++iter) {
    matvec(d, q);
    double dq = 0;
    for (std::size_t j = 0; j < p; ++j) dq += d[j] * q[j];
    if (dq <= 0) break;
    const double alpha = rr / dq;
    for (std::size_t j = 0; j < p; ++j) {
      w[j] += alpha * d[j];
      r[j] -= alpha * q[j];
    }
    double rr_new = 0;
    for (double v : r) rr_new += v * v;
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t j = 0; j < p; ++j) d[j] = r[j] + beta * d[j];
  }
  return w;
}

}  // namespace detail

// Least-squares fit with a fixed ridge floor. Deterministic: accumulation
// order is the dataset's row order, which callers canonicalize.
inline ModelArtifact train_nano(const Dataset& ds, const std::string& model_id,
                                Seed seed) {
  if (ds.rows.empty() || ds.rows.size() < 2) throw EmptyDataset("need >= 2 rows");
  if (ds.rows.size() != ds.targets.size())
    throw SchemaError("rows/targets length mismatch");
  for (const auto& row : ds.rows)
    for (auto [j, v] : row) {
      if (j >= ds.num_features) throw SchemaError("feature index out of range");
      if (!std::isfinite(v)) throw DomainError("non-finite feature");
    }
  const std::size_t p = ds.num_features + 1;
  std::vector<double> w = (p <= 512) ? detail::ols_dense(ds) : detail::ols_cg(ds);

  ModelArtifact art;
  art.spec.model_id = model_id;
  art.spec.architecture_class = ArchClass::LinearModel;
  art.spec.glassbox = true;
  art.spec.cdai = true;
  art.spec.param_count = static_cast<std::int64_t>(p);
  art.spec.accuracy_target = 0.95;
  for (std::size_t j = 0; j + 1 < p; ++j)
    art.spec.input_schema.push_back("x" + canon_u64(j) + ":1");
  art.spec.output_schema = {"y:1"};
  art.parameters = std::move(w);
  std::string digest_src = canon_u64(seed.value);
  digest_src += "|rows=" + canon_u64(ds.rows.size());
  digest_src += "|features=" + canon_u64(ds.num_features);
  art.training_digest = sha256_hex(digest_src);
  return art;
}

struct RemovalReceipt {
  std::string model_id;
  std::uint64_t version = 0;
  std::uint64_t at_tick = 0;
};

// Nano model registry. Read-mostly: registration and untraining serialize on
// a mutex, invocation works against immutable artifacts.
class Registry {
 public:
  explicit Registry(std::shared_ptr<LineageStore> lineage)
      : lineage_(std::move(lineage)) {}

  // Deep copy for sandbox / shadow use; shares the lineage pointer unless
  // rebound with set_lineage.
  Registry(const Registry& other) {
    std::lock_guard lock(other.mu_);
    lineage_ = other.lineage_;
    models_ = other.models_;
    next_version_ = other.next_version_;
    pins_ = other.pins_;
    alerts_ = other.alerts_;
  }

  void set_lineage(std::shared_ptr<LineageStore> lineage) {
    std::lock_guard lock(mu_);
    lineage_ = std::move(lineage);
  }

  std::uint64_t register_model(NanoModelSpec spec, ModelArtifact artifact) {
    validate_spec(spec);
    if (is_learned_class(spec.architecture_class) &&
        static_cast<std::int64_t>(artifact.parameters.size()) != spec.param_count)
      throw SpecViolation("parameter vector length != param_count");
    std::lock_guard lock(mu_);
    const std::uint64_t v = ++next_version_[spec.model_id];
    spec.version = v;
    artifact.spec = spec;
    models_[spec.model_id][v] = std::move(artifact);
    return v;
  }

  std::uint64_t register_solver(const std::string& solver_name) {
    const auto& def = solvers::find(solver_name);
    NanoModelSpec spec;
    spec.model_id = def.name;
    spec.architecture_class = ArchClass::PhysicsSolver;
    spec.glassbox = true;
    spec.cdai = true;
    spec.param_count = 0;
    spec.accuracy_target = 1.0;
    spec.input_schema = def.inputs;
    spec.output_schema = def.outputs;
    ModelArtifact art;
    return register_model(spec, std::move(art));
  }

  void register_all_solvers() {
    for (const auto& def : solvers::catalog())
      if (!has_model(def.name)) register_solver(def.name);
  }

  bool has_model(const std::string& model_id) const {
    std::lock_guard lock(mu_);
    auto it = models_.find(model_id);
    return it != models_.end() && !it->second.empty();
  }

  bool has_version(const std::string& model_id, std::uint64_t version) const {
    std::lock_guard lock(mu_);
    auto it = models_.find(model_id);
    return it != models_.end() && it->second.count(version) > 0;
  }

  std::uint64_t latest_version(const std::string& model_id) const {
    std::lock_guard lock(mu_);
    auto it = models_.find(model_id);
    if (it == models_.end() || it->second.empty())
      throw UnknownModel("unknown model: " + model_id);
    return it->second.rbegin()->first;
  }

  ModelArtifact get_artifact(const std::string& model_id, std::uint64_t version) const {
    std::lock_guard lock(mu_);
    auto it = models_.find(model_id);
    if (it == models_.end()) throw UnknownModel("unknown model: " + model_id);
    auto vit = it->second.find(version);
    if (vit == it->second.end())
      throw VersionGone("version gone: " + model_id + "@" + canon_u64(version));
    return vit->second;
  }

  // Pure function of (version, inputs, seed); the RunRecord side effect goes
  // to the lineage store when record is true.
  std::vector<double> invoke(const std::string& model_id, std::uint64_t version,
                             const std::map<std::string, double>& inputs, Seed seed,
                             std::string* run_id_out = nullptr, bool record = true,
                             std::optional<std::string> parent_run = {}) {
    ModelArtifact art = get_artifact(model_id, version);
    std::vector<double> outputs = execute(art, inputs, seed);
    if (record && lineage_) {
      RunRecord rec;
      rec.run_id = lineage_->fresh_run_id("invoke/" + model_id);
      rec.parent_run = std::move(parent_run);
      rec.seed = seed;
      rec.inputs_digest = lineage_->put_inputs(inputs);
      rec.model_versions[model_id] = version;
      rec.outputs = outputs;
      lineage_->record_run(rec);
      if (run_id_out) *run_id_out = rec.run_id;
    }
    return outputs;
  }

  // Re-executes a recorded invoke run from its stored seed and inputs.
  std::vector<double> replay(const std::string& run_id) const {
    if (!lineage_) throw Error("registry has no lineage store");
    RunRecord rec = lineage_->get_run(run_id);
    auto inputs = lineage_->get_inputs(rec.inputs_digest);
    std::vector<double> outputs;
    for (const auto& [model_id, version] : rec.model_versions) {
      ModelArtifact art = get_artifact(model_id, version);  // VersionGone if untrained
      auto out = execute(art, inputs, rec.seed);
      outputs.insert(outputs.end(), out.begin(), out.end());
    }
    return outputs;
  }

  RemovalReceipt untrain(const std::string& model_id, std::uint64_t version) {
    std::lock_guard lock(mu_);
    for (const auto& [pid, pin] : pins_)
      if (pid == model_id)
        throw PinnedModule("model is pinned immutable: " + model_id);
    auto it = models_.find(model_id);
    if (it == models_.end() || !it->second.count(version))
      throw UnknownModel("unknown model/version: " + model_id);
    it->second.erase(version);
    return RemovalReceipt{model_id, version, lineage_ ? lineage_->tick() : 0};
  }

  void pin_immutable(const std::string& module_id, const std::string& hash) {
    std::lock_guard lock(mu_);
    if (pins_.count(module_id))
      throw PinViolation("already pinned: " + module_id);
    pins_[module_id] = ImmutablePin{module_id, hash};
  }

  bool check_immutable(const std::string& module_id, const std::string& hash) {
    std::lock_guard lock(mu_);
    auto it = pins_.find(module_id);
    if (it == pins_.end()) return false;
    if (it->second.content_hash != hash) {
      alerts_.push_back("immutable hash mismatch: " + module_id);
      return false;
    }
    return true;
  }

  bool is_pinned(const std::string& module_id) const {
    std::lock_guard lock(mu_);
    return pins_.count(module_id) > 0;
  }

  std::vector<std::string> kernel_alerts() const {
    std::lock_guard lock(mu_);
    return alerts_;
  }

  // Canonical catalog export, one record per model version.
  std::vector<std::string> catalog_export() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> lines;
    for (const auto& [id, versions] : models_) {
      for (const auto& [v, art] : versions) {
        std::map<std::string, std::string> kv;
        kv["model_id"] = id;
        kv["version"] = canon_u64(v);
        kv["class"] = to_string(art.spec.architecture_class);
        kv["glassbox"] = art.spec.glassbox ? "1" : "0";
        kv["cdai"] = art.spec.cdai ? "1" : "0";
        kv["param_count"] = canon_i64(art.spec.param_count);
        kv["content_hash"] = sha256_hex(canon_values(art.parameters));
        lines.push_back(canon_record(kv));
      }
    }
    return lines;
  }

  std::string state_digest() const {
    std::string all;
    for (const auto& line : catalog_export()) all += line + "\n";
    return sha256_hex(all);
  }

 private:
  static std::vector<double> execute(const ModelArtifact& art,
                                     const std::map<std::string, double>& inputs,
                                     Seed /*seed: all current classes are
                                            seed-independent*/) {
    switch (art.spec.architecture_class) {
      case ArchClass::PhysicsSolver: {
        const auto& def = solvers::find(art.spec.model_id);
        auto out = def.fn(inputs);
        std::vector<double> vals;
        for (const auto& field : def.outputs) {
          auto name = field.substr(0, field.find(':'));
          vals.push_back(out.at(name));
        }
        return vals;
      }
      case ArchClass::LinearModel: {
        // parameters: weights for x0..x(p-2), last entry intercept
        const std::size_t p = art.parameters.size();
        double acc = art.parameters.empty() ? 0.0 : art.parameters[p - 1];
        for (std::size_t j = 0; j + 1 < p; ++j) {
          auto it = inputs.find("x" + canon_u64(j));
          if (it != inputs.end()) acc += art.parameters[j] * it->second;
        }
        return {acc};
      }
      default:
        throw SpecViolation(std::string("class not executable: ") +
                            to_string(art.spec.architecture_class));
    }
  }

  mutable std::mutex mu_;
  std::shared_ptr<LineageStore> lineage_;
  std::map<std::string, std::map<std::uint64_t, ModelArtifact>> models_;
  std::map<std::string, std::uint64_t> next_version_;
  std::map<std::string, ImmutablePin> pins_;
  std::vector<std::string> alerts_;
};

}  // namespace wmr
