#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "wmr/canonical.hpp"
#include "wmr/errors.hpp"
#include "wmr/seed.hpp"

namespace wmr {

// One replayable unit of work. Timestamps are logical counters assigned by
// the store; records are immutable once written.
struct RunRecord {
  std::string run_id;
  std::optional<std::string> parent_run;
  Seed seed;
  std::string inputs_digest;
  std::map<std::string, std::uint64_t> model_versions;
  std::vector<double> outputs;
  std::uint64_t timestamp = 0;
};

struct OutcomeRecord {
  std::string run_id;
  std::string metric_name;
  double value = 0;
  bool success = false;
};

// Append-only lineage + outcome store. Single-writer: all mutation goes
// through one mutex; readers get copies of immutable records.
class LineageStore {
 public:
  std::string record_run(RunRecord rec) {
    std::lock_guard lock(mu_);
    if (rec.run_id.empty()) throw Error("record_run: empty run_id");
    if (runs_.count(rec.run_id)) throw DuplicateRun("duplicate run_id: " + rec.run_id);
    if (rec.parent_run && !runs_.count(*rec.parent_run))
      throw UnknownParent("unknown parent_run: " + *rec.parent_run);
    rec.timestamp = next_tick_++;
    order_.push_back(rec.run_id);
    auto id = rec.run_id;
    runs_.emplace(id, std::move(rec));
    return id;
  }

  // Inputs are content-addressed by their canonical digest so replay can
  // re-execute without widening the lineage record schema.
  std::string put_inputs(const std::map<std::string, double>& inputs) {
    std::lock_guard lock(mu_);
    std::string d = inputs_digest(inputs);
    inputs_.emplace(d, inputs);
    return d;
  }

  std::map<std::string, double> get_inputs(const std::string& digest) const {
    std::lock_guard lock(mu_);
    auto it = inputs_.find(digest);
    if (it == inputs_.end()) throw UnknownRun("no stored inputs for digest: " + digest);
    return it->second;
  }

  bool has_inputs(const std::string& digest) const {
    std::lock_guard lock(mu_);
    return inputs_.count(digest) > 0;
  }

  RunRecord get_run(const std::string& run_id) const {
    std::lock_guard lock(mu_);
    auto it = runs_.find(run_id);
    if (it == runs_.end()) throw UnknownRun("unknown run: " + run_id);
    return it->second;
  }

  bool has_run(const std::string& run_id) const {
    std::lock_guard lock(mu_);
    return runs_.count(run_id) > 0;
  }

  std::size_t run_count() const {
    std::lock_guard lock(mu_);
    return runs_.size();
  }

  // Chain from run_id back to the root via parent links.
  std::vector<RunRecord> lineage_chain(const std::string& run_id) const {
    std::lock_guard lock(mu_);
    std::vector<RunRecord> chain;
    auto it = runs_.find(run_id);
    if (it == runs_.end()) throw UnknownRun("unknown run: " + run_id);
    while (it != runs_.end()) {
      chain.push_back(it->second);
      if (!it->second.parent_run) break;
      it = runs_.find(*it->second.parent_run);
    }
    return chain;
  }

  std::vector<std::string> run_ids_in_order() const {
    std::lock_guard lock(mu_);
    return order_;
  }

  void record_outcome(OutcomeRecord rec) {
    std::lock_guard lock(mu_);
    if (!runs_.count(rec.run_id))
      throw UnknownRun("outcome references unknown run: " + rec.run_id);
    outcomes_.push_back(std::move(rec));
  }

  std::vector<OutcomeRecord> outcomes() const {
    std::lock_guard lock(mu_);
    return outcomes_;
  }

  std::string fresh_run_id(const std::string& prefix) {
    std::lock_guard lock(mu_);
    return prefix + "/" + canon_u64(next_id_++);
  }

  std::uint64_t tick() const {
    std::lock_guard lock(mu_);
    return next_tick_;
  }

  // Canonical line form, field order fixed:
  // run_id, parent_run, seed, inputs_digest, model_versions, outputs, timestamp
  static std::string format_line(const RunRecord& r) {
    std::string mv;
    for (const auto& [m, v] : r.model_versions) {
      if (!mv.empty()) mv.push_back(',');
      mv += canon_escape(m) + ":" + canon_u64(v);
    }
    std::string line;
    line += "run_id=" + canon_escape(r.run_id);
    line += ";parent_run=" + (r.parent_run ? canon_escape(*r.parent_run) : "");
    line += ";seed=" + canon_u64(r.seed.value);
    line += ";inputs_digest=" + r.inputs_digest;
    line += ";model_versions=" + mv;
    line += ";outputs=" + canon_values(r.outputs);
    line += ";timestamp=" + canon_u64(r.timestamp);
    return line;
  }

  static RunRecord parse_line(const std::string& line) {
    auto kv = parse_record(line);
    RunRecord r;
    r.run_id = kv["run_id"];
    if (!kv["parent_run"].empty()) r.parent_run = kv["parent_run"];
    r.seed.value = std::strtoull(kv["seed"].c_str(), nullptr, 10);
    r.inputs_digest = kv["inputs_digest"];
    const std::string& mv = kv["model_versions"];
    std::size_t pos = 0;
    while (pos < mv.size()) {
      std::size_t end = mv.find(',', pos);
      if (end == std::string::npos) end = mv.size();
      std::string item = mv.substr(pos, end - pos);
      std::size_t colon = item.rfind(':');
      if (colon != std::string::npos)
        r.model_versions[canon_unescape(item.substr(0, colon))] =
            std::strtoull(item.c_str() + colon + 1, nullptr, 10);
      pos = end + 1;
    }
    r.outputs = parse_values(kv["outputs"]);
    r.timestamp = std::strtoull(kv["timestamp"].c_str(), nullptr, 10);
    return r;
  }

  void save(const std::string& path) const {
    std::lock_guard lock(mu_);
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("cannot open lineage file for write: " + path);
    for (const auto& id : order_) f << format_line(runs_.at(id)) << "\n";
    std::ofstream fi(path + ".inputs", std::ios::trunc);
    std::map<std::string, std::string> sorted;
    for (const auto& [d, in] : inputs_) sorted[d] = canon_inputs(in);
    for (const auto& [d, text] : sorted) fi << d << " " << text << "\n";
  }

  void load(const std::string& path) {
    std::lock_guard lock(mu_);
    std::ifstream f(path);
    if (!f) throw Error("cannot open lineage file: " + path);
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      RunRecord r = parse_line(line);
      if (runs_.count(r.run_id)) continue;
      next_tick_ = std::max(next_tick_, r.timestamp + 1);
      // restore the fresh_run_id high-water mark from the trailing counter
      std::size_t slash = r.run_id.rfind('/');
      if (slash != std::string::npos) {
        char* end = nullptr;
        std::uint64_t n = std::strtoull(r.run_id.c_str() + slash + 1, &end, 10);
        if (end && !*end) next_id_ = std::max(next_id_, n + 1);
      }
      order_.push_back(r.run_id);
      runs_.emplace(r.run_id, std::move(r));
    }
    std::ifstream fi(path + ".inputs");
    while (std::getline(fi, line)) {
      if (line.empty()) continue;
      std::size_t sp = line.find(' ');
      if (sp == std::string::npos) continue;
      std::string digest = line.substr(0, sp);
      auto kv = parse_record(line.substr(sp + 1));
      std::map<std::string, double> in;
      for (const auto& [k, v] : kv) in[k] = std::strtod(v.c_str(), nullptr);
      inputs_.emplace(digest, std::move(in));
    }
  }

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, RunRecord> runs_;
  std::unordered_map<std::string, std::map<std::string, double>> inputs_;
  std::vector<std::string> order_;
  std::vector<OutcomeRecord> outcomes_;
  std::uint64_t next_tick_ = 0;
  std::uint64_t next_id_ = 0;
};

}  // namespace wmr
