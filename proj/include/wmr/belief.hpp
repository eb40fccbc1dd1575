#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "wmr/canonical.hpp"
#include "wmr/errors.hpp"

namespace wmr {

// Independent Beta-Bernoulli belief nodes. No topology: the scale and
// throughput contracts apply to flat conjugate updates.

struct BeliefNode {
  double alpha = 1.0;
  double beta = 1.0;
  std::uint64_t update_count = 0;
};

struct Evidence {
  std::string belief_id;
  bool success = true;
  double weight = 1.0;
};

struct BeliefSummary {
  double mean = 0.5;
  double variance = 1.0 / 12.0;
  double entropy = 0.0;  // differential entropy of Beta(alpha, beta)
  double alpha = 1.0;
  double beta = 1.0;
};

namespace detail {

// digamma via the standard asymptotic expansion with upward recurrence.
inline double digamma(double x) {
  double acc = 0.0;
  while (x < 6.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  double inv = 1.0 / x, inv2 = inv * inv;
  return acc + std::log(x) - 0.5 * inv -
         inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 / 252));
}

inline double beta_entropy(double a, double b) {
  double lnB = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  return lnB - (a - 1) * (digamma(a) - digamma(a + b)) -
         (b - 1) * (digamma(b) - digamma(a + b));
}

}  // namespace detail

class BeliefNetwork {
 public:
  struct BatchError {
    std::size_t index;
    std::string message;
  };

  struct BatchResult {
    std::size_t applied = 0;
    std::vector<BatchError> errors;
  };

  BeliefSummary update(const Evidence& e) {
    if (!(e.weight > 0) || !std::isfinite(e.weight))
      throw InvalidWeight("evidence weight must be positive and finite");
    BeliefNode& n = nodes_[e.belief_id];  // auto-created at Beta(1,1)
    if (e.success)
      n.alpha += e.weight;
    else
      n.beta += e.weight;
    ++n.update_count;
    return summarize(n);
  }

  BatchResult batch_update(const std::vector<Evidence>& batch) {
    BatchResult r;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Evidence& e = batch[i];
      if (!(e.weight > 0) || !std::isfinite(e.weight)) {
        r.errors.push_back({i, "invalid weight for " + e.belief_id});
        continue;
      }
      BeliefNode& n = nodes_[e.belief_id];
      if (e.success)
        n.alpha += e.weight;
      else
        n.beta += e.weight;
      ++n.update_count;
      ++r.applied;
    }
    return r;
  }

  BeliefSummary query(const std::string& belief_id) const {
    auto it = nodes_.find(belief_id);
    if (it == nodes_.end()) throw UnknownBelief("unknown belief: " + belief_id);
    return summarize(it->second);
  }

  bool has_belief(const std::string& belief_id) const {
    return nodes_.count(belief_id) > 0;
  }

  std::size_t size() const { return nodes_.size(); }

  // Beliefs still close to maximal uncertainty, most uncertain first.
  std::vector<std::string> detect_gaps(double entropy_threshold = 0.0) const {
    std::vector<std::pair<double, std::string>> hits;
    for (const auto& [id, n] : nodes_) {
      double h = detail::beta_entropy(n.alpha, n.beta);
      if (h >= entropy_threshold) hits.push_back({h, id});
    }
    std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    std::vector<std::string> out;
    out.reserve(hits.size());
    for (auto& [h, id] : hits) out.push_back(std::move(id));
    return out;
  }

  struct ExperimentCandidate {
    std::string belief_id;
    double p_success = 0.5;  // predicted outcome probability
  };

  // argmax over expected entropy reduction H(prior) - E_outcome[H(posterior)].
  ExperimentCandidate select_experiment(
      const std::vector<ExperimentCandidate>& candidates) const {
    if (candidates.empty()) throw NoCandidates("no experiment candidates");
    std::optional<ExperimentCandidate> best;
    double best_gain = -std::numeric_limits<double>::infinity();
    for (const auto& c : candidates) {
      double gain = expected_entropy_reduction(c.belief_id, c.p_success);
      if (!best || gain > best_gain ||
          (gain == best_gain && c.belief_id < best->belief_id)) {
        best = c;
        best_gain = gain;
      }
    }
    return *best;
  }

  double expected_entropy_reduction(const std::string& belief_id,
                                    double p_success) const {
    BeliefNode n;  // unseen beliefs evaluate at their auto-creation prior
    auto it = nodes_.find(belief_id);
    if (it != nodes_.end()) n = it->second;
    double h0 = detail::beta_entropy(n.alpha, n.beta);
    double hs = detail::beta_entropy(n.alpha + 1, n.beta);
    double hf = detail::beta_entropy(n.alpha, n.beta + 1);
    return h0 - (p_success * hs + (1 - p_success) * hf);
  }

  std::vector<std::string> export_records() const {
    std::map<std::string, const BeliefNode*> sorted;
    for (const auto& [id, n] : nodes_) sorted[id] = &n;
    std::vector<std::string> lines;
    lines.reserve(sorted.size());
    for (const auto& [id, n] : sorted)
      lines.push_back(canon_record({{"belief_id", id},
                                    {"alpha", canon_double(n->alpha)},
                                    {"beta", canon_double(n->beta)}}));
    return lines;
  }

 private:
  static BeliefSummary summarize(const BeliefNode& n) {
    BeliefSummary s;
    s.alpha = n.alpha;
    s.beta = n.beta;
    double t = n.alpha + n.beta;
    s.mean = n.alpha / t;
    s.variance = n.alpha * n.beta / (t * t * (t + 1));
    s.entropy = detail::beta_entropy(n.alpha, n.beta);
    return s;
  }

  std::unordered_map<std::string, BeliefNode> nodes_;
};

}  // namespace wmr
