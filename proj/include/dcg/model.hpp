#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dcg/error.hpp"
#include "dcg/graph.hpp"
#include "dcg/parameters.hpp"
#include "dcg/state_space.hpp"

namespace dcg {

/// Directed cyclic graphical model: a globally normalized product of one
/// interventional potential per node,
///   phi_i(x_i | x_pa(i)) = exp(b[i][x_i] + sum_{e=(j->i)} w[e][x_i][x_j]).
class Model {
 public:
  Model() = default;

  Model(StateSpace space, DirectedGraph graph, Parameters params)
      : space_(std::move(space)), graph_(std::move(graph)), params_(std::move(params)) {
    require(graph_.n() == space_.n(), "graph and state space disagree on node count");
    require(params_.same_layout(Parameters::zeros(space_, graph_)), "parameter shapes do not match the graph");
    require(params_.all_finite(), "parameters must be finite");
  }

  /// All parameters zero (uniform distribution).
  Model(StateSpace space, DirectedGraph graph)
      : Model(space, graph, Parameters::zeros(space, graph)) {}

  const StateSpace& space() const { return space_; }
  const DirectedGraph& graph() const { return graph_; }
  const Parameters& params() const { return params_; }
  int n() const { return space_.n(); }

  Model with_params(Parameters params) const { return Model(space_, graph_, std::move(params)); }

 private:
  StateSpace space_;
  DirectedGraph graph_;
  Parameters params_;
};

inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double peak = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(peak)) return peak;
  double total = 0.0;
  for (double v : values) total += std::exp(v - peak);
  return peak + std::log(total);
}

/// Normalized probabilities from log-weights.
inline std::vector<double> softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> out(logits.size());
  for (std::size_t s = 0; s < logits.size(); ++s) out[s] = std::exp(logits[s] - lse);
  return out;
}

namespace detail {

/// Log-potential of the term owned by node `i`: its bias plus every block
/// whose row node is i. For a DCG these blocks are the edges into i.
inline double node_term(const Parameters& p, const std::vector<std::vector<int>>& row_blocks, int i,
                        std::span<const State> x) {
  double v = p.bias(i, x[static_cast<std::size_t>(i)]);
  for (int e : row_blocks[static_cast<std::size_t>(i)]) {
    v += p.weight(e, x[static_cast<std::size_t>(i)], x[static_cast<std::size_t>(p.block(e).second)]);
  }
  return v;
}

/// Block indices grouped by row node.
inline std::vector<std::vector<int>> blocks_by_row(const Parameters& p) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(p.n()));
  for (std::size_t e = 0; e < p.block_count(); ++e) {
    out[static_cast<std::size_t>(p.block(static_cast<int>(e)).first)].push_back(static_cast<int>(e));
  }
  return out;
}

/// Log-linear family evaluated under a regime. `active[i]` keeps node i's
/// term (bias plus its row blocks); a DCG intervention clears it, while
/// conditioning in an undirected model keeps every term.
class RegimeEvaluator {
 public:
  explicit RegimeEvaluator(const Parameters& p) : p_(p), row_blocks_(blocks_by_row(p)) {}

  double score(std::span<const State> x, const std::vector<char>& active) const {
    double total = 0.0;
    for (int i = 0; i < p_.n(); ++i) {
      if (active[static_cast<std::size_t>(i)]) total += node_term(p_, row_blocks_, i, x);
    }
    return total;
  }

  /// Log-normalizer over completions of `clamp`. When `grad` is non-empty,
  /// adds weight * E[indicator] for every active parameter.
  double log_partition(const StateSpace& space, std::span<const State> clamp, const std::vector<char>& active,
                       double weight = 0.0, std::span<double> grad = {}) const {
    scores_.clear();
    for_each_completion(space, clamp, [&](const Configuration& x) { scores_.push_back(score(x, active)); });
    const double lz = log_sum_exp(scores_);
    if (grad.empty()) return lz;
    std::size_t k = 0;
    for_each_completion(space, clamp, [&](const Configuration& x) {
      const double prob = weight * std::exp(scores_[k++] - lz);
      add_indicators(x, active, prob, grad);
    });
    return lz;
  }

  /// grad[theta] += scale for every active parameter that is "on" at x.
  void add_indicators(std::span<const State> x, const std::vector<char>& active, double scale,
                      std::span<double> grad) const {
    for (int i = 0; i < p_.n(); ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      const State xi = x[static_cast<std::size_t>(i)];
      grad[p_.bias_offset(i) + static_cast<std::size_t>(xi)] += scale;
      for (int e : row_blocks_[static_cast<std::size_t>(i)]) {
        const int col = p_.block(e).second;
        grad[p_.weight_offset(e) + static_cast<std::size_t>(xi * p_.card(col) + x[static_cast<std::size_t>(col)])] +=
            scale;
      }
    }
  }

  const std::vector<std::vector<int>>& row_blocks() const { return row_blocks_; }

 private:
  const Parameters& p_;
  std::vector<std::vector<int>> row_blocks_;
  mutable std::vector<double> scores_;
};

inline std::vector<char> active_nodes(int n, const Assignment& intervention) {
  std::vector<char> active(static_cast<std::size_t>(n), 1);
  for (const auto& [node, state] : intervention.entries()) active[static_cast<std::size_t>(node)] = 0;
  return active;
}

inline void check_agrees(std::span<const State> x, const Assignment& a) {
  for (const auto& [node, state] : a.entries()) {
    if (x[static_cast<std::size_t>(node)] != state) {
      throw InvalidInput("configuration sets node " + std::to_string(node) + " to " +
                         std::to_string(x[static_cast<std::size_t>(node)]) + " but the intervention forces " +
                         std::to_string(state));
    }
  }
}

}  // namespace detail

/// log phi_i(x_i | x_pa(i)); unnormalized.
inline double log_potential(const Model& model, int i, std::span<const State> x) {
  require(model.space().contains(i), "node index out of range");
  model.space().check_configuration(x);
  double v = model.params().bias(i, x[static_cast<std::size_t>(i)]);
  for (int e : model.graph().in_edges(i)) {
    v += model.params().weight(e, x[static_cast<std::size_t>(i)],
                               x[static_cast<std::size_t>(model.graph().edge(e).parent)]);
  }
  return v;
}

/// Sum of log-potentials of the nodes not targeted by `intervention`.
inline double unnormalized_log_score(const Model& model, std::span<const State> x,
                                     const InterventionAssignment& intervention = {}) {
  model.space().check_configuration(x);
  intervention.validate(model.space());
  detail::check_agrees(x, intervention);
  double total = 0.0;
  for (int i = 0; i < model.n(); ++i) {
    if (!intervention.contains(i)) total += log_potential(model, i, x);
  }
  return total;
}

/// log Z (empty intervention) or log Z' of the post-intervention product.
inline double log_partition(const Model& model, const InterventionAssignment& intervention = {}) {
  intervention.validate(model.space());
  const auto clamp = detail::make_clamp(model.space(), {&intervention});
  detail::check_cap(model.space(), clamp, "log_partition");
  detail::RegimeEvaluator eval(model.params());
  return eval.log_partition(model.space(), clamp, detail::active_nodes(model.n(), intervention));
}

/// log p(x) for an empty intervention, otherwise log p(x_free | do(x_S)).
inline double log_likelihood(const Model& model, std::span<const State> x,
                             const InterventionAssignment& intervention = {}) {
  return unnormalized_log_score(model, x, intervention) - log_partition(model, intervention);
}

}  // namespace dcg
