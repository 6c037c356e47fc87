#pragma once

// Comparison models: a locally normalized DAG (softmax conditionals, exact
// search over node orderings) and a pairwise undirected model trained either
// as if all data were observational or conditioning on intervened values.

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dcg/dataset.hpp"
#include "dcg/error.hpp"
#include "dcg/estimation.hpp"
#include "dcg/gauge.hpp"
#include "dcg/graph.hpp"
#include "dcg/graph_semantics.hpp"
#include "dcg/model.hpp"
#include "dcg/parameters.hpp"
#include "dcg/structure_learning.hpp"

namespace dcg {

// ---------------------------------------------------------------- DAG

/// Acyclic graph with softmax conditionals
/// p(x_i | x_pa) = exp(b_i[x_i] + sum_e w_e[x_i][x_parent]) / Z_i(x_pa).
class DagModel {
 public:
  DagModel() = default;

  DagModel(StateSpace space, DirectedGraph graph, Parameters params)
      : space_(std::move(space)), graph_(std::move(graph)), params_(std::move(params)) {
    require(graph_.n() == space_.n(), "graph and state space disagree on node count");
    require(is_acyclic(graph_), "DAG baseline needs an acyclic graph");
    require(params_.same_layout(Parameters::zeros(space_, graph_)), "parameters do not match the graph");
    require(params_.all_finite(), "parameters must be finite");
  }

  DagModel(StateSpace space, DirectedGraph graph)
      : DagModel(space, graph, Parameters::zeros(space, graph)) {}

  const StateSpace& space() const { return space_; }
  const DirectedGraph& graph() const { return graph_; }
  const Parameters& params() const { return params_; }

  std::vector<double> logits(int i, std::span<const State> x) const {
    std::vector<double> out(params_.bias_block(i).begin(), params_.bias_block(i).end());
    for (int e : graph_.in_edges(i)) {
      const State xp = x[static_cast<std::size_t>(graph_.edge(e).parent)];
      for (State s = 0; s < space_.card(i); ++s) out[static_cast<std::size_t>(s)] += params_.weight(e, s, xp);
    }
    return out;
  }

  /// p(x_i = . | x's parent states).
  std::vector<double> conditional(int i, std::span<const State> x) const { return softmax(logits(i, x)); }

  /// log p(x_free | do(x_clamped)): the clamped nodes' factors are dropped.
  double log_likelihood(std::span<const State> x, std::span<const char> clamped = {}) const {
    space_.check_configuration(x);
    double total = 0.0;
    for (int i = 0; i < space_.n(); ++i) {
      if (!clamped.empty() && clamped[static_cast<std::size_t>(i)]) continue;
      const auto l = logits(i, x);
      total += l[static_cast<std::size_t>(x[static_cast<std::size_t>(i)])] - log_sum_exp(l);
    }
    return total;
  }

 private:
  StateSpace space_;
  DirectedGraph graph_;
  Parameters params_;
};

namespace detail {

/// One node's softmax regression on a chosen parent set, over a local
/// space (node first, then its parents) and only the rows where the node
/// is free.
class LocalSoftmax {
 public:
  LocalSoftmax(const StateSpace& space, int node, std::vector<int> parents, const Dataset& data)
      : node_(node), parents_(std::move(parents)) {
    std::vector<int> card{space.card(node)};
    std::vector<Edge> edges;
    for (std::size_t k = 0; k < parents_.size(); ++k) {
      card.push_back(space.card(parents_[k]));
      edges.push_back({static_cast<int>(k) + 1, 0});
    }
    local_space_ = StateSpace(card);
    layout_ = Parameters::zeros(local_space_, DirectedGraph(static_cast<int>(card.size()), edges));
    std::map<std::vector<State>, double> counts;
    std::vector<State> key(card.size());
    for (std::size_t d = 0; d < data.rows(); ++d) {
      if (data.clamped(d, node)) continue;
      key[0] = data(d, node);
      for (std::size_t k = 0; k < parents_.size(); ++k) key[k + 1] = data(d, parents_[k]);
      counts[key] += 1.0;
    }
    for (auto& [k, c] : counts) patterns_.push_back({k, c});
  }

  /// -sum log p(x_node | x_parents) + lambda2 * ||theta||^2.
  double operator()(std::span<const double> theta, std::span<double> grad, double lambda2) const {
    const int k = local_space_.card(0);
    std::vector<double> logits(static_cast<std::size_t>(k));
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    double value = 0.0;
    for (const auto& [x, count] : patterns_) {
      for (int s = 0; s < k; ++s) logits[static_cast<std::size_t>(s)] = theta[static_cast<std::size_t>(s)];
      for (std::size_t e = 0; e < parents_.size(); ++e) {
        const std::size_t off = layout_.weight_offset(static_cast<int>(e));
        const int kc = local_space_.card(static_cast<int>(e) + 1);
        for (int s = 0; s < k; ++s) logits[static_cast<std::size_t>(s)] += theta[off + static_cast<std::size_t>(s * kc + x[e + 1])];
      }
      const double lz = log_sum_exp(logits);
      value -= count * (logits[static_cast<std::size_t>(x[0])] - lz);
      if (grad.empty()) continue;
      for (int s = 0; s < k; ++s) {
        const double r = count * (std::exp(logits[static_cast<std::size_t>(s)] - lz) - (s == x[0] ? 1.0 : 0.0));
        grad[static_cast<std::size_t>(s)] += r;
        for (std::size_t e = 0; e < parents_.size(); ++e) {
          const int kc = local_space_.card(static_cast<int>(e) + 1);
          grad[layout_.weight_offset(static_cast<int>(e)) + static_cast<std::size_t>(s * kc + x[e + 1])] += r;
        }
      }
    }
    return value + add_l2(theta, lambda2, grad);
  }

  const Parameters& layout() const { return layout_; }
  const std::vector<int>& parents() const { return parents_; }
  int node() const { return node_; }

 private:
  struct Pattern {
    std::vector<State> x;
    double count;
  };
  int node_;
  std::vector<int> parents_;
  StateSpace local_space_;
  Parameters layout_;
  std::vector<Pattern> patterns_;
};

/// Adding u(x_parent) to a weight column, or a constant to b_i, leaves every
/// local softmax unchanged.
inline GaugeOptions dag_smooth_gauge() { return {true, true, true, false, true}; }
inline GaugeOptions dag_penalized_gauge() { return {true, true, false, false, true}; }

struct LocalFit {
  int node = 0;
  std::vector<int> parents;
  Parameters local;
  std::vector<char> zero;
  /// Local smooth objective plus lambda * group norms.
  double score = 0.0;
  bool converged = false;
};

inline LocalFit fit_local(const StateSpace& space, const Dataset& data, int node, std::vector<int> parents,
                          const GroupL1Config& cfg) {
  std::sort(parents.begin(), parents.end());
  LocalSoftmax f(space, node, parents, data);
  auto fit = fit_grouped(f.layout(), [&](std::span<const double> x, std::span<double> g) {
    return f(x, g, cfg.lambda2);
  }, cfg, dag_smooth_gauge(), dag_penalized_gauge());
  return {node, std::move(parents), std::move(fit.params), std::move(fit.zero), fit.objective, fit.converged};
}

inline DagModel assemble_dag(const StateSpace& space, const std::vector<LocalFit>& fits) {
  std::vector<Edge> edges;
  for (const auto& lf : fits) {
    for (std::size_t k = 0; k < lf.parents.size(); ++k) {
      if (!lf.zero[k]) edges.push_back({lf.parents[k], lf.node});
    }
  }
  DirectedGraph graph(space.n(), edges);
  Parameters params = Parameters::zeros(space, graph);
  for (const auto& lf : fits) {
    auto b = lf.local.bias_block(0);
    std::copy(b.begin(), b.end(), params.bias_block(lf.node).begin());
    for (std::size_t k = 0; k < lf.parents.size(); ++k) {
      if (lf.zero[k]) continue;
      const int e = graph.find_edge(lf.parents[k], lf.node);
      auto w = lf.local.weight_block(static_cast<int>(k));
      std::copy(w.begin(), w.end(), params.weight_block(e).begin());
    }
  }
  return DagModel(space, std::move(graph), std::move(params));
}

inline void check_ordering(const std::vector<int>& ordering, int n) {
  require(static_cast<int>(ordering.size()) == n, "ordering must list every node once");
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (int v : ordering) {
    require(v >= 0 && v < n && !seen[static_cast<std::size_t>(v)], "ordering is not a permutation of the nodes");
    seen[static_cast<std::size_t>(v)] = 1;
  }
}

}  // namespace detail

/// Negative log-likelihood of the free nodes under truncated factorization,
/// plus lambda2 * ||theta||^2.
inline ValueAndGradient dag_nll_grad(const DagModel& model, const Dataset& data, double lambda2 = 0.0) {
  require(lambda2 >= 0.0, "lambda2 must be nonnegative");
  data.validate(model.space());
  const auto& p = model.params();
  const auto& g = model.graph();
  Parameters grad = p.zeros_like();
  double value = 0.0;
  for (std::size_t d = 0; d < data.rows(); ++d) {
    const auto x = data.row(d);
    for (int i = 0; i < model.space().n(); ++i) {
      if (data.clamped(d, i)) continue;
      const auto l = model.logits(i, x);
      const double lz = log_sum_exp(l);
      const State xi = x[static_cast<std::size_t>(i)];
      value -= l[static_cast<std::size_t>(xi)] - lz;
      for (State s = 0; s < model.space().card(i); ++s) {
        const double r = std::exp(l[static_cast<std::size_t>(s)] - lz) - (s == xi ? 1.0 : 0.0);
        grad.bias(i, s) += r;
        for (int e : g.in_edges(i)) grad.weight(e, s, x[static_cast<std::size_t>(g.edge(e).parent)]) += r;
      }
    }
  }
  value += detail::add_l2(p.flat(), lambda2, grad.flat());
  return {value, std::move(grad)};
}

struct DagFit {
  DagModel model;
  std::vector<int> ordering;
  /// Sum over nodes of the regularized local objectives.
  double score = 0.0;
  bool converged = true;
};

/// Independent group-l1 softmax fits, each node's candidate parents being
/// its predecessors in `ordering`.
inline DagFit dag_fit_ordering(const StateSpace& space, const Dataset& data, const std::vector<int>& ordering,
                               const GroupL1Config& cfg) {
  cfg.validate();
  data.validate(space);
  detail::check_ordering(ordering, space.n());
  std::vector<detail::LocalFit> fits;
  DagFit out;
  out.ordering = ordering;
  for (std::size_t pos = 0; pos < ordering.size(); ++pos) {
    std::vector<int> preds(ordering.begin(), ordering.begin() + static_cast<std::ptrdiff_t>(pos));
    fits.push_back(detail::fit_local(space, data, ordering[pos], preds, cfg));
    out.score += fits.back().score;
    out.converged = out.converged && fits.back().converged;
  }
  out.model = detail::assemble_dag(space, fits);
  return out;
}

/// Unpenalized-structure fit: every node's softmax on its parents in `graph`.
inline DagModel dag_fit_structure(const StateSpace& space, const DirectedGraph& graph, const Dataset& data,
                                  const GroupL1Config& cfg) {
  cfg.validate();
  data.validate(space);
  require(is_acyclic(graph), "DAG baseline needs an acyclic graph");
  std::vector<detail::LocalFit> fits;
  for (int i = 0; i < space.n(); ++i) fits.push_back(detail::fit_local(space, data, i, graph.parents(i), cfg));
  DagModel fitted = detail::assemble_dag(space, fits);
  // Re-express on the requested graph so that zeroed groups keep their edge.
  Parameters params = Parameters::zeros(space, graph);
  for (int i = 0; i < space.n(); ++i) {
    auto b = fitted.params().bias_block(i);
    std::copy(b.begin(), b.end(), params.bias_block(i).begin());
  }
  for (int e = 0; e < static_cast<int>(graph.edge_count()); ++e) {
    const int f = fitted.graph().find_edge(graph.edge(e).parent, graph.edge(e).child);
    if (f < 0) continue;
    auto w = fitted.params().weight_block(f);
    std::copy(w.begin(), w.end(), params.weight_block(e).begin());
  }
  return DagModel(space, graph, std::move(params));
}

/// Largest penalty at which some node still gains a parent when every other
/// node is a candidate parent.
inline double dag_lambda_max(const StateSpace& space, const Dataset& data, double lambda2 = kDefaultLambda2) {
  data.validate(space);
  double best = 0.0;
  for (int i = 0; i < space.n(); ++i) {
    std::vector<int> others;
    for (int j = 0; j < space.n(); ++j) {
      if (j != i) others.push_back(j);
    }
    detail::LocalSoftmax f(space, i, others, data);
    best = std::max(best, detail::grouped_lambda_max(f.layout(), [&](std::span<const double> x, std::span<double> g) {
      return f(x, g, lambda2);
    }));
  }
  return best;
}

inline constexpr int kDefaultOrderCap = 10;

/// Exact minimization of the summed local scores over all node orderings by
/// dynamic programming over subsets. Local scores are computed for every
/// (node, parent set) pair, in parallel over `threads` workers.
inline DagFit dag_order_search(const StateSpace& space, const Dataset& data, const GroupL1Config& cfg,
                               int n_cap = kDefaultOrderCap, int threads = 1) {
  cfg.validate();
  data.validate(space);
  const int n = space.n();
  if (n > n_cap) {
    throw CapacityError("ordering search over " + std::to_string(n) + " nodes exceeds the cap of " +
                        std::to_string(n_cap) + "; fit chosen orderings with dag_fit_ordering instead");
  }
  const std::size_t subsets = std::size_t{1} << n;
  // local[i][mask]: best fit of node i with candidate parents `mask` (i not in mask).
  std::vector<std::vector<std::optional<detail::LocalFit>>> local(static_cast<std::size_t>(n),
                                                                  std::vector<std::optional<detail::LocalFit>>(subsets));
  std::vector<std::pair<int, std::size_t>> jobs;
  for (int i = 0; i < n; ++i) {
    for (std::size_t mask = 0; mask < subsets; ++mask) {
      if (!(mask >> i & 1)) jobs.emplace_back(i, mask);
    }
  }
  auto run = [&](std::size_t k) {
    const auto [i, mask] = jobs[k];
    std::vector<int> parents;
    for (int j = 0; j < n; ++j) {
      if (mask >> j & 1) parents.push_back(j);
    }
    local[static_cast<std::size_t>(i)][mask] = detail::fit_local(space, data, i, parents, cfg);
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  if (workers == 1) {
    for (std::size_t k = 0; k < jobs.size(); ++k) run(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k; (k = next.fetch_add(1)) < jobs.size();) {
          try {
            run(k);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  // best[U] = min over last node i in U of best[U \ i] + local(i, U \ i);
  // ties go to the lexicographically smallest ordering.
  std::vector<double> best(subsets, 0.0);
  std::vector<std::vector<int>> order(subsets);
  for (std::size_t set = 1; set < subsets; ++set) {
    bool have = false;
    for (int i = 0; i < n; ++i) {
      if (!(set >> i & 1)) continue;
      const std::size_t rest = set & ~(std::size_t{1} << i);
      const double score = best[rest] + local[static_cast<std::size_t>(i)][rest]->score;
      std::vector<int> seq = order[rest];
      seq.push_back(i);
      const double slack = 1e-12 * std::max(1.0, std::abs(score));
      if (!have || score < best[set] - slack || (std::abs(score - best[set]) <= slack && seq < order[set])) {
        best[set] = score;
        order[set] = std::move(seq);
        have = true;
      }
    }
  }
  DagFit out;
  out.ordering = order[subsets - 1];
  std::vector<detail::LocalFit> chosen;
  std::size_t preds = 0;
  for (int v : out.ordering) {
    chosen.push_back(*local[static_cast<std::size_t>(v)][preds]);
    out.converged = out.converged && chosen.back().converged;
    preds |= std::size_t{1} << v;
  }
  out.score = 0.0;
  for (const auto& lf : chosen) out.score += lf.score;
  out.model = detail::assemble_dag(space, chosen);
  return out;
}

/// Mean over rows of -log p(free nodes | do(clamped nodes)).
inline double eval_test_nll(const DagModel& model, const Dataset& test) {
  require(test.rows() > 0, "test set is empty");
  test.validate(model.space());
  double total = 0.0;
  for (std::size_t d = 0; d < test.rows(); ++d) total -= model.log_likelihood(test.row(d), test.mask_row(d));
  return total / static_cast<double>(test.rows());
}

// ---------------------------------------------------------------- UG

enum class UgMode { observe, condition };

inline const char* to_string(UgMode m) { return m == UgMode::observe ? "observe" : "condition"; }

/// Pairwise undirected model: p(x) proportional to
/// exp(sum_i b_i[x_i] + sum_{a<b} w_ab[x_a][x_b]).
class UgModel {
 public:
  UgModel() = default;

  UgModel(StateSpace space, UndirectedGraph graph, Parameters params)
      : space_(std::move(space)), graph_(std::move(graph)), params_(std::move(params)) {
    require(graph_.n() == space_.n(), "graph and state space disagree on node count");
    require(params_.same_layout(Parameters::zeros(space_, graph_)), "parameters do not match the graph");
    require(params_.all_finite(), "parameters must be finite");
  }

  UgModel(StateSpace space, UndirectedGraph graph) : UgModel(space, graph, Parameters::zeros(space, graph)) {}

  const StateSpace& space() const { return space_; }
  const UndirectedGraph& graph() const { return graph_; }
  const Parameters& params() const { return params_; }

  double unnormalized_log_score(std::span<const State> x) const {
    space_.check_configuration(x);
    double total = 0.0;
    for (int i = 0; i < space_.n(); ++i) total += params_.bias(i, x[static_cast<std::size_t>(i)]);
    for (int e = 0; e < static_cast<int>(graph_.edges().size()); ++e) {
      const auto [a, b] = graph_.edges()[static_cast<std::size_t>(e)];
      total += params_.weight(e, x[static_cast<std::size_t>(a)], x[static_cast<std::size_t>(b)]);
    }
    return total;
  }

 private:
  StateSpace space_;
  UndirectedGraph graph_;
  Parameters params_;
};

namespace detail {

/// Observe mode pools every row into one unclamped regime; condition mode
/// keeps each regime's clamp. Potentials are never deleted.
inline RegimeLikelihood ug_likelihood(const StateSpace& space, const Parameters& layout, const Dataset& data,
                                      UgMode mode) {
  return RegimeLikelihood(space, layout, data, false, mode == UgMode::observe);
}

inline GaugeOptions ug_smooth_gauge() { return {true, true, true, true, false}; }
inline GaugeOptions ug_penalized_gauge() { return {true, true, false, false, false}; }

}  // namespace detail

inline ValueAndGradient ug_nll_grad(const UgModel& model, const Dataset& data, UgMode mode, double lambda2 = 0.0) {
  require(lambda2 >= 0.0, "lambda2 must be nonnegative");
  auto objective = detail::ug_likelihood(model.space(), model.params().zeros_like(), data, mode);
  Parameters grad = model.params().zeros_like();
  const double value = objective(model.params().flat(), grad.flat(), lambda2);
  return {value, std::move(grad)};
}

struct UgFit {
  UgModel model;
  std::vector<std::pair<int, int>> active_edges;
  double objective = 0.0;
  double optimality = 0.0;
  bool converged = false;
};

/// Group-l1 fit with one group per unordered pair of the complete graph.
inline UgFit ug_fit_group_l1(const StateSpace& space, const Dataset& data, UgMode mode, const GroupL1Config& cfg,
                             const std::optional<Parameters>& init = std::nullopt) {
  cfg.validate();
  const auto graph = UndirectedGraph::complete(space.n());
  const Parameters layout = Parameters::zeros(space, graph);
  Parameters start = init ? *init : layout;
  require(start.same_layout(layout), "initial parameters do not match the complete undirected graph");
  auto nll = detail::ug_likelihood(space, layout, data, mode);
  auto fit = detail::fit_grouped(std::move(start), [&](std::span<const double> x, std::span<double> g) {
    return nll(x, g, cfg.lambda2);
  }, cfg, detail::ug_smooth_gauge(), detail::ug_penalized_gauge());
  std::vector<std::pair<int, int>> active;
  for (std::size_t e = 0; e < graph.edges().size(); ++e) {
    if (!fit.zero[e]) active.push_back(graph.edges()[e]);
  }
  return {UgModel(space, graph, std::move(fit.params)), std::move(active), fit.objective, fit.optimality,
          fit.converged};
}

inline double ug_lambda_max(const StateSpace& space, const Dataset& data, UgMode mode,
                            double lambda2 = kDefaultLambda2) {
  const Parameters layout = Parameters::zeros(space, UndirectedGraph::complete(space.n()));
  auto nll = detail::ug_likelihood(space, layout, data, mode);
  return detail::grouped_lambda_max(layout, [&](std::span<const double> x, std::span<double> g) {
    return nll(x, g, lambda2);
  });
}

/// Drops undirected edges whose weight tables are exactly zero.
inline UgModel prune(const UgModel& model) {
  const auto& edges = model.graph().edges();
  std::vector<std::pair<int, int>> kept;
  std::vector<int> source;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (model.params().weight_norm(static_cast<int>(e)) > 0.0) {
      kept.push_back(edges[e]);
      source.push_back(static_cast<int>(e));
    }
  }
  UndirectedGraph g(model.space().n(), kept);
  Parameters p = Parameters::zeros(model.space(), g);
  for (int i = 0; i < model.space().n(); ++i) {
    auto src = model.params().bias_block(i);
    std::copy(src.begin(), src.end(), p.bias_block(i).begin());
  }
  for (std::size_t k = 0; k < kept.size(); ++k) {
    auto src = model.params().weight_block(source[k]);
    std::copy(src.begin(), src.end(), p.weight_block(static_cast<int>(k)).begin());
  }
  return UgModel(model.space(), std::move(g), std::move(p));
}

/// Mean over rows of -log p(free nodes | clamped nodes); intervened values
/// are conditioned on whichever mode the model was trained in.
inline double eval_test_nll(const UgModel& model, const Dataset& test) {
  require(test.rows() > 0, "test set is empty");
  auto objective = detail::ug_likelihood(model.space(), model.params().zeros_like(), test, UgMode::condition);
  return objective(model.params().flat(), {}, 0.0) / static_cast<double>(test.rows());
}

}  // namespace dcg
