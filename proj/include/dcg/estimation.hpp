#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dcg/dataset.hpp"
#include "dcg/error.hpp"
#include "dcg/gauge.hpp"
#include "dcg/graph.hpp"
#include "dcg/inference.hpp"
#include "dcg/model.hpp"
#include "dcg/optim.hpp"
#include "dcg/parameters.hpp"

namespace dcg {

/// Default l2 scale for MAP estimation.
inline constexpr double kDefaultLambda2 = 1e-4;

struct ValueAndGradient {
  double value = 0.0;
  Parameters grad;
};

namespace detail {

inline double add_l2(std::span<const double> theta, double lambda2, std::span<double> grad) {
  double sq = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    sq += theta[k] * theta[k];
    if (!grad.empty()) grad[k] += 2.0 * lambda2 * theta[k];
  }
  return lambda2 * sq;
}

/// Rows of a dataset grouped by regime, with the observed sufficient
/// statistics already summed. `delete_targets` selects DCG semantics
/// (intervened nodes lose their potential) versus conditioning (all
/// potentials kept, clamped nodes only fixed).
class RegimeLikelihood {
 public:
  RegimeLikelihood(const StateSpace& space, Parameters layout, const Dataset& data, bool delete_targets,
                   bool pool_regimes = false)
      : space_(space), layout_(std::move(layout)) {
    data.validate(space_);
    totals_.assign(layout_.size(), 0.0);
    RegimeEvaluator eval(layout_);
    const auto groups = group_by_regime(data);
    std::map<Assignment, Regime> merged;
    for (const auto& [key, rows] : groups) {
      const Assignment regime_key = pool_regimes ? Assignment{} : key;
      auto& regime = merged[regime_key];
      if (regime.rows == 0) {
        regime.clamp = make_clamp(space_, {&regime_key});
        regime.active = delete_targets ? active_nodes(space_.n(), regime_key)
                                       : std::vector<char>(static_cast<std::size_t>(space_.n()), 1);
        check_cap(space_, regime.clamp, "exact likelihood");
      }
      regime.rows += static_cast<double>(rows.size());
      for (std::size_t d : rows) eval.add_indicators(data.row(d), regime.active, 1.0, totals_);
    }
    for (auto& [key, regime] : merged) regimes_.push_back(std::move(regime));
  }

  /// Negative log-likelihood plus lambda2 * ||theta||^2.
  double operator()(std::span<const double> theta, std::span<double> grad, double lambda2) const {
    work_.assign(theta);
    RegimeEvaluator eval(work_);
    double value = -dot(theta, totals_);
    if (!grad.empty()) {
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] = -totals_[k];
    }
    for (const auto& r : regimes_) {
      value += r.rows * eval.log_partition(space_, r.clamp, r.active, r.rows, grad);
    }
    return value + add_l2(theta, lambda2, grad);
  }

  const Parameters& layout() const { return layout_; }
  std::size_t regime_count() const { return regimes_.size(); }

 private:
  struct Regime {
    Configuration clamp;
    std::vector<char> active;
    double rows = 0.0;
  };

  StateSpace space_;
  Parameters layout_;
  std::vector<double> totals_;
  std::vector<Regime> regimes_;
  mutable Parameters work_{layout_};
};

/// Distinct (row, mask) patterns with multiplicities, in sorted order.
struct RowPattern {
  Configuration x;
  std::vector<char> mask;
  double count = 0.0;
};

inline std::vector<RowPattern> compress_rows(const Dataset& data) {
  std::map<std::pair<Configuration, std::vector<char>>, double> counts;
  for (std::size_t d = 0; d < data.rows(); ++d) {
    const auto r = data.row(d);
    const auto m = data.mask_row(d);
    counts[{Configuration(r.begin(), r.end()), std::vector<char>(m.begin(), m.end())}] += 1.0;
  }
  std::vector<RowPattern> out;
  out.reserve(counts.size());
  for (auto& [key, count] : counts) out.push_back({key.first, key.second, count});
  return out;
}

/// Pseudo-likelihood over the free sites of each row, each site's full
/// conditional taken in that row's intervened model.
class PseudoLikelihood {
 public:
  PseudoLikelihood(const StateSpace& space, const DirectedGraph& graph, const Dataset& data)
      : space_(space), graph_(graph), layout_(Parameters::zeros(space, graph)) {
    data.validate(space_);
    require(graph_.n() == space_.n(), "graph and state space disagree on node count");
    patterns_ = compress_rows(data);
  }

  double operator()(std::span<const double> theta, std::span<double> grad, double lambda2) const {
    work_.assign(theta);
    const auto& p = work_;
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    double value = 0.0;
    std::vector<double> logits;
    for (const auto& row : patterns_) {
      const auto& x = row.x;
      for (int i = 0; i < space_.n(); ++i) {
        if (row.mask[static_cast<std::size_t>(i)]) continue;
        const int k = space_.card(i);
        logits.assign(static_cast<std::size_t>(k), 0.0);
        for (State s = 0; s < k; ++s) {
          double v = p.bias(i, s);
          for (int e : graph_.in_edges(i)) v += p.weight(e, s, x[static_cast<std::size_t>(graph_.edge(e).parent)]);
          for (int e : graph_.out_edges(i)) {
            const int c = graph_.edge(e).child;
            if (!row.mask[static_cast<std::size_t>(c)]) v += p.weight(e, x[static_cast<std::size_t>(c)], s);
          }
          logits[static_cast<std::size_t>(s)] = v;
        }
        const double lse = log_sum_exp(logits);
        const State xi = x[static_cast<std::size_t>(i)];
        value -= row.count * (logits[static_cast<std::size_t>(xi)] - lse);
        if (grad.empty()) continue;
        for (State s = 0; s < k; ++s) {
          const double coef = row.count * (std::exp(logits[static_cast<std::size_t>(s)] - lse) - (s == xi ? 1.0 : 0.0));
          grad[p.bias_offset(i) + static_cast<std::size_t>(s)] += coef;
          for (int e : graph_.in_edges(i)) {
            const int j = graph_.edge(e).parent;
            grad[p.weight_offset(e) + static_cast<std::size_t>(s * space_.card(j) + x[static_cast<std::size_t>(j)])] += coef;
          }
          for (int e : graph_.out_edges(i)) {
            const int c = graph_.edge(e).child;
            if (row.mask[static_cast<std::size_t>(c)]) continue;
            grad[p.weight_offset(e) + static_cast<std::size_t>(x[static_cast<std::size_t>(c)] * k + s)] += coef;
          }
        }
      }
    }
    return value + add_l2(theta, lambda2, grad);
  }

  const Parameters& layout() const { return layout_; }

 private:
  StateSpace space_;
  DirectedGraph graph_;
  Parameters layout_;
  std::vector<RowPattern> patterns_;
  mutable Parameters work_{layout_};
};

}  // namespace detail

/// Exact DCG negative log-likelihood of interventional data plus
/// lambda2 * ||theta||^2, and its gradient. Rows sharing a do() regime
/// share one enumeration pass.
inline ValueAndGradient nll_grad(const Model& model, const Dataset& data, double lambda2 = 0.0) {
  require(lambda2 >= 0.0, "lambda2 must be nonnegative");
  detail::RegimeLikelihood objective(model.space(), model.params().zeros_like(), data, true);
  Parameters grad = model.params().zeros_like();
  const double value = objective(model.params().flat(), grad.flat(), lambda2);
  return {value, std::move(grad)};
}

/// Pseudo-likelihood counterpart of nll_grad; needs no enumeration.
inline ValueAndGradient pseudo_nll_grad(const Model& model, const Dataset& data, double lambda2 = 0.0) {
  require(lambda2 >= 0.0, "lambda2 must be nonnegative");
  detail::PseudoLikelihood objective(model.space(), model.graph(), data);
  Parameters grad = model.params().zeros_like();
  const double value = objective(model.params().flat(), grad.flat(), lambda2);
  return {value, std::move(grad)};
}

/// Mean over rows of -log p(free nodes | do(clamped nodes)).
inline double eval_test_nll(const Model& model, const Dataset& test) {
  require(test.rows() > 0, "test set is empty");
  detail::RegimeLikelihood objective(model.space(), model.params().zeros_like(), test, true);
  return objective(model.params().flat(), {}, 0.0) / static_cast<double>(test.rows());
}

struct FitConfig {
  double lambda2 = kDefaultLambda2;
  double tol = 1e-6;
  int max_iter = 2000;
  int memory = 10;
};

struct FitResult {
  Model model;
  /// Penalized objective at the returned parameters.
  double objective = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

/// Distribution-preserving directions of the DCG parameterization.
inline GaugeOptions dcg_gauge() { return {true, true, true, false, false}; }

inline FitResult run_fit(const StateSpace& space, const DirectedGraph& graph, const FitConfig& cfg,
                         const std::optional<Parameters>& init, const Objective& objective) {
  require(cfg.lambda2 > 0.0, "MAP fitting needs lambda2 > 0");
  require(cfg.tol > 0.0, "tolerance must be positive");
  Parameters start = init ? *init : Parameters::zeros(space, graph);
  require(start.same_layout(Parameters::zeros(space, graph)), "initial parameters do not match the graph");
  auto gauge = std::make_shared<const GaugeProjector>(gauge_projector(start, dcg_gauge()));
  std::vector<double> x0 = start.values();
  gauge->project(x0);
  auto opt = minimize_lbfgs(gauge_fixed(objective, gauge), std::move(x0), {cfg.tol, cfg.max_iter, cfg.memory});
  gauge->project(opt.x);
  start.assign(opt.x);
  return {Model(space, graph, std::move(start)), opt.value, opt.optimality, opt.iterations, opt.converged};
}

}  // namespace detail

/// l2-regularized maximum likelihood for a fixed graph.
inline FitResult fit_map(const StateSpace& space, const DirectedGraph& graph, const Dataset& data,
                         const FitConfig& cfg = {}, const std::optional<Parameters>& init = std::nullopt) {
  detail::RegimeLikelihood nll(space, Parameters::zeros(space, graph), data, true);
  return detail::run_fit(space, graph, cfg, init, [&](std::span<const double> x, std::span<double> g) {
    return nll(x, g, cfg.lambda2);
  });
}

/// Same as fit_map with the pseudo-likelihood in place of the likelihood.
inline FitResult fit_pseudo(const StateSpace& space, const DirectedGraph& graph, const Dataset& data,
                            const FitConfig& cfg = {}, const std::optional<Parameters>& init = std::nullopt) {
  detail::PseudoLikelihood pl(space, graph, data);
  return detail::run_fit(space, graph, cfg, init, [&](std::span<const double> x, std::span<double> g) {
    return pl(x, g, cfg.lambda2);
  });
}

}  // namespace dcg
