#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "dcg/dataset.hpp"
#include "dcg/error.hpp"
#include "dcg/estimation.hpp"
#include "dcg/gauge.hpp"
#include "dcg/graph.hpp"
#include "dcg/model.hpp"
#include "dcg/optim.hpp"
#include "dcg/parameters.hpp"
#include "dcg/projected_qn.hpp"

namespace dcg {

struct GroupL1Config {
  double lambda = 0.0;
  double lambda2 = kDefaultLambda2;
  double tol = 1e-6;
  int max_iter = 2000;
  int memory = 10;
  double zero_threshold = 1e-5;

  void validate() const {
    require(lambda >= 0.0 && std::isfinite(lambda), "lambda must be a finite nonnegative number");
    require(lambda2 >= 0.0 && std::isfinite(lambda2), "lambda2 must be a finite nonnegative number");
    require(tol > 0.0, "tolerance must be positive");
    require(max_iter > 0, "max_iter must be positive");
    require(memory >= 1, "quasi-Newton memory must be at least 1");
    require(zero_threshold > 0.0, "zero_threshold must be positive");
  }
};

/// Parameters together with one cone bound per weight group.
struct ConeState {
  Parameters theta;
  std::vector<double> alpha;

  bool feasible() const {
    for (std::size_t e = 0; e < alpha.size(); ++e) {
      if (theta.weight_norm(static_cast<int>(e)) > alpha[e]) return false;
    }
    return true;
  }
};

struct GroupL1Fit {
  /// Parameters on the candidate graph; inactive groups are exactly zero.
  Model model;
  std::vector<Edge> active_edges;
  /// Smooth objective plus lambda * sum of group norms.
  double objective = 0.0;
  double optimality = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline std::vector<GroupSpan> weight_groups(const Parameters& p) {
  std::vector<GroupSpan> groups;
  for (int e = 0; e < static_cast<int>(p.block_count()); ++e) groups.push_back({p.weight_offset(e), p.block_size(e)});
  return groups;
}

struct GroupedFit {
  Parameters params;
  std::vector<char> zero;
  double objective = 0.0;
  double optimality = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// `smooth` lists the flat directions of the unpenalized objective;
/// `penalized` those along which the group norms are also minimized at
/// zero component, used when lambda > 0.
inline GroupedFit fit_grouped(Parameters start, const Objective& f, const GroupL1Config& cfg,
                              const GaugeOptions& smooth, const GaugeOptions& penalized) {
  cfg.validate();
  const auto groups = weight_groups(start);
  auto gauge = std::make_shared<const GaugeProjector>(gauge_projector(start, cfg.lambda > 0.0 ? penalized : smooth));
  std::vector<double> x0 = start.values();
  gauge->project(x0);
  auto res = minimize_group_l1(gauge_fixed(f, gauge), groups, cfg.lambda, std::move(x0),
                               {cfg.tol, cfg.max_iter, cfg.memory, 30, cfg.zero_threshold});
  // Cone projections rescale w, which can leave a component along the
  // row-shift directions; the objective was evaluated without it.
  gauge->project(res.x);
  start.assign(res.x);
  return {std::move(start), std::move(res.zero), res.objective, res.optimality, res.iterations, res.converged};
}

/// Largest group-gradient norm of f at the best bias-only point.
inline double grouped_lambda_max(const Parameters& layout, const Objective& raw) {
  const std::size_t nb = layout.bias_size();
  const Objective f = gauge_fixed(raw, std::make_shared<const GaugeProjector>(
                                           gauge_projector(layout, {true, false, false, false, false})));
  std::vector<double> full(layout.size(), 0.0), grad(layout.size());
  auto bias_only = [&](std::span<const double> b, std::span<double> gb) {
    std::copy(b.begin(), b.end(), full.begin());
    const double v = f(full, grad);
    std::copy(grad.begin(), grad.begin() + static_cast<std::ptrdiff_t>(nb), gb.begin());
    return v;
  };
  auto opt = minimize_lbfgs(bias_only, std::vector<double>(nb, 0.0), {1e-10, 5000, 10});
  std::fill(full.begin(), full.end(), 0.0);
  std::copy(opt.x.begin(), opt.x.end(), full.begin());
  f(full, grad);
  double best = 0.0;
  for (const auto& g : weight_groups(layout)) best = std::max(best, group_norm(grad, g));
  return best;
}

}  // namespace detail

/// Group-l1 penalized MAP fit over a candidate graph; each directed edge's
/// weight table is one group.
inline GroupL1Fit fit_group_l1(const StateSpace& space, const DirectedGraph& candidate, const Dataset& data,
                               const GroupL1Config& cfg, const std::optional<Parameters>& init = std::nullopt) {
  cfg.validate();
  require(candidate.n() == space.n(), "candidate graph and state space disagree on node count");
  const Parameters layout = Parameters::zeros(space, candidate);
  Parameters start = init ? *init : layout;
  require(start.same_layout(layout), "initial parameters do not match the candidate graph");
  detail::RegimeLikelihood nll(space, layout, data, true);
  auto fit = detail::fit_grouped(std::move(start), [&](std::span<const double> x, std::span<double> g) {
    return nll(x, g, cfg.lambda2);
  }, cfg, detail::dcg_gauge(), {true, true, false, false, false});
  std::vector<Edge> active;
  for (int e = 0; e < static_cast<int>(candidate.edge_count()); ++e) {
    if (!fit.zero[static_cast<std::size_t>(e)]) active.push_back(candidate.edge(e));
  }
  return {Model(space, candidate, std::move(fit.params)), std::move(active), fit.objective, fit.optimality,
          fit.iterations, fit.converged};
}

/// Same, with every ordered pair of distinct nodes as a candidate edge.
inline GroupL1Fit fit_group_l1(const StateSpace& space, const Dataset& data, const GroupL1Config& cfg) {
  return fit_group_l1(space, DirectedGraph::complete(space.n()), data, cfg);
}

/// Smallest penalty at which all-zero weights are optimal.
inline double lambda_max(const StateSpace& space, const DirectedGraph& candidate, const Dataset& data,
                         double lambda2 = kDefaultLambda2) {
  require(lambda2 >= 0.0, "lambda2 must be nonnegative");
  require(candidate.n() == space.n(), "candidate graph and state space disagree on node count");
  const Parameters layout = Parameters::zeros(space, candidate);
  detail::RegimeLikelihood nll(space, layout, data, true);
  return detail::grouped_lambda_max(layout, [&](std::span<const double> x, std::span<double> g) {
    return nll(x, g, lambda2);
  });
}

/// Drops edges whose weight tables are exactly zero.
inline Model prune(const Model& model) {
  std::vector<Edge> kept;
  std::vector<int> source;
  for (int e = 0; e < static_cast<int>(model.graph().edge_count()); ++e) {
    if (model.params().weight_norm(e) > 0.0) {
      kept.push_back(model.graph().edge(e));
      source.push_back(e);
    }
  }
  DirectedGraph g(model.space().n(), kept);
  Parameters p = Parameters::zeros(model.space(), g);
  for (int i = 0; i < model.space().n(); ++i) {
    auto dst = p.bias_block(i);
    auto src = model.params().bias_block(i);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  for (std::size_t k = 0; k < kept.size(); ++k) {
    auto dst = p.weight_block(static_cast<int>(k));
    auto src = model.params().weight_block(source[k]);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return Model(model.space(), std::move(g), std::move(p));
}

/// `count` log-spaced values from lambda_max / ratio up to lambda_max.
inline std::vector<double> default_lambda_grid(double lmax, int count = 20, double ratio = 1000.0) {
  require(count >= 1, "grid needs at least one point");
  require(ratio > 1.0, "grid ratio must exceed 1");
  if (!(lmax > 0.0)) return {0.0};
  if (count == 1) return {lmax};
  std::vector<double> grid(static_cast<std::size_t>(count));
  const double lo = std::log(lmax / ratio);
  const double hi = std::log(lmax);
  for (int k = 0; k < count; ++k) grid[static_cast<std::size_t>(k)] = std::exp(lo + (hi - lo) * k / (count - 1));
  grid.back() = lmax;
  return grid;
}

struct RegPathPoint {
  double lambda = 0.0;
  Parameters params;
  std::vector<Edge> active_edges;
  /// Mean negative log-likelihood per training row.
  double train_nll = 0.0;
  /// NLL + lambda2 * ||theta||^2 over the training set; nondecreasing in lambda.
  double train_objective = 0.0;
  /// Mean per-row held-out NLL, NaN without held-out data.
  double test_nll = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
};

struct RegPathResult {
  std::vector<RegPathPoint> points;
};

/// Fits from the smallest lambda up, warm-starting each point at the
/// previous solution.
inline RegPathResult reg_path(const StateSpace& space, const DirectedGraph& candidate, const Dataset& train,
                              std::span<const double> lambdas, const GroupL1Config& cfg,
                              const Dataset* heldout = nullptr) {
  require(!lambdas.empty(), "lambda grid is empty");
  for (std::size_t k = 1; k < lambdas.size(); ++k) {
    require(lambdas[k] > lambdas[k - 1], "lambda grid must be strictly increasing");
  }
  require(train.rows() > 0, "training set is empty");
  const Parameters layout = Parameters::zeros(space, candidate);
  detail::RegimeLikelihood nll(space, layout, train, true);
  RegPathResult out;
  std::optional<Parameters> warm;
  for (double lambda : lambdas) {
    GroupL1Config point_cfg = cfg;
    point_cfg.lambda = lambda;
    point_cfg.validate();
    auto fit = detail::fit_grouped(warm ? *warm : layout, [&](std::span<const double> x, std::span<double> g) {
      return nll(x, g, cfg.lambda2);
    }, point_cfg, detail::dcg_gauge(), {true, true, false, false, false});
    RegPathPoint point;
    point.lambda = lambda;
    for (int e = 0; e < static_cast<int>(candidate.edge_count()); ++e) {
      if (!fit.zero[static_cast<std::size_t>(e)]) point.active_edges.push_back(candidate.edge(e));
    }
    const double raw = nll(fit.params.flat(), {}, 0.0);
    point.train_nll = raw / static_cast<double>(train.rows());
    point.train_objective = raw + cfg.lambda2 * fit.params.squared_norm();
    if (heldout != nullptr) point.test_nll = eval_test_nll(Model(space, candidate, fit.params), *heldout);
    point.converged = fit.converged;
    point.params = fit.params;
    warm = std::move(fit.params);
    out.points.push_back(std::move(point));
  }
  return out;
}

}  // namespace dcg
