#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "dcg/estimation.hpp"
#include "dcg/graph_semantics.hpp"
#include "support/oracles.hpp"

namespace dcg {
namespace {

const DirectedGraph kCyclic4(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {2, 1}, {0, 2}});

Model cyclic4(std::uint64_t seed, const StateSpace& space = StateSpace({2, 3, 2, 3})) {
  Rng rng(seed);
  return testing::random_model(space, kCyclic4, rng);
}

Dataset mixed(const Model& m, std::size_t rows, std::uint64_t seed, double obs_share = 0.3) {
  Rng rng(seed);
  return testing::mixed_dataset(m, rows, rng, obs_share);
}

std::vector<double> exact_gradient_check(const Model& m, const Dataset& data, double lambda2, bool pseudo) {
  auto value = [&](std::span<const double> theta) {
    Model probe = m.with_params(m.params().with_values(theta));
    return pseudo ? pseudo_nll_grad(probe, data, lambda2).value : nll_grad(probe, data, lambda2).value;
  };
  return finite_diff_gradient(value, m.params().flat());
}

TEST(NllGrad, ValueMatchesBruteForce) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const auto space = testing::random_space(4, 3, rng);
    const auto m = testing::random_model(space, testing::random_graph(4, 0.5, rng), rng);
    const auto data = testing::mixed_dataset(m, 40, rng);
    EXPECT_NEAR(nll_grad(m, data).value, oracle::nll(m, data), 1e-9 * std::max(1.0, oracle::nll(m, data)));
  }
}

TEST(NllGrad, ZeroParametersSingleObservationalRow) {
  Model m(StateSpace::binary(2), DirectedGraph(2, {{0, 1}}));
  StateMatrix x(2);
  x.push_back(std::vector<State>{1, 0});
  const auto vg = nll_grad(m, Dataset::observational(x), 0.0);
  EXPECT_NEAR(vg.value, 2.0 * std::log(2.0), 1e-14);
  EXPECT_NEAR(vg.grad.bias(0, 0), 0.5, 1e-14);
  EXPECT_NEAR(vg.grad.bias(0, 1), -0.5, 1e-14);
  EXPECT_NEAR(vg.grad.bias(1, 0), -0.5, 1e-14);
  EXPECT_NEAR(vg.grad.bias(1, 1), 0.5, 1e-14);
}

TEST(NllGrad, InterventedNodeContributesNothing) {
  const auto m = cyclic4(3);
  StateMatrix x(4);
  x.push_back(std::vector<State>{1, 2, 0, 1});
  const Dataset row(x, {0, 1, 0, 0});
  const auto vg = nll_grad(m, row, 0.0);
  for (double v : vg.grad.bias_block(1)) EXPECT_EQ(v, 0.0);
  for (int e : m.graph().in_edges(1)) {
    for (double v : vg.grad.weight_block(e)) EXPECT_EQ(v, 0.0);
  }
}

TEST(NllGrad, MatchesFiniteDifferences) {
  const auto m = cyclic4(7);
  const auto data = mixed(m, 50, 8);
  for (double lambda2 : {0.0, 1e-4, 0.3}) {
    const auto analytic = nll_grad(m, data, lambda2).grad;
    const auto numeric = exact_gradient_check(m, data, lambda2, false);
    EXPECT_LE(testing::max_rel_error(analytic.flat(), numeric), 1e-6) << "lambda2 " << lambda2;
  }
}

TEST(NllGrad, GradientMomentIdentity) {
  const auto m = cyclic4(11);
  const auto data = mixed(m, 60, 12);
  const double lambda2 = 0.01;
  const auto g = nll_grad(m, data, lambda2).grad;
  for (int i = 0; i < 4; ++i) {
    for (State s = 0; s < m.space().card(i); ++s) {
      double counts = 0.0;
      double expected = 0.0;
      for (std::size_t d = 0; d < data.rows(); ++d) {
        if (data.clamped(d, i)) continue;
        counts += data(d, i) == s ? 1.0 : 0.0;
        expected += query(m, {i}, {}, data.regime(d)).probs()[static_cast<std::size_t>(s)];
      }
      EXPECT_NEAR(g.bias(i, s) + counts - 2.0 * lambda2 * m.params().bias(i, s), expected, 1e-10);
    }
  }
}

TEST(NllGrad, ShuffleInvariant) {
  const auto m = cyclic4(13);
  const auto data = mixed(m, 80, 14);
  std::vector<std::size_t> perm(data.rows());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(15);
  for (std::size_t k = perm.size(); k > 1; --k) std::swap(perm[k - 1], perm[rng.uniform_index(k)]);
  const auto a = nll_grad(m, data, 1e-4);
  const auto b = nll_grad(m, data.subset(perm), 1e-4);
  EXPECT_NEAR(a.value, b.value, 1e-9 * std::abs(a.value));
  EXPECT_LE(testing::max_rel_error(a.grad.flat(), b.grad.flat()), 1e-9);
}

TEST(NllGrad, Convex) {
  const auto m = cyclic4(17);
  const auto data = mixed(m, 50, 18);
  Rng rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p1 = testing::random_params(m.params(), rng, 2.0);
    const auto p2 = testing::random_params(m.params(), rng, 2.0);
    const double t = 0.05 + 0.9 * rng.uniform();
    std::vector<double> mid(p1.size());
    for (std::size_t k = 0; k < mid.size(); ++k) mid[k] = t * p1.flat()[k] + (1.0 - t) * p2.flat()[k];
    const double f1 = nll_grad(m.with_params(p1), data).value;
    const double f2 = nll_grad(m.with_params(p2), data).value;
    const double fm = nll_grad(m.with_params(p1.with_values(mid)), data).value;
    EXPECT_LE(fm, t * f1 + (1.0 - t) * f2 + 1e-9);
  }
}

TEST(NllGrad, CapacityErrorNamesPseudoLikelihood) {
  const auto m = cyclic4(21);
  const auto data = mixed(m, 5, 22, 1.0);
  ScopedEnumerationCap cap(8);
  try {
    nll_grad(m, data);
    FAIL() << "expected a capacity error";
  } catch (const CapacityError& e) {
    EXPECT_NE(std::string(e.what()).find("pseudo"), std::string::npos);
  }
}

TEST(PseudoNllGrad, MatchesFiniteDifferences) {
  const auto m = cyclic4(23);
  const auto data = mixed(m, 50, 24);
  for (double lambda2 : {0.0, 1e-4}) {
    const auto analytic = pseudo_nll_grad(m, data, lambda2).grad;
    const auto numeric = exact_gradient_check(m, data, lambda2, true);
    EXPECT_LE(testing::max_rel_error(analytic.flat(), numeric), 1e-6);
  }
}

TEST(PseudoNllGrad, EqualsExactNllWithoutEdges) {
  Rng rng(25);
  const auto m = testing::random_model(StateSpace({3, 2, 4}), DirectedGraph::empty(3), rng);
  const auto data = testing::mixed_dataset(m, 30, rng);
  EXPECT_NEAR(pseudo_nll_grad(m, data).value, nll_grad(m, data).value, 1e-12);
}

TEST(PseudoNllGrad, SumsLocalConditionalsOfIntervenedModel) {
  const auto m = cyclic4(27);
  const auto data = mixed(m, 20, 28);
  double expected = 0.0;
  for (std::size_t d = 0; d < data.rows(); ++d) {
    const auto regime = data.regime(d);
    const auto cut = intervened_model(m, regime);
    Configuration x(data.row(d).begin(), data.row(d).end());
    for (int i = 0; i < 4; ++i) {
      if (data.clamped(d, i)) continue;
      std::vector<Assignment::Entry> entries;
      for (int j = 0; j < 4; ++j) {
        if (j != i) entries.emplace_back(j, x[static_cast<std::size_t>(j)]);
      }
      const auto p = oracle::marginal(cut, {i}, Assignment(entries));
      expected -= std::log(p[static_cast<std::size_t>(x[static_cast<std::size_t>(i)])]);
    }
  }
  EXPECT_NEAR(pseudo_nll_grad(m, data).value, expected, 1e-10);
}

TEST(FiniteDiff, QuadraticGradient) {
  auto f = [](std::span<const double> x) { return 3.0 * x[0] * x[0] + x[0] * x[1] - 2.0 * x[1]; };
  const std::vector<double> x{0.7, -1.3};
  const auto g = finite_diff_gradient(f, x);
  EXPECT_NEAR(g[0], 6.0 * 0.7 - 1.3, 1e-9);
  EXPECT_NEAR(g[1], 0.7 - 2.0, 1e-9);
}

TEST(FitMap, SymmetricDataGivesUniformBias) {
  StateMatrix x(1);
  for (int k = 0; k < 10; ++k) x.push_back(std::vector<State>{k % 2});
  const auto fit = fit_map(StateSpace::binary(1), DirectedGraph::empty(1), Dataset::observational(x));
  ASSERT_TRUE(fit.converged);
  const auto p = softmax(fit.model.params().bias_block(0));
  EXPECT_NEAR(p[0], 0.5, 1e-6);
}

TEST(FitMap, ReachesToleranceAndIsUnique) {
  const auto m = cyclic4(31);
  const auto data = mixed(m, 200, 32);
  // Near-flat directions have curvature close to 2 * lambda2, so coordinate
  // agreement needs a gradient tolerance well below the default.
  FitConfig cfg;
  cfg.tol = 1e-9;
  cfg.memory = 50;
  cfg.max_iter = 20000;
  Rng rng(33);
  const auto a = fit_map(m.space(), m.graph(), data, cfg, testing::random_params(m.params(), rng, 2.0));
  const auto b = fit_map(m.space(), m.graph(), data, cfg, testing::random_params(m.params(), rng, 2.0));
  ASSERT_TRUE(a.converged);
  ASSERT_TRUE(b.converged);
  const auto g = nll_grad(a.model, data, cfg.lambda2).grad;
  double worst = 0.0;
  for (double v : g.flat()) worst = std::max(worst, std::abs(v));
  EXPECT_LE(worst, cfg.tol);
  for (std::size_t k = 0; k < a.model.params().size(); ++k) {
    EXPECT_NEAR(a.model.params().flat()[k], b.model.params().flat()[k], 1e-4) << "coordinate " << k;
  }
}

TEST(FitMap, DeterministicForFixedInput) {
  const auto m = cyclic4(35);
  const auto data = mixed(m, 100, 36);
  const auto a = fit_map(m.space(), m.graph(), data);
  const auto b = fit_map(m.space(), m.graph(), data);
  EXPECT_EQ(a.model.params(), b.model.params());
}

TEST(FitMap, RequiresPositiveLambda2) {
  const auto m = cyclic4(37);
  FitConfig cfg;
  cfg.lambda2 = 0.0;
  EXPECT_THROW(fit_map(m.space(), m.graph(), mixed(m, 10, 38), cfg), InvalidInput);
}

TEST(FitMap, NonConvergenceIsFlagged) {
  const auto m = cyclic4(39);
  FitConfig cfg;
  cfg.max_iter = 2;
  const auto fit = fit_map(m.space(), m.graph(), mixed(m, 50, 40), cfg);
  EXPECT_FALSE(fit.converged);
  EXPECT_GT(fit.grad_norm, cfg.tol);
}

Model three_node_generator() {
  Rng rng(41);
  return testing::random_model(StateSpace::binary(3), DirectedGraph(3, {{0, 1}, {1, 2}, {2, 0}, {1, 0}}), rng);
}

TEST(FitMap, RefitFromSamplesRecoversJoint) {
  const auto truth = three_node_generator();
  const auto samples = exact_sample(truth, {}, 50000, 42);
  const auto fit = fit_map(truth.space(), truth.graph(), Dataset::observational(samples));
  ASSERT_TRUE(fit.converged);
  EXPECT_LE(oracle::total_variation(oracle::joint(fit.model), oracle::joint(truth)), 0.01);
}

TEST(FitPseudo, RefitFromSamplesRecoversJoint) {
  const auto truth = three_node_generator();
  const auto samples = exact_sample(truth, {}, 50000, 43);
  const auto fit = fit_pseudo(truth.space(), truth.graph(), Dataset::observational(samples));
  ASSERT_TRUE(fit.converged);
  EXPECT_LE(oracle::total_variation(oracle::joint(fit.model), oracle::joint(truth)), 0.05);
}

TEST(EvalTestNll, ZeroModelOneIntervenedNode) {
  const int n = 5;
  Model m(StateSpace::binary(n), DirectedGraph::complete(n));
  StateMatrix x(n);
  x.push_back(std::vector<State>{0, 1, 1, 0, 1});
  const Dataset row(x, {0, 0, 1, 0, 0});
  EXPECT_NEAR(eval_test_nll(m, row), (n - 1) * std::log(2.0), 1e-12);
}

TEST(EvalTestNll, MatchesLogLikelihoodSum) {
  const auto m = cyclic4(45);
  const auto data = mixed(m, 30, 46);
  double total = 0.0;
  for (std::size_t d = 0; d < data.rows(); ++d) total -= log_likelihood(m, data.row(d), data.regime(d));
  EXPECT_NEAR(eval_test_nll(m, data), total / 30.0, 1e-10);
}

}  // namespace
}  // namespace dcg
