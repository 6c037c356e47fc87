#include <cmath>

#include <gtest/gtest.h>

#include "dcg/model.hpp"
#include "support/oracles.hpp"

namespace dcg {
namespace {

Model two_cycle(std::uint64_t seed) {
  Rng rng(seed);
  return testing::random_model(StateSpace::binary(2), DirectedGraph(2, {{0, 1}, {1, 0}}), rng);
}

Model three_node_cycle(std::uint64_t seed) {
  Rng rng(seed);
  return testing::random_model(StateSpace({2, 3, 2}), DirectedGraph(3, {{0, 1}, {1, 2}, {2, 0}, {1, 0}}), rng);
}

TEST(LogPotential, ZeroParametersGiveZero) {
  Model m(StateSpace({2, 3, 2}), DirectedGraph::complete(3));
  for (const auto& x : oracle::all_configurations(m.space())) {
    for (int i = 0; i < 3; ++i) EXPECT_EQ(log_potential(m, i, x), 0.0);
  }
}

TEST(LogPotential, IsolatedNodeIsItsBias) {
  StateSpace space = StateSpace::binary(2);
  DirectedGraph g = DirectedGraph::empty(2);
  Parameters p = Parameters::zeros(space, g);
  p.bias(0, 1) = std::log(3.0);
  Model m(space, g, p);
  EXPECT_DOUBLE_EQ(log_potential(m, 0, Configuration{1, 0}), std::log(3.0));
}

TEST(LogPotential, TwoCycleMatchesTermSum) {
  const Model m = two_cycle(11);
  for (const auto& x : oracle::all_configurations(m.space())) {
    for (int i = 0; i < 2; ++i) {
      EXPECT_NEAR(log_potential(m, i, x), oracle::node_log_potential(m, i, x), 1e-15);
      // Only the edge into i contributes.
      const int j = 1 - i;
      const int e = m.graph().find_edge(j, i);
      EXPECT_NEAR(log_potential(m, i, x), m.params().bias(i, x[i]) + m.params().weight(e, x[i], x[j]), 1e-15);
    }
  }
}

TEST(LogPotential, RejectsOutOfRangeState) {
  Model m(StateSpace::binary(2), DirectedGraph::empty(2));
  EXPECT_THROW(log_potential(m, 0, Configuration{2, 0}), InvalidInput);
  EXPECT_THROW(log_potential(m, 0, Configuration{0}), InvalidInput);
}

TEST(UnnormalizedLogScore, EmptyInterventionSumsAllPotentials) {
  const Model m = three_node_cycle(3);
  for (const auto& x : oracle::all_configurations(m.space())) {
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) sum += oracle::node_log_potential(m, i, x);
    EXPECT_NEAR(unnormalized_log_score(m, x), sum, 1e-13);
  }
}

TEST(UnnormalizedLogScore, FullInterventionIsEmptyProduct) {
  const Model m = three_node_cycle(4);
  EXPECT_EQ(unnormalized_log_score(m, Configuration{1, 2, 0}, {{0, 1}, {1, 2}, {2, 0}}), 0.0);
}

TEST(UnnormalizedLogScore, InterventionDropsTargetTerm) {
  const Model m = three_node_cycle(5);
  for (State a = 0; a < 2; ++a) {
    for (State c = 0; c < 2; ++c) {
      const Configuration x{a, 0, c};
      EXPECT_NEAR(unnormalized_log_score(m, x, {{1, 0}}),
                  unnormalized_log_score(m, x) - oracle::node_log_potential(m, 1, x), 1e-13);
    }
  }
}

TEST(UnnormalizedLogScore, ContradictingInterventionIsRejected) {
  const Model m = three_node_cycle(6);
  EXPECT_THROW(unnormalized_log_score(m, Configuration{0, 1, 0}, {{1, 0}}), InvalidInput);
}

TEST(LogPartition, UniformBinaryTriple) {
  Model m(StateSpace::binary(3), DirectedGraph::complete(3));
  EXPECT_NEAR(log_partition(m), std::log(8.0), 1e-14);
}

TEST(LogPartition, SingleBinaryNode) {
  StateSpace space = StateSpace::binary(1);
  DirectedGraph g = DirectedGraph::empty(1);
  Parameters p = Parameters::zeros(space, g);
  p.bias(0, 1) = std::log(3.0);
  EXPECT_NEAR(log_partition(Model(space, g, p)), std::log(4.0), 1e-14);
}

TEST(LogPartition, TwoCycleMatchesEnumeration) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Model m = two_cycle(seed);
    EXPECT_NEAR(log_partition(m), oracle::log_partition(m), 1e-12);
    EXPECT_NEAR(log_partition(m, {{1, 0}}), oracle::log_partition(m, {{1, 0}}), 1e-12);
  }
}

TEST(LogPartition, CapExceededIsCapacityError) {
  Model m(StateSpace::binary(6), DirectedGraph::empty(6));
  ScopedEnumerationCap cap(32);
  EXPECT_THROW(log_partition(m), CapacityError);
  EXPECT_NO_THROW(log_partition(m, {{0, 1}}));
}

TEST(LogPartition, LargeParametersDoNotOverflow) {
  Rng rng(9);
  const Model m = testing::random_model(StateSpace::binary(4), DirectedGraph::complete(4), rng, 200.0);
  EXPECT_TRUE(std::isfinite(log_partition(m)));
}

TEST(LogLikelihood, UniformPair) {
  Model m(StateSpace::binary(2), DirectedGraph(2, {{0, 1}}));
  EXPECT_NEAR(log_likelihood(m, Configuration{0, 1}), std::log(0.25), 1e-14);
  for (State v = 0; v < 2; ++v) {
    EXPECT_NEAR(log_likelihood(m, Configuration{v, 1}, {{0, v}}), std::log(0.5), 1e-14);
  }
}

TEST(LogLikelihood, MatchesOracleAndNormalizes) {
  const Model m = three_node_cycle(21);
  for (const Assignment& s : {Assignment{}, Assignment{{2, 1}}, Assignment{{0, 0}, {1, 2}}}) {
    const auto configs = oracle::all_configurations(m.space());
    const auto p = oracle::joint(m, s);
    double total = 0.0;
    for (std::size_t c = 0; c < configs.size(); ++c) {
      if (!oracle::consistent(configs[c], s)) continue;
      const double ll = log_likelihood(m, configs[c], s);
      EXPECT_NEAR(ll, std::log(p[c]), 1e-12);
      total += std::exp(ll);
    }
    EXPECT_NEAR(total, 1.0, 1e-10);
  }
}

// Property: normalization on random models and random regimes.
TEST(ModelProperties, LikelihoodNormalizesUnderAnyIntervention) {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + rng.uniform_int(4);
    const StateSpace space = testing::random_space(n, 3, rng);
    const Model m = testing::random_model(space, testing::random_graph(n, 0.5, rng), rng);
    std::vector<Assignment::Entry> targets;
    for (int i = 0; i < n; ++i) {
      if (rng.bernoulli(0.3)) targets.emplace_back(i, rng.uniform_int(space.card(i)));
    }
    const Assignment s(targets);
    double total = 0.0;
    for (const auto& x : oracle::all_configurations(space)) {
      if (oracle::consistent(x, s)) total += std::exp(log_likelihood(m, x, s));
    }
    EXPECT_NEAR(total, 1.0, 1e-10);
  }
}

TEST(ModelProperties, RescalingOnePotentialShiftsLogZOnly) {
  Rng rng(78);
  for (int trial = 0; trial < 20; ++trial) {
    const StateSpace space = testing::random_space(3, 3, rng);
    const Model m = testing::random_model(space, testing::random_graph(3, 0.6, rng), rng);
    const int node = rng.uniform_int(3);
    const double c = 3.0 * rng.normal();
    Parameters shifted = m.params();
    for (double& b : shifted.bias_block(node)) b += c;
    const Model m2 = m.with_params(shifted);
    EXPECT_NEAR(log_partition(m2) - log_partition(m), c, 1e-12);
    for (const auto& x : oracle::all_configurations(space)) {
      EXPECT_NEAR(log_likelihood(m2, x), log_likelihood(m, x), 1e-12);
    }
  }
}

TEST(ModelProperties, AcyclicLocallyNormalizedTablesHaveUnitPartition) {
  Rng rng(79);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + rng.uniform_int(3);
    const StateSpace space = testing::random_space(n, 3, rng);
    const auto tm = testing::TableModel::locally_normalized(space, testing::random_dag(n, 0.7, rng), rng);
    EXPECT_NEAR(tm.log_partition(), 0.0, 1e-12);
  }
}

TEST(ModelConstruction, RejectsMismatchedShapes) {
  const StateSpace space = StateSpace::binary(3);
  const Parameters p = Parameters::zeros(space, DirectedGraph::complete(3));
  EXPECT_THROW(Model(space, DirectedGraph::empty(3), p), InvalidInput);
  EXPECT_THROW(Model(StateSpace::binary(2), DirectedGraph::empty(3)), InvalidInput);
  Parameters bad = Parameters::zeros(space, DirectedGraph::empty(3));
  bad.bias(0, 0) = NAN;
  EXPECT_THROW(Model(space, DirectedGraph::empty(3), bad), InvalidInput);
  EXPECT_THROW(StateSpace({2, 1}), InvalidInput);
  EXPECT_THROW(DirectedGraph(2, {{0, 0}}), InvalidInput);
  EXPECT_THROW(DirectedGraph(2, {{0, 1}, {0, 1}}), InvalidInput);
  EXPECT_NO_THROW(DirectedGraph(2, {{0, 1}, {1, 0}}));
  EXPECT_THROW(Assignment({{0, 1}, {0, 0}}), InvalidInput);
}

}  // namespace
}  // namespace dcg
