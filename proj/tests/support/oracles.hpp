#pragma once

// Brute-force reference computations used as test oracles. Everything
// here walks the full configuration space with its own indexing and reads
// the parameters directly, without the library's evaluation routines.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <tuple>
#include <vector>

#include "dcg/dataset.hpp"
#include "dcg/inference.hpp"
#include "dcg/model.hpp"
#include "dcg/rng.hpp"

namespace dcg::oracle {

inline std::vector<Configuration> all_configurations(const StateSpace& space) {
  std::uint64_t total = 1;
  for (int k : space.cards()) total *= static_cast<std::uint64_t>(k);
  std::vector<Configuration> out;
  out.reserve(total);
  for (std::uint64_t idx = 0; idx < total; ++idx) {
    Configuration x(static_cast<std::size_t>(space.n()));
    std::uint64_t rest = idx;
    for (int i = space.n() - 1; i >= 0; --i) {
      x[static_cast<std::size_t>(i)] = static_cast<State>(rest % static_cast<std::uint64_t>(space.card(i)));
      rest /= static_cast<std::uint64_t>(space.card(i));
    }
    out.push_back(std::move(x));
  }
  return out;
}

/// log phi_i written out term by term from the edge list.
inline double node_log_potential(const Model& m, int i, const Configuration& x) {
  double v = m.params().bias(i, x[static_cast<std::size_t>(i)]);
  const auto& edges = m.graph().edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges[e].child != i) continue;
    v += m.params().weight(static_cast<int>(e), x[static_cast<std::size_t>(i)],
                           x[static_cast<std::size_t>(edges[e].parent)]);
  }
  return v;
}

inline bool consistent(const Configuration& x, const Assignment& a) {
  for (const auto& [node, state] : a.entries()) {
    if (x[static_cast<std::size_t>(node)] != state) return false;
  }
  return true;
}

/// Probability of every full configuration under do(intervention) and
/// conditioning on `observe`; inconsistent configurations get zero.
/// Computed in linear scale after subtracting the max log-score.
inline std::vector<double> joint(const Model& m, const Assignment& intervention = {}, const Assignment& observe = {}) {
  const auto configs = all_configurations(m.space());
  std::vector<double> logw(configs.size(), -INFINITY);
  double peak = -INFINITY;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    if (!consistent(configs[c], intervention) || !consistent(configs[c], observe)) continue;
    double s = 0.0;
    for (int i = 0; i < m.n(); ++i) {
      if (!intervention.contains(i)) s += node_log_potential(m, i, configs[c]);
    }
    logw[c] = s;
    peak = std::max(peak, s);
  }
  std::vector<double> p(configs.size(), 0.0);
  double total = 0.0;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    if (std::isfinite(logw[c])) {
      p[c] = std::exp(logw[c] - peak);
      total += p[c];
    }
  }
  for (double& v : p) v /= total;
  return p;
}

inline double log_partition(const Model& m, const Assignment& intervention = {}) {
  double total = 0.0;
  for (const auto& x : all_configurations(m.space())) {
    if (!consistent(x, intervention)) continue;
    double s = 0.0;
    for (int i = 0; i < m.n(); ++i) {
      if (!intervention.contains(i)) s += node_log_potential(m, i, x);
    }
    total += std::exp(s);
  }
  return std::log(total);
}

/// Marginal table over `query` (first node most significant).
inline std::vector<double> marginal(const Model& m, const std::vector<int>& query, const Assignment& observe = {},
                                    const Assignment& intervention = {}) {
  const auto configs = all_configurations(m.space());
  const auto p = joint(m, intervention, observe);
  std::size_t size = 1;
  for (int q : query) size *= static_cast<std::size_t>(m.space().card(q));
  std::vector<double> table(size, 0.0);
  for (std::size_t c = 0; c < configs.size(); ++c) {
    std::size_t idx = 0;
    for (int q : query) idx = idx * static_cast<std::size_t>(m.space().card(q)) + static_cast<std::size_t>(configs[c][static_cast<std::size_t>(q)]);
    table[idx] += p[c];
  }
  return table;
}

inline double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
  return 0.5 * s;
}

/// Empirical distribution of full configurations (same indexing as all_configurations).
inline std::vector<double> empirical(const StateSpace& space, const StateMatrix& samples) {
  std::size_t total = 1;
  for (int k : space.cards()) total *= static_cast<std::size_t>(k);
  std::vector<double> freq(total, 0.0);
  for (std::size_t d = 0; d < samples.rows(); ++d) {
    std::size_t idx = 0;
    for (int i = 0; i < space.n(); ++i) idx = idx * static_cast<std::size_t>(space.card(i)) + static_cast<std::size_t>(samples(d, i));
    freq[idx] += 1.0;
  }
  for (double& f : freq) f /= static_cast<double>(samples.rows());
  return freq;
}


/// Largest total-variation gap between p(x_a, x_b | x_c) and
/// p(x_a | x_c) p(x_b | x_c) over assignments to the node set `c` with
/// positive probability. Zero means x_a and x_b are independent given x_c.
inline double independence_gap(const StateSpace& space, const std::vector<double>& p, const std::vector<int>& a,
                               const std::vector<int>& b, const std::vector<int>& c) {
  const auto configs = all_configurations(space);
  auto key = [&](const Configuration& x, const std::vector<int>& nodes) {
    std::vector<State> k;
    for (int v : nodes) k.push_back(x[static_cast<std::size_t>(v)]);
    return k;
  };
  using Key = std::vector<State>;
  std::map<Key, double> pc;
  std::map<std::pair<Key, Key>, double> pac, pbc;
  std::map<std::tuple<Key, Key, Key>, double> pabc;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    const auto kc = key(configs[k], c), ka = key(configs[k], a), kb = key(configs[k], b);
    pc[kc] += p[k];
    pac[{ka, kc}] += p[k];
    pbc[{kb, kc}] += p[k];
    pabc[{ka, kb, kc}] += p[k];
  }
  double worst = 0.0;
  for (const auto& [kc, mass] : pc) {
    if (mass < 1e-300) continue;
    double tv = 0.0;
    for (const auto& [kac, va] : pac) {
      if (kac.second != kc) continue;
      for (const auto& [kbc, vb] : pbc) {
        if (kbc.second != kc) continue;
        const double joint_ab = pabc[{kac.first, kbc.first, kc}] / mass;
        tv += std::abs(joint_ab - (va / mass) * (vb / mass));
      }
    }
    worst = std::max(worst, 0.5 * tv);
  }
  return worst;
}

inline std::size_t config_index(const StateSpace& space, std::span<const State> x) {
  std::size_t idx = 0;
  for (int i = 0; i < space.n(); ++i) idx = idx * static_cast<std::size_t>(space.card(i)) + static_cast<std::size_t>(x[static_cast<std::size_t>(i)]);
  return idx;
}

/// -sum_d log p(row d | do(row d's clamped nodes)), one brute-force joint per row.
inline double nll(const Model& m, const Dataset& data) {
  double total = 0.0;
  for (std::size_t d = 0; d < data.rows(); ++d) {
    const auto p = joint(m, data.regime(d));
    total -= std::log(p[config_index(m.space(), data.row(d))]);
  }
  return total;
}

}  // namespace dcg::oracle

namespace dcg::testing {

inline DirectedGraph random_graph(int n, double edge_prob, Rng& rng) {
  std::vector<Edge> edges;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (i != j && rng.bernoulli(edge_prob)) edges.push_back({j, i});
    }
  }
  return DirectedGraph(n, std::move(edges));
}

/// Acyclic graph consistent with a random topological order.
inline DirectedGraph random_dag(int n, double edge_prob, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i) std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
  std::vector<Edge> edges;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (rng.bernoulli(edge_prob)) edges.push_back({order[static_cast<std::size_t>(a)], order[static_cast<std::size_t>(b)]});
    }
  }
  return DirectedGraph(n, std::move(edges));
}

inline Parameters random_params(const Parameters& layout, Rng& rng, double scale = 1.0) {
  Parameters p = layout;
  for (double& v : p.flat()) v = scale * rng.normal();
  return p;
}

inline Model random_model(const StateSpace& space, const DirectedGraph& graph, Rng& rng, double scale = 1.0) {
  return Model(space, graph, random_params(Parameters::zeros(space, graph), rng, scale));
}

inline StateSpace random_space(int n, int max_card, Rng& rng) {
  std::vector<int> card(static_cast<std::size_t>(n));
  for (int& k : card) k = 2 + rng.uniform_int(max_card - 1);
  return StateSpace(card);
}

/// Interventional-potential model with an explicit table per node, indexed
/// by (x_i, parent states). Only used to exercise the acyclic,
/// locally-normalized special case.
struct TableModel {
  StateSpace space;
  DirectedGraph graph;
  /// tables[i][parent_index * k_i + x_i]; parents in graph.parents(i) order,
  /// first parent most significant.
  std::vector<std::vector<double>> tables;

  std::size_t parent_index(int i, const Configuration& x) const {
    std::size_t idx = 0;
    for (int p : graph.parents(i)) idx = idx * static_cast<std::size_t>(space.card(p)) + static_cast<std::size_t>(x[static_cast<std::size_t>(p)]);
    return idx;
  }

  double phi(int i, const Configuration& x) const {
    return tables[static_cast<std::size_t>(i)][parent_index(i, x) * static_cast<std::size_t>(space.card(i)) +
                                              static_cast<std::size_t>(x[static_cast<std::size_t>(i)])];
  }

  double log_partition() const {
    double total = 0.0;
    for (const auto& x : oracle::all_configurations(space)) {
      double prod = 1.0;
      for (int i = 0; i < space.n(); ++i) prod *= phi(i, x);
      total += prod;
    }
    return std::log(total);
  }

  /// Random tables with sum_{x_i} phi = scale_i for every parent state.
  static TableModel locally_normalized(const StateSpace& space, const DirectedGraph& graph, Rng& rng,
                                       bool random_scale = false) {
    TableModel m{space, graph, {}};
    for (int i = 0; i < space.n(); ++i) {
      std::size_t parent_states = 1;
      for (int p : graph.parents(i)) parent_states *= static_cast<std::size_t>(space.card(p));
      const auto k = static_cast<std::size_t>(space.card(i));
      const double scale = random_scale ? std::exp(rng.normal()) : 1.0;
      std::vector<double> table(parent_states * k);
      for (std::size_t ps = 0; ps < parent_states; ++ps) {
        double sum = 0.0;
        for (std::size_t s = 0; s < k; ++s) sum += (table[ps * k + s] = 0.05 + rng.uniform());
        for (std::size_t s = 0; s < k; ++s) table[ps * k + s] *= scale / sum;
      }
      m.tables.push_back(std::move(table));
    }
    return m;
  }
};

/// Rows drawn exactly from `m`; each row is observational with probability
/// obs_share, otherwise one uniform node is clamped to a uniform state.
inline Dataset mixed_dataset(const Model& m, std::size_t rows, Rng& rng, double obs_share = 0.3) {
  const int n = m.space().n();
  StateMatrix x(n);
  std::vector<char> mask;
  for (std::size_t d = 0; d < rows; ++d) {
    Assignment regime;
    std::vector<char> mrow(static_cast<std::size_t>(n), 0);
    if (!rng.bernoulli(obs_share)) {
      const int k = rng.uniform_int(n);
      regime = Assignment({{k, rng.uniform_int(m.space().card(k))}});
      mrow[static_cast<std::size_t>(k)] = 1;
    }
    const auto row = ExactSampler(m, regime).sample(rng);
    x.push_back(row);
    mask.insert(mask.end(), mrow.begin(), mrow.end());
  }
  return Dataset(std::move(x), std::move(mask));
}

/// max_k |a_k - b_k| / max(1, |a_k|, |b_k|).
inline double max_rel_error(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double denom = std::max({1.0, std::abs(a[k]), std::abs(b[k])});
    worst = std::max(worst, std::abs(a[k] - b[k]) / denom);
  }
  return worst;
}

}  // namespace dcg::testing
