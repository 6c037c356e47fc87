#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dcg/error.hpp"
#include "dcg/graph_semantics.hpp"
#include "dcg/model.hpp"
#include "dcg/rng.hpp"
#include "dcg/state_space.hpp"

namespace dcg {

/// Probability table over the joint states of an ordered list of query
/// nodes. Entries are row-major with the first query node most significant.
class DistributionTable {
 public:
  DistributionTable() = default;
  DistributionTable(std::vector<int> query, std::vector<int> card, std::vector<double> probs)
      : query_(std::move(query)), card_(std::move(card)), probs_(std::move(probs)) {}

  const std::vector<int>& query() const { return query_; }
  const std::vector<int>& card() const { return card_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }

  std::size_t index(std::span<const State> states) const {
    require(states.size() == query_.size(), "wrong number of query states");
    std::size_t idx = 0;
    for (std::size_t q = 0; q < query_.size(); ++q) {
      require(states[q] >= 0 && states[q] < card_[q], "query state out of range");
      idx = idx * static_cast<std::size_t>(card_[q]) + static_cast<std::size_t>(states[q]);
    }
    return idx;
  }

  std::vector<State> states(std::size_t idx) const {
    std::vector<State> out(query_.size());
    for (std::size_t q = query_.size(); q-- > 0;) {
      out[q] = static_cast<State>(idx % static_cast<std::size_t>(card_[q]));
      idx /= static_cast<std::size_t>(card_[q]);
    }
    return out;
  }

  double operator()(std::initializer_list<State> states) const {
    return probs_[index(std::vector<State>(states))];
  }
  double prob(std::span<const State> states) const { return probs_[index(states)]; }

 private:
  std::vector<int> query_;
  std::vector<int> card_;
  std::vector<double> probs_;
};

/// p(x_query | x_observe, do(x_intervene)) by enumeration: delete the
/// intervened potentials, clamp observed and intervened nodes, sum out the
/// rest and normalize.
inline DistributionTable query(const Model& model, const std::vector<int>& query_nodes,
                               const Assignment& observe = {}, const InterventionAssignment& intervention = {}) {
  const auto& space = model.space();
  observe.validate(space);
  intervention.validate(space);
  require(!query_nodes.empty(), "query needs at least one node");
  auto clamp = detail::make_clamp(space, {&observe, &intervention});
  std::vector<int> card;
  std::vector<char> seen(static_cast<std::size_t>(model.n()), 0);
  for (int q : query_nodes) {
    require(space.contains(q), "query node " + std::to_string(q) + " out of range");
    require(!seen[static_cast<std::size_t>(q)], "query node " + std::to_string(q) + " listed twice");
    require(clamp[static_cast<std::size_t>(q)] == detail::kFree,
            "query node " + std::to_string(q) + " is also observed or intervened");
    seen[static_cast<std::size_t>(q)] = 1;
    card.push_back(space.card(q));
  }
  detail::check_cap(space, clamp, "query");

  detail::RegimeEvaluator eval(model.params());
  const auto active = detail::active_nodes(model.n(), intervention);
  std::vector<double> scores;
  std::vector<std::size_t> cells;
  detail::for_each_completion(space, clamp, [&](const Configuration& x) {
    scores.push_back(eval.score(x, active));
    std::size_t idx = 0;
    for (std::size_t q = 0; q < query_nodes.size(); ++q) {
      idx = idx * static_cast<std::size_t>(card[q]) + static_cast<std::size_t>(x[static_cast<std::size_t>(query_nodes[q])]);
    }
    cells.push_back(idx);
  });
  const double peak = *std::max_element(scores.begin(), scores.end());
  std::size_t table_size = 1;
  for (int k : card) table_size *= static_cast<std::size_t>(k);
  std::vector<double> probs(table_size, 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    const double w = std::exp(scores[k] - peak);
    probs[cells[k]] += w;
    total += w;
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw DegenerateEvidence("evidence has zero probability");
  for (double& p : probs) p /= total;
  return DistributionTable(query_nodes, std::move(card), std::move(probs));
}

/// Inverse-CDF sampler over the free nodes of one regime. The cumulative
/// table follows the fixed enumeration order of for_each_completion.
class ExactSampler {
 public:
  ExactSampler(const Model& model, const InterventionAssignment& intervention = {})
      : space_(model.space()), clamp_((intervention.validate(model.space()), detail::make_clamp(model.space(), {&intervention}))) {
    detail::check_cap(space_, clamp_, "exact sampling");
    for (int i = 0; i < space_.n(); ++i) {
      if (clamp_[static_cast<std::size_t>(i)] == detail::kFree) free_.push_back(i);
    }
    detail::RegimeEvaluator eval(model.params());
    const auto active = detail::active_nodes(model.n(), intervention);
    std::vector<double> scores;
    detail::for_each_completion(space_, clamp_, [&](const Configuration& x) { scores.push_back(eval.score(x, active)); });
    const double lz = log_sum_exp(scores);
    cumulative_.resize(scores.size());
    double running = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
      running += std::exp(scores[k] - lz);
      cumulative_[k] = running;
      if (scores[k] - lz > -745.0) last_positive_ = k;
    }
  }

  /// Index of the first configuration whose running sum reaches u.
  std::size_t locate(double u) const {
    const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
    const auto k = static_cast<std::size_t>(it - cumulative_.begin());
    return std::min(k, last_positive_);
  }

  Configuration decode(std::size_t index) const {
    Configuration x = clamp_;
    for (std::size_t f = free_.size(); f-- > 0;) {
      const int node = free_[f];
      const auto k = static_cast<std::size_t>(space_.card(node));
      x[static_cast<std::size_t>(node)] = static_cast<State>(index % k);
      index /= k;
    }
    return x;
  }

  Configuration sample(Rng& rng) const { return decode(locate(rng.uniform())); }

  std::size_t size() const { return cumulative_.size(); }

 private:
  StateSpace space_;
  Configuration clamp_;
  std::vector<int> free_;
  std::vector<double> cumulative_;
  std::size_t last_positive_ = 0;
};

inline StateMatrix exact_sample(const Model& model, const InterventionAssignment& intervention, std::size_t count,
                                std::uint64_t seed) {
  ExactSampler sampler(model, intervention);
  Rng rng(seed);
  StateMatrix out(model.n());
  for (std::size_t d = 0; d < count; ++d) out.push_back(sampler.sample(rng));
  return out;
}

namespace detail {

/// Unnormalized log p(x_i = s | rest) for every s: node i's own potential
/// plus the edge terms of every child potential that depends on x_i.
inline void local_logits(const Model& model, int i, std::span<const State> x, std::vector<double>& out) {
  const auto& g = model.graph();
  const auto& p = model.params();
  const int k = model.space().card(i);
  out.assign(static_cast<std::size_t>(k), 0.0);
  for (State s = 0; s < k; ++s) {
    double v = p.bias(i, s);
    for (int e : g.in_edges(i)) v += p.weight(e, s, x[static_cast<std::size_t>(g.edge(e).parent)]);
    for (int e : g.out_edges(i)) v += p.weight(e, x[static_cast<std::size_t>(g.edge(e).child)], s);
    out[static_cast<std::size_t>(s)] = v;
  }
}

inline State draw_categorical(std::span<const double> probs, double u) {
  double running = 0.0;
  for (std::size_t s = 0; s < probs.size(); ++s) {
    running += probs[s];
    if (running >= u) return static_cast<State>(s);
  }
  return static_cast<State>(probs.size() - 1);
}

}  // namespace detail

/// Full conditional p(x_i | x_MB(i)); the value of x_i in `x` is ignored.
inline std::vector<double> local_conditional(const Model& model, int i, std::span<const State> x) {
  require(model.space().contains(i), "node index out of range");
  model.space().check_configuration(x);
  std::vector<double> logits;
  detail::local_logits(model, i, x, logits);
  return softmax(logits);
}

enum class ScanOrder { random, systematic };

struct GibbsConfig {
  /// Retained sweeps; one sweep is one update per free node.
  std::size_t sweeps = 1000;
  std::size_t burn_in = 1000;
  std::size_t thin = 1;
  std::uint64_t seed = 0;
  ScanOrder scan = ScanOrder::random;
};

/// Single-site Gibbs chain. Observed and intervened nodes are clamped and
/// never updated; updates use the intervened model, so a child that is an
/// intervention target contributes nothing to its parents' conditionals.
/// Returns one row per retained (post-burn-in, thinned) sweep.
inline StateMatrix gibbs_sample(const Model& model, const GibbsConfig& cfg, const Assignment& observe = {},
                                const InterventionAssignment& intervention = {}) {
  require(cfg.sweeps >= 1, "Gibbs needs at least one sweep");
  require(cfg.thin >= 1, "thinning interval must be at least 1");
  observe.validate(model.space());
  intervention.validate(model.space());
  const auto clamp = detail::make_clamp(model.space(), {&observe, &intervention});
  const Model cut = intervened_model(model, intervention);

  Rng rng(cfg.seed);
  Configuration x = clamp;
  std::vector<int> free_nodes;
  for (int i = 0; i < model.n(); ++i) {
    if (x[static_cast<std::size_t>(i)] == detail::kFree) {
      free_nodes.push_back(i);
      x[static_cast<std::size_t>(i)] = rng.uniform_int(model.space().card(i));
    }
  }

  StateMatrix chain(model.n());
  std::vector<double> logits;
  auto update = [&](int i) {
    detail::local_logits(cut, i, x, logits);
    const auto probs = softmax(logits);
    x[static_cast<std::size_t>(i)] = detail::draw_categorical(probs, rng.uniform());
  };
  const std::size_t total = cfg.burn_in + cfg.sweeps;
  for (std::size_t sweep = 0; sweep < total; ++sweep) {
    if (!free_nodes.empty()) {
      if (cfg.scan == ScanOrder::random) {
        for (std::size_t u = 0; u < free_nodes.size(); ++u) update(free_nodes[rng.uniform_index(free_nodes.size())]);
      } else {
        for (int i : free_nodes) update(i);
      }
    }
    if (sweep >= cfg.burn_in && (sweep - cfg.burn_in) % cfg.thin == 0) chain.push_back(x);
  }
  return chain;
}

}  // namespace dcg
