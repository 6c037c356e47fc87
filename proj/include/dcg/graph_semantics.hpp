#pragma once

#include <algorithm>
#include <deque>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dcg/error.hpp"
#include "dcg/graph.hpp"
#include "dcg/model.hpp"

namespace dcg {

/// Parents, children and co-parents of i, excluding i itself, sorted.
inline std::vector<int> markov_blanket(const DirectedGraph& g, int i) {
  require(i >= 0 && i < g.n(), "node index out of range");
  std::set<int> blanket;
  for (int p : g.parents(i)) blanket.insert(p);
  for (int c : g.children(i)) {
    blanket.insert(c);
    for (int co : g.parents(c)) blanket.insert(co);
  }
  blanket.erase(i);
  return {blanket.begin(), blanket.end()};
}

/// Drop directions and marry parents that share a child.
inline UndirectedGraph moralize(const DirectedGraph& g) {
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : g.edges()) edges.emplace_back(e.parent, e.child);
  for (int c = 0; c < g.n(); ++c) {
    const auto pa = g.parents(c);
    for (std::size_t a = 0; a < pa.size(); ++a) {
      for (std::size_t b = a + 1; b < pa.size(); ++b) edges.emplace_back(pa[a], pa[b]);
    }
  }
  return UndirectedGraph(g.n(), edges);
}

/// Removes every edge whose child is a target. Outgoing edges of targets stay.
inline DirectedGraph intervene_graph(const DirectedGraph& g, const std::vector<int>& targets) {
  std::vector<char> hit(static_cast<std::size_t>(g.n()), 0);
  for (int t : targets) {
    require(t >= 0 && t < g.n(), "intervention target out of range");
    hit[static_cast<std::size_t>(t)] = 1;
  }
  std::vector<Edge> kept;
  for (const auto& e : g.edges()) {
    if (!hit[static_cast<std::size_t>(e.child)]) kept.push_back(e);
  }
  return DirectedGraph(g.n(), std::move(kept));
}

/// Blanket of i once the edges into the intervention targets are cut.
inline std::vector<int> markov_blanket(const DirectedGraph& g, int i, const InterventionAssignment& intervention) {
  return markov_blanket(intervene_graph(g, intervention.nodes()), i);
}

/// The same model with the potentials of intervened nodes reduced to their
/// bias (their incoming edges removed). With the targets clamped, the
/// remaining bias is a constant, so the joint over free nodes is the
/// do() distribution.
inline Model intervened_model(const Model& model, const InterventionAssignment& intervention) {
  intervention.validate(model.space());
  const auto& g = model.graph();
  DirectedGraph cut = intervene_graph(g, intervention.nodes());
  Parameters p = Parameters::zeros(model.space(), cut);
  for (int i = 0; i < model.n(); ++i) {
    std::copy(model.params().bias_block(i).begin(), model.params().bias_block(i).end(), p.bias_block(i).begin());
  }
  for (std::size_t e = 0; e < cut.edge_count(); ++e) {
    const auto& edge = cut.edge(static_cast<int>(e));
    const auto src = model.params().weight_block(g.find_edge(edge.parent, edge.child));
    std::copy(src.begin(), src.end(), p.weight_block(static_cast<int>(e)).begin());
  }
  return Model(model.space(), std::move(cut), std::move(p));
}

/// True iff every path in u from A to B passes through C.
inline bool is_separated(const UndirectedGraph& u, const std::vector<int>& a, const std::vector<int>& b,
                         const std::vector<int>& c) {
  std::vector<int> role(static_cast<std::size_t>(u.n()), 0);
  auto mark = [&](const std::vector<int>& set, int tag) {
    for (int v : set) {
      require(v >= 0 && v < u.n(), "separation query names a node outside the graph");
      require(role[static_cast<std::size_t>(v)] == 0, "separation sets must be disjoint");
      role[static_cast<std::size_t>(v)] = tag;
    }
  };
  mark(a, 1);
  mark(b, 2);
  mark(c, 3);

  std::vector<char> visited(static_cast<std::size_t>(u.n()), 0);
  std::deque<int> frontier(a.begin(), a.end());
  for (int v : a) visited[static_cast<std::size_t>(v)] = 1;
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop_front();
    for (int w : u.neighbors(v)) {
      if (visited[static_cast<std::size_t>(w)] || role[static_cast<std::size_t>(w)] == 3) continue;
      if (role[static_cast<std::size_t>(w)] == 2) return false;
      visited[static_cast<std::size_t>(w)] = 1;
      frontier.push_back(w);
    }
  }
  return true;
}

// Kahn's algorithm; a 2-cycle is a cycle.
inline bool is_acyclic(const DirectedGraph& g) {
  std::vector<int> in_degree(static_cast<std::size_t>(g.n()));
  std::vector<int> ready;
  for (int i = 0; i < g.n(); ++i) {
    in_degree[static_cast<std::size_t>(i)] = static_cast<int>(g.in_edges(i).size());
    if (in_degree[static_cast<std::size_t>(i)] == 0) ready.push_back(i);
  }
  int removed = 0;
  while (!ready.empty()) {
    const int v = ready.back();
    ready.pop_back();
    ++removed;
    for (int e : g.out_edges(v)) {
      if (--in_degree[static_cast<std::size_t>(g.edge(e).child)] == 0) ready.push_back(g.edge(e).child);
    }
  }
  return removed == g.n();
}

}  // namespace dcg
