#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dcg/error.hpp"

namespace dcg {

struct Edge {
  int parent;
  int child;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Directed graph over nodes 0..n-1 in which cycles, including 2-cycles,
/// are allowed. Edge indices are stable: edge e is edges()[e].
class DirectedGraph {
 public:
  DirectedGraph() = default;

  DirectedGraph(int n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
    require(n_ >= 1, "graph needs at least one node");
    in_.assign(static_cast<std::size_t>(n_), {});
    out_.assign(static_cast<std::size_t>(n_), {});
    std::set<std::pair<int, int>> seen;
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const auto [j, i] = edges_[e];
      require(j >= 0 && j < n_ && i >= 0 && i < n_,
              "edge " + std::to_string(j) + " -> " + std::to_string(i) + " names a node outside the graph");
      require(j != i, "self-loop on node " + std::to_string(i));
      require(seen.emplace(j, i).second, "duplicate edge " + std::to_string(j) + " -> " + std::to_string(i));
      in_[static_cast<std::size_t>(i)].push_back(static_cast<int>(e));
      out_[static_cast<std::size_t>(j)].push_back(static_cast<int>(e));
    }
  }

  static DirectedGraph empty(int n) { return DirectedGraph(n, {}); }

  /// Every ordered pair (j -> i), j != i, in row-major (j, i) order.
  static DirectedGraph complete(int n) {
    std::vector<Edge> edges;
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        if (i != j) edges.push_back({j, i});
      }
    }
    return DirectedGraph(n, std::move(edges));
  }

  int n() const { return n_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(int e) const { return edges_[static_cast<std::size_t>(e)]; }

  /// Indices of edges whose child is i.
  const std::vector<int>& in_edges(int i) const { return in_[static_cast<std::size_t>(i)]; }
  /// Indices of edges whose parent is i.
  const std::vector<int>& out_edges(int i) const { return out_[static_cast<std::size_t>(i)]; }

  std::vector<int> parents(int i) const {
    std::vector<int> out;
    for (int e : in_edges(i)) out.push_back(edge(e).parent);
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<int> children(int i) const {
    std::vector<int> out;
    for (int e : out_edges(i)) out.push_back(edge(e).child);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Edge index of (parent -> child), or -1.
  int find_edge(int parent, int child) const {
    for (int e : in_edges(child)) {
      if (edge(e).parent == parent) return e;
    }
    return -1;
  }

  bool has_edge(int parent, int child) const { return find_edge(parent, child) >= 0; }

  friend bool operator==(const DirectedGraph& a, const DirectedGraph& b) {
    return a.n_ == b.n_ && a.edges_ == b.edges_;
  }

 private:
  int n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> in_;
  std::vector<std::vector<int>> out_;
};

/// Simple undirected graph; edges are stored as (low, high) pairs in sorted order.
class UndirectedGraph {
 public:
  UndirectedGraph() = default;

  UndirectedGraph(int n, const std::vector<std::pair<int, int>>& edges) : n_(n) {
    require(n_ >= 1, "graph needs at least one node");
    adjacency_.assign(static_cast<std::size_t>(n_), {});
    std::set<std::pair<int, int>> unique;
    for (auto [a, b] : edges) {
      require(a >= 0 && a < n_ && b >= 0 && b < n_, "undirected edge names a node outside the graph");
      require(a != b, "self-loop on node " + std::to_string(a));
      unique.emplace(std::min(a, b), std::max(a, b));
    }
    edges_.assign(unique.begin(), unique.end());
    for (auto [a, b] : edges_) {
      adjacency_[static_cast<std::size_t>(a)].push_back(b);
      adjacency_[static_cast<std::size_t>(b)].push_back(a);
    }
    for (auto& list : adjacency_) std::sort(list.begin(), list.end());
  }

  /// All n(n-1)/2 pairs.
  static UndirectedGraph complete(int n) {
    std::vector<std::pair<int, int>> edges;
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) edges.emplace_back(a, b);
    }
    return UndirectedGraph(n, edges);
  }

  int n() const { return n_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int i) const { return adjacency_[static_cast<std::size_t>(i)]; }

  bool has_edge(int a, int b) const {
    const auto& list = neighbors(a);
    return std::binary_search(list.begin(), list.end(), b);
  }

  friend bool operator==(const UndirectedGraph& a, const UndirectedGraph& b) {
    return a.n_ == b.n_ && a.edges_ == b.edges_;
  }

 private:
  int n_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> adjacency_;
};

}  // namespace dcg
