#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dcg/error.hpp"
#include "dcg/graph.hpp"
#include "dcg/state_space.hpp"

namespace dcg {

/// Exponential-family parameters: a bias vector per node and one weight
/// table per pairwise block, all stored in one flat vector.
///
/// Layout: biases of node 0..n-1 first, then the weight tables in block
/// order. Block e couples a row node (the child, for a directed edge) with
/// a column node (the parent); its table is row-major, so entry
/// (row_state, col_state) sits at weight_offset(e) + row_state * k_col + col_state.
class Parameters {
 public:
  /// (row node, column node) for one weight block.
  using Block = std::pair<int, int>;

  Parameters() = default;

  Parameters(const StateSpace& space, std::vector<Block> blocks) : card_(space.cards()), blocks_(std::move(blocks)) {
    std::size_t offset = 0;
    bias_offset_.reserve(card_.size());
    for (int k : card_) {
      bias_offset_.push_back(offset);
      offset += static_cast<std::size_t>(k);
    }
    weight_offset_.reserve(blocks_.size());
    for (auto [r, c] : blocks_) {
      require(space.contains(r) && space.contains(c), "weight block names a node outside the state space");
      weight_offset_.push_back(offset);
      offset += static_cast<std::size_t>(space.card(r) * space.card(c));
    }
    values_.assign(offset, 0.0);
  }

  /// Zero parameters shaped for a directed graph: block e is (child, parent) of edge e.
  static Parameters zeros(const StateSpace& space, const DirectedGraph& graph) {
    std::vector<Block> blocks;
    blocks.reserve(graph.edge_count());
    for (const auto& e : graph.edges()) blocks.emplace_back(e.child, e.parent);
    return Parameters(space, std::move(blocks));
  }

  /// Zero parameters shaped for an undirected graph: block e is edges()[e] as (low, high).
  static Parameters zeros(const StateSpace& space, const UndirectedGraph& graph) {
    return Parameters(space, graph.edges());
  }

  int n() const { return static_cast<int>(card_.size()); }
  std::size_t block_count() const { return blocks_.size(); }
  std::size_t size() const { return values_.size(); }
  const Block& block(int e) const { return blocks_[static_cast<std::size_t>(e)]; }
  const std::vector<Block>& blocks() const { return blocks_; }
  int card(int i) const { return card_[static_cast<std::size_t>(i)]; }

  std::size_t bias_offset(int i) const { return bias_offset_[static_cast<std::size_t>(i)]; }
  std::size_t weight_offset(int e) const { return weight_offset_[static_cast<std::size_t>(e)]; }
  std::size_t block_size(int e) const {
    const auto [r, c] = block(e);
    return static_cast<std::size_t>(card(r) * card(c));
  }
  /// Number of leading entries holding biases.
  std::size_t bias_size() const { return blocks_.empty() ? values_.size() : weight_offset_.front(); }

  double bias(int i, State s) const { return values_[bias_offset(i) + static_cast<std::size_t>(s)]; }
  double& bias(int i, State s) { return values_[bias_offset(i) + static_cast<std::size_t>(s)]; }

  double weight(int e, State row, State col) const {
    return values_[weight_offset(e) + static_cast<std::size_t>(row * card(block(e).second) + col)];
  }
  double& weight(int e, State row, State col) {
    return values_[weight_offset(e) + static_cast<std::size_t>(row * card(block(e).second) + col)];
  }

  std::span<const double> bias_block(int i) const {
    return {values_.data() + bias_offset(i), static_cast<std::size_t>(card(i))};
  }
  std::span<double> bias_block(int i) { return {values_.data() + bias_offset(i), static_cast<std::size_t>(card(i))}; }
  std::span<const double> weight_block(int e) const { return {values_.data() + weight_offset(e), block_size(e)}; }
  std::span<double> weight_block(int e) { return {values_.data() + weight_offset(e), block_size(e)}; }

  std::span<const double> flat() const { return values_; }
  std::span<double> flat() { return values_; }
  const std::vector<double>& values() const { return values_; }

  void assign(std::span<const double> values) {
    require(values.size() == values_.size(), "parameter vector has the wrong length");
    values_.assign(values.begin(), values.end());
  }

  /// Same layout, new values.
  Parameters with_values(std::span<const double> values) const {
    Parameters out = *this;
    out.assign(values);
    return out;
  }

  Parameters zeros_like() const {
    Parameters out = *this;
    std::fill(out.values_.begin(), out.values_.end(), 0.0);
    return out;
  }

  double squared_norm() const {
    double total = 0.0;
    for (double v : values_) total += v * v;
    return total;
  }

  double weight_norm(int e) const {
    double total = 0.0;
    for (double v : weight_block(e)) total += v * v;
    return std::sqrt(total);
  }

  bool all_finite() const {
    for (double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool same_layout(const Parameters& other) const { return card_ == other.card_ && blocks_ == other.blocks_; }

  friend bool operator==(const Parameters& a, const Parameters& b) {
    return a.same_layout(b) && a.values_ == b.values_;
  }

 private:
  std::vector<int> card_;
  std::vector<Block> blocks_;
  std::vector<std::size_t> bias_offset_;
  std::vector<std::size_t> weight_offset_;
  std::vector<double> values_;
};

}  // namespace dcg
