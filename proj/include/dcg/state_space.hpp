#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dcg/error.hpp"

namespace dcg {

/// A state of one variable; states are dense 0-based indices.
using State = int;
/// One value per node.
using Configuration = std::vector<State>;

class StateSpace {
 public:
  StateSpace() = default;

  explicit StateSpace(std::vector<int> card) : card_(std::move(card)) {
    require(!card_.empty(), "state space needs at least one node");
    for (std::size_t i = 0; i < card_.size(); ++i) {
      require(card_[i] >= 2, "node " + std::to_string(i) + " has cardinality < 2");
    }
  }

  static StateSpace binary(int n) { return StateSpace(std::vector<int>(static_cast<std::size_t>(n), 2)); }

  int n() const { return static_cast<int>(card_.size()); }
  int card(int i) const { return card_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& cards() const { return card_; }

  /// Product of cardinalities over `nodes`, saturating at uint64 max.
  template <class Range>
  std::uint64_t count(const Range& nodes) const {
    std::uint64_t total = 1;
    for (int i : nodes) {
      const auto k = static_cast<std::uint64_t>(card(i));
      if (total > std::numeric_limits<std::uint64_t>::max() / k) return std::numeric_limits<std::uint64_t>::max();
      total *= k;
    }
    return total;
  }

  std::uint64_t total_configurations() const {
    std::vector<int> all(card_.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    return count(all);
  }

  bool contains(int i) const { return i >= 0 && i < n(); }

  void check_configuration(std::span<const State> x) const {
    require(static_cast<int>(x.size()) == n(), "configuration has " + std::to_string(x.size()) +
                                                   " entries, expected " + std::to_string(n()));
    for (int i = 0; i < n(); ++i) {
      require(x[static_cast<std::size_t>(i)] >= 0 && x[static_cast<std::size_t>(i)] < card(i),
              "state " + std::to_string(x[static_cast<std::size_t>(i)]) + " out of range for node " +
                  std::to_string(i));
    }
  }

  friend bool operator==(const StateSpace&, const StateSpace&) = default;

 private:
  std::vector<int> card_;
};

/// A set of (node, state) pairs with distinct nodes, kept sorted by node.
/// Used both for observed evidence and for do() intervention targets.
class Assignment {
 public:
  using Entry = std::pair<int, State>;

  Assignment() = default;

  explicit Assignment(std::vector<Entry> entries) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end());
    for (std::size_t k = 1; k < entries_.size(); ++k) {
      require(entries_[k].first != entries_[k - 1].first,
              "node " + std::to_string(entries_[k].first) + " assigned twice");
    }
  }

  Assignment(std::initializer_list<Entry> entries) : Assignment(std::vector<Entry>(entries)) {}

  const std::vector<Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  bool contains(int node) const {
    return std::binary_search(entries_.begin(), entries_.end(), Entry{node, 0},
                              [](const Entry& a, const Entry& b) { return a.first < b.first; });
  }

  std::vector<int> nodes() const {
    std::vector<int> out;
    out.reserve(entries_.size());
    for (const auto& [node, state] : entries_) out.push_back(node);
    return out;
  }

  void validate(const StateSpace& space) const {
    for (const auto& [node, state] : entries_) {
      require(space.contains(node), "assignment names unknown node " + std::to_string(node));
      require(state >= 0 && state < space.card(node),
              "assignment state " + std::to_string(state) + " out of range for node " + std::to_string(node));
    }
  }

  friend bool operator==(const Assignment&, const Assignment&) = default;
  friend auto operator<=>(const Assignment&, const Assignment&) = default;

 private:
  std::vector<Entry> entries_;
};

using InterventionAssignment = Assignment;

/// Row-major matrix of states, one configuration per row.
class StateMatrix {
 public:
  StateMatrix() = default;
  explicit StateMatrix(int cols) : cols_(cols) {}
  StateMatrix(std::size_t rows, int cols) : cols_(cols), data_(rows * static_cast<std::size_t>(cols), 0) {}

  int cols() const { return cols_; }
  std::size_t rows() const { return cols_ == 0 ? 0 : data_.size() / static_cast<std::size_t>(cols_); }

  std::span<const State> row(std::size_t d) const {
    return {data_.data() + d * static_cast<std::size_t>(cols_), static_cast<std::size_t>(cols_)};
  }
  std::span<State> row(std::size_t d) { return {data_.data() + d * static_cast<std::size_t>(cols_), static_cast<std::size_t>(cols_)}; }

  State operator()(std::size_t d, int i) const { return data_[d * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(i)]; }
  State& operator()(std::size_t d, int i) { return data_[d * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(i)]; }

  void push_back(std::span<const State> x) {
    require(static_cast<int>(x.size()) == cols_, "row has the wrong number of columns");
    data_.insert(data_.end(), x.begin(), x.end());
  }

  const std::vector<State>& data() const { return data_; }

  friend bool operator==(const StateMatrix&, const StateMatrix&) = default;

 private:
  int cols_ = 0;
  std::vector<State> data_;
};

namespace detail {

inline constexpr State kFree = -1;

/// Visits every completion of a partial configuration. `clamp[i] == kFree`
/// marks node i as free. Order is lexicographic with the lowest-index free
/// node most significant.
template <class Fn>
void for_each_completion(const StateSpace& space, std::span<const State> clamp, Fn&& fn) {
  const int n = space.n();
  Configuration x(clamp.begin(), clamp.end());
  std::vector<int> free_nodes;
  for (int i = 0; i < n; ++i) {
    if (x[static_cast<std::size_t>(i)] == kFree) {
      free_nodes.push_back(i);
      x[static_cast<std::size_t>(i)] = 0;
    }
  }
  while (true) {
    fn(static_cast<const Configuration&>(x));
    int pos = static_cast<int>(free_nodes.size()) - 1;
    while (pos >= 0) {
      const int node = free_nodes[static_cast<std::size_t>(pos)];
      auto& v = x[static_cast<std::size_t>(node)];
      if (++v < space.card(node)) break;
      v = 0;
      --pos;
    }
    if (pos < 0) return;
  }
}

inline std::uint64_t free_count(const StateSpace& space, std::span<const State> clamp) {
  std::vector<int> free_nodes;
  for (int i = 0; i < space.n(); ++i) {
    if (clamp[static_cast<std::size_t>(i)] == kFree) free_nodes.push_back(i);
  }
  return space.count(free_nodes);
}

inline void check_cap(const StateSpace& space, std::span<const State> clamp, const char* what) {
  const auto needed = free_count(space, clamp);
  if (needed > enumeration_cap()) {
    throw CapacityError(std::string(what) + " needs " + std::to_string(needed) +
                        " configurations, above the enumeration cap of " + std::to_string(enumeration_cap()) +
                        "; use Gibbs sampling or the pseudo-likelihood instead");
  }
}

/// Clamp vector with the given assignments filled in, all else free.
inline Configuration make_clamp(const StateSpace& space, std::initializer_list<const Assignment*> parts) {
  Configuration clamp(static_cast<std::size_t>(space.n()), kFree);
  for (const Assignment* a : parts) {
    for (const auto& [node, state] : a->entries()) {
      if (clamp[static_cast<std::size_t>(node)] != kFree) {
        throw InvalidInput("node " + std::to_string(node) + " appears in more than one node set");
      }
      clamp[static_cast<std::size_t>(node)] = state;
    }
  }
  return clamp;
}

}  // namespace detail
}  // namespace dcg
