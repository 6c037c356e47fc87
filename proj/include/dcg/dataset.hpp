#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dcg/error.hpp"
#include "dcg/state_space.hpp"

namespace dcg {

/// m x n matrix of states plus a parallel mask; mask(d, i) is true when
/// x_i was set by intervention in row d.
class Dataset {
 public:
  Dataset() = default;

  Dataset(StateMatrix x, std::vector<char> mask, std::vector<std::string> names = {})
      : x_(std::move(x)), mask_(std::move(mask)), names_(std::move(names)) {
    require(mask_.size() == x_.data().size(), "mask shape does not match the data");
    if (names_.empty()) {
      for (int i = 0; i < x_.cols(); ++i) names_.push_back("x" + std::to_string(i));
    }
    require(static_cast<int>(names_.size()) == x_.cols(), "wrong number of column names");
  }

  static Dataset observational(StateMatrix x) {
    std::vector<char> mask(x.data().size(), 0);
    return Dataset(std::move(x), std::move(mask));
  }

  std::size_t rows() const { return x_.rows(); }
  int n() const { return x_.cols(); }
  const StateMatrix& x() const { return x_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<char>& mask() const { return mask_; }

  std::span<const State> row(std::size_t d) const { return x_.row(d); }
  State operator()(std::size_t d, int i) const { return x_(d, i); }
  bool clamped(std::size_t d, int i) const {
    return mask_[d * static_cast<std::size_t>(n()) + static_cast<std::size_t>(i)] != 0;
  }
  std::span<const char> mask_row(std::size_t d) const {
    return {mask_.data() + d * static_cast<std::size_t>(n()), static_cast<std::size_t>(n())};
  }

  /// The do() regime of row d: its clamped nodes and their values.
  Assignment regime(std::size_t d) const {
    std::vector<Assignment::Entry> entries;
    for (int i = 0; i < n(); ++i) {
      if (clamped(d, i)) entries.emplace_back(i, x_(d, i));
    }
    return Assignment(std::move(entries));
  }

  void validate(const StateSpace& space) const {
    require(n() == space.n(), "dataset has " + std::to_string(n()) + " columns but the model has " +
                                  std::to_string(space.n()) + " nodes");
    for (std::size_t d = 0; d < rows(); ++d) {
      for (int i = 0; i < n(); ++i) {
        const State v = x_(d, i);
        if (v < 0 || v >= space.card(i)) {
          throw InvalidInput("row " + std::to_string(d) + ", column " + std::to_string(i) + ": state " +
                             std::to_string(v) + " outside [0, " + std::to_string(space.card(i)) + ")");
        }
      }
    }
  }

  Dataset subset(std::span<const std::size_t> rows) const {
    StateMatrix x(n());
    std::vector<char> mask;
    mask.reserve(rows.size() * static_cast<std::size_t>(n()));
    for (std::size_t d : rows) {
      require(d < this->rows(), "row index out of range");
      x.push_back(row(d));
      const auto m = mask_row(d);
      mask.insert(mask.end(), m.begin(), m.end());
    }
    return Dataset(std::move(x), std::move(mask), names_);
  }

  Dataset slice(std::size_t begin, std::size_t end) const {
    std::vector<std::size_t> idx;
    for (std::size_t d = begin; d < end; ++d) idx.push_back(d);
    return subset(idx);
  }

  /// Smallest cardinalities consistent with the data (max index + 1, at least 2).
  std::vector<int> inferred_cardinalities() const {
    std::vector<int> card(static_cast<std::size_t>(n()), 2);
    for (std::size_t d = 0; d < rows(); ++d) {
      for (int i = 0; i < n(); ++i) card[static_cast<std::size_t>(i)] = std::max(card[static_cast<std::size_t>(i)], x_(d, i) + 1);
    }
    return card;
  }

  friend bool operator==(const Dataset& a, const Dataset& b) { return a.x_ == b.x_ && a.mask_ == b.mask_; }

 private:
  StateMatrix x_;
  std::vector<char> mask_;
  std::vector<std::string> names_;
};

/// Row indices grouped by regime, regimes in ascending key order, rows in
/// ascending index order. This is the fixed reduction order for every
/// objective that sums over rows.
inline std::map<Assignment, std::vector<std::size_t>> group_by_regime(const Dataset& data) {
  std::map<Assignment, std::vector<std::size_t>> groups;
  for (std::size_t d = 0; d < data.rows(); ++d) groups[data.regime(d)].push_back(d);
  return groups;
}

// --- CSV -------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? std::string() : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

struct IntTable {
  std::vector<std::string> header;
  std::vector<std::vector<int>> rows;
};

inline IntTable read_int_csv(std::istream& in, const std::string& label) {
  IntTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw InvalidInput(label + " line " + std::to_string(line_no) + ": expected " +
                         std::to_string(table.header.size()) + " cells, found " + std::to_string(cells.size()));
    }
    std::vector<int> values;
    values.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      int v = 0;
      const auto& text = cells[c];
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
        throw InvalidInput(label + " line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                           ": '" + text + "' is not an integer");
      }
      values.push_back(v);
    }
    table.rows.push_back(std::move(values));
  }
  if (!have_header) throw InvalidInput(label + ": empty file, expected a header row");
  return table;
}

inline IntTable read_int_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  return read_int_csv(in, path);
}

}  // namespace detail

/// Parses a data CSV and a same-shaped 0/1 mask CSV. An empty mask stream
/// pointer means purely observational data.
inline Dataset read_dataset(std::istream& data_in, std::istream* mask_in, const std::string& data_label = "data",
                            const std::string& mask_label = "mask") {
  auto data = detail::read_int_csv(data_in, data_label);
  const int n = static_cast<int>(data.header.size());
  StateMatrix x(n);
  for (std::size_t r = 0; r < data.rows.size(); ++r) {
    for (std::size_t c = 0; c < data.rows[r].size(); ++c) {
      if (data.rows[r][c] < 0) {
        throw InvalidInput(data_label + " data row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1) +
                           ": negative state index");
      }
    }
    x.push_back(data.rows[r]);
  }
  std::vector<char> mask(x.data().size(), 0);
  if (mask_in != nullptr) {
    auto m = detail::read_int_csv(*mask_in, mask_label);
    if (m.header.size() != data.header.size() || m.rows.size() != data.rows.size()) {
      throw InvalidInput("mask shape " + std::to_string(m.rows.size()) + "x" + std::to_string(m.header.size()) +
                         " does not match data shape " + std::to_string(data.rows.size()) + "x" +
                         std::to_string(data.header.size()));
    }
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
      for (std::size_t c = 0; c < m.rows[r].size(); ++c) {
        const int v = m.rows[r][c];
        if (v != 0 && v != 1) {
          throw InvalidInput(mask_label + " data row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1) +
                             ": mask entries must be 0 or 1");
        }
        mask[r * static_cast<std::size_t>(n) + c] = static_cast<char>(v);
      }
    }
  }
  return Dataset(std::move(x), std::move(mask), std::move(data.header));
}

inline Dataset read_dataset_files(const std::string& data_path, const std::string& mask_path = {}) {
  std::ifstream data_in(data_path);
  if (!data_in) throw InvalidInput("cannot open " + data_path);
  if (mask_path.empty()) return read_dataset(data_in, nullptr, data_path);
  std::ifstream mask_in(mask_path);
  if (!mask_in) throw InvalidInput("cannot open " + mask_path);
  return read_dataset(data_in, &mask_in, data_path, mask_path);
}

inline void write_states_csv(std::ostream& out, const StateMatrix& x, const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  for (std::size_t d = 0; d < x.rows(); ++d) {
    const auto r = x.row(d);
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
    out << '\n';
  }
}

inline void write_dataset(std::ostream& data_out, std::ostream& mask_out, const Dataset& data) {
  write_states_csv(data_out, data.x(), data.names());
  for (std::size_t i = 0; i < data.names().size(); ++i) mask_out << (i ? "," : "") << data.names()[i];
  mask_out << '\n';
  for (std::size_t d = 0; d < data.rows(); ++d) {
    const auto m = data.mask_row(d);
    for (std::size_t i = 0; i < m.size(); ++i) mask_out << (i ? "," : "") << static_cast<int>(m[i]);
    mask_out << '\n';
  }
}

}  // namespace dcg
