#pragma once

// JSON model files. One schema for all model kinds:
//   {"format_version": 1, "model_kind": "dcg" | "dag" | "ug",
//    "n": 3, "card": [2, 2, 3], "names": [...],
//    "edges": [[parent, child], ...],          // [a, b] with a < b for "ug"
//    "biases": [[...], ...],                    // biases[i][s]
//    "weights": [[[...], ...], ...]}            // weights[e][child state][parent state]
// For "ug", weights[e][state of a][state of b]. Doubles are written in
// shortest round-trip form.

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dcg/baselines.hpp"
#include "dcg/error.hpp"
#include "dcg/graph.hpp"
#include "dcg/model.hpp"
#include "dcg/parameters.hpp"

namespace dcg {

inline constexpr int kFormatVersion = 1;

using AnyModel = std::variant<Model, DagModel, UgModel>;

namespace detail {

using json = nlohmann::json;

inline json params_json(const StateSpace& space, const Parameters& p, const std::vector<std::pair<int, int>>& edges,
                        const char* kind, const std::vector<std::string>& names) {
  json j;
  j["format_version"] = kFormatVersion;
  j["model_kind"] = kind;
  j["n"] = space.n();
  j["card"] = space.cards();
  if (!names.empty()) j["names"] = names;
  j["edges"] = json::array();
  for (auto [a, b] : edges) j["edges"].push_back({a, b});
  j["biases"] = json::array();
  for (int i = 0; i < space.n(); ++i) {
    auto b = p.bias_block(i);
    j["biases"].push_back(std::vector<double>(b.begin(), b.end()));
  }
  j["weights"] = json::array();
  for (int e = 0; e < static_cast<int>(p.block_count()); ++e) {
    const auto [r, c] = p.block(e);
    json table = json::array();
    for (State s = 0; s < space.card(r); ++s) {
      std::vector<double> row;
      for (State t = 0; t < space.card(c); ++t) row.push_back(p.weight(e, s, t));
      table.push_back(row);
    }
    j["weights"].push_back(table);
  }
  return j;
}

template <class T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw InvalidInput(std::string("model file is missing \"") + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("model file field \"") + key + "\": " + e.what());
  }
}

inline void fill_params(const json& j, const StateSpace& space, Parameters& p) {
  const auto biases = field<std::vector<std::vector<double>>>(j, "biases");
  require(static_cast<int>(biases.size()) == space.n(), "\"biases\" needs one list per node");
  for (int i = 0; i < space.n(); ++i) {
    require(static_cast<int>(biases[static_cast<std::size_t>(i)].size()) == space.card(i),
            "\"biases\"[" + std::to_string(i) + "] needs one entry per state");
    for (State s = 0; s < space.card(i); ++s) p.bias(i, s) = biases[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
  }
  const auto weights = field<std::vector<std::vector<std::vector<double>>>>(j, "weights");
  require(weights.size() == p.block_count(), "\"weights\" needs one table per edge");
  for (int e = 0; e < static_cast<int>(p.block_count()); ++e) {
    const auto [r, c] = p.block(e);
    const auto& table = weights[static_cast<std::size_t>(e)];
    require(static_cast<int>(table.size()) == space.card(r), "\"weights\"[" + std::to_string(e) + "] has the wrong number of rows");
    for (State s = 0; s < space.card(r); ++s) {
      require(static_cast<int>(table[static_cast<std::size_t>(s)].size()) == space.card(c),
              "\"weights\"[" + std::to_string(e) + "] has the wrong number of columns");
      for (State t = 0; t < space.card(c); ++t) p.weight(e, s, t) = table[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)];
    }
  }
}

inline std::vector<std::pair<int, int>> edge_pairs(const DirectedGraph& g) {
  std::vector<std::pair<int, int>> out;
  for (const auto& e : g.edges()) out.emplace_back(e.parent, e.child);
  return out;
}

}  // namespace detail

inline const char* model_kind(const AnyModel& m) {
  switch (m.index()) {
    case 0: return "dcg";
    case 1: return "dag";
    default: return "ug";
  }
}

inline const StateSpace& model_space(const AnyModel& m) {
  return std::visit([](const auto& x) -> const StateSpace& { return x.space(); }, m);
}

inline nlohmann::json to_json(const AnyModel& m, const std::vector<std::string>& names = {}) {
  return std::visit([&](const auto& x) {
    using T = std::decay_t<decltype(x)>;
    if constexpr (std::is_same_v<T, UgModel>) {
      return detail::params_json(x.space(), x.params(), x.graph().edges(), "ug", names);
    } else {
      return detail::params_json(x.space(), x.params(), detail::edge_pairs(x.graph()),
                                 std::is_same_v<T, Model> ? "dcg" : "dag", names);
    }
  }, m);
}

inline AnyModel from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidInput("model file must hold a JSON object");
  const int version = j.contains("format_version") ? detail::field<int>(j, "format_version") : kFormatVersion;
  require(version == kFormatVersion, "unsupported model format_version " + std::to_string(version));
  const std::string kind = j.contains("model_kind") ? detail::field<std::string>(j, "model_kind") : "dcg";
  const auto card = detail::field<std::vector<int>>(j, "card");
  const StateSpace space(card);
  if (j.contains("n")) require(detail::field<int>(j, "n") == space.n(), "\"n\" disagrees with \"card\"");
  const auto pairs = detail::field<std::vector<std::pair<int, int>>>(j, "edges");
  if (kind == "ug") {
    UndirectedGraph g(space.n(), pairs);
    require(g.edges().size() == pairs.size(), "undirected edges must be distinct");
    for (std::size_t e = 0; e < pairs.size(); ++e) {
      require(pairs[e].first < pairs[e].second && g.edges()[e] == pairs[e],
              "undirected edges must be listed as [a, b] with a < b in sorted order");
    }
    Parameters p = Parameters::zeros(space, g);
    detail::fill_params(j, space, p);
    return UgModel(space, g, std::move(p));
  }
  std::vector<Edge> edges;
  for (auto [a, b] : pairs) edges.push_back({a, b});
  DirectedGraph g(space.n(), edges);
  Parameters p = Parameters::zeros(space, g);
  detail::fill_params(j, space, p);
  if (kind == "dcg") return Model(space, g, std::move(p));
  if (kind == "dag") return DagModel(space, g, std::move(p));
  throw InvalidInput("unknown model_kind \"" + kind + "\"");
}

inline void write_model(std::ostream& out, const AnyModel& m, const std::vector<std::string>& names = {}) {
  out << to_json(m, names).dump(2) << "\n";
}

inline AnyModel read_model(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("model file is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

inline void write_model_file(const std::string& path, const AnyModel& m, const std::vector<std::string>& names = {}) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  write_model(out, m, names);
}

inline AnyModel read_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  return read_model(in);
}

/// A directed graph from either a model file or {"n": .., "edges": [[p, c], ...]}.
inline DirectedGraph read_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("graph file is not valid JSON: ") + e.what());
  }
  const int n = j.contains("card") ? static_cast<int>(detail::field<std::vector<int>>(j, "card").size())
                                   : detail::field<int>(j, "n");
  std::vector<Edge> edges;
  for (auto [a, b] : detail::field<std::vector<std::pair<int, int>>>(j, "edges")) edges.push_back({a, b});
  return DirectedGraph(n, edges);
}

inline double eval_test_nll(const AnyModel& m, const Dataset& test) {
  return std::visit([&](const auto& x) { return eval_test_nll(x, test); }, m);
}

}  // namespace dcg
