// dcg: command-line front end.
//
// Exit codes: 0 ok, 2 invalid input, 3 capacity exceeded, 4 fit did not
// converge (outputs are still written).

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dcg/dcg.hpp"

namespace {

using nlohmann::json;

constexpr int kExitInvalid = 2;
constexpr int kExitCapacity = 3;
constexpr int kExitNotConverged = 4;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

int to_int(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw dcg::InvalidInput(what + ": \"" + s + "\" is not an integer");
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw dcg::InvalidInput(what + ": \"" + s + "\" is not a number");
}

std::vector<int> int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (const auto& item : split_list(s)) out.push_back(to_int(item, what));
  return out;
}

std::vector<double> double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(to_double(item, what));
  return out;
}

// "k=v,k=v"
dcg::Assignment parse_assignment(const std::string& s, const std::string& what) {
  std::vector<dcg::Assignment::Entry> entries;
  for (const auto& item : split_list(s)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw dcg::InvalidInput(what + ": expected node=state, got \"" + item + "\"");
    entries.emplace_back(to_int(item.substr(0, eq), what), to_int(item.substr(eq + 1), what));
  }
  return dcg::Assignment(std::move(entries));
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw dcg::InvalidInput("cannot write " + path);
  return out;
}

// Writes to `path`, or stdout when it is empty or "-".
template <class Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
  } else {
    auto out = open_out(path);
    fn(out);
  }
}

struct Globals {
  std::uint64_t seed = 0;
  int threads = 1;
  std::uint64_t enum_cap = dcg::kDefaultEnumerationCap;
  std::string config;
};

struct DataArgs {
  std::string data;
  std::string mask;
  std::string card;

  void add(CLI::App* app, bool required = true) {
    auto* d = app->add_option("--data", data, "data CSV (header of names, rows of state indices)");
    if (required) d->required();
    app->add_option("--mask", mask, "mask CSV, same shape, 1 = set by intervention");
    app->add_option("--card", card, "cardinality override: one value or one per column");
  }

  dcg::Ingested load() const {
    return dcg::ingest_dataset(data, mask, card.empty() ? std::vector<int>{} : int_list(card, "--card"));
  }
};

struct FitArgs {
  double lambda2 = dcg::kDefaultLambda2;
  double tol = 1e-6;
  int max_iter = 2000;

  void add(CLI::App* app) {
    app->add_option("--lambda2", lambda2, "l2 penalty")->capture_default_str();
    app->add_option("--tol", tol, "optimality tolerance")->capture_default_str();
    app->add_option("--max-iter", max_iter, "iteration limit")->capture_default_str();
  }

  dcg::GroupL1Config group(double lambda) const {
    dcg::GroupL1Config c;
    c.lambda = lambda;
    c.lambda2 = lambda2;
    c.tol = tol;
    c.max_iter = max_iter;
    c.validate();
    return c;
  }
};

// Data loaded for a model already on disk: cardinalities come from the model.
dcg::Dataset load_for(const dcg::StateSpace& space, const DataArgs& args) {
  dcg::Dataset d = dcg::read_dataset_files(args.data, args.mask);
  d.validate(space);
  return d;
}

dcg::Model require_dcg(const dcg::AnyModel& m, const char* what) {
  if (const auto* p = std::get_if<dcg::Model>(&m)) return *p;
  throw dcg::InvalidInput(std::string(what) + " needs a dcg model, got model_kind \"" + dcg::model_kind(m) + "\"");
}

// ---- config file ---------------------------------------------------------

std::string normalize_key(std::string k) {
  for (char& c : k) {
    if (c == '_') c = '-';
  }
  return k;
}

std::string json_scalar(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number_float()) {
    std::ostringstream s;
    s.precision(17);
    s << v.get<double>();
    return s.str();
  }
  throw dcg::InvalidInput("config key \"" + key + "\" must be a string, number, boolean or list");
}

void append_config_value(std::vector<std::string>& args, const std::string& key, const json& v) {
  if (v.is_boolean()) {
    args.push_back("--" + key + "=" + (v.get<bool>() ? "true" : "false"));
    return;
  }
  if (v.is_array()) {
    std::string joined;
    for (const auto& item : v) joined += (joined.empty() ? "" : ",") + json_scalar(item, key);
    args.push_back("--" + key);
    args.push_back(joined);
    return;
  }
  args.push_back("--" + key);
  args.push_back(json_scalar(v, key));
}

bool has_option(CLI::App* app, const std::string& key) {
  return app->get_option_no_throw("--" + key) != nullptr;
}

// Turns a JSON config into arguments inserted right after the subcommand
// name, ahead of the user's own flags. Every option keeps its last value, so
// the command line wins. Top-level keys are global flags or flags of the
// active subcommand; an object under a subcommand's name applies to it only.
std::vector<std::string> config_args(const std::string& path, CLI::App& app, CLI::App* active) {
  std::ifstream in(path);
  if (!in) throw dcg::InvalidInput("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw dcg::InvalidInput("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw dcg::InvalidInput("config file " + path + " must hold a JSON object");
  std::vector<std::string> args;
  for (const auto& [raw, value] : j.items()) {
    const std::string key = normalize_key(raw);
    if (key == "config") throw dcg::InvalidInput("config files cannot name another config file");
    if (auto* sub = app.get_subcommand_no_throw(key)) {
      if (!value.is_object()) throw dcg::InvalidInput("config key \"" + raw + "\" must hold an object");
      if (sub != active) continue;
      for (const auto& [raw2, v2] : value.items()) {
        const std::string k2 = normalize_key(raw2);
        if (!has_option(sub, k2) && !has_option(&app, k2)) {
          throw dcg::InvalidInput("config key \"" + raw + "." + raw2 + "\" is not a flag of " + key);
        }
        append_config_value(args, k2, v2);
      }
      continue;
    }
    if (has_option(&app, key) || (active != nullptr && has_option(active, key))) {
      append_config_value(args, key, value);
      continue;
    }
    bool known = false;
    for (auto* sub : app.get_subcommands({})) known = known || has_option(sub, key);
    if (!known) throw dcg::InvalidInput("config key \"" + raw + "\" matches no flag");
  }
  return args;
}

// ---- subcommands -----------------------------------------------------------

struct GenerateCmd {
  dcg::SynthConfig cfg;
  int states = 2;
  std::string out_data, out_mask, out_model;

  void add(CLI::App* app) {
    app->add_option("--n", cfg.n, "node count")->capture_default_str();
    app->add_option("--edge-prob", cfg.edge_prob, "probability of each directed edge")->capture_default_str();
    app->add_option("-m,--rows", cfg.m, "number of samples")->capture_default_str();
    app->add_option("--obs-fraction", cfg.obs_fraction, "share of purely observational rows")->capture_default_str();
    app->add_option("--states", states, "states per node")->capture_default_str();
    app->add_flag("--gibbs-fallback", cfg.gibbs_fallback, "use Gibbs chains for regimes too large to enumerate");
    app->add_option("--burn-in", cfg.burn_in, "Gibbs burn-in sweeps per sample")->capture_default_str();
    app->add_option("--out-data", out_data, "data CSV (default stdout)");
    app->add_option("--out-mask", out_mask, "mask CSV");
    app->add_option("--out-model", out_model, "true model JSON");
  }

  int run(const Globals& g) {
    cfg.seed = g.seed;
    cfg.binary = states == 2;
    cfg.states = states;
    const auto gen = dcg::generate_synthetic(cfg);
    emit(out_data, [&](std::ostream& o) { dcg::write_states_csv(o, gen.data.x(), gen.data.names()); });
    if (!out_mask.empty()) {
      std::ostringstream sink;
      auto out = open_out(out_mask);
      dcg::write_dataset(sink, out, gen.data);
    }
    if (!out_model.empty()) dcg::write_model_file(out_model, gen.truth, gen.data.names());
    return 0;
  }
};

struct FitCmd {
  DataArgs data;
  FitArgs fit;
  std::string graph = "complete";
  std::string out;
  bool pseudo = false;

  void add(CLI::App* app) {
    data.add(app);
    fit.add(app);
    app->add_option("--graph", graph, "\"complete\" or a graph/model JSON file")->capture_default_str();
    app->add_option("--out", out, "model JSON (default stdout)");
    app->add_flag("--pseudo", pseudo, "maximize the pseudo-likelihood instead");
  }

  int run(const Globals&) {
    const auto in = data.load();
    const auto g = graph == "complete" ? dcg::DirectedGraph::complete(in.space.n()) : dcg::read_graph_file(graph);
    dcg::require(g.n() == in.space.n(), "graph has " + std::to_string(g.n()) + " nodes but the data has " +
                                            std::to_string(in.space.n()) + " columns");
    dcg::FitConfig cfg;
    cfg.lambda2 = fit.lambda2;
    cfg.tol = fit.tol;
    cfg.max_iter = fit.max_iter;
    const auto res = pseudo ? dcg::fit_pseudo(in.space, g, in.data, cfg) : dcg::fit_map(in.space, g, in.data, cfg);
    emit(out, [&](std::ostream& o) { dcg::write_model(o, res.model, in.data.names()); });
    std::cerr << "objective " << res.objective << ", gradient norm " << res.grad_norm << ", iterations "
              << res.iterations << (res.converged ? "" : ", NOT converged") << "\n";
    return res.converged ? 0 : kExitNotConverged;
  }
};

struct PathCmd {
  DataArgs data;
  FitArgs fit;
  std::string lambdas = "auto";
  int grid_points = 20;
  double grid_ratio = 1000.0;
  double holdout = 0.5;
  std::string out, models_out;

  void add(CLI::App* app) {
    data.add(app);
    fit.add(app);
    app->add_option("--lambdas", lambdas, "\"auto\" or a comma-separated list")->capture_default_str();
    app->add_option("--grid-points", grid_points, "points in the auto grid")->capture_default_str();
    app->add_option("--grid-ratio", grid_ratio, "lambda_max over the smallest auto value")->capture_default_str();
    app->add_option("--holdout", holdout, "share of rows held out at random (0 = none)")->capture_default_str();
    app->add_option("--out", out, "path CSV (default stdout)");
    app->add_option("--models-out", models_out, "directory for one model JSON per lambda");
  }

  int run(const Globals& g) {
    const auto in = data.load();
    dcg::require(holdout >= 0.0 && holdout < 1.0, "--holdout must lie in [0, 1)");
    std::optional<dcg::Split> split;
    if (holdout > 0.0) split = dcg::split_random(in.data, 1.0 - holdout, g.seed);
    const dcg::Dataset& train = split ? split->train : in.data;
    const auto candidate = dcg::DirectedGraph::complete(in.space.n());
    auto cfg = fit.group(0.0);
    std::vector<double> grid;
    if (lambdas == "auto") {
      grid = dcg::default_lambda_grid(dcg::lambda_max(in.space, candidate, train, cfg.lambda2), grid_points, grid_ratio);
    } else {
      grid = double_list(lambdas, "--lambdas");
      std::sort(grid.begin(), grid.end());
    }
    const auto path = dcg::reg_path(in.space, candidate, train, grid, cfg, split ? &split->test : nullptr);
    bool all_converged = true;
    emit(out, [&](std::ostream& o) {
      o.precision(17);
      o << "lambda,n_active_edges,train_nll,test_nll\n";
      for (const auto& p : path.points) {
        o << p.lambda << ',' << p.active_edges.size() << ',' << p.train_nll << ',';
        if (std::isnan(p.test_nll)) {
          o << "NA";
        } else {
          o << p.test_nll;
        }
        o << '\n';
        all_converged = all_converged && p.converged;
      }
    });
    if (!models_out.empty()) {
      std::filesystem::create_directories(models_out);
      for (std::size_t k = 0; k < path.points.size(); ++k) {
        const auto& p = path.points[k];
        const auto m = dcg::prune(dcg::Model(in.space, candidate, p.params));
        char name[32];
        std::snprintf(name, sizeof name, "lambda_%02zu.json", k);
        dcg::write_model_file((std::filesystem::path(models_out) / name).string(), m, in.data.names());
      }
    }
    if (!all_converged) std::cerr << "some path points did not converge\n";
    return all_converged ? 0 : kExitNotConverged;
  }
};

struct BaselineCmd {
  DataArgs data;
  FitArgs fit;
  std::string type;
  double lambda = 0.0;
  std::string ordering;
  int n_cap = dcg::kDefaultOrderCap;
  std::string out;

  void add(CLI::App* app) {
    data.add(app);
    fit.add(app);
    app->add_option("--type", type, "dag, ug-observe or ug-condition")
        ->required()
        ->check(CLI::IsMember({"dag", "ug-observe", "ug-condition"}));
    app->add_option("--lambda", lambda, "group penalty")->capture_default_str();
    app->add_option("--ordering", ordering, "dag: fit this node ordering instead of searching");
    app->add_option("--n-cap", n_cap, "dag: largest node count for the ordering search")->capture_default_str();
    app->add_option("--out", out, "model JSON (default stdout)");
  }

  int run(const Globals& g) {
    const auto in = data.load();
    const auto cfg = fit.group(lambda);
    bool converged = false;
    if (type == "dag") {
      const auto res = ordering.empty()
                           ? dcg::dag_order_search(in.space, in.data, cfg, n_cap, g.threads)
                           : dcg::dag_fit_ordering(in.space, in.data, int_list(ordering, "--ordering"), cfg);
      emit(out, [&](std::ostream& o) { dcg::write_model(o, res.model, in.data.names()); });
      std::cerr << "score " << res.score << ", ordering";
      for (int v : res.ordering) std::cerr << ' ' << v;
      std::cerr << "\n";
      converged = res.converged;
    } else {
      const auto mode = type == "ug-observe" ? dcg::UgMode::observe : dcg::UgMode::condition;
      const auto res = dcg::ug_fit_group_l1(in.space, in.data, mode, cfg);
      emit(out, [&](std::ostream& o) { dcg::write_model(o, dcg::prune(res.model), in.data.names()); });
      std::cerr << "objective " << res.objective << ", active edges " << res.active_edges.size() << "\n";
      converged = res.converged;
    }
    if (!converged) std::cerr << "fit did not converge\n";
    return converged ? 0 : kExitNotConverged;
  }
};

struct EvalCmd {
  std::string model;
  DataArgs data;

  void add(CLI::App* app) {
    app->add_option("--model", model, "model JSON")->required();
    data.add(app);
  }

  int run(const Globals&) {
    const auto m = dcg::read_model_file(model);
    const auto test = load_for(dcg::model_space(m), data);
    std::cout.precision(17);
    std::cout << "model_kind,rows,test_nll\n"
              << dcg::model_kind(m) << ',' << test.rows() << ',' << dcg::eval_test_nll(m, test) << "\n";
    return 0;
  }
};

struct InferCmd {
  std::string model, query, observe, intervene;

  void add(CLI::App* app) {
    app->add_option("--model", model, "dcg model JSON")->required();
    app->add_option("--query", query, "query nodes, e.g. 0 or 0,2")->required();
    app->add_option("--observe", observe, "evidence, e.g. 1=0,3=1");
    app->add_option("--do", intervene, "interventions, e.g. 2=1");
  }

  int run(const Globals&) {
    const auto m = require_dcg(dcg::read_model_file(model), "infer");
    const auto table = dcg::query(m, int_list(query, "--query"), parse_assignment(observe, "--observe"),
                                  parse_assignment(intervene, "--do"));
    std::cout.precision(17);
    for (int q : table.query()) std::cout << 'x' << q << ',';
    std::cout << "p\n";
    for (std::size_t k = 0; k < table.size(); ++k) {
      for (auto s : table.states(k)) std::cout << s << ',';
      std::cout << table.probs()[k] << '\n';
    }
    return 0;
  }
};

struct SampleCmd {
  std::string model, intervene, out, out_mask;
  std::size_t count = 100;
  bool gibbs = false;
  std::size_t sweeps = 1;
  std::size_t burn_in = 1000;

  void add(CLI::App* app) {
    app->add_option("--model", model, "dcg model JSON")->required();
    app->add_option("-n,--count", count, "number of samples")->capture_default_str();
    app->add_option("--do", intervene, "interventions, e.g. 2=1");
    app->add_flag("--gibbs", gibbs, "single-site Gibbs instead of exact sampling");
    app->add_option("--sweeps", sweeps, "Gibbs sweeps between kept samples")->capture_default_str();
    app->add_option("--burn-in", burn_in, "Gibbs burn-in sweeps")->capture_default_str();
    app->add_option("--out", out, "samples CSV (default stdout)");
    app->add_option("--out-mask", out_mask, "mask CSV");
  }

  int run(const Globals& g) {
    const auto m = require_dcg(dcg::read_model_file(model), "sample");
    const auto regime = parse_assignment(intervene, "--do");
    dcg::StateMatrix x;
    if (gibbs) {
      dcg::require(sweeps >= 1, "--sweeps must be at least 1");
      dcg::GibbsConfig cfg;
      cfg.burn_in = burn_in;
      cfg.thin = sweeps;
      cfg.sweeps = count * sweeps;
      cfg.seed = g.seed;
      x = dcg::gibbs_sample(m, cfg, {}, regime);
    } else {
      x = dcg::exact_sample(m, regime, count, g.seed);
    }
    std::vector<char> mask;
    for (std::size_t d = 0; d < x.rows(); ++d) {
      for (int i = 0; i < m.n(); ++i) mask.push_back(regime.contains(i) ? 1 : 0);
    }
    const dcg::Dataset data(std::move(x), std::move(mask), dcg::default_names(m.n()));
    emit(out, [&](std::ostream& o) { dcg::write_states_csv(o, data.x(), data.names()); });
    if (!out_mask.empty()) {
      std::ostringstream sink;
      auto mo = open_out(out_mask);
      dcg::write_dataset(sink, mo, data);
    }
    return 0;
  }
};

struct GraphCmd {
  std::string model, graph, intervene;
  int blanket = -1;
  bool moral = false;

  void add(CLI::App* app) {
    auto* m = app->add_option("--model", model, "model JSON");
    auto* g = app->add_option("--graph", graph, "graph JSON {\"n\": .., \"edges\": [[p, c], ...]}");
    m->excludes(g);
    app->add_option("--blanket", blanket, "print the Markov blanket of this node");
    app->add_flag("--moral", moral, "print the moral graph");
    app->add_option("--intervene", intervene, "print the graph after intervening on these nodes");
  }

  int run(const Globals&) {
    dcg::require(!model.empty() || !graph.empty(), "graph needs --model or --graph");
    dcg::DirectedGraph g;
    if (!model.empty()) {
      const auto m = dcg::read_model_file(model);
      if (const auto* ug = std::get_if<dcg::UgModel>(&m)) {
        dcg::require(blanket < 0 && !moral && intervene.empty(), "undirected models only support edge listing");
        for (auto [a, b] : ug->graph().edges()) std::cout << a << " -- " << b << "\n";
        return 0;
      }
      g = std::visit([](const auto& x) -> dcg::DirectedGraph {
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, dcg::UgModel>) {
          return {};
        } else {
          return x.graph();
        }
      }, m);
    } else {
      g = dcg::read_graph_file(graph);
    }
    if (!intervene.empty()) {
      const auto targets = int_list(intervene, "--intervene");
      for (int t : targets) dcg::require(t >= 0 && t < g.n(), "--intervene names node " + std::to_string(t));
      g = dcg::intervene_graph(g, targets);
    }
    if (blanket >= 0) {
      for (int v : dcg::markov_blanket(g, blanket)) std::cout << v << "\n";
    } else if (moral) {
      const auto u = dcg::moralize(g);
      for (auto [a, b] : u.edges()) std::cout << a << " -- " << b << "\n";
    } else {
      for (const auto& e : g.edges()) std::cout << e.parent << " -> " << e.child << "\n";
    }
    return 0;
  }
};

struct ExperimentCmd {
  GenerateCmd synth;
  DataArgs data;
  FitArgs fit;
  int seeds = 1;
  std::string methods = "dcg,dag,ug-observe,ug-condition";
  int grid_points = 20;
  double grid_ratio = 1000.0;
  std::string lambdas;
  int n_cap = dcg::kDefaultOrderCap;
  std::string split = "first";
  std::size_t train_rows = 0;
  std::string out, summary_out, stats_out, log;

  void add(CLI::App* app) {
    app->add_option("--n", synth.cfg.n, "synthetic: node count")->capture_default_str();
    app->add_option("--edge-prob", synth.cfg.edge_prob, "synthetic: edge probability")->capture_default_str();
    app->add_option("-m,--rows", synth.cfg.m, "synthetic: samples")->capture_default_str();
    app->add_option("--obs-fraction", synth.cfg.obs_fraction, "synthetic: observational share")->capture_default_str();
    app->add_option("--states", synth.states, "synthetic: states per node")->capture_default_str();
    app->add_option("--seeds", seeds, "synthetic: replications, seeds --seed .. --seed + seeds - 1")
        ->capture_default_str();
    data.add(app, false);
    fit.add(app);
    app->add_option("--methods", methods, "comma-separated methods")->capture_default_str();
    app->add_option("--grid-points", grid_points, "lambda grid size per method")->capture_default_str();
    app->add_option("--grid-ratio", grid_ratio, "lambda_max over the smallest grid value")->capture_default_str();
    app->add_option("--lambdas", lambdas, "explicit comma-separated grid for every method");
    app->add_option("--n-cap", n_cap, "largest node count for the DAG ordering search")->capture_default_str();
    app->add_option("--split", split, "data: \"first\" or \"half-random\"")
        ->check(CLI::IsMember({"first", "half-random"}))
        ->capture_default_str();
    app->add_option("--train-rows", train_rows, "data, first split: training rows (default half)");
    app->add_option("--out", out, "curves CSV: method,seed,lambda,n_edges,test_nll (default stdout)");
    app->add_option("--summary-out", summary_out, "best-lambda CSV per method and seed");
    app->add_option("--stats-out", stats_out, "mean and two-sd band of best test NLL per method");
    app->add_option("--log", log, "run log JSON");
  }

  int run(const Globals& g) {
    dcg::ExperimentConfig cfg;
    cfg.methods.clear();
    for (const auto& m : split_list(methods)) cfg.methods.push_back(dcg::parse_method(m));
    cfg.grid_points = grid_points;
    cfg.grid_ratio = grid_ratio;
    if (!lambdas.empty()) cfg.lambdas = double_list(lambdas, "--lambdas");
    cfg.lambda2 = fit.lambda2;
    cfg.tol = fit.tol;
    cfg.max_iter = fit.max_iter;
    cfg.threads = g.threads;
    cfg.n_cap = n_cap;
    cfg.seed = g.seed;

    const auto t0 = std::chrono::steady_clock::now();
    dcg::Replication rep;
    if (!data.data.empty()) {
      const auto in = data.load();
      dcg::Split s = split == "half-random"
                         ? dcg::split_half_random(in.data, g.seed)
                         : dcg::split_first(in.data, train_rows > 0 ? train_rows : in.data.rows() / 2);
      rep.reports.push_back(dcg::run_experiment(in.space, s.train, s.test, cfg));
      rep.stats = dcg::replication_stats(rep.reports, cfg.methods);
    } else {
      dcg::require(seeds >= 1, "--seeds must be at least 1");
      synth.cfg.binary = synth.states == 2;
      synth.cfg.states = synth.states;
      std::vector<std::uint64_t> list;
      for (int k = 0; k < seeds; ++k) list.push_back(g.seed + static_cast<std::uint64_t>(k));
      rep = dcg::replicate(synth.cfg, list, cfg, g.threads);
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    emit(out, [&](std::ostream& o) { dcg::write_curves_csv(o, rep.reports); });
    if (!summary_out.empty()) {
      auto o = open_out(summary_out);
      dcg::write_summary_csv(o, rep.reports);
    }
    if (!stats_out.empty()) {
      auto o = open_out(stats_out);
      dcg::write_stats_csv(o, rep.stats);
    }

    bool capacity = false, failed = false, converged = true;
    for (const auto& r : rep.reports) {
      for (const auto& s : r.summary) {
        if (!s.ok()) {
          std::cerr << "seed " << r.seed << ", " << dcg::to_string(s.method) << ": " << s.error << "\n";
          capacity = capacity || s.capacity_failure;
          failed = true;
        }
      }
      for (const auto& p : r.points) converged = converged && p.converged;
    }
    for (const auto& s : rep.stats) {
      std::cerr << dcg::to_string(s.method) << ": best test NLL " << s.mean << " +/- " << 2.0 * s.sd << " over "
                << s.runs << " run(s)\n";
    }
    if (!log.empty()) write_log(g, wall, rep);
    if (capacity) return kExitCapacity;
    if (failed) return kExitInvalid;
    if (!converged) std::cerr << "some fits did not converge\n";
    return converged ? 0 : kExitNotConverged;
  }

  void write_log(const Globals& g, double wall, const dcg::Replication& rep) const {
    json j;
    j["version"] = dcg::kVersion;
    j["seed"] = g.seed;
    j["threads"] = g.threads;
    j["enum_cap"] = g.enum_cap;
    j["config"] = {{"methods", methods},       {"grid_points", grid_points}, {"grid_ratio", grid_ratio},
                   {"lambdas", lambdas},       {"lambda2", fit.lambda2},     {"tol", fit.tol},
                   {"max_iter", fit.max_iter}, {"n_cap", n_cap},             {"seeds", seeds}};
    if (!data.data.empty()) {
      j["config"]["data"] = data.data;
      j["config"]["mask"] = data.mask;
      j["config"]["split"] = split;
    } else {
      j["config"]["synthetic"] = {{"n", synth.cfg.n},
                                  {"edge_prob", synth.cfg.edge_prob},
                                  {"rows", synth.cfg.m},
                                  {"obs_fraction", synth.cfg.obs_fraction},
                                  {"states", synth.states}};
    }
    j["wall_seconds"] = wall;
    j["fits"] = json::array();
    for (const auto& r : rep.reports) {
      for (const auto& p : r.points) {
        j["fits"].push_back({{"seed", r.seed},
                             {"method", dcg::to_string(p.method)},
                             {"lambda", p.lambda},
                             {"seconds", p.seconds},
                             {"converged", p.converged}});
      }
    }
    auto o = open_out(log);
    o << j.dump(2) << "\n";
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Directed cyclic graphical models: fitting, structure learning and baselines"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--enum-cap", g.enum_cap, "largest state count enumerated exactly")->capture_default_str();
  app.add_option("--config", g.config, "JSON file of flag values; command-line flags override it");

  GenerateCmd generate;
  FitCmd fit;
  PathCmd path;
  BaselineCmd baseline;
  EvalCmd eval;
  InferCmd infer;
  SampleCmd sample;
  GraphCmd graph;
  ExperimentCmd experiment;
  generate.add(app.add_subcommand("generate", "synthetic model and interventional data"));
  fit.add(app.add_subcommand("fit", "l2-regularized fit on a fixed graph"));
  path.add(app.add_subcommand("path", "group-l1 regularization path over the complete directed graph"));
  baseline.add(app.add_subcommand("baseline", "DAG or undirected baseline fit"));
  eval.add(app.add_subcommand("eval", "mean test NLL of the free nodes"));
  infer.add(app.add_subcommand("infer", "exact marginal under evidence and interventions"));
  sample.add(app.add_subcommand("sample", "draw samples from a model"));
  graph.add(app.add_subcommand("graph", "graph queries: edges, blanket, moral graph, intervention"));
  experiment.add(app.add_subcommand("experiment", "method comparison along regularization paths"));

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    // Find --config and the subcommand name before the real parse.
    std::string config;
    std::size_t sub_pos = args.size();
    for (std::size_t k = 0; k < args.size(); ++k) {
      if (args[k] == "--config" && k + 1 < args.size()) {
        config = args[k + 1];
      } else if (args[k].rfind("--config=", 0) == 0) {
        config = args[k].substr(9);
      } else if (sub_pos == args.size() && app.get_subcommand_no_throw(args[k]) != nullptr) {
        sub_pos = k;
      }
    }
    if (!config.empty()) {
      CLI::App* active = sub_pos < args.size() ? app.get_subcommand(args[sub_pos]) : nullptr;
      auto extra = config_args(config, app, active);
      const std::size_t at = sub_pos < args.size() ? sub_pos + 1 : 0;
      args.insert(args.begin() + static_cast<std::ptrdiff_t>(at), extra.begin(), extra.end());
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  } catch (const dcg::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  try {
    dcg::set_enumeration_cap(g.enum_cap);
    if (app.got_subcommand("generate")) return generate.run(g);
    if (app.got_subcommand("fit")) return fit.run(g);
    if (app.got_subcommand("path")) return path.run(g);
    if (app.got_subcommand("baseline")) return baseline.run(g);
    if (app.got_subcommand("eval")) return eval.run(g);
    if (app.got_subcommand("infer")) return infer.run(g);
    if (app.got_subcommand("sample")) return sample.run(g);
    if (app.got_subcommand("graph")) return graph.run(g);
    if (app.got_subcommand("experiment")) return experiment.run(g);
  } catch (const dcg::CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return kExitCapacity;
  } catch (const dcg::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const dcg::DegenerateEvidence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
