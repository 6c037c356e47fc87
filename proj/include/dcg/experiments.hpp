#pragma once

// Synthetic data, train/test splits, multi-method regularization paths and
// replication over seeds.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "dcg/baselines.hpp"
#include "dcg/dataset.hpp"
#include "dcg/error.hpp"
#include "dcg/inference.hpp"
#include "dcg/model.hpp"
#include "dcg/rng.hpp"
#include "dcg/structure_learning.hpp"

namespace dcg {

inline constexpr const char* kVersion = "1.0.0";

struct SynthConfig {
  int n = 10;
  double edge_prob = 0.5;
  std::size_t m = 1000;
  double obs_fraction = 1.0 / 11.0;
  std::uint64_t seed = 0;
  bool binary = true;
  /// States per node when binary is false.
  int states = 3;
  /// Use Gibbs chains when a regime is too large to enumerate.
  bool gibbs_fallback = false;
  std::size_t burn_in = 5000;

  void validate() const {
    require(n >= 1, "synthetic model needs at least one node");
    require(edge_prob >= 0.0 && edge_prob <= 1.0, "edge_prob must lie in [0, 1]");
    require(obs_fraction > 0.0 && obs_fraction <= 1.0, "obs_fraction must lie in (0, 1]");
    require(binary || states >= 2, "states must be at least 2");
  }
};

struct SyntheticData {
  Model truth;
  Dataset data;
};

inline std::vector<std::string> default_names(int n) {
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

/// Random graph with N(0,1) parameters, then m rows. Each row is observational
/// with probability obs_fraction; otherwise one uniformly chosen node is set
/// to a uniformly drawn state.
inline SyntheticData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const StateSpace space(std::vector<int>(static_cast<std::size_t>(cfg.n), cfg.binary ? 2 : cfg.states));
  std::vector<Edge> edges;
  for (int j = 0; j < cfg.n; ++j) {
    for (int i = 0; i < cfg.n; ++i) {
      if (i != j && rng.bernoulli(cfg.edge_prob)) edges.push_back({j, i});
    }
  }
  DirectedGraph graph(cfg.n, edges);
  Parameters params = Parameters::zeros(space, graph);
  for (double& v : params.flat()) v = rng.normal();
  Model truth(space, graph, std::move(params));

  std::map<Assignment, std::optional<ExactSampler>> samplers;
  StateMatrix x(cfg.n);
  std::vector<char> mask;
  mask.reserve(cfg.m * static_cast<std::size_t>(cfg.n));
  for (std::size_t d = 0; d < cfg.m; ++d) {
    Assignment regime;
    if (!rng.bernoulli(cfg.obs_fraction)) {
      const int node = rng.uniform_int(cfg.n);
      regime = Assignment{{node, rng.uniform_int(space.card(node))}};
    }
    auto it = samplers.find(regime);
    if (it == samplers.end()) {
      std::optional<ExactSampler> s;
      try {
        s.emplace(truth, regime);
      } catch (const CapacityError&) {
        if (!cfg.gibbs_fallback) throw;
      }
      it = samplers.emplace(regime, std::move(s)).first;
    }
    if (it->second) {
      x.push_back(it->second->sample(rng));
    } else {
      GibbsConfig g;
      g.burn_in = cfg.burn_in;
      g.sweeps = 1;
      g.seed = rng.next_u64();
      x.push_back(gibbs_sample(truth, g, {}, regime).row(0));
    }
    for (int i = 0; i < cfg.n; ++i) mask.push_back(regime.contains(i) ? 1 : 0);
  }
  return {std::move(truth), Dataset(std::move(x), std::move(mask), default_names(cfg.n))};
}

struct Split {
  Dataset train;
  Dataset test;
};

/// First `train_rows` rows train, the rest test.
inline Split split_first(const Dataset& data, std::size_t train_rows) {
  require(train_rows > 0 && train_rows < data.rows(), "split leaves an empty train or test set");
  return {data.slice(0, train_rows), data.slice(train_rows, data.rows())};
}

/// Seeded random permutation of the rows; the first floor(train_fraction * rows) train.
inline Split split_random(const Dataset& data, double train_fraction, std::uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0, "train fraction must lie in (0, 1)");
  std::vector<std::size_t> idx(data.rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed, 0x5EED);
  for (std::size_t k = idx.size(); k > 1; --k) std::swap(idx[k - 1], idx[rng.uniform_index(k)]);
  const auto cut = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(data.rows())));
  require(cut > 0 && cut < data.rows(), "split leaves an empty train or test set");
  std::vector<std::size_t> a(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
  std::vector<std::size_t> b(idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
  return {data.subset(a), data.subset(b)};
}

inline Split split_half_random(const Dataset& data, std::uint64_t seed) { return split_random(data, 0.5, seed); }

struct Ingested {
  StateSpace space;
  Dataset data;
};

/// Reads a data CSV and optional mask CSV. `card` overrides the inferred
/// cardinalities: empty keeps them, one value applies to every column,
/// otherwise one value per column.
inline Ingested ingest_dataset(const std::string& data_path, const std::string& mask_path = {},
                               const std::vector<int>& card = {}) {
  Dataset data = read_dataset_files(data_path, mask_path);
  require(data.rows() > 0, data_path + " has no data rows");
  const auto seen = data.inferred_cardinalities();
  std::vector<int> k = seen;
  if (card.size() == 1) {
    k.assign(seen.size(), card.front());
  } else if (!card.empty()) {
    require(card.size() == seen.size(), "--card lists " + std::to_string(card.size()) + " values for " +
                                            std::to_string(seen.size()) + " columns");
    k = card;
  }
  for (std::size_t i = 0; i < k.size(); ++i) {
    require(k[i] >= 2, "cardinality of column " + data.names()[i] + " must be at least 2");
    if (seen[i] > k[i]) {
      throw InvalidInput("column " + data.names()[i] + " has state index " + std::to_string(seen[i] - 1) +
                         ", beyond the cardinality " + std::to_string(k[i]) + " given by --card");
    }
  }
  StateSpace space(k);
  data.validate(space);
  return {std::move(space), std::move(data)};
}

enum class Method { dcg, dag, ug_observe, ug_condition };

inline const std::vector<Method>& all_methods() {
  static const std::vector<Method> all{Method::dcg, Method::dag, Method::ug_observe, Method::ug_condition};
  return all;
}

inline const char* to_string(Method m) {
  switch (m) {
    case Method::dcg: return "dcg";
    case Method::dag: return "dag";
    case Method::ug_observe: return "ug-observe";
    default: return "ug-condition";
  }
}

inline Method parse_method(const std::string& s) {
  for (Method m : all_methods()) {
    if (s == to_string(m)) return m;
  }
  throw InvalidInput("unknown method \"" + s + "\" (expected dcg, dag, ug-observe or ug-condition)");
}

struct ExperimentConfig {
  std::vector<Method> methods = all_methods();
  int grid_points = 20;
  double grid_ratio = 1000.0;
  /// Used for every method when nonempty; otherwise each method gets a grid
  /// below its own lambda_max.
  std::vector<double> lambdas;
  double lambda2 = kDefaultLambda2;
  double tol = 1e-6;
  int max_iter = 2000;
  int threads = 1;
  int n_cap = kDefaultOrderCap;
  /// Recorded in the report.
  std::uint64_t seed = 0;
};

struct CurvePoint {
  Method method = Method::dcg;
  double lambda = 0.0;
  int n_edges = 0;
  double test_nll = 0.0;
  bool converged = true;
  double seconds = 0.0;
};

struct MethodSummary {
  Method method = Method::dcg;
  double lambda_max = 0.0;
  double best_lambda = std::numeric_limits<double>::quiet_NaN();
  double best_test_nll = std::numeric_limits<double>::quiet_NaN();
  int best_n_edges = 0;
  double seconds = 0.0;
  /// Empty on success.
  std::string error;
  /// Set when the failure was a CapacityError.
  bool capacity_failure = false;
  bool ok() const { return error.empty(); }
};

struct ExperimentReport {
  std::uint64_t seed = 0;
  std::vector<CurvePoint> points;
  std::vector<MethodSummary> summary;
  double seconds = 0.0;

  const MethodSummary* find(Method m) const {
    for (const auto& s : summary) {
      if (s.method == m) return &s;
    }
    return nullptr;
  }
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Runs task(k) for k in [0, count) on up to `workers` threads. The first
/// exception is rethrown after all workers stop.
inline void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& task) {
  const std::size_t w = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
  if (w <= 1) {
    for (std::size_t k = 0; k < count; ++k) task(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex lock;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < w; ++t) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < count; k = next++) {
        try {
          task(k);
        } catch (...) {
          std::lock_guard<std::mutex> g(lock);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline std::vector<double> method_grid(const ExperimentConfig& cfg, double lmax) {
  if (!cfg.lambdas.empty()) {
    std::vector<double> grid = cfg.lambdas;
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
  }
  return default_lambda_grid(lmax, cfg.grid_points, cfg.grid_ratio);
}

inline GroupL1Config base_config(const ExperimentConfig& cfg) {
  GroupL1Config g;
  g.lambda2 = cfg.lambda2;
  g.tol = cfg.tol;
  g.max_iter = cfg.max_iter;
  return g;
}

inline void run_method(Method method, const StateSpace& space, const Dataset& train, const Dataset& test,
                       const ExperimentConfig& cfg, int threads, std::vector<CurvePoint>& points,
                       MethodSummary& summary) {
  const GroupL1Config base = base_config(cfg);
  auto record = [&](double lambda, int edges, double nll, bool conv, Clock::time_point t0) {
    points.push_back({method, lambda, edges, nll, conv, seconds_since(t0)});
  };
  switch (method) {
    case Method::dcg: {
      const auto candidate = DirectedGraph::complete(space.n());
      summary.lambda_max = lambda_max(space, candidate, train, cfg.lambda2);
      const auto grid = method_grid(cfg, summary.lambda_max);
      // Fit point by point so each gets its own timing; warm starts as in reg_path.
      std::optional<Parameters> warm;
      for (double lambda : grid) {
        const auto t0 = Clock::now();
        GroupL1Config c = base;
        c.lambda = lambda;
        auto fit = fit_group_l1(space, candidate, train, c, warm);
        record(lambda, static_cast<int>(fit.active_edges.size()), eval_test_nll(fit.model, test), fit.converged, t0);
        warm = fit.model.params();
      }
      break;
    }
    case Method::dag: {
      summary.lambda_max = dag_lambda_max(space, train, cfg.lambda2);
      for (double lambda : method_grid(cfg, summary.lambda_max)) {
        const auto t0 = Clock::now();
        GroupL1Config c = base;
        c.lambda = lambda;
        auto fit = dag_order_search(space, train, c, cfg.n_cap, threads);
        record(lambda, static_cast<int>(fit.model.graph().edge_count()), eval_test_nll(fit.model, test),
               fit.converged, t0);
      }
      break;
    }
    case Method::ug_observe:
    case Method::ug_condition: {
      const UgMode mode = method == Method::ug_observe ? UgMode::observe : UgMode::condition;
      summary.lambda_max = ug_lambda_max(space, train, mode, cfg.lambda2);
      std::optional<Parameters> warm;
      for (double lambda : method_grid(cfg, summary.lambda_max)) {
        const auto t0 = Clock::now();
        GroupL1Config c = base;
        c.lambda = lambda;
        auto fit = ug_fit_group_l1(space, train, mode, c, warm);
        record(lambda, static_cast<int>(fit.active_edges.size()), eval_test_nll(fit.model, test), fit.converged, t0);
        warm = fit.model.params();
      }
      break;
    }
  }
}

}  // namespace detail

/// Fits every requested method along its lambda grid on `train` and scores
/// each point on the same `test` rows. A failing method is recorded in its
/// summary and the others still run.
inline ExperimentReport run_experiment(const StateSpace& space, const Dataset& train, const Dataset& test,
                                       const ExperimentConfig& cfg) {
  require(!cfg.methods.empty(), "no methods requested");
  require(cfg.grid_points >= 1, "grid needs at least one point");
  require(cfg.lambda2 > 0.0, "lambda2 must be positive");
  for (double l : cfg.lambdas) require(l >= 0.0 && std::isfinite(l), "lambdas must be finite and nonnegative");
  train.validate(space);
  test.validate(space);
  require(train.rows() > 0 && test.rows() > 0, "train and test sets must be nonempty");

  const auto t0 = detail::Clock::now();
  const std::size_t count = cfg.methods.size();
  std::vector<std::vector<CurvePoint>> curves(count);
  std::vector<MethodSummary> summary(count);
  const int workers = std::max(1, cfg.threads);
  // Methods run side by side; leftover workers go to the DAG local scores.
  const int inner = std::max(1, workers / static_cast<int>(std::min<std::size_t>(count, static_cast<std::size_t>(workers))));
  detail::parallel_for(count, workers, [&](std::size_t k) {
    const auto m0 = detail::Clock::now();
    summary[k].method = cfg.methods[k];
    try {
      detail::run_method(cfg.methods[k], space, train, test, cfg, inner, curves[k], summary[k]);
    } catch (const CapacityError& e) {
      summary[k].error = e.what();
      summary[k].capacity_failure = true;
    } catch (const std::exception& e) {
      summary[k].error = e.what();
    }
    summary[k].seconds = detail::seconds_since(m0);
  });

  ExperimentReport report;
  report.seed = cfg.seed;
  for (std::size_t k = 0; k < count; ++k) {
    auto& s = summary[k];
    for (const auto& p : curves[k]) {
      if (std::isnan(s.best_test_nll) || p.test_nll < s.best_test_nll) {
        s.best_test_nll = p.test_nll;
        s.best_lambda = p.lambda;
        s.best_n_edges = p.n_edges;
      }
      report.points.push_back(p);
    }
    if (s.ok() && curves[k].empty()) s.error = "no lambda values";
    report.summary.push_back(s);
  }
  std::stable_sort(report.points.begin(), report.points.end(), [](const CurvePoint& a, const CurvePoint& b) {
    return std::pair(static_cast<int>(a.method), a.lambda) < std::pair(static_cast<int>(b.method), b.lambda);
  });
  std::stable_sort(report.summary.begin(), report.summary.end(), [](const MethodSummary& a, const MethodSummary& b) {
    return static_cast<int>(a.method) < static_cast<int>(b.method);
  });
  report.seconds = detail::seconds_since(t0);
  return report;
}

/// Synthetic protocol: generate, train on the first half, test on the rest.
inline ExperimentReport run_synthetic_experiment(const SynthConfig& synth, ExperimentConfig cfg) {
  const auto gen = generate_synthetic(synth);
  const auto split = split_first(gen.data, gen.data.rows() / 2);
  cfg.seed = synth.seed;
  return run_experiment(gen.truth.space(), split.train, split.test, cfg);
}

struct ReplicationStats {
  Method method = Method::dcg;
  int runs = 0;
  double mean = 0.0;
  /// Sample standard deviation (n - 1).
  double sd = 0.0;
  double lower() const { return mean - 2.0 * sd; }
  double upper() const { return mean + 2.0 * sd; }
};

struct Replication {
  std::vector<ExperimentReport> reports;
  std::vector<ReplicationStats> stats;
};

/// Mean and spread of each method's best test NLL across reports.
inline std::vector<ReplicationStats> replication_stats(const std::vector<ExperimentReport>& reports,
                                                       const std::vector<Method>& methods) {
  std::vector<ReplicationStats> out;
  for (Method m : methods) {
    std::vector<double> v;
    for (const auto& r : reports) {
      const auto* s = r.find(m);
      if (s != nullptr && s->ok()) v.push_back(s->best_test_nll);
    }
    ReplicationStats st;
    st.method = m;
    st.runs = static_cast<int>(v.size());
    if (!v.empty()) {
      st.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - st.mean) * (x - st.mean);
      st.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    } else {
      st.mean = st.sd = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(st);
  }
  return out;
}

/// One synthetic experiment per seed, `workers` seeds at a time.
inline Replication replicate(const SynthConfig& synth, const std::vector<std::uint64_t>& seeds,
                             const ExperimentConfig& cfg, int workers) {
  require(!seeds.empty(), "no seeds to replicate");
  Replication out;
  out.reports.resize(seeds.size());
  ExperimentConfig inner = cfg;
  inner.threads = 1;
  detail::parallel_for(seeds.size(), workers, [&](std::size_t k) {
    SynthConfig s = synth;
    s.seed = seeds[k];
    out.reports[k] = run_synthetic_experiment(s, inner);
  });
  out.stats = replication_stats(out.reports, cfg.methods);
  return out;
}

inline void write_curves_csv(std::ostream& out, const std::vector<ExperimentReport>& reports) {
  std::vector<std::pair<std::uint64_t, CurvePoint>> rows;
  for (const auto& r : reports) {
    for (const auto& p : r.points) rows.emplace_back(r.seed, p);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::tuple(a.first, static_cast<int>(a.second.method), a.second.lambda) <
           std::tuple(b.first, static_cast<int>(b.second.method), b.second.lambda);
  });
  const auto old = out.precision(17);
  out << "method,seed,lambda,n_edges,test_nll\n";
  for (const auto& [seed, p] : rows) {
    out << to_string(p.method) << ',' << seed << ',' << p.lambda << ',' << p.n_edges << ',' << p.test_nll << '\n';
  }
  out.precision(old);
}

inline void write_summary_csv(std::ostream& out, const std::vector<ExperimentReport>& reports) {
  const auto old = out.precision(17);
  out << "method,seed,lambda_max,best_lambda,best_n_edges,best_test_nll,seconds,error\n";
  for (const auto& r : reports) {
    for (const auto& s : r.summary) {
      std::string err = s.error;
      std::replace(err.begin(), err.end(), ',', ';');
      std::replace(err.begin(), err.end(), '\n', ' ');
      out << to_string(s.method) << ',' << r.seed << ',' << s.lambda_max << ',' << s.best_lambda << ','
          << s.best_n_edges << ',' << s.best_test_nll << ',' << s.seconds << ',' << err << '\n';
    }
  }
  out.precision(old);
}

inline void write_stats_csv(std::ostream& out, const std::vector<ReplicationStats>& stats) {
  const auto old = out.precision(17);
  out << "method,runs,mean,sd,lower,upper\n";
  for (const auto& s : stats) {
    out << to_string(s.method) << ',' << s.runs << ',' << s.mean << ',' << s.sd << ',' << s.lower() << ','
        << s.upper() << '\n';
  }
  out.precision(old);
}

}  // namespace dcg
