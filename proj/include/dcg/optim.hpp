#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "dcg/error.hpp"

namespace dcg {

/// Smooth objective: returns f(x) and writes its gradient into `grad`.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct LbfgsOptions {
  /// Stop when the infinity-norm of the gradient falls to this value.
  double tol = 1e-6;
  int max_iter = 2000;
  int memory = 10;
};

struct OptimResult {
  std::vector<double> x;
  double value = 0.0;
  /// Infinity-norm of the gradient (or projected gradient) at x.
  double optimality = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double inf_norm(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

/// Sufficient decrease. Close to the optimum the decrease drops below the
/// rounding level of f, so there the step is judged by the directional
/// derivative instead (approximate Wolfe conditions).
inline bool accept_step(double f_new, double f, double t, double slope, double slope_new) {
  if (!std::isfinite(f_new)) return false;
  if (f_new <= f + 1e-4 * t * slope) return true;
  if (f_new > f + 1e-12 * std::max(1.0, std::abs(f))) return false;
  return slope_new >= 0.9 * slope && slope_new <= -0.8 * slope;
}

inline double backtrack(double t, double f, double f_new, double slope) {
  if (!std::isfinite(f_new)) return 0.1 * t;
  const double denom = 2.0 * (f_new - f - slope * t);
  double next = denom > 0.0 ? -slope * t * t / denom : 0.5 * t;
  return std::clamp(next, 0.1 * t, 0.5 * t);
}

struct CurvaturePair {
  std::vector<double> s;
  std::vector<double> y;
  double sy;
};

inline bool push_pair(std::deque<CurvaturePair>& memory, int capacity, std::vector<double> s, std::vector<double> y) {
  const double sy = dot(s, y);
  if (!(sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y)))) return false;
  if (static_cast<int>(memory.size()) == capacity) memory.pop_front();
  memory.push_back({std::move(s), std::move(y), sy});
  return true;
}

}  // namespace detail

/// Limited-memory BFGS with a backtracking Armijo line search.
inline OptimResult minimize_lbfgs(const Objective& f, std::vector<double> x, const LbfgsOptions& opt = {}) {
  require(opt.tol > 0.0, "tolerance must be positive");
  require(opt.memory >= 1, "quasi-Newton memory must be at least 1");
  const std::size_t dim = x.size();
  OptimResult result;
  std::vector<double> g(dim), g_new(dim), x_new(dim), d(dim), alpha;
  double fx = f(x, g);
  result.evaluations = 1;
  std::deque<detail::CurvaturePair> memory;

  for (int iter = 0;; ++iter) {
    result.iterations = iter;
    const double gnorm = detail::inf_norm(g);
    if (gnorm <= opt.tol) {
      result.converged = true;
      break;
    }
    if (iter >= opt.max_iter) break;

    // Two-loop recursion.
    for (std::size_t k = 0; k < dim; ++k) d[k] = -g[k];
    alpha.assign(memory.size(), 0.0);
    for (std::size_t m = memory.size(); m-- > 0;) {
      alpha[m] = detail::dot(memory[m].s, d) / memory[m].sy;
      for (std::size_t k = 0; k < dim; ++k) d[k] -= alpha[m] * memory[m].y[k];
    }
    if (!memory.empty()) {
      const auto& last = memory.back();
      const double gamma = last.sy / detail::dot(last.y, last.y);
      for (double& v : d) v *= gamma;
    }
    for (std::size_t m = 0; m < memory.size(); ++m) {
      const double beta = detail::dot(memory[m].y, d) / memory[m].sy;
      for (std::size_t k = 0; k < dim; ++k) d[k] += (alpha[m] - beta) * memory[m].s[k];
    }
    double slope = detail::dot(g, d);
    if (!(slope < 0.0)) {
      memory.clear();
      for (std::size_t k = 0; k < dim; ++k) d[k] = -g[k];
      slope = detail::dot(g, d);
    }

    double t = memory.empty() ? std::min(1.0, 1.0 / std::max(gnorm, 1e-300)) : 1.0;
    double f_new = 0.0;
    bool accepted = false;
    for (int trial = 0; trial < 60; ++trial) {
      for (std::size_t k = 0; k < dim; ++k) x_new[k] = x[k] + t * d[k];
      f_new = f(x_new, g_new);
      ++result.evaluations;
      if (detail::accept_step(f_new, fx, t, slope, detail::dot(g_new, d))) {
        accepted = true;
        break;
      }
      t = detail::backtrack(t, fx, f_new, slope);
    }
    if (!accepted) {
      if (memory.empty()) break;
      memory.clear();
      continue;
    }
    std::vector<double> s(dim), y(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      s[k] = x_new[k] - x[k];
      y[k] = g_new[k] - g[k];
    }
    detail::push_pair(memory, opt.memory, std::move(s), std::move(y));
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
  }
  result.x = std::move(x);
  result.value = fx;
  result.optimality = detail::inf_norm(g);
  return result;
}

/// Central differences with step h * max(1, |x_k|) per coordinate.
inline std::vector<double> finite_diff_gradient(const std::function<double(std::span<const double>)>& f,
                                                std::span<const double> x, double h = 1e-5) {
  require(h > 0.0, "finite-difference step must be positive");
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double step = h * std::max(1.0, std::abs(x[k]));
    point[k] = x[k] + step;
    const double up = f(point);
    point[k] = x[k] - step;
    const double down = f(point);
    point[k] = x[k];
    grad[k] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace dcg
