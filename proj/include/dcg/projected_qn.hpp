#pragma once

// Group-l1 regularized minimization of a smooth objective,
//
//   min_x f(x) + lambda * sum_g ||x_g||_2,
//
// rewritten with one auxiliary scalar per group as the smooth problem
//
//   min_{x, a} f(x) + lambda * sum_g a_g   s.t.  a_g >= ||x_g||_2,
//
// and solved by a limited-memory projected quasi-Newton method: each outer
// iteration minimizes the L-BFGS quadratic model over the product of
// second-order cones with spectral projected gradient, then backtracks
// along the resulting feasible direction. A final active-set stage fixes
// the groups the cone iterations left at zero and refines the rest with
// plain L-BFGS, where the penalty is differentiable.

#include <algorithm>
#include <cmath>
#include <deque>
#include <span>
#include <utility>
#include <vector>

#include "dcg/error.hpp"
#include "dcg/optim.hpp"

namespace dcg {

/// Contiguous block of coordinates penalized as one group.
struct GroupSpan {
  std::size_t offset;
  std::size_t size;
};

/// Euclidean projection of (w, alpha) onto {(w, alpha) : ||w||_2 <= alpha}.
inline std::pair<std::vector<double>, double> project_cone(std::span<const double> w, double alpha) {
  double norm = 0.0;
  for (double v : w) norm += v * v;
  norm = std::sqrt(norm);
  std::vector<double> out(w.begin(), w.end());
  if (norm <= alpha) return {out, alpha};
  if (norm <= -alpha) {
    std::fill(out.begin(), out.end(), 0.0);
    return {out, 0.0};
  }
  const double s = 0.5 * (alpha + norm);
  for (double& v : out) v *= s / norm;
  return {out, s};
}

struct GroupL1Options {
  double tol = 1e-6;
  int max_iter = 2000;
  int memory = 10;
  /// Spectral projected gradient iterations per quasi-Newton subproblem.
  int subproblem_iter = 30;
  /// Groups with ||x_g|| at or below this after optimization are set to zero.
  double zero_threshold = 1e-5;
};

struct GroupL1Result {
  std::vector<double> x;
  /// f(x) + lambda * sum_g ||x_g||.
  double objective = 0.0;
  /// Worst violation of the first-order conditions at x.
  double optimality = 0.0;
  int iterations = 0;
  bool converged = false;
  /// One flag per group: true when the group is exactly zero.
  std::vector<char> zero;
};

namespace detail {

inline void project_in_place(std::span<double> z, std::span<const GroupSpan> groups, std::size_t alpha_base) {
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto w = z.subspan(groups[g].offset, groups[g].size);
    double& a = z[alpha_base + g];
    double norm = 0.0;
    for (double v : w) norm += v * v;
    norm = std::sqrt(norm);
    if (norm <= a) continue;
    if (norm <= -a) {
      std::fill(w.begin(), w.end(), 0.0);
      a = 0.0;
      continue;
    }
    const double s = 0.5 * (a + norm);
    for (double& v : w) v *= s / norm;
    a = s;
  }
}

inline double group_norm(std::span<const double> x, const GroupSpan& g) {
  double s = 0.0;
  for (std::size_t k = 0; k < g.size; ++k) s += x[g.offset + k] * x[g.offset + k];
  return std::sqrt(s);
}

/// Products with the L-BFGS approximation of the Hessian (not its inverse),
/// built from the stored pairs by the rank-two BFGS recursion.
class BfgsMatrix {
 public:
  void rebuild(const std::deque<CurvaturePair>& pairs) {
    pairs_ = &pairs;
    sigma_ = 1.0;
    bs_.clear();
    sbs_.clear();
    if (pairs.empty()) return;
    sigma_ = dot(pairs.back().y, pairs.back().y) / pairs.back().sy;
    for (const auto& p : pairs) {
      auto b = apply(p.s);
      sbs_.push_back(dot(p.s, b));
      bs_.push_back(std::move(b));
    }
  }

  double sigma() const { return sigma_; }

  std::vector<double> apply(std::span<const double> v) const {
    std::vector<double> out(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) out[k] = sigma_ * v[k];
    for (std::size_t i = 0; i < bs_.size(); ++i) {
      const auto& p = (*pairs_)[i];
      const double cb = dot(bs_[i], v) / sbs_[i];
      const double cy = dot(p.y, v) / p.sy;
      for (std::size_t k = 0; k < v.size(); ++k) out[k] += -cb * bs_[i][k] + cy * p.y[k];
    }
    return out;
  }

 private:
  const std::deque<CurvaturePair>* pairs_ = nullptr;
  double sigma_ = 1.0;
  std::vector<std::vector<double>> bs_;
  std::vector<double> sbs_;
};

}  // namespace detail

inline GroupL1Result minimize_group_l1(const Objective& f, std::span<const GroupSpan> groups, double lambda,
                                       std::vector<double> x0, const GroupL1Options& opt = {}) {
  require(lambda >= 0.0, "group penalty must be nonnegative");
  require(opt.tol > 0.0, "tolerance must be positive");
  require(opt.zero_threshold > 0.0, "zero threshold must be positive");
  const std::size_t nx = x0.size();
  const std::size_t ng = groups.size();
  const std::size_t nz = nx + ng;
  std::vector<char> grouped(nx, 0);
  for (const auto& g : groups) {
    require(g.offset + g.size <= nx, "group exceeds the parameter vector");
    for (std::size_t k = 0; k < g.size; ++k) {
      require(!grouped[g.offset + k], "groups overlap");
      grouped[g.offset + k] = 1;
    }
  }

  GroupL1Result result;
  std::vector<double> grad_x(nx);
  auto eval_z = [&](std::span<const double> z, std::span<double> gz) {
    double v = f(z.subspan(0, nx), gz.subspan(0, nx));
    for (std::size_t g = 0; g < ng; ++g) {
      v += lambda * z[nx + g];
      gz[nx + g] = lambda;
    }
    return v;
  };
  auto projected_step_norm = [&](std::span<const double> z, std::span<const double> gz) {
    std::vector<double> p(nz);
    for (std::size_t k = 0; k < nz; ++k) p[k] = z[k] - gz[k];
    detail::project_in_place(p, groups, nx);
    double m = 0.0;
    for (std::size_t k = 0; k < nz; ++k) m = std::max(m, std::abs(p[k] - z[k]));
    return m;
  };

  // Phase 1: projected quasi-Newton on (x, a).
  std::vector<double> z(nz);
  std::copy(x0.begin(), x0.end(), z.begin());
  for (std::size_t g = 0; g < ng; ++g) z[nx + g] = detail::group_norm(z, groups[g]);
  std::vector<double> gz(nz), z_new(nz), gz_new(nz), dir(nz);
  double fz = eval_z(z, gz);
  std::deque<detail::CurvaturePair> memory;
  detail::BfgsMatrix bfgs;
  int iter = 0;
  for (; iter < opt.max_iter; ++iter) {
    if (projected_step_norm(z, gz) <= opt.tol) break;

    if (memory.empty()) {
      double l1 = 0.0;
      for (double v : gz) l1 += std::abs(v);
      const double t0 = std::min(1.0, 1.0 / std::max(l1, 1e-300));
      for (std::size_t k = 0; k < nz; ++k) dir[k] = z[k] - t0 * gz[k];
      detail::project_in_place(dir, groups, nx);
      for (std::size_t k = 0; k < nz; ++k) dir[k] -= z[k];
    } else {
      bfgs.rebuild(memory);
      // SPG on q(y) = g'(y - z) + 0.5 (y - z)' B (y - z) over the cones.
      std::vector<double> y = z, gq = gz, trial(nz);
      double step = 1.0 / bfgs.sigma();
      for (int k = 0; k < opt.subproblem_iter; ++k) {
        for (std::size_t c = 0; c < nz; ++c) trial[c] = y[c] - step * gq[c];
        detail::project_in_place(trial, groups, nx);
        for (std::size_t c = 0; c < nz; ++c) trial[c] -= y[c];
        const double slope = detail::dot(gq, trial);
        if (!(slope < 0.0) || detail::inf_norm(trial) <= 1e-12 * std::max(1.0, detail::inf_norm(y))) break;
        const auto bd = bfgs.apply(trial);
        const double curv = detail::dot(trial, bd);
        const double t = curv > 0.0 ? std::min(1.0, -slope / curv) : 1.0;
        for (std::size_t c = 0; c < nz; ++c) {
          y[c] += t * trial[c];
          gq[c] += t * bd[c];
        }
        if (curv > 0.0) step = detail::dot(trial, trial) / curv;
      }
      for (std::size_t k = 0; k < nz; ++k) dir[k] = y[k] - z[k];
    }
    double slope = detail::dot(gz, dir);
    if (!(slope < 0.0)) {
      if (memory.empty()) break;
      memory.clear();
      continue;
    }
    double t = 1.0;
    bool accepted = false;
    double f_new = 0.0;
    for (int trial = 0; trial < 60; ++trial) {
      for (std::size_t k = 0; k < nz; ++k) z_new[k] = z[k] + t * dir[k];
      f_new = eval_z(z_new, gz_new);
      if (detail::accept_step(f_new, fz, t, slope, detail::dot(gz_new, dir))) {
        accepted = true;
        break;
      }
      t = detail::backtrack(t, fz, f_new, slope);
    }
    if (!accepted) {
      if (memory.empty()) break;
      memory.clear();
      continue;
    }
    std::vector<double> s(nz), yv(nz);
    for (std::size_t k = 0; k < nz; ++k) {
      s[k] = z_new[k] - z[k];
      yv[k] = gz_new[k] - gz[k];
    }
    detail::push_pair(memory, opt.memory, std::move(s), std::move(yv));
    z.swap(z_new);
    gz.swap(gz_new);
    fz = f_new;
  }
  result.iterations = iter;

  // Phase 2: fix zero groups, refine the rest where the penalty is smooth.
  std::vector<double> x(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(nx));
  std::vector<char> zero(ng, 0);
  bool polished = false;
  for (int round = 0; round < 6; ++round) {
    for (std::size_t g = 0; g < ng; ++g) {
      if (!zero[g] && detail::group_norm(x, groups[g]) <= opt.zero_threshold) zero[g] = 1;
      if (zero[g]) std::fill_n(x.begin() + static_cast<std::ptrdiff_t>(groups[g].offset), groups[g].size, 0.0);
    }
    std::vector<std::size_t> free_idx;
    for (std::size_t k = 0; k < nx; ++k) {
      if (!grouped[k]) free_idx.push_back(k);
    }
    for (std::size_t g = 0; g < ng; ++g) {
      if (zero[g]) continue;
      for (std::size_t k = 0; k < groups[g].size; ++k) free_idx.push_back(groups[g].offset + k);
    }
    std::vector<double> full = x;
    auto reduced = [&](std::span<const double> r, std::span<double> gr) {
      for (std::size_t k = 0; k < free_idx.size(); ++k) full[free_idx[k]] = r[k];
      double v = f(full, grad_x);
      for (std::size_t g = 0; g < ng; ++g) {
        if (zero[g]) continue;
        const double norm = detail::group_norm(full, groups[g]);
        v += lambda * norm;
        if (norm > 0.0) {
          for (std::size_t k = 0; k < groups[g].size; ++k) {
            grad_x[groups[g].offset + k] += lambda * full[groups[g].offset + k] / norm;
          }
        }
      }
      for (std::size_t k = 0; k < free_idx.size(); ++k) gr[k] = grad_x[free_idx[k]];
      return v;
    };
    std::vector<double> r0(free_idx.size());
    for (std::size_t k = 0; k < free_idx.size(); ++k) r0[k] = x[free_idx[k]];
    auto polish = minimize_lbfgs(reduced, r0, {opt.tol, opt.max_iter, opt.memory});
    result.iterations += polish.iterations;
    for (std::size_t k = 0; k < free_idx.size(); ++k) x[free_idx[k]] = polish.x[k];
    polished = polish.converged;

    bool changed = false;
    for (std::size_t g = 0; g < ng; ++g) {
      if (!zero[g] && detail::group_norm(x, groups[g]) <= opt.zero_threshold) changed = true;
    }
    if (changed) continue;
    // Zero groups must satisfy ||grad_g f|| <= lambda; release any that do not.
    f(x, grad_x);
    for (std::size_t g = 0; g < ng; ++g) {
      if (!zero[g]) continue;
      const double gn = detail::group_norm(grad_x, groups[g]);
      if (gn > lambda + opt.tol) {
        zero[g] = 0;
        changed = true;
        // Step along the steepest descent direction of the penalized objective.
        const double scale = std::max(10.0 * opt.zero_threshold, 1e-3) / gn;
        for (std::size_t k = 0; k < groups[g].size; ++k) x[groups[g].offset + k] = -scale * grad_x[groups[g].offset + k];
      }
    }
    if (!changed) break;
    polished = false;
  }

  // Report first-order conditions on the final point.
  double value = f(x, grad_x);
  double worst = 0.0;
  for (std::size_t k = 0; k < nx; ++k) {
    if (!grouped[k]) worst = std::max(worst, std::abs(grad_x[k]));
  }
  for (std::size_t g = 0; g < ng; ++g) {
    const double norm = detail::group_norm(x, groups[g]);
    value += lambda * norm;
    if (zero[g]) {
      worst = std::max(worst, detail::group_norm(grad_x, groups[g]) - lambda);
    } else {
      for (std::size_t k = 0; k < groups[g].size; ++k) {
        const std::size_t c = groups[g].offset + k;
        worst = std::max(worst, std::abs(grad_x[c] + lambda * x[c] / norm));
      }
    }
  }
  result.x = std::move(x);
  result.objective = value;
  result.optimality = std::max(worst, 0.0);
  result.converged = polished && result.optimality <= opt.tol * 10.0;
  result.zero = std::move(zero);
  return result;
}

}  // namespace dcg
