#pragma once

// Reparameterizations that leave a model's distribution unchanged: adding a
// constant to a bias block, moving a per-state shift between a bias and a
// weight table, adding a constant to a weight table. The likelihood is
// exactly flat along them, so only the l2 term curves them, which makes
// quasi-Newton iterations crawl. The penalized optimum has no component
// along these directions; optimizing in their orthogonal complement reaches
// the same point.

#include <cmath>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "dcg/optim.hpp"
#include "dcg/parameters.hpp"

namespace dcg {

struct GaugeOptions {
  /// b_i + c.
  bool bias_constants = true;
  /// w_e + c.
  bool weight_constants = true;
  /// b_r[s] + c, w_e[s][.] - c for the block's row node r.
  bool row_shifts = false;
  /// b_c[t] + c, w_e[.][t] - c for the block's column node c.
  bool column_shifts_into_bias = false;
  /// w_e[.][t] + c alone.
  bool column_shifts = false;
};

class GaugeProjector {
 public:
  using Sparse = std::vector<std::pair<std::size_t, double>>;

  GaugeProjector() = default;

  GaugeProjector(std::size_t dim, const std::vector<Sparse>& directions) : dim_(dim) {
    std::vector<double> v(dim);
    for (const auto& dir : directions) {
      std::fill(v.begin(), v.end(), 0.0);
      for (const auto& [k, a] : dir) v[k] += a;
      double before = 0.0;
      for (double x : v) before += x * x;
      if (before == 0.0) continue;
      // Two passes of Gram-Schmidt keep the basis orthonormal to rounding.
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& q : basis_) {
          double c = 0.0;
          for (std::size_t k = 0; k < dim; ++k) c += q[k] * v[k];
          for (std::size_t k = 0; k < dim; ++k) v[k] -= c * q[k];
        }
      }
      double after = 0.0;
      for (double x : v) after += x * x;
      if (after <= 1e-20 * before) continue;
      const double inv = 1.0 / std::sqrt(after);
      for (double& x : v) x *= inv;
      basis_.push_back(v);
    }
  }

  /// x minus its component along the gauge directions.
  void project(std::span<double> x) const {
    for (const auto& q : basis_) {
      double c = 0.0;
      for (std::size_t k = 0; k < dim_; ++k) c += q[k] * x[k];
      for (std::size_t k = 0; k < dim_; ++k) x[k] -= c * q[k];
    }
  }

  std::size_t rank() const { return basis_.size(); }

 private:
  std::size_t dim_ = 0;
  std::vector<std::vector<double>> basis_;
};

inline GaugeProjector gauge_projector(const Parameters& layout, const GaugeOptions& opt) {
  std::vector<GaugeProjector::Sparse> dirs;
  if (opt.bias_constants) {
    for (int i = 0; i < layout.n(); ++i) {
      GaugeProjector::Sparse d;
      for (int s = 0; s < layout.card(i); ++s) d.emplace_back(layout.bias_offset(i) + static_cast<std::size_t>(s), 1.0);
      dirs.push_back(std::move(d));
    }
  }
  for (int e = 0; e < static_cast<int>(layout.block_count()); ++e) {
    const auto [r, c] = layout.block(e);
    const int kr = layout.card(r);
    const int kc = layout.card(c);
    auto cell = [&](int s, int t) { return layout.weight_offset(e) + static_cast<std::size_t>(s * kc + t); };
    if (opt.weight_constants) {
      GaugeProjector::Sparse d;
      for (int s = 0; s < kr; ++s) {
        for (int t = 0; t < kc; ++t) d.emplace_back(cell(s, t), 1.0);
      }
      dirs.push_back(std::move(d));
    }
    if (opt.row_shifts) {
      for (int s = 0; s < kr; ++s) {
        GaugeProjector::Sparse d{{layout.bias_offset(r) + static_cast<std::size_t>(s), 1.0}};
        for (int t = 0; t < kc; ++t) d.emplace_back(cell(s, t), -1.0);
        dirs.push_back(std::move(d));
      }
    }
    if (opt.column_shifts_into_bias || opt.column_shifts) {
      for (int t = 0; t < kc; ++t) {
        GaugeProjector::Sparse d;
        if (opt.column_shifts_into_bias) d.emplace_back(layout.bias_offset(c) + static_cast<std::size_t>(t), 1.0);
        for (int s = 0; s < kr; ++s) d.emplace_back(cell(s, t), opt.column_shifts_into_bias ? -1.0 : 1.0);
        dirs.push_back(std::move(d));
      }
    }
  }
  return GaugeProjector(layout.size(), dirs);
}

namespace detail {

/// Objective restricted to the complement of the gauge directions.
inline Objective gauge_fixed(Objective f, std::shared_ptr<const GaugeProjector> gauge) {
  return [f = std::move(f), gauge = std::move(gauge)](std::span<const double> x, std::span<double> g) {
    std::vector<double> xp(x.begin(), x.end());
    gauge->project(xp);
    const double v = f(xp, g);
    gauge->project(g);
    return v;
  };
}

}  // namespace detail

}  // namespace dcg
