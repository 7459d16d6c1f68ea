#pragma once

// Composite trapezoid rule over a tensor grid, accumulated in log space.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "ockham/errors.hpp"

namespace ockham {

/// Axis-aligned box; bounds may be infinite for supports.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  Eigen::Index dim() const noexcept { return lo.size(); }
  bool finite() const { return lo.allFinite() && hi.allFinite(); }
  bool contains(const Eigen::VectorXd& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  Eigen::VectorXd project(const Eigen::VectorXd& p) const {
    return p.cwiseMax(lo).cwiseMin(hi);
  }
  Eigen::VectorXd center() const { return 0.5 * (lo + hi); }
};

inline Box make_box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  if (lo.size() != hi.size()) throw InvalidArgument("box bounds have different lengths");
  if (!((lo.array() < hi.array()).all())) throw InvalidArgument("box lower bound must lie below upper bound");
  return Box{lo, hi};
}

inline Box symmetric_box(Eigen::Index dim, double half_width) {
  return make_box(Eigen::VectorXd::Constant(dim, -half_width),
                  Eigen::VectorXd::Constant(dim, half_width));
}

/// Running log(Σ exp(v_i)).
class LogSumExp {
 public:
  void add(double v) noexcept {
    if (v == -std::numeric_limits<double>::infinity()) return;
    if (v <= max_) {
      sum_ += std::exp(v - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - v) + 1.0;
      max_ = v;
    }
  }
  double value() const noexcept {
    if (sum_ == 0.0) return -std::numeric_limits<double>::infinity();
    return max_ + std::log(sum_);
  }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
};

struct GridIntegral {
  double log_integral = 0.0;         // full-resolution trapezoid
  double log_integral_coarse = 0.0;  // every other node, double step
  double max_log_value = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd argmax;
  /// Largest log integrand on a face flagged as truncating the support.
  double max_log_boundary = -std::numeric_limits<double>::infinity();

  /// Richardson estimate of the full-resolution error (trapezoid is O(h²)).
  double err_estimate() const { return std::abs(log_integral - log_integral_coarse) / 3.0; }
};

/// log ∫_box exp(log_integrand(θ)) dθ by the composite trapezoid rule with
/// `points_per_dim` nodes per axis (odd, so the half-resolution grid nests).
///
/// `open_lo`/`open_hi` flag faces that cut through the support; only those
/// contribute to `max_log_boundary`.
template <class LogIntegrand>
GridIntegral log_trapezoid(LogIntegrand&& log_integrand, const Box& box, int points_per_dim,
                           const std::vector<bool>& open_lo = {},
                           const std::vector<bool>& open_hi = {}) {
  const Eigen::Index d = box.dim();
  if (d < 1 || d > 3) throw InvalidArgument("grid quadrature supports 1 to 3 dimensions");
  if (!box.finite()) throw InvalidArgument("grid quadrature needs a finite box");
  if (points_per_dim < 3 || points_per_dim % 2 == 0) {
    throw InvalidArgument("points per dimension must be odd and at least 3");
  }

  const int m = points_per_dim;
  const Eigen::VectorXd step = (box.hi - box.lo) / static_cast<double>(m - 1);
  double log_cell = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) log_cell += std::log(step(k));
  const double log_half = std::log(0.5);
  const double log_two = std::log(2.0);

  LogSumExp fine;
  LogSumExp coarse;
  GridIntegral out;
  out.argmax = box.center();

  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  Eigen::VectorXd theta(d);
  for (;;) {
    bool on_coarse = true;
    bool on_open_face = false;
    int ends = 0;
    for (Eigen::Index k = 0; k < d; ++k) {
      const int i = idx[static_cast<std::size_t>(k)];
      theta(k) = (i == m - 1) ? box.hi(k) : box.lo(k) + step(k) * i;
      if (i == 0 || i == m - 1) {
        ++ends;
        const bool open = (i == 0) ? (open_lo.empty() || open_lo[static_cast<std::size_t>(k)])
                                   : (open_hi.empty() || open_hi[static_cast<std::size_t>(k)]);
        on_open_face = on_open_face || open;
      }
      if (i % 2 != 0) on_coarse = false;
    }
    const double log_w = ends * log_half;

    const double v = log_integrand(static_cast<const Eigen::VectorXd&>(theta));
    if (std::isnan(v)) throw NumericFailure("integrand returned NaN during grid quadrature");
    fine.add(v + log_w);
    if (on_coarse) coarse.add(v + log_w + static_cast<double>(d) * log_two);
    if (v > out.max_log_value) {
      out.max_log_value = v;
      out.argmax = theta;
    }
    if (on_open_face) out.max_log_boundary = std::max(out.max_log_boundary, v);

    Eigen::Index k = 0;
    while (k < d) {
      if (++idx[static_cast<std::size_t>(k)] < m) break;
      idx[static_cast<std::size_t>(k)] = 0;
      ++k;
    }
    if (k == d) break;
  }

  out.log_integral = fine.value() + log_cell;
  out.log_integral_coarse = coarse.value() + log_cell;
  return out;
}

}  // namespace ockham
