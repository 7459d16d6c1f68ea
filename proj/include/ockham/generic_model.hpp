#pragma once

// Black-box models: a log-likelihood θ ↦ log f(y_obs; θ) and a regularizer
// R(θ) over a box-bounded parameter space, with the prior π ∝ exp(−R).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ockham/errors.hpp"
#include "ockham/glm.hpp"
#include "ockham/quadrature.hpp"
#include "ockham/random.hpp"

namespace ockham {

using ScalarField = std::function<double(const Eigen::VectorXd&)>;

/// User functions must be safe to call concurrently.
struct GenericModelSpec {
  Eigen::Index dim = 1;
  ScalarField log_lik;
  ScalarField regularizer;
  Box support;
  /// Finite box used for integration when `support` is unbounded.
  std::optional<Box> effective_box;

  double log_objective(const Eigen::VectorXd& theta) const {
    return log_lik(theta) - regularizer(theta);
  }

  Box integration_box() const {
    if (effective_box) return *effective_box;
    if (support.finite()) return support;
    throw InvalidArgument("unbounded support requires a declared effective integration box");
  }
};

inline void validate(const GenericModelSpec& model) {
  if (model.dim < 1) throw InvalidArgument("model dimension must be positive");
  if (!model.log_lik || !model.regularizer) {
    throw InvalidArgument("model needs both a log-likelihood and a regularizer");
  }
  if (model.support.dim() != model.dim) throw InvalidArgument("support dimension does not match model");
  if (model.effective_box && model.effective_box->dim() != model.dim) {
    throw InvalidArgument("effective box dimension does not match model");
  }
}

inline GenericModelSpec make_generic_model(Eigen::Index dim, ScalarField log_lik,
                                           ScalarField regularizer, Box support,
                                           std::optional<Box> effective_box = std::nullopt) {
  GenericModelSpec model{dim, std::move(log_lik), std::move(regularizer), std::move(support),
                         std::move(effective_box)};
  validate(model);
  (void)model.integration_box();
  return model;
}

/// The Gaussian linear model as a black box. The effective box covers the
/// prior out to ±10 prior standard deviations and the posterior out to ±12
/// posterior standard deviations.
inline GenericModelSpec wrap_glm(const GaussianLinearSpec& spec, const ObservationSet& obs) {
  const GaussianPosterior post = fit_posterior(spec, obs);
  const Eigen::Index d = spec.d();
  const Eigen::MatrixXd cov =
      post.post_precision.llt().solve(Eigen::MatrixXd::Identity(d, d));
  const double prior_reach = 10.0 / spec.lambda;
  const double post_reach =
      post.theta_hat.cwiseAbs().maxCoeff() + 12.0 * std::sqrt(cov.diagonal().maxCoeff());
  const double half = std::max(prior_reach, post_reach);

  const Eigen::MatrixXd G = spec.G;
  const Eigen::VectorXd y = obs.y;
  const double var = spec.sigma * spec.sigma;
  const double log_norm =
      -0.5 * static_cast<double>(spec.n()) * (kLog2Pi + std::log(var));
  const double lambda2 = spec.lambda * spec.lambda;

  GenericModelSpec model;
  model.dim = d;
  model.log_lik = [G, y, var, log_norm](const Eigen::VectorXd& theta) {
    return log_norm - (y - G * theta).squaredNorm() / (2.0 * var);
  };
  model.regularizer = [lambda2](const Eigen::VectorXd& theta) {
    return 0.5 * lambda2 * theta.squaredNorm();
  };
  const double inf = std::numeric_limits<double>::infinity();
  model.support = Box{Eigen::VectorXd::Constant(d, -inf), Eigen::VectorXd::Constant(d, inf)};
  model.effective_box = symmetric_box(d, half);
  return model;
}

// ---------------------------------------------------------------------------
// Finite differences

inline double gradient_step(double x) { return 1e-5 * (1.0 + std::abs(x)); }
inline double hessian_step(double x) { return 1e-4 * (1.0 + std::abs(x)); }

/// Central differences with h_k = 1e-5·(1 + |θ_k|).
template <class F>
Eigen::VectorXd fd_gradient(F&& f, const Eigen::VectorXd& theta) {
  Eigen::VectorXd g(theta.size());
  Eigen::VectorXd probe = theta;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double h = gradient_step(theta(k));
    probe(k) = theta(k) + h;
    const double up = f(probe);
    probe(k) = theta(k) - h;
    const double down = f(probe);
    probe(k) = theta(k);
    g(k) = (up - down) / (2.0 * h);
  }
  return g;
}

/// Central second differences. Exact up to rounding for quadratics, so the
/// step is larger than the gradient step to keep rounding error small.
template <class F>
Eigen::MatrixXd fd_hessian(F&& f, const Eigen::VectorXd& theta) {
  const Eigen::Index d = theta.size();
  Eigen::MatrixXd h(d, d);
  Eigen::VectorXd step(d);
  for (Eigen::Index k = 0; k < d; ++k) step(k) = hessian_step(theta(k));
  const double f0 = f(theta);
  Eigen::VectorXd probe = theta;
  for (Eigen::Index i = 0; i < d; ++i) {
    probe(i) = theta(i) + step(i);
    const double up = f(probe);
    probe(i) = theta(i) - step(i);
    const double down = f(probe);
    probe(i) = theta(i);
    h(i, i) = (up - 2.0 * f0 + down) / (step(i) * step(i));
    for (Eigen::Index j = 0; j < i; ++j) {
      double acc = 0.0;
      for (const int si : {1, -1}) {
        for (const int sj : {1, -1}) {
          probe(i) = theta(i) + si * step(i);
          probe(j) = theta(j) + sj * step(j);
          acc += si * sj * f(probe);
        }
      }
      probe(i) = theta(i);
      probe(j) = theta(j);
      h(i, j) = h(j, i) = acc / (4.0 * step(i) * step(j));
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// MAP optimization

struct MapOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;
  double curvature_tolerance = 1e-4;
};

struct MapResult {
  Eigen::VectorXd theta;
  double objective = 0.0;  // log f(y; θ̂) − R(θ̂)
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
  int iterations = 0;
};

namespace detail {

inline double golden_section_max(const std::function<double(double)>& f, double a, double b) {
  constexpr double inv_phi = 0.6180339887498948482;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < 100 && (b - a) > 1e-12 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

inline bool negative_semidefinite(const Eigen::MatrixXd& h, double tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  return eig.eigenvalues().maxCoeff() <= tol * scale;
}

}  // namespace detail

/// Local maximizer of log f(y; θ) − R(θ) inside the support.
///
/// Safeguarded Newton on finite-difference derivatives with backtracking and
/// projection onto the support; when the Hessian is not negative definite
/// (or the Newton line search stalls) each coordinate is improved by
/// golden-section search instead. Converged when the finite-difference
/// gradient has sup-norm below the tolerance and the Hessian is negative
/// semidefinite within `curvature_tolerance`.
inline MapResult map_optimize(const GenericModelSpec& model, const Eigen::VectorXd& start,
                              const MapOptions& options = {}) {
  validate(model);
  if (start.size() != model.dim) throw InvalidArgument("start point dimension does not match model");
  if (!model.support.contains(start)) throw InvalidArgument("start point lies outside the support");

  const auto phi = [&model](const Eigen::VectorXd& t) { return model.log_objective(t); };
  const Box& support = model.support;

  Eigen::VectorXd theta = start;
  double value = phi(theta);
  if (!std::isfinite(value)) throw NumericFailure("objective is not finite at the start point");

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const Eigen::VectorXd grad = fd_gradient(phi, theta);
    const Eigen::MatrixXd hess = fd_hessian(phi, theta);

    if (grad.cwiseAbs().maxCoeff() < options.gradient_tolerance) {
      if (detail::negative_semidefinite(hess, options.curvature_tolerance)) {
        // One polishing Newton step, kept only if it shrinks the gradient.
        Eigen::LLT<Eigen::MatrixXd> llt(-hess);
        if (llt.info() == Eigen::Success) {
          const Eigen::VectorXd cand = support.project(theta + llt.solve(grad));
          const double v = phi(cand);
          if (std::isfinite(v) && v >= value) {
            const Eigen::VectorXd g = fd_gradient(phi, cand);
            if (g.cwiseAbs().maxCoeff() < grad.cwiseAbs().maxCoeff()) {
              return MapResult{cand, v, g, hess, iter + 1};
            }
          }
        }
        return MapResult{theta, value, grad, hess, iter};
      }
      // Saddle: climb along the direction of most positive curvature.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess);
      const Eigen::Index top = static_cast<Eigen::Index>(eig.eigenvalues().size()) - 1;
      const Eigen::VectorXd dir = eig.eigenvectors().col(top);
      bool moved = false;
      for (double t = 1.0; t > 1e-10 && !moved; t *= 0.5) {
        for (const double sign : {1.0, -1.0}) {
          const Eigen::VectorXd cand = support.project(theta + sign * t * dir);
          const double v = phi(cand);
          if (v > value) {
            theta = cand;
            value = v;
            moved = true;
            break;
          }
        }
      }
      if (moved) continue;
      throw ConvergenceFailure("stationary point is not a local maximum", theta);
    }

    bool stepped = false;
    Eigen::LLT<Eigen::MatrixXd> llt(-hess);
    if (llt.info() == Eigen::Success) {
      const Eigen::VectorXd dir = llt.solve(grad);
      for (double t = 1.0; t > 1e-12; t *= 0.5) {
        const Eigen::VectorXd cand = support.project(theta + t * dir);
        const double v = phi(cand);
        if (std::isfinite(v) && v >= value) {
          stepped = (cand != theta);
          theta = cand;
          value = v;
          break;
        }
      }
    }

    if (!stepped) {
      for (Eigen::Index k = 0; k < theta.size(); ++k) {
        const double width = 1.0 + std::abs(theta(k));
        const double a = std::max(support.lo(k), theta(k) - width);
        const double b = std::min(support.hi(k), theta(k) + width);
        Eigen::VectorXd probe = theta;
        const auto line = [&](double x) {
          probe(k) = x;
          const double v = phi(probe);
          return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
        };
        const double best = detail::golden_section_max(line, a, b);
        const double v = line(best);
        if (v > value) {
          theta(k) = best;
          value = v;
        }
      }
    }
  }

  std::ostringstream msg;
  msg << "no interior stationary point found within " << options.max_iterations << " iterations";
  throw ConvergenceFailure(msg.str(), theta);
}

struct MultistartResult {
  MapResult best;
  /// Distinct local maxima, best first.
  std::vector<MapResult> basins;
  int failed_starts = 0;
};

/// Runs `map_optimize` from Latin-hypercube starts over the integration box
/// and keeps the best local maximum.
inline MultistartResult map_multistart(const GenericModelSpec& model, std::uint64_t seed,
                                       int starts = 8, const MapOptions& options = {}) {
  validate(model);
  if (starts < 1) throw InvalidArgument("multistart needs at least one start");
  const Box box = model.integration_box();
  const Eigen::Index d = model.dim;

  CounterRng rng(seed, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd points(d, starts);
  std::vector<int> strata(static_cast<std::size_t>(starts));
  for (Eigen::Index k = 0; k < d; ++k) {
    std::iota(strata.begin(), strata.end(), 0);
    std::shuffle(strata.begin(), strata.end(), rng);
    for (int s = 0; s < starts; ++s) {
      const double u = (strata[static_cast<std::size_t>(s)] + unit(rng)) / starts;
      points(k, s) = box.lo(k) + u * (box.hi(k) - box.lo(k));
    }
  }

  MultistartResult out;
  std::optional<ConvergenceFailure> last_failure;
  for (int s = 0; s < starts; ++s) {
    try {
      MapResult r = map_optimize(model, model.support.project(points.col(s)), options);
      const bool seen = std::any_of(out.basins.begin(), out.basins.end(), [&](const MapResult& b) {
        return (b.theta - r.theta).cwiseAbs().maxCoeff() < 1e-4 * (1.0 + b.theta.norm());
      });
      if (!seen) out.basins.push_back(std::move(r));
    } catch (const ConvergenceFailure& e) {
      ++out.failed_starts;
      last_failure = e;
    }
  }
  if (out.basins.empty()) throw *last_failure;
  std::sort(out.basins.begin(), out.basins.end(),
            [](const MapResult& a, const MapResult& b) { return a.objective > b.objective; });
  out.best = out.basins.front();
  return out;
}

// ---------------------------------------------------------------------------
// Prior normalization

enum class NormalizerMethod { GridQuadrature, ClosedForm };

inline std::string_view to_string(NormalizerMethod m) noexcept {
  return m == NormalizerMethod::ClosedForm ? "closed-form" : "grid-quadrature";
}

/// π(θ) = exp(−R(θ)) / Z over `box`.
struct NormalizedPrior {
  double log_norm_const = 0.0;
  NormalizerMethod method = NormalizerMethod::ClosedForm;
  double err_estimate = 0.0;
  Box box;

  double log_density(const GenericModelSpec& model, const Eigen::VectorXd& theta) const {
    return -model.regularizer(theta) - log_norm_const;
  }
};

/// Exact normalizer of the ridge prior N(0, λ⁻²I): log Z = (d/2)·log(2π/λ²).
inline NormalizedPrior glm_prior(const GaussianLinearSpec& spec, const GenericModelSpec& wrapped) {
  const double d = static_cast<double>(spec.d());
  NormalizedPrior out;
  out.log_norm_const = 0.5 * d * (kLog2Pi - std::log(spec.lambda * spec.lambda));
  out.method = NormalizerMethod::ClosedForm;
  out.err_estimate = 0.0;
  out.box = wrapped.integration_box();
  return out;
}

inline constexpr double kBoundaryMassRatio = 1e-12;
inline constexpr int kMaxBoxDoublings = 6;

namespace detail {

struct OpenFaces {
  std::vector<bool> lo;
  std::vector<bool> hi;
  bool any = false;
};

inline OpenFaces open_faces(const Box& box, const Box& support) {
  OpenFaces f;
  for (Eigen::Index k = 0; k < box.dim(); ++k) {
    f.lo.push_back(box.lo(k) > support.lo(k));
    f.hi.push_back(box.hi(k) < support.hi(k));
    f.any = f.any || f.lo.back() || f.hi.back();
  }
  return f;
}

inline Box doubled(const Box& box, const Box& support) {
  const Eigen::VectorXd c = box.center();
  const Eigen::VectorXd half = box.hi - box.lo;  // doubled half-width
  return Box{(c - half).cwiseMax(support.lo), (c + half).cwiseMin(support.hi)};
}

}  // namespace detail

/// log Z for Z = ∫ exp(−R(θ)) dθ by the log-space trapezoid rule.
///
/// The integration box is doubled (at most six times, never beyond the
/// support) until the integrand on every face that cuts the support is below
/// 1e-12 of its peak. The error estimate compares against the nested
/// half-resolution grid.
inline NormalizedPrior normalize_prior(const GenericModelSpec& model, int grid_points_per_dim,
                                       double tolerance = 1e-6) {
  validate(model);
  if (model.dim > 3) throw InvalidArgument("grid normalization supports at most 3 dimensions");
  const auto neg_r = [&model](const Eigen::VectorXd& t) { return -model.regularizer(t); };

  Box box = model.integration_box();
  const double log_ratio = std::log(kBoundaryMassRatio);
  for (int doubling = 0;; ++doubling) {
    const detail::OpenFaces faces = detail::open_faces(box, model.support);
    const GridIntegral grid = log_trapezoid(neg_r, box, grid_points_per_dim, faces.lo, faces.hi);
    if (!std::isfinite(grid.log_integral)) {
      throw NumericFailure("prior normalizer is not finite; exp(-R) may be improper");
    }
    const bool truncating = faces.any && grid.max_log_boundary - grid.max_log_value > log_ratio;
    if (!truncating) {
      const double err = grid.err_estimate();
      if (err > tolerance) {
        std::ostringstream msg;
        msg << "prior normalizer error estimate " << err << " exceeds tolerance " << tolerance
            << " (fine " << grid.log_integral << ", coarse " << grid.log_integral_coarse << ")";
        throw AccuracyFailure(msg.str(), grid.log_integral, grid.log_integral_coarse);
      }
      return NormalizedPrior{grid.log_integral, NormalizerMethod::GridQuadrature, err, box};
    }
    if (doubling == kMaxBoxDoublings) {
      throw AccuracyFailure(
          "prior mass still reaches the integration box after 6 doublings",
          grid.log_integral, grid.log_integral_coarse);
    }
    box = detail::doubled(box, model.support);
  }
}

}  // namespace ockham
