#pragma once

// Evidence estimators for black-box models. Everything stays in log space;
// E itself is never formed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ockham/decomposition.hpp"
#include "ockham/errors.hpp"
#include "ockham/generic_model.hpp"
#include "ockham/quadrature.hpp"
#include "ockham/random.hpp"

namespace ockham {

namespace detail {

inline double log_prior_density(const GenericModelSpec& model, const NormalizedPrior& prior,
                                 const Eigen::VectorXd& theta) {
  if (prior.method == NormalizerMethod::GridQuadrature && !prior.box.contains(theta)) {
    return -std::numeric_limits<double>::infinity();
  }
  if (!model.support.contains(theta)) return -std::numeric_limits<double>::infinity();
  return prior.log_density(model, theta);
}

inline EvidenceDecomposition finish(double log_evidence, const MapResult& map,
                                    const GenericModelSpec& model, Estimator estimator,
                                    double err) {
  EvidenceDecomposition out = decompose(log_evidence, model.log_lik(map.theta));
  out.estimator = estimator;
  // Only the closed form is exact; others never report less than roundoff.
  const double floor = 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(log_evidence));
  out.err_estimate = std::max(err, floor);
  out.theta_hat = map.theta;
  return out;
}

}  // namespace detail

struct QuadratureOptions {
  double tolerance = 1e-6;
};

/// log E = log ∫ f(y; θ) π(θ) dθ by the log-space trapezoid rule over the
/// prior's box. The fit term is taken at the MAP, located by Newton from the
/// best grid node.
inline EvidenceDecomposition evidence_quadrature(const GenericModelSpec& model,
                                                 const NormalizedPrior& prior,
                                                 int grid_points_per_dim,
                                                 const QuadratureOptions& options = {}) {
  validate(model);
  if (model.dim > 3) throw InvalidArgument("grid quadrature supports at most 3 dimensions");
  const auto log_joint = [&](const Eigen::VectorXd& t) {
    return model.log_lik(t) + prior.log_density(model, t);
  };
  const GridIntegral grid = log_trapezoid(log_joint, prior.box, grid_points_per_dim);
  if (!std::isfinite(grid.log_integral)) throw NumericFailure("quadrature evidence is not finite");
  const double err = grid.err_estimate();
  if (err > options.tolerance) {
    std::ostringstream msg;
    msg << "quadrature error estimate " << err << " exceeds tolerance " << options.tolerance;
    throw AccuracyFailure(msg.str(), grid.log_integral, grid.log_integral_coarse);
  }
  const MapResult map = map_optimize(model, model.support.project(grid.argmax));
  EvidenceDecomposition out =
      detail::finish(grid.log_integral, map, model, Estimator::Quadrature, err);
  out.diagnostics["grid_points_per_dim"] = grid_points_per_dim;
  return out;
}

struct LaplaceOptions {
  /// Optimizer start; the centre of the integration box when absent.
  std::optional<Eigen::VectorXd> start;
  /// Grid used to cross-check against quadrature (d ≤ 3). Zero picks a
  /// per-dimension default; negative skips the check.
  int check_points = 0;
};

/// Mode and curvature A = −∇²(log f + log π) at the MAP.
struct LaplaceFit {
  MapResult map;
  Eigen::MatrixXd curvature;
  Eigen::LLT<Eigen::MatrixXd> factor;
};

inline LaplaceFit laplace_fit(const GenericModelSpec& model,
                              const std::optional<Eigen::VectorXd>& start = std::nullopt) {
  const Eigen::VectorXd x0 =
      model.support.project(start ? *start : model.integration_box().center());
  LaplaceFit fit{map_optimize(model, x0), {}, {}};
  const auto phi = [&model](const Eigen::VectorXd& t) { return model.log_objective(t); };
  fit.curvature = -fd_hessian(phi, fit.map.theta);
  fit.factor.compute(fit.curvature);
  if (fit.factor.info() != Eigen::Success) {
    throw CurvatureFailure("negative log-posterior Hessian at the MAP is not positive definite");
  }
  return fit;
}

inline double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

/// First-order Laplace: log f(θ̂) + log π(θ̂) + (d/2)·log 2π − ½·log det A.
/// Exact when the posterior is Gaussian.
inline EvidenceDecomposition evidence_laplace(const GenericModelSpec& model,
                                              const NormalizedPrior& prior,
                                              const LaplaceOptions& options = {}) {
  validate(model);
  const LaplaceFit fit = laplace_fit(model, options.start);
  const double d = static_cast<double>(model.dim);
  const double log_e = model.log_lik(fit.map.theta) + prior.log_density(model, fit.map.theta) +
                       0.5 * d * kLog2Pi - 0.5 * log_det_from_llt(fit.factor);

  double err = std::numeric_limits<double>::infinity();
  std::vector<std::string> notes;
  int points = options.check_points;
  if (points == 0) points = model.dim == 1 ? 2001 : model.dim == 2 ? 401 : 81;
  if (model.dim <= 3 && points > 0) {
    try {
      QuadratureOptions loose;
      loose.tolerance = std::numeric_limits<double>::infinity();
      const EvidenceDecomposition quad = evidence_quadrature(model, prior, points, loose);
      err = std::abs(log_e - quad.log_evidence);
    } catch (const Error& e) {
      notes.push_back(std::string("quadrature cross-check failed: ") + e.what());
    }
  } else {
    notes.emplace_back("error estimate unknown: no quadrature cross-check in this dimension");
  }

  EvidenceDecomposition out = detail::finish(log_e, fit.map, model, Estimator::Laplace, err);
  out.notes.insert(out.notes.end(), notes.begin(), notes.end());
  out.diagnostics["log_det_curvature"] = log_det_from_llt(fit.factor);
  return out;
}

struct ImportanceOptions {
  /// Scale applied to the Laplace standard deviations of the proposal.
  double inflation = 1.5;
  /// Proposal centre and precision; both default to the Laplace fit. When
  /// given, `center` is also taken as the MAP.
  std::optional<Eigen::VectorXd> center;
  std::optional<Eigen::MatrixXd> precision;
  std::optional<Eigen::VectorXd> start;
  /// Fail when ESS falls below this fraction of the draws.
  double min_ess_fraction = 0.01;
};

/// log E = log mean_i [f(θ_i) π(θ_i) / q(θ_i)] with q = N(θ̂, inflation²·A⁻¹).
///
/// Draw i uses the counter stream (seed, i), so the estimate does not depend
/// on evaluation order. The error estimate is the delta-method standard error
/// of the mean weight on the log scale.
inline EvidenceDecomposition evidence_importance(const GenericModelSpec& model,
                                                 const NormalizedPrior& prior, std::size_t samples,
                                                 std::uint64_t seed,
                                                 const ImportanceOptions& options = {}) {
  validate(model);
  if (samples < 2) throw InvalidArgument("importance sampling needs at least two draws");
  if (!(options.inflation > 0.0)) throw InvalidArgument("proposal inflation must be positive");
  const Eigen::Index d = model.dim;

  MapResult map;
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (options.center && options.precision) {
    map.theta = *options.center;
    map.objective = model.log_objective(map.theta);
    llt.compute(*options.precision);
    if (llt.info() != Eigen::Success) throw CurvatureFailure("proposal precision is not positive definite");
  } else {
    LaplaceFit fit = laplace_fit(model, options.start);
    map = fit.map;
    llt = fit.factor;
    if (options.center) map.theta = *options.center;
    if (options.precision) {
      llt.compute(*options.precision);
      if (llt.info() != Eigen::Success) throw CurvatureFailure("proposal precision is not positive definite");
    }
  }

  const double log_q_const = -0.5 * static_cast<double>(d) * kLog2Pi -
                             static_cast<double>(d) * std::log(options.inflation) +
                             0.5 * log_det_from_llt(llt);
  const auto upper = llt.matrixU();

  std::vector<double> log_w(samples);
  double max_log_w = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples; ++i) {
    CounterRng rng(seed, i);
    const Eigen::VectorXd z = standard_normal_vector(rng, d);
    const Eigen::VectorXd theta = map.theta + options.inflation * upper.solve(z);
    const double lp = detail::log_prior_density(model, prior, theta);
    const double lw = std::isfinite(lp) ? model.log_lik(theta) + lp - (log_q_const - 0.5 * z.squaredNorm())
                                        : -std::numeric_limits<double>::infinity();
    if (std::isnan(lw)) throw NumericFailure("importance weight is NaN");
    log_w[i] = lw;
    max_log_w = std::max(max_log_w, lw);
  }
  if (!std::isfinite(max_log_w)) throw DegeneracyFailure("every importance weight is zero", 0.0);

  // Weights scaled by exp(−max) for the moments.
  std::vector<double> w(samples);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    w[i] = std::exp(log_w[i] - max_log_w);
    sum += w[i];
    sum_sq += w[i] * w[i];
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  const double ess = sum * sum / sum_sq;
  double centered = 0.0;
  for (const double wi : w) centered += (wi - mean) * (wi - mean);
  const double err = std::sqrt(centered / (n - 1.0) / n) / mean;

  if (ess < options.min_ess_fraction * n) {
    std::ostringstream msg;
    msg << "importance weights degenerate: effective sample size " << ess << " of " << samples;
    throw DegeneracyFailure(msg.str(), ess);
  }

  const double log_e = max_log_w + std::log(mean);
  EvidenceDecomposition out =
      detail::finish(log_e, map, model, Estimator::ImportanceSampling, err);
  out.diagnostics["effective_sample_size"] = ess;
  out.diagnostics["samples"] = n;
  out.diagnostics["proposal_inflation"] = options.inflation;
  return out;
}

}  // namespace ockham
