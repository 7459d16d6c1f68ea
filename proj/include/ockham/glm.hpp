#pragma once

// Closed forms for the Gaussian linear model y = Gθ + σε with the quadratic
// regularizer R(θ) = ½λ²‖θ‖², i.e. the prior θ ~ N(0, (λ²I)⁻¹).

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "ockham/decomposition.hpp"
#include "ockham/errors.hpp"

namespace ockham {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

struct ObservationSet {
  Eigen::VectorXd y;
  std::optional<Eigen::VectorXd> x;

  Eigen::Index size() const noexcept { return y.size(); }
};

inline void validate(const ObservationSet& obs) {
  if (obs.y.size() < 1) throw InvalidArgument("observation set must contain at least one value");
  if (!obs.y.allFinite()) throw InvalidArgument("observations must be finite");
  if (obs.x) {
    if (obs.x->size() != obs.y.size()) {
      throw InvalidArgument("covariate and response lengths differ");
    }
    if (!obs.x->allFinite()) throw InvalidArgument("covariates must be finite");
  }
}

struct GaussianLinearSpec {
  Eigen::MatrixXd G;
  double sigma = 1.0;
  double lambda = 1.0;

  Eigen::Index n() const noexcept { return G.rows(); }
  Eigen::Index d() const noexcept { return G.cols(); }
};

inline void validate(const GaussianLinearSpec& spec) {
  if (spec.G.rows() < 1 || spec.G.cols() < 1) {
    throw InvalidArgument("model matrix must have at least one row and one column");
  }
  if (!(spec.sigma > 0.0) || !std::isfinite(spec.sigma)) {
    throw InvalidArgument("sigma must be positive");
  }
  if (!(spec.lambda > 0.0) || !std::isfinite(spec.lambda)) {
    throw InvalidArgument("lambda must be positive");
  }
  if (!spec.G.allFinite()) throw InvalidArgument("model matrix entries must be finite");
}

inline void validate(const GaussianLinearSpec& spec, const ObservationSet& obs) {
  validate(spec);
  validate(obs);
  if (obs.size() != spec.n()) {
    std::ostringstream msg;
    msg << "observation length " << obs.size() << " does not match model matrix rows "
        << spec.n();
    throw InvalidArgument(msg.str());
  }
}

/// Extreme eigenvalues of GᵀG. `rank_deficient` when the smallest is below
/// 1e-10 times the largest.
struct GramDiagnostics {
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  bool rank_deficient = false;
};

inline GramDiagnostics gram_diagnostics(const GaussianLinearSpec& spec) {
  const Eigen::MatrixXd gram = spec.G.transpose() * spec.G;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  GramDiagnostics out;
  out.min_eigenvalue = eig.eigenvalues().minCoeff();
  out.max_eigenvalue = eig.eigenvalues().maxCoeff();
  out.rank_deficient =
      out.max_eigenvalue <= 0.0 || out.min_eigenvalue < 1e-10 * out.max_eigenvalue;
  return out;
}

inline constexpr std::string_view kRankNote =
    "model matrix is numerically rank deficient; the prior alone identifies some directions";

/// (1/σ²)GᵀG + λ²I.
inline Eigen::MatrixXd posterior_precision(const GaussianLinearSpec& spec) {
  validate(spec);
  const double inv_var = 1.0 / (spec.sigma * spec.sigma);
  const double prior_prec = spec.lambda * spec.lambda;
  Eigen::MatrixXd p = inv_var * (spec.G.transpose() * spec.G);
  p.diagonal().array() += prior_prec;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      if (!std::isfinite(p(i, j))) {
        std::ostringstream msg;
        msg << "posterior precision entry (" << i << ", " << j << ") is not finite";
        throw NumericFailure(msg.str());
      }
    }
  }
  return p;
}

struct GaussianPosterior {
  Eigen::VectorXd theta_hat;
  Eigen::MatrixXd post_precision;
  Eigen::MatrixXd prior_precision;
  /// Upper-triangular R with RᵀR = post_precision.
  Eigen::MatrixXd factor;
  double log_det_post = 0.0;
  double log_det_prior = 0.0;
  GramDiagnostics gram;
};

/// Posterior of the Gaussian linear model.
///
/// The Cholesky factor of P* is taken from a Householder QR of the stacked
/// matrix [G/σ; λI], whose Gram matrix is exactly P*. This never forms GᵀG
/// for the factorization, so near-noiseless fits (σ → 0) of ill-conditioned
/// designs keep their accuracy. θ̂ is the least-squares solution of the
/// stacked system against [y/σ; 0], i.e. (1/σ²)(P*)⁻¹Gᵀy without an inverse.
inline GaussianPosterior fit_posterior(const GaussianLinearSpec& spec, const ObservationSet& obs) {
  validate(spec, obs);
  const Eigen::Index n = spec.n();
  const Eigen::Index d = spec.d();
  const double lambda2 = spec.lambda * spec.lambda;

  Eigen::MatrixXd stacked(n + d, d);
  stacked.topRows(n) = spec.G / spec.sigma;
  stacked.bottomRows(d) = spec.lambda * Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + d);
  rhs.head(n) = obs.y / spec.sigma;

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(stacked);

  GaussianPosterior post;
  post.factor = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
  post.theta_hat = qr.solve(rhs);
  post.post_precision = posterior_precision(spec);
  post.prior_precision = lambda2 * Eigen::MatrixXd::Identity(d, d);
  post.log_det_post = 2.0 * post.factor.diagonal().array().abs().log().sum();
  post.log_det_prior = static_cast<double>(d) * std::log(lambda2);
  post.gram = gram_diagnostics(spec);

  if (!post.theta_hat.allFinite() || !std::isfinite(post.log_det_post)) {
    throw NumericFailure("posterior factorization produced non-finite values");
  }
  return post;
}

inline Eigen::VectorXd map_estimate(const GaussianLinearSpec& spec, const ObservationSet& obs) {
  return fit_posterior(spec, obs).theta_hat;
}

/// log f(y; θ) including every normalizing constant.
inline double glm_log_likelihood(const GaussianLinearSpec& spec, const ObservationSet& obs,
                                 const Eigen::VectorXd& theta) {
  validate(spec, obs);
  if (theta.size() != spec.d()) throw InvalidArgument("parameter length does not match d");
  const double n = static_cast<double>(spec.n());
  const double var = spec.sigma * spec.sigma;
  const double rss = (obs.y - spec.G * theta).squaredNorm();
  return -0.5 * n * (kLog2Pi + std::log(var)) - rss / (2.0 * var);
}

/// log π(θ) for π = N(0, λ⁻²I).
inline double glm_log_prior(const GaussianLinearSpec& spec, const Eigen::VectorXd& theta) {
  const double d = static_cast<double>(theta.size());
  const double lambda2 = spec.lambda * spec.lambda;
  return -0.5 * d * kLog2Pi + 0.5 * d * std::log(lambda2) - 0.5 * lambda2 * theta.squaredNorm();
}

/// log π*(θ) for π* = N(θ̂, (P*)⁻¹).
inline double glm_log_posterior(const GaussianPosterior& post, const Eigen::VectorXd& theta) {
  const double d = static_cast<double>(theta.size());
  const Eigen::VectorXd r = post.factor.triangularView<Eigen::Upper>() * (theta - post.theta_hat);
  return -0.5 * d * kLog2Pi + 0.5 * post.log_det_post - 0.5 * r.squaredNorm();
}

inline double flexibility_exact(const GaussianPosterior& post, double lambda) {
  const double lambda2 = lambda * lambda;
  return 0.5 * (post.log_det_post - post.log_det_prior) +
         0.5 * lambda2 * post.theta_hat.squaredNorm();
}

/// ½·log(det P*/det P) + (λ²/2)‖θ̂‖².
inline double flexibility_exact(const GaussianLinearSpec& spec, const ObservationSet& obs) {
  return flexibility_exact(fit_posterior(spec, obs), spec.lambda);
}

inline EvidenceDecomposition glm_log_evidence(const GaussianLinearSpec& spec,
                                              const ObservationSet& obs) {
  const GaussianPosterior post = fit_posterior(spec, obs);
  const double log_fit = glm_log_likelihood(spec, obs, post.theta_hat);
  const double flex = flexibility_exact(post, spec.lambda);

  EvidenceDecomposition out;
  out.log_fit = log_fit;
  out.flexibility = flex;
  out.log_evidence = log_fit - flex;
  out.estimator = Estimator::GlmExact;
  out.err_estimate = 0.0;
  out.theta_hat = post.theta_hat;
  if (post.gram.rank_deficient) out.notes.emplace_back(kRankNote);
  if (flex < 0.0) out.notes.emplace_back(kConflictNote);
  return out;
}

/// log f(y; θ0) + log π(θ0) − log π*(θ0); the same number for every θ0.
inline double evidence_via_candidate(const GaussianLinearSpec& spec, const ObservationSet& obs,
                                     const Eigen::VectorXd& theta0) {
  const GaussianPosterior post = fit_posterior(spec, obs);
  if (theta0.size() != spec.d()) throw InvalidArgument("theta0 length does not match d");
  if (!theta0.allFinite()) throw InvalidArgument("theta0 must be finite");
  return glm_log_likelihood(spec, obs, theta0) + glm_log_prior(spec, theta0) -
         glm_log_posterior(post, theta0);
}

}  // namespace ockham
