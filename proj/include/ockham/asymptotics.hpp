#pragma once

// Large-n behaviour of flexibility against the BIC penalty (d/2)·log n for
// the Gaussian linear model under IID sampling of the design rows.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ockham/decomposition.hpp"
#include "ockham/errors.hpp"
#include "ockham/glm.hpp"
#include "ockham/random.hpp"

namespace ockham {

/// Draws a model and data set of size n. Must be deterministic in (n, seed)
/// and keep d fixed.
using SweepGenerator =
    std::function<std::pair<GaussianLinearSpec, ObservationSet>(std::size_t n, std::uint64_t seed)>;

struct AsymptoticSweepResult {
  std::vector<std::size_t> ns;
  std::vector<double> flexibilities;
  std::vector<double> bic_penalties;
  /// flexibility − (d/2)·log n at each n.
  std::vector<double> gaps;
  /// n⁻¹GᵀG at the largest n.
  Eigen::MatrixXd H_hat;
  /// θ̂ at the largest n.
  Eigen::VectorXd m_hat;
  /// ½{−d(log σ² + log λ²) + log det Ĥ + λ²‖m̂‖²}.
  double predicted_constant = 0.0;
  std::size_t d = 0;
};

inline double predicted_gap_limit(const Eigen::MatrixXd& H, const Eigen::VectorXd& m, double sigma,
                                  double lambda) {
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) throw NumericFailure("limit Gram matrix H is not positive definite");
  const double log_det_h = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double d = static_cast<double>(H.rows());
  const double lambda2 = lambda * lambda;
  return 0.5 * (-d * (std::log(sigma * sigma) + std::log(lambda2)) + log_det_h +
                lambda2 * m.squaredNorm());
}

/// Evaluates the gap at each n with a fresh data set (stream k of `seed` for
/// ns[k]); the limit constant uses Ĥ and m̂ from the largest n.
inline AsymptoticSweepResult bic_sweep(const SweepGenerator& generator,
                                       const std::vector<std::size_t>& ns, std::uint64_t seed) {
  if (ns.empty()) throw InvalidArgument("bic_sweep needs at least one sample size");
  for (std::size_t k = 0; k < ns.size(); ++k) {
    if (ns[k] < 1) throw InvalidArgument("sample sizes must be positive");
    if (k > 0 && ns[k] <= ns[k - 1]) throw InvalidArgument("sample sizes must be strictly increasing");
  }

  AsymptoticSweepResult out;
  out.ns = ns;
  for (std::size_t k = 0; k < ns.size(); ++k) {
    auto [spec, obs] = generator(ns[k], derive_seed(seed, k));
    if (spec.n() != static_cast<Eigen::Index>(ns[k])) {
      throw InvalidArgument("generator returned a data set of the wrong size");
    }
    if (k == 0) {
      out.d = static_cast<std::size_t>(spec.d());
    } else if (static_cast<std::size_t>(spec.d()) != out.d) {
      throw InvalidArgument("generator changed the parameter dimension across the sweep");
    }
    const GaussianPosterior post = fit_posterior(spec, obs);
    const double flex = flexibility_exact(post, spec.lambda);
    const double bic = bic_penalty(out.d, ns[k]);
    out.flexibilities.push_back(flex);
    out.bic_penalties.push_back(bic);
    out.gaps.push_back(flex - bic);

    if (k + 1 == ns.size()) {
      out.H_hat = (spec.G.transpose() * spec.G) / static_cast<double>(ns[k]);
      out.m_hat = post.theta_hat;
      out.predicted_constant = predicted_gap_limit(out.H_hat, out.m_hat, spec.sigma, spec.lambda);
    }
  }
  return out;
}

/// d = 1, G ≡ 1, y ≡ 0, so θ̂ = 0 and flexibility is ½·log(1 + n/(σ²λ²)).
inline SweepGenerator all_ones_generator(double sigma = 1.0, double lambda = 1.0) {
  return [sigma, lambda](std::size_t n, std::uint64_t) {
    const auto rows = static_cast<Eigen::Index>(n);
    return std::pair{GaussianLinearSpec{Eigen::MatrixXd::Ones(rows, 1), sigma, lambda},
                     ObservationSet{Eigen::VectorXd::Zero(rows), std::nullopt}};
  };
}

/// Straight-line regression: rows [1, x] with x ~ N(0, 1), y = Gθ + σε.
inline SweepGenerator linear_gaussian_generator(Eigen::VectorXd theta_true, double sigma,
                                                double lambda) {
  if (theta_true.size() != 2) throw InvalidArgument("straight-line generator needs two coefficients");
  return [theta_true = std::move(theta_true), sigma, lambda](std::size_t n, std::uint64_t seed) {
    const auto rows = static_cast<Eigen::Index>(n);
    CounterRng rng(seed, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd G(rows, 2);
    Eigen::VectorXd y(rows);
    Eigen::VectorXd x(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
      x(i) = normal(rng);
      G(i, 0) = 1.0;
      G(i, 1) = x(i);
    }
    for (Eigen::Index i = 0; i < rows; ++i) y(i) = G.row(i).dot(theta_true) + sigma * normal(rng);
    return std::pair{GaussianLinearSpec{std::move(G), sigma, lambda},
                     ObservationSet{std::move(y), std::move(x)}};
  };
}

}  // namespace ockham
