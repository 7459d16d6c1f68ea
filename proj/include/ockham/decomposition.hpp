#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ockham/errors.hpp"

namespace ockham {

enum class Estimator { GlmExact, Quadrature, Laplace, ImportanceSampling };

inline std::string_view to_string(Estimator e) noexcept {
  switch (e) {
    case Estimator::GlmExact: return "glm-exact";
    case Estimator::Quadrature: return "quadrature";
    case Estimator::Laplace: return "laplace";
    case Estimator::ImportanceSampling: return "importance-sampling";
  }
  return "unknown";
}

inline Estimator parse_estimator(std::string_view name) {
  if (name == "glm-exact") return Estimator::GlmExact;
  if (name == "quadrature") return Estimator::Quadrature;
  if (name == "laplace") return Estimator::Laplace;
  if (name == "importance-sampling") return Estimator::ImportanceSampling;
  throw InvalidArgument("unknown estimator '" + std::string(name) + "'");
}

/// log E = log f(y; θ̂) − flexibility, with the estimator that produced log E.
///
/// For estimators other than glm-exact, `flexibility` is defined as the
/// difference `log_fit − log_evidence`, so the identity holds by construction.
/// `err_estimate` is 0 exactly for glm-exact and +inf when no estimate could be
/// formed.
struct EvidenceDecomposition {
  double log_evidence = 0.0;
  double log_fit = 0.0;
  double flexibility = 0.0;
  Estimator estimator = Estimator::GlmExact;
  double err_estimate = 0.0;
  Eigen::VectorXd theta_hat;
  std::vector<std::string> notes;
  /// Estimator-specific figures (effective sample size, proposal inflation, ...).
  std::map<std::string, double> diagnostics;
};

inline constexpr std::string_view kConflictNote =
    "negative flexibility: prior and likelihood are in conflict";

/// Splits a log-evidence into fit and flexibility. Negative flexibility is
/// kept as-is and annotated.
inline EvidenceDecomposition decompose(double log_evidence, double log_fit) {
  if (!std::isfinite(log_evidence) || !std::isfinite(log_fit)) {
    throw NumericFailure("decompose: log-evidence and log-fit must be finite");
  }
  EvidenceDecomposition out;
  out.log_evidence = log_evidence;
  out.log_fit = log_fit;
  out.flexibility = log_fit - log_evidence;
  if (out.flexibility < 0.0) out.notes.emplace_back(kConflictNote);
  return out;
}

/// (d/2)·log n.
inline double bic_penalty(std::size_t d, std::size_t n) {
  if (n < 1) throw InvalidArgument("bic_penalty: n must be at least 1");
  return 0.5 * static_cast<double>(d) * std::log(static_cast<double>(n));
}

/// Penalizing log f(y; θ̂) by `supplied_penalty` is the same as penalizing
/// log E by `pen_prime = supplied_penalty − flexibility`.
struct PenaltyComparison {
  double flexibility = 0.0;
  double bic_penalty = 0.0;
  double pen_prime = 0.0;
  double supplied_penalty = 0.0;
  std::size_t d = 0;
  std::size_t n = 0;
};

inline PenaltyComparison pen_prime(double supplied_penalty, double flexibility) {
  if (!std::isfinite(supplied_penalty) || !std::isfinite(flexibility)) {
    throw NumericFailure("pen_prime: penalty and flexibility must be finite");
  }
  PenaltyComparison out;
  out.supplied_penalty = supplied_penalty;
  out.flexibility = flexibility;
  out.pen_prime = supplied_penalty - flexibility;
  return out;
}

inline PenaltyComparison compare_penalties(double supplied_penalty, double flexibility,
                                           std::size_t d, std::size_t n) {
  PenaltyComparison out = pen_prime(supplied_penalty, flexibility);
  out.d = d;
  out.n = n;
  out.bic_penalty = ockham::bic_penalty(d, n);
  return out;
}

}  // namespace ockham
