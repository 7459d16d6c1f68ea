#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace ockham {

/// Base class for every domain or numeric failure raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite arithmetic or a failed factorization.
class NumericFailure : public Error {
 public:
  using Error::Error;
};

/// An iterative optimizer ran out of iterations; carries its best iterate.
class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, Eigen::VectorXd best)
      : Error(what), best_iterate_(std::move(best)) {}

  const Eigen::VectorXd& best_iterate() const noexcept { return best_iterate_; }

 private:
  Eigen::VectorXd best_iterate_;
};

/// A quadrature error estimate exceeded the caller's tolerance.
class AccuracyFailure : public Error {
 public:
  AccuracyFailure(const std::string& what, double fine, double coarse)
      : Error(what), fine_(fine), coarse_(coarse) {}

  double fine_value() const noexcept { return fine_; }
  double coarse_value() const noexcept { return coarse_; }

 private:
  double fine_;
  double coarse_;
};

/// The negative log-posterior Hessian at the mode is not positive definite.
class CurvatureFailure : public Error {
 public:
  using Error::Error;
};

/// Importance weights collapsed onto too few draws.
class DegeneracyFailure : public Error {
 public:
  DegeneracyFailure(const std::string& what, double ess) : Error(what), ess_(ess) {}

  double effective_sample_size() const noexcept { return ess_; }

 private:
  double ess_;
};

/// A model-set member failed to produce an evidence value.
class SelectionFailure : public Error {
 public:
  SelectionFailure(const std::string& what, std::size_t index)
      : Error(what), index_(index) {}

  std::size_t member_index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// A Monte Carlo replicate failed; carries the replicate index.
class ReplicateFailure : public Error {
 public:
  ReplicateFailure(const std::string& what, std::size_t replicate)
      : Error(what), replicate_(replicate) {}

  std::size_t replicate() const noexcept { return replicate_; }

 private:
  std::size_t replicate_;
};

/// Inputs violate a documented precondition (dimension mismatch, σ ≤ 0, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace ockham
