#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace smoothgev {

/// Invalid distribution parameters or arguments outside a function's domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Input data or configuration that violates a documented schema or invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point estimator could not produce an estimate (e.g. a degenerate sample).
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative fit stopped without converging. Carries the last iterate.
class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, std::vector<double> last_iterate)
      : std::runtime_error(what), last_iterate_(std::move(last_iterate)) {}

  const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }

 private:
  std::vector<double> last_iterate_;
};

/// A scoring rule is undefined for the predictive distribution (infinite mean or variance).
class ScoreError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace smoothgev
