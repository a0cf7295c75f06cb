#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "smoothgev/grid.hpp"
#include "smoothgev/model.hpp"

namespace smoothgev {

/// Observed (year index, covariate, value) triples of one box.
struct BoxObservations {
  std::vector<std::size_t> t;
  std::vector<double> x;
  std::vector<double> y;
};

/**
 * The penalized log-likelihood
 *
 *   sum_i l_i(theta_i) - sum_k lambda_k v_k' S v_k
 *
 * over all boxes of one dataset, where v_k is the k-th penalized coefficient
 * field (in ParameterLayout order) and l_i the non-stationary GEV
 * log-likelihood of box i. Missing years are skipped.
 */
class PenalizedProblem {
 public:
  PenalizedProblem(const GriddedDataset& data, const ModelFrame& frame, const PenaltyMatrix& penalty,
                   unsigned threads = 1);

  const ParameterLayout& layout() const noexcept { return layout_; }
  const ModelFrame& frame() const noexcept { return frame_; }
  const PenaltyMatrix& penalty_matrix() const noexcept { return penalty_; }
  std::size_t n_boxes() const noexcept { return boxes_.size(); }
  std::size_t n_lambdas() const noexcept { return layout_.fields().size(); }
  const BoxObservations& box(std::size_t i) const { return boxes_.at(i); }
  std::size_t n_observations() const noexcept { return n_obs_; }

  /// Unpenalized log-likelihood; -infinity outside the GEV support.
  double loglik(const Eigen::VectorXd& theta) const;
  /// sum_k lambda_k v_k' S v_k
  double penalty(const Eigen::VectorXd& theta, std::span<const double> lambdas) const;
  double value(const Eigen::VectorXd& theta, std::span<const double> lambdas) const;

  struct Evaluation {
    double value = 0.0;   ///< penalized
    double loglik = 0.0;  ///< unpenalized
    Eigen::VectorXd gradient;                    ///< of the penalized objective
    Eigen::SparseMatrix<double> neg_hess_loglik; ///< -d2 loglik
    bool feasible = true;
  };

  /// Value, gradient and likelihood curvature in one pass.
  Evaluation evaluate(const Eigen::VectorXd& theta, std::span<const double> lambdas) const;

  /// 2 sum_k lambda_k S embedded in the coefficient space (the penalty's curvature).
  Eigen::SparseMatrix<double> penalty_hessian(std::span<const double> lambdas) const;

 private:
  ParameterLayout layout_;
  ModelFrame frame_;
  PenaltyMatrix penalty_;
  std::vector<BoxObservations> boxes_;
  std::size_t n_obs_ = 0;
  unsigned threads_;
};

struct ObjectiveValue {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::SparseMatrix<double> hessian;  ///< of the penalized objective (negative semidefinite at a maximum)
};

/// One-shot evaluation for a ParameterField; value is -infinity outside the support.
ObjectiveValue penalized_objective(const ParameterField& field, const ModelFrame& frame,
                                   const GriddedDataset& data, const PenaltyMatrix& penalty,
                                   std::span<const double> lambdas);

}  // namespace smoothgev
