#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "smoothgev/grid.hpp"
#include "smoothgev/model.hpp"
#include "smoothgev/objective.hpp"

namespace smoothgev {

/// One smoothing parameter per penalized field, stored as log lambda.
struct SmoothingParams {
  std::vector<Field> fields;
  std::vector<double> log_lambda;

  std::size_t size() const noexcept { return log_lambda.size(); }
  double lambda(std::size_t k) const;
  std::vector<double> lambdas() const;
  /// lambda of field f; throws when f is not penalized.
  double lambda(Field f) const;
};

struct FitOptions {
  /// Skip smoothing-parameter selection and use these values (one per field
  /// in layout order). Zero is allowed here and switches the penalty off.
  std::optional<std::vector<double>> fixed_lambdas;
  double initial_log10_lambda = 0.0;
  double log10_lambda_min = -3.0;
  double log10_lambda_max = 8.0;
  int max_inner_iterations = 200;
  int max_outer_iterations = 50;
  double inner_gradient_tolerance = 1e-8;
  double outer_step_tolerance = 1e-3;
  /// Lambda of the single linear solve that smooths the L-moment start.
  double init_smoothing_lambda = 1.0;
  /// Optional starting coefficients (shapes must match the spec).
  std::optional<ParameterField> start;
  unsigned threads = 1;
};

/**
 * Penalized maximum likelihood fit. `precision` is the negative Hessian of
 * the penalized log-likelihood at theta; the coefficient order is that of
 * `layout`.
 */
struct FitResult {
  ModelFrame frame;
  ParameterLayout layout{ModelSpec::mod1(), 0, false};
  ParameterField field;
  Eigen::VectorXd theta;
  SmoothingParams lambdas;
  double penalized_ll = 0.0;
  double unpenalized_ll = 0.0;
  double log_marginal = 0.0;  ///< Laplace criterion at the selected lambdas
  Eigen::SparseMatrix<double> precision;
  double edf = 0.0;
  Eigen::VectorXd coefficient_edf;  ///< diag(I - precision^{-1} * penalty curvature)
  bool converged = false;
  int iterations = 0;        ///< inner Newton iterations, summed
  int outer_iterations = 0;
  std::string lambda_search = "fixed";  ///< "fixed", "quasi-newton" or "grid"
  std::vector<std::int64_t> box_ids;
  std::vector<std::string> regions;
  std::vector<int> years;

  std::size_t n_boxes() const noexcept { return field.size(); }
  const ModelSpec& spec() const noexcept { return frame.spec; }
};

FitResult fit_smooth(const GriddedDataset& data, const ModelSpec& spec, const CovariateSeries& cov,
                     const PenaltyMatrix& penalty, const FitOptions& opts = {});

/// Per-box maximum likelihood result. coef follows the box's local layout.
struct BoxFit {
  std::vector<double> coef;
  Eigen::MatrixXd covariance;
  std::vector<double> std_errors;
  double loglik = 0.0;
  bool converged = false;
  std::string message;
};

struct IndependentFit {
  ModelSpec spec;                 ///< as fitted; a homogeneous trend becomes per-box
  std::vector<BoxFit> boxes;
  ParameterField field;           ///< NaN at boxes that failed
  std::vector<double> xi_se;      ///< NaN at boxes that failed
  int xi_slot = 0;
};

/// Each box fitted on its own, without elevation effect.
IndependentFit fit_independent(const GriddedDataset& data, const ModelSpec& spec, const CovariateSeries& cov,
                               unsigned threads = 1);

/// SE_indep(xi_i) / SE_smooth(xi_i); boxes whose independent fit failed are NaN.
std::vector<double> uncertainty_ratio(const IndependentFit& indep, const FitResult& smooth);

/// Columns `indices` of precision^{-1}.
Eigen::MatrixXd covariance_columns(const FitResult& fit, std::span<const int> indices);
/// sqrt(diag(precision^{-1})).
Eigen::VectorXd standard_errors(const FitResult& fit);

/// Gaussian approximation N(theta, precision^{-1}) with reproducible draws.
class PosteriorSampler {
 public:
  explicit PosteriorSampler(const FitResult& fit);
  ~PosteriorSampler();
  PosteriorSampler(PosteriorSampler&&) noexcept;
  PosteriorSampler& operator=(PosteriorSampler&&) noexcept;

  /// Draw number `index` of the stream seeded by `seed`.
  Eigen::VectorXd draw(std::uint64_t seed, std::uint64_t index) const;
  ParameterField draw_field(std::uint64_t seed, std::uint64_t index) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::vector<ParameterField> posterior_sample(const FitResult& fit, std::size_t count, std::uint64_t seed);

double aic(const FitResult& fit);

struct WaldTest {
  double statistic = 0.0;
  double edf = 0.0;  ///< effective degrees of freedom of the block
  int df = 0;        ///< rounded, at least 1
  double p_value = 1.0;
};

/// Test that a coefficient block is zero: "mu0", "mu1", "sigma0", "sigma1", "xi" or "beta".
WaldTest wald_zero_test(const FitResult& fit, const std::string& block);

/// Coefficient indices of a named block; empty when absent.
std::vector<int> block_indices(const FitResult& fit, const std::string& block);

void write_fit_json(std::ostream& out, const FitResult& fit);
FitResult read_fit_json(std::istream& in, const std::string& source = "<fit>");
FitResult read_fit_json(const std::string& path);
/// box_id, mu0, mu1, sigma0, sigma1, xi (absent fields left empty).
void write_coefficients_csv(std::ostream& out, const FitResult& fit);

}  // namespace smoothgev
