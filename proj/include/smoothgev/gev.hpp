#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace smoothgev {

/// |xi| at or below this value is treated as the Gumbel limit xi = 0.
inline constexpr double kXiEps = 1e-6;
inline constexpr double kEulerGamma = 0.57721566490153286060651209;

/// Location, scale and shape of a generalized extreme value distribution.
struct GevParams {
  double mu = 0.0;
  double sigma = 1.0;
  double xi = 0.0;

  /// Likelihood inference is irregular for xi <= -1.
  bool valid_for_inference() const noexcept { return xi > -1.0; }
};

/// Throws DomainError unless sigma > 0 and all parameters are finite.
void validate(const GevParams& p);

/// Annual maxima of one grid box with their year indices (1 = first year).
struct Sample {
  std::vector<double> values;
  std::vector<int> years;

  /// Throws DomainError on empty, mismatched, or non-increasing years.
  void validate() const;
};

double gev_cdf(const GevParams& p, double y);
double gev_pdf(const GevParams& p, double y);
/// log density; -infinity outside the support.
double gev_log_pdf(const GevParams& p, double y);

/// Inverse CDF. Throws DomainError unless 0 < prob < 1.
double gev_quantile(const GevParams& p, double prob);

/// Sum of log densities; -infinity if any value lies outside the support.
double gev_loglik(const GevParams& p, std::span<const double> values);
double gev_loglik(const GevParams& p, const Sample& s);

struct GevMoments {
  double mean;      ///< +infinity when xi >= 1
  double variance;  ///< +infinity when xi >= 1/2
};

GevMoments gev_mean_var(const GevParams& p);

/// Sample L-moments (l1, l2, l3) from unbiased probability weighted moments.
struct LMoments {
  double l1;
  double l2;
  double l3;
  double tau3() const { return l3 / l2; }
};

LMoments sample_lmoments(std::span<const double> values);

/// L-moment point estimate. Needs at least 3 values with nonzero spread.
GevParams fit_lmoments(std::span<const double> values);
GevParams fit_lmoments(const Sample& s);

struct MleFit {
  GevParams params;
  Eigen::Matrix3d covariance;  ///< inverse observed information in (mu, sigma, xi)
  double loglik = 0.0;
  int iterations = 0;
};

/**
 * Maximum likelihood for an i.i.d. GEV sample by safeguarded Newton in
 * (mu, log sigma, xi). Starts from `init`, or from the L-moment estimate.
 * Throws FitError (last iterate as mu, sigma, xi) on non-convergence.
 */
MleFit fit_mle(std::span<const double> values, std::optional<GevParams> init = std::nullopt);
MleFit fit_mle(const Sample& s, std::optional<GevParams> init = std::nullopt);

}  // namespace smoothgev
