#include "smoothgev/gev.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "smoothgev/detail/dense_newton.hpp"
#include "smoothgev/errors.hpp"
#include "smoothgev/log_density.hpp"

namespace smoothgev {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_gumbel(double xi) { return std::abs(xi) <= kXiEps; }

void check_finite(double y) {
  if (!std::isfinite(y)) throw DomainError("GEV argument must be finite");
}

// lgamma(1 - x) = gamma x + sum_{k>=2} zeta(k) x^k / k, for small |x|.
double lgamma_one_minus_series(double x) {
  double total = kEulerGamma * x;
  double pk = x;
  for (int k = 2; k <= 16; ++k) {
    pk *= x;
    total += std::riemann_zeta(static_cast<double>(k)) * pk / k;
  }
  return total;
}

}  // namespace

void validate(const GevParams& p) {
  if (!std::isfinite(p.mu) || !std::isfinite(p.sigma) || !std::isfinite(p.xi))
    throw DomainError("GEV parameters must be finite");
  if (!(p.sigma > 0.0)) throw DomainError("GEV scale must be positive");
}

void Sample::validate() const {
  if (values.empty()) throw DomainError("sample is empty");
  if (values.size() != years.size()) throw DomainError("sample values and years differ in length");
  for (std::size_t i = 1; i < years.size(); ++i)
    if (years[i] <= years[i - 1]) throw DomainError("sample years must be strictly increasing");
}

double gev_cdf(const GevParams& p, double y) {
  validate(p);
  check_finite(y);
  const double z = (y - p.mu) / p.sigma;
  if (is_gumbel(p.xi)) return std::exp(-std::exp(-z));
  const double t = 1.0 + p.xi * z;
  if (t <= 0.0) return p.xi > 0.0 ? 0.0 : 1.0;
  return std::exp(-std::exp(-std::log1p(p.xi * z) / p.xi));
}

double gev_log_pdf(const GevParams& p, double y) {
  validate(p);
  check_finite(y);
  const double z = (y - p.mu) / p.sigma;
  if (is_gumbel(p.xi)) return -std::log(p.sigma) - z - std::exp(-z);
  if (!(1.0 + p.xi * z > 0.0)) return -kInf;
  const double a = std::log1p(p.xi * z) / p.xi;
  return -std::log(p.sigma) - (1.0 + p.xi) * a - std::exp(-a);
}

double gev_pdf(const GevParams& p, double y) { return std::exp(gev_log_pdf(p, y)); }

double gev_quantile(const GevParams& p, double prob) {
  validate(p);
  if (!(prob > 0.0 && prob < 1.0)) throw DomainError("quantile probability must lie in (0, 1)");
  const double w = -std::log(prob);
  if (is_gumbel(p.xi)) return p.mu - p.sigma * std::log(w);
  // ((-log q)^(-xi) - 1) / xi without cancellation for small xi
  return p.mu + p.sigma * std::expm1(-p.xi * std::log(w)) / p.xi;
}

double gev_loglik(const GevParams& p, std::span<const double> values) {
  double total = 0.0;
  for (double y : values) {
    const double v = gev_log_pdf(p, y);
    if (v == -kInf) return -kInf;
    total += v;
  }
  return total;
}

double gev_loglik(const GevParams& p, const Sample& s) {
  s.validate();
  return gev_loglik(p, std::span<const double>(s.values));
}

GevMoments gev_mean_var(const GevParams& p) {
  validate(p);
  const double xi = p.xi;
  GevMoments m{kInf, kInf};
  if (is_gumbel(xi)) {
    m.mean = p.mu + p.sigma * kEulerGamma;
    m.variance = std::numbers::pi * std::numbers::pi * p.sigma * p.sigma / 6.0;
    return m;
  }
  const bool small = std::abs(xi) < 1e-2;
  if (xi < 1.0) {
    const double lg1 = small ? lgamma_one_minus_series(xi) : std::lgamma(1.0 - xi);
    m.mean = p.mu + p.sigma * std::expm1(lg1) / xi;
  }
  if (xi < 0.5) {
    const double lg1 = small ? lgamma_one_minus_series(xi) : std::lgamma(1.0 - xi);
    double ratio;  // {Gamma(1-2xi)/Gamma(1-xi)^2 - 1} / xi^2
    if (small) {
      // lgamma(1-2x) - 2 lgamma(1-x) = sum_{k>=2} zeta(k) (2^k - 2) x^k / k
      double d_over_x2 = 0.0;
      double pk = 1.0;
      for (int k = 2; k <= 16; ++k) {
        d_over_x2 += std::riemann_zeta(static_cast<double>(k)) * (std::ldexp(1.0, k) - 2.0) * pk / k;
        pk *= xi;
      }
      const double d = d_over_x2 * xi * xi;
      ratio = d_over_x2 * (d == 0.0 ? 1.0 : std::expm1(d) / d);
    } else {
      ratio = std::expm1(std::lgamma(1.0 - 2.0 * xi) - 2.0 * lg1) / (xi * xi);
    }
    m.variance = p.sigma * p.sigma * std::exp(2.0 * lg1) * ratio;
  }
  return m;
}

LMoments sample_lmoments(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 3) throw EstimationError("L-moments need at least 3 observations");
  std::vector<double> x(values.begin(), values.end());
  for (double v : x)
    if (!std::isfinite(v)) throw EstimationError("L-moments need finite observations");
  std::sort(x.begin(), x.end());
  const double nn = static_cast<double>(n);
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double jj = static_cast<double>(j);  // (j+1) - 1 in 1-based terms
    b0 += x[j];
    b1 += jj / (nn - 1.0) * x[j];
    b2 += jj * (jj - 1.0) / ((nn - 1.0) * (nn - 2.0)) * x[j];
  }
  b0 /= nn;
  b1 /= nn;
  b2 /= nn;
  return {b0, 2.0 * b1 - b0, 6.0 * b2 - 6.0 * b1 + b0};
}

GevParams fit_lmoments(std::span<const double> values) {
  const LMoments lm = sample_lmoments(values);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi || !(lm.l2 > 0.0)) throw EstimationError("L-moments undefined for a constant sample");

  const double c = 2.0 / (3.0 + lm.tau3()) - std::log(2.0) / std::log(3.0);
  const double k = 7.8590 * c + 2.9554 * c * c;  // Hosking's shape, xi = -k
  if (!(k > -1.0))
    throw EstimationError("sample L-skewness implies shape >= 1; L-moment estimate undefined");

  GevParams p;
  p.xi = -k;
  if (std::abs(k) <= kXiEps) {
    p.sigma = lm.l2 / std::log(2.0);
    p.mu = lm.l1 - kEulerGamma * p.sigma;
    p.xi = 0.0;
    return p;
  }
  const double lg = std::lgamma(1.0 + k);
  // sigma = l2 k / ((1 - 2^-k) Gamma(1+k)),  mu = l1 - sigma (1 - Gamma(1+k)) / k
  const double one_minus_pow = -std::expm1(-k * std::log(2.0));
  p.sigma = lm.l2 * k / (one_minus_pow * std::exp(lg));
  p.mu = lm.l1 + p.sigma * std::expm1(lg) / k;
  return p;
}

GevParams fit_lmoments(const Sample& s) {
  s.validate();
  return fit_lmoments(std::span<const double>(s.values));
}

MleFit fit_mle(std::span<const double> values, std::optional<GevParams> init) {
  if (values.empty()) throw DomainError("fit_mle needs at least one observation");
  GevParams start = init ? *init : fit_lmoments(values);
  validate(start);
  if (!start.valid_for_inference()) start.xi = -1.0 + 1e-3;

  const BoxDesign design;  // (mu, log sigma, xi)
  const std::vector<double> x(values.size(), 0.0);
  auto objective = [&](const LocalVector& c, LocalVector* g, LocalMatrix* h) {
    return box_loglik(design, std::span<const double>(c.data(), c.size()), values, x, g, h);
  };
  auto project = [](LocalVector& c) {
    if (c[2] <= -1.0) c[2] = -1.0 + 1e-3;
  };

  LocalVector c0(3);
  c0 << start.mu, std::log(start.sigma), start.xi;
  if (!std::isfinite(objective(c0, nullptr, nullptr))) c0[2] = 0.0;  // Gumbel support is R

  const auto res = detail::maximize_dense(objective, c0, project);
  if (!res.converged) {
    throw FitError("GEV maximum likelihood did not converge after " +
                       std::to_string(res.iterations) + " iterations",
                   {res.x[0], std::exp(res.x[1]), res.x[2]});
  }
  MleFit out;
  out.params = {res.x[0], std::exp(res.x[1]), res.x[2]};
  out.loglik = res.value;
  out.iterations = res.iterations;
  const Eigen::Matrix3d cov_eta = Eigen::Matrix3d(res.neg_hessian).inverse();
  Eigen::Matrix3d jac = Eigen::Matrix3d::Identity();
  jac(1, 1) = out.params.sigma;  // d sigma / d log sigma
  out.covariance = jac * cov_eta * jac.transpose();
  return out;
}

MleFit fit_mle(const Sample& s, std::optional<GevParams> init) {
  s.validate();
  return fit_mle(std::span<const double>(s.values), init);
}

}  // namespace smoothgev
