#pragma once

#include <array>
#include <span>

#include <Eigen/Dense>

namespace smoothgev {

/**
 * GEV log density in the (mu, eta = log sigma, xi) parametrization with its
 * first and second derivatives.
 *
 * Written as  l = -eta - (1 + xi) a - exp(-a),  a = z * log1p(xi z) / (xi z),
 * z = (y - mu) / sigma, with log1p(u)/u evaluated by series near u = 0. The
 * expression is smooth through xi = 0 and needs no Gumbel branch, which is
 * what the optimizers want. Public distribution functions in gev.hpp apply
 * the kXiEps switch instead.
 */
struct LogDensityJet {
  double value = 0.0;                ///< -infinity outside the support
  std::array<double, 3> grad{};      ///< d/d(mu, eta, xi)
  std::array<double, 9> hess{};      ///< row-major 3x3
  bool in_support = true;
};

double smooth_log_density(double y, double mu, double eta, double xi);
LogDensityJet smooth_log_density_jet(double y, double mu, double eta, double xi);

/// log1p(u)/u and its first two derivatives; accurate through u = 0.
std::array<double, 3> log1p_ratio(double u);

inline constexpr int kMaxLocal = 8;
using LocalVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxLocal, 1>;
using LocalMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxLocal, kMaxLocal>;

/**
 * Where each per-box linear predictor reads its coefficients in a local
 * coefficient vector:
 *   mu_t     = c[mu0] + c[mu1] x_t + c[beta] * elevation
 *   log s_t  = c[s0]  + c[s1] x_t
 *   xi_t     = c[xi]
 * Slots set to -1 are absent.
 */
struct BoxDesign {
  int mu0 = 0;
  int mu1 = -1;
  int s0 = 1;
  int s1 = -1;
  int xi = 2;
  int beta = -1;
  int size = 3;
  double elevation = 0.0;
};

/**
 * Box log-likelihood  sum_t log g(y_t; mu_t, sigma_t, xi)  and, when the
 * pointers are non-null, its gradient and Hessian in the local coefficients.
 * Returns -infinity (derivatives untouched) when any observation is outside
 * the support.
 */
double box_loglik(const BoxDesign& design, std::span<const double> coef,
                  std::span<const double> y, std::span<const double> x,
                  LocalVector* grad = nullptr, LocalMatrix* hess = nullptr);

}  // namespace smoothgev
