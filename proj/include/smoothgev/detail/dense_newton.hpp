#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "smoothgev/log_density.hpp"

namespace smoothgev::detail {

struct DenseNewtonResult {
  LocalVector x;
  double value = -std::numeric_limits<double>::infinity();
  LocalMatrix neg_hessian;
  int iterations = 0;
  bool converged = false;
};

struct DenseNewtonOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;  // on max |g| / (1 + |f|)
};

// Newton ascent with eigenvalue-modified curvature and Armijo backtracking.
// f(x, grad*, hess*) returns the objective (or -inf when infeasible);
// project(x) maps a trial point back into the admissible region.
template <typename Objective, typename Project>
DenseNewtonResult maximize_dense(Objective&& f, LocalVector x, Project&& project,
                                 const DenseNewtonOptions& opt = {}) {
  DenseNewtonResult out;
  LocalVector g;
  LocalMatrix h;
  double fx = f(x, &g, &h);
  if (!std::isfinite(fx)) {
    out.x = x;
    return out;
  }
  const int n = static_cast<int>(x.size());
  for (int it = 0; it < opt.max_iterations; ++it) {
    out.iterations = it;
    const LocalMatrix neg = -h;
    const double gnorm = g.cwiseAbs().maxCoeff();
    if (gnorm <= opt.gradient_tolerance * (1.0 + std::abs(fx))) {
      out.converged = true;
      break;
    }
    Eigen::SelfAdjointEigenSolver<LocalMatrix> eig(neg);
    LocalVector lam = eig.eigenvalues();
    const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
    for (int i = 0; i < n; ++i) lam[i] = std::max(std::abs(lam[i]), 1e-10 * scale);
    const LocalMatrix& v = eig.eigenvectors();
    const LocalVector d = v * (v.transpose() * g).cwiseQuotient(lam);
    const double slope = g.dot(d);

    double step = 1.0;
    bool accepted = false;
    LocalVector trial;
    double ftrial = 0.0;
    for (int k = 0; k < 60; ++k) {
      trial = x + step * d;
      project(trial);
      ftrial = f(trial, nullptr, nullptr);
      if (std::isfinite(ftrial) && ftrial >= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No representable improvement: accept as converged only near stationarity.
      out.converged = gnorm <= 1e-6 * (1.0 + std::abs(fx));
      break;
    }
    x = trial;
    fx = f(x, &g, &h);
    out.iterations = it + 1;
  }
  out.x = x;
  out.value = fx;
  out.neg_hessian = -h;
  return out;
}

}  // namespace smoothgev::detail
