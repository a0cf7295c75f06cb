#include "smoothgev/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/SparseCholesky>
#include <boost/math/special_functions/gamma.hpp>

#include "smoothgev/detail/dense_newton.hpp"
#include "smoothgev/errors.hpp"
#include "smoothgev/gev.hpp"
#include "smoothgev/parallel.hpp"
#include "smoothgev/rng.hpp"

namespace smoothgev {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Solver = Eigen::SimplicialLDLT<SpMat>;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kXiFloor = -1.0 + 1e-3;
constexpr double kLn10 = 2.302585092994046;

struct StartValues {
  double mu;
  double log_sigma;
  double xi;
};

StartValues moment_start(std::span<const double> y) {
  const double n = static_cast<double>(y.size());
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / std::max(1.0, n - 1.0));
  const double sigma = std::max(1e-3, sd * std::sqrt(6.0) / M_PI);
  return {mean - kEulerGamma * sigma, std::log(sigma), 0.0};
}

StartValues lmoment_start(std::span<const double> y) {
  if (y.size() >= 3) {
    try {
      const GevParams p = fit_lmoments(y);
      if (std::isfinite(p.mu) && p.sigma > 0.0 && std::isfinite(p.xi))
        return {p.mu, std::log(p.sigma), std::clamp(p.xi, -0.5, 0.3)};
    } catch (const EstimationError&) {
    } catch (const DomainError&) {
    }
  }
  return moment_start(y);
}

void project_xi(Eigen::VectorXd& theta, const ParameterLayout& layout) {
  const int off = layout.offset(Field::Xi);
  for (std::size_t i = 0; i < layout.n_boxes(); ++i)
    theta[off + static_cast<int>(i)] = std::max(theta[off + static_cast<int>(i)], kXiFloor);
}

/// Factorizes h, shifting the diagonal until the factor is positive definite.
bool factorize_modified(Solver& solver, const SpMat& h) {
  solver.setShift(0.0, 1.0);
  solver.compute(h);
  if (solver.info() == Eigen::Success && (solver.vectorD().array() > 0.0).all()) return true;
  double maxdiag = 0.0;
  for (Eigen::Index i = 0; i < h.rows(); ++i) maxdiag = std::max(maxdiag, std::abs(h.coeff(i, i)));
  double tau = 1e-8 * (1.0 + maxdiag);
  for (int k = 0; k < 40; ++k) {
    solver.setShift(tau, 1.0);
    solver.compute(h);
    if (solver.info() == Eigen::Success && (solver.vectorD().array() > 0.0).all()) return true;
    tau *= 10.0;
  }
  return false;
}

struct InnerResult {
  Eigen::VectorXd theta;
  double value = kNegInf;
  double loglik = kNegInf;
  SpMat h_pen;
  int iterations = 0;
  bool converged = false;
};

InnerResult maximize_penalized(const PenalizedProblem& problem, Eigen::VectorXd theta,
                               std::span<const double> lambdas, const FitOptions& opt) {
  const auto& layout = problem.layout();
  project_xi(theta, layout);
  auto ev = problem.evaluate(theta, lambdas);
  if (!ev.feasible) {
    std::vector<double> last(theta.data(), theta.data() + theta.size());
    throw FitError("starting coefficients violate the GEV support", std::move(last));
  }
  const SpMat p = problem.penalty_hessian(lambdas);
  const double f0 = ev.value;
  InnerResult out;
  Solver solver;
  for (int it = 0; it < opt.max_inner_iterations; ++it) {
    out.iterations = it;
    const double gnorm = ev.gradient.cwiseAbs().maxCoeff();
    if (gnorm <= opt.inner_gradient_tolerance * (1.0 + std::abs(ev.value))) {
      out.converged = true;
      break;
    }
    const SpMat h = ev.neg_hess_loglik + p;
    if (!factorize_modified(solver, h)) break;
    const Eigen::VectorXd d = solver.solve(ev.gradient);
    const double slope = ev.gradient.dot(d);
    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial;
    for (int k = 0; k < 60; ++k) {
      trial = theta + step * d;
      project_xi(trial, layout);
      const double ft = problem.value(trial, lambdas);
      if (std::isfinite(ft) && ft >= ev.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      out.converged = gnorm <= 1e-6 * (1.0 + std::abs(ev.value));
      break;
    }
    theta = trial;
    ev = problem.evaluate(theta, lambdas);
    out.iterations = it + 1;
  }
  if (ev.value < f0) throw FitError("inner optimization decreased the objective", {});
  out.theta = theta;
  out.value = ev.value;
  out.loglik = ev.loglik;
  out.h_pen = ev.neg_hess_loglik + p;
  return out;
}

Eigen::VectorXd initial_theta(const PenalizedProblem& problem, double smoothing_lambda) {
  const auto& layout = problem.layout();
  const std::size_t n = problem.n_boxes();
  std::vector<double> pooled;
  for (std::size_t i = 0; i < n; ++i) pooled.insert(pooled.end(), problem.box(i).y.begin(), problem.box(i).y.end());
  if (pooled.size() < 2) throw ValidationError("too few observations to fit");
  const StartValues global = lmoment_start(pooled);

  std::vector<StartValues> local(n);
  for (std::size_t i = 0; i < n; ++i)
    local[i] = problem.box(i).y.size() >= 3 ? lmoment_start(problem.box(i).y) : global;

  ParameterField field;
  for (std::size_t i = 0; i < n; ++i) {
    field.mu0.push_back(local[i].mu);
    field.sigma0.push_back(local[i].log_sigma);
    field.xi.push_back(local[i].xi);
  }
  if (layout.has(Field::Mu1)) field.mu1.assign(n, 0.0);
  if (layout.has(Field::Sigma1)) field.sigma1.assign(n, 0.0);
  if (layout.mu1_global_index() >= 0) field.mu1_global = 0.0;

  if (smoothing_lambda > 0.0 && n > 1) {
    const auto& S = problem.penalty_matrix().S;
    SpMat a = smoothing_lambda * S;
    SpMat id(a.rows(), a.cols());
    id.setIdentity();
    a += id;
    Solver solver(a);
    if (solver.info() == Eigen::Success) {
      for (Field f : {Field::Mu0, Field::Sigma0, Field::Xi}) {
        auto& v = field.values(f);
        const Eigen::VectorXd s = solver.solve(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(n)));
        for (std::size_t i = 0; i < n; ++i) v[i] = s[static_cast<Eigen::Index>(i)];
      }
    }
  }

  Eigen::VectorXd theta = layout.pack(field);
  // Boxes whose start lies outside the support restart from the Gumbel case.
  for (std::size_t i = 0; i < n; ++i) {
    const BoxDesign d = layout.box_design(i, problem.frame().elevation_centered[i]);
    const auto map = layout.local_to_global(i);
    std::vector<double> c(static_cast<std::size_t>(d.size));
    for (int s = 0; s < d.size; ++s) c[static_cast<std::size_t>(s)] = theta[map[s]];
    if (box_loglik(d, c, problem.box(i).y, problem.box(i).x) == kNegInf) theta[layout.index(Field::Xi, i)] = 0.0;
  }
  return theta;
}

std::vector<double> to_lambdas(const Eigen::VectorXd& rho) {
  std::vector<double> out(static_cast<std::size_t>(rho.size()));
  for (Eigen::Index k = 0; k < rho.size(); ++k) out[static_cast<std::size_t>(k)] = std::exp(rho[k]);
  return out;
}

/// Laplace-approximate log marginal likelihood at an inner optimum.
double laplace_criterion(const PenalizedProblem& problem, const InnerResult& inner, std::span<const double> lambdas) {
  Solver solver(inner.h_pen);
  if (solver.info() != Eigen::Success) return kNegInf;
  const Eigen::VectorXd d = solver.vectorD();
  if ((d.array() <= 0.0).any()) return kNegInf;
  const double logdet = d.array().log().sum();
  const int rank = problem.penalty_matrix().rank();
  double prior = 0.0;
  for (double l : lambdas)
    if (l > 0.0) prior += rank * std::log(2.0 * l) + problem.penalty_matrix().log_pdet;
  return inner.value - 0.5 * logdet + 0.5 * prior;
}

struct OuterPoint {
  Eigen::VectorXd rho;
  double criterion = kNegInf;
  InnerResult inner;
};

class OuterSearch {
 public:
  OuterSearch(const PenalizedProblem& problem, const FitOptions& opt)
      : problem_(problem), opt_(opt), lo_(opt.log10_lambda_min * kLn10), hi_(opt.log10_lambda_max * kLn10) {}

  std::optional<OuterPoint> evaluate(const Eigen::VectorXd& rho, const Eigen::VectorXd& warm) {
    const auto lambdas = to_lambdas(rho);
    try {
      InnerResult inner = maximize_penalized(problem_, warm, lambdas, opt_);
      total_iterations += inner.iterations;
      if (!inner.converged) return std::nullopt;
      const double v = laplace_criterion(problem_, inner, lambdas);
      if (!std::isfinite(v)) return std::nullopt;
      return OuterPoint{rho, v, std::move(inner)};
    } catch (const FitError&) {
      return std::nullopt;
    }
  }

  Eigen::VectorXd clamp(Eigen::VectorXd rho) const {
    for (Eigen::Index k = 0; k < rho.size(); ++k) rho[k] = std::clamp(rho[k], lo_, hi_);
    return rho;
  }

  std::optional<Eigen::VectorXd> gradient(const OuterPoint& at) {
    constexpr double h = 1e-2;
    Eigen::VectorXd g(at.rho.size());
    for (Eigen::Index k = 0; k < at.rho.size(); ++k) {
      Eigen::VectorXd up = at.rho, dn = at.rho;
      up[k] = std::min(hi_, up[k] + h);
      dn[k] = std::max(lo_, dn[k] - h);
      const auto fu = up[k] == at.rho[k] ? std::optional<OuterPoint>() : evaluate(up, at.inner.theta);
      const auto fd = dn[k] == at.rho[k] ? std::optional<OuterPoint>() : evaluate(dn, at.inner.theta);
      const double vu = fu ? fu->criterion : at.criterion;
      const double vd = fd ? fd->criterion : at.criterion;
      const double width = (fu ? up[k] : at.rho[k]) - (fd ? dn[k] : at.rho[k]);
      if (width <= 0.0) return std::nullopt;
      g[k] = (vu - vd) / width;
    }
    return g;
  }

  /// Projected BFGS ascent on the criterion. Returns nullopt when it cannot start or stalls immediately.
  std::optional<OuterPoint> quasi_newton(OuterPoint x, int& iterations) {
    const Eigen::Index m = x.rho.size();
    auto g = gradient(x);
    if (!g) return std::nullopt;
    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(m, m);
    for (iterations = 0; iterations < opt_.max_outer_iterations; ++iterations) {
      Eigen::VectorXd d = hinv * *g;
      Eigen::VectorXd gfree = *g;
      for (Eigen::Index k = 0; k < m; ++k) {
        const bool at_lo = x.rho[k] <= lo_ + 1e-12, at_hi = x.rho[k] >= hi_ - 1e-12;
        if ((at_lo && (*g)[k] <= 0.0) || (at_hi && (*g)[k] >= 0.0)) gfree[k] = 0.0;
        if ((at_lo && d[k] < 0.0) || (at_hi && d[k] > 0.0)) d[k] = 0.0;
      }
      if (gfree.cwiseAbs().maxCoeff() < 1e-3) return x;
      if (g->dot(d) <= 0.0) {
        hinv.setIdentity();
        d = gfree;
      }
      const double big = d.cwiseAbs().maxCoeff();
      if (big > 3.0) d *= 3.0 / big;

      double t = 1.0;
      std::optional<OuterPoint> next;
      for (int k = 0; k < 12; ++k) {
        const Eigen::VectorXd trial = clamp(x.rho + t * d);
        auto cand = evaluate(trial, x.inner.theta);
        if (cand && cand->criterion >= x.criterion + 1e-4 * g->dot(trial - x.rho)) {
          next = std::move(cand);
          break;
        }
        t *= 0.5;
      }
      if (!next) {
        if (iterations == 0) return std::nullopt;
        return x;
      }
      const Eigen::VectorXd s = next->rho - x.rho;
      const bool small = s.cwiseAbs().maxCoeff() < opt_.outer_step_tolerance;
      auto gn = gradient(*next);
      if (!gn) return next;
      x = std::move(*next);
      if (small) return x;
      const Eigen::VectorXd y = *g - *gn;
      const double sy = s.dot(y);
      if (sy > 1e-10) {
        const double r = 1.0 / sy;
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(m, m);
        hinv = (id - r * s * y.transpose()) * hinv * (id - r * y * s.transpose()) + r * s * s.transpose();
      }
      g = gn;
    }
    return x;
  }

  /// Coordinate-wise search over log10 lambda in {-2, -1.5, ..., 6}.
  std::optional<OuterPoint> grid(const Eigen::VectorXd& warm, int& iterations) {
    const Eigen::Index m = static_cast<Eigen::Index>(problem_.n_lambdas());
    std::optional<OuterPoint> best;
    Eigen::VectorXd rho = Eigen::VectorXd::Constant(m, 0.0);
    best = evaluate(rho, warm);
    for (int sweep = 0; sweep < 3; ++sweep) {
      ++iterations;
      const Eigen::VectorXd before = best ? best->rho : rho;
      for (Eigen::Index k = 0; k < m; ++k) {
        for (int j = -4; j <= 12; ++j) {
          Eigen::VectorXd trial = best ? best->rho : rho;
          trial[k] = 0.5 * j * kLn10;
          const Eigen::VectorXd& start = best ? best->inner.theta : warm;
          auto cand = evaluate(trial, start);
          if (cand && (!best || cand->criterion > best->criterion)) best = std::move(cand);
        }
      }
      if (best && (best->rho - before).cwiseAbs().maxCoeff() == 0.0) break;
    }
    return best;
  }

  int total_iterations = 0;

 private:
  const PenalizedProblem& problem_;
  const FitOptions& opt_;
  double lo_, hi_;
};

/// Per-coefficient effective degrees of freedom, diag(I - H_pen^{-1} P).
Eigen::VectorXd coefficient_edf_impl(const SpMat& h_pen, const ParameterLayout& layout, const PenaltyMatrix& penalty,
                                     std::span<const double> lambdas) {
  const auto dim = static_cast<Eigen::Index>(layout.dim());
  Eigen::VectorXd out = Eigen::VectorXd::Ones(dim);
  Solver solver(h_pen);
  if (solver.info() != Eigen::Success) throw FitError("precision matrix is not factorizable", {});
  const auto n = static_cast<Eigen::Index>(layout.n_boxes());
  constexpr Eigen::Index chunk = 256;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    if (lambdas[k] == 0.0) continue;
    const int off = layout.offset(layout.fields()[k]);
    Eigen::VectorXd cs_diag = Eigen::VectorXd::Zero(n);
    for (Eigen::Index c0 = 0; c0 < n; c0 += chunk) {
      const Eigen::Index cols = std::min(chunk, n - c0);
      Eigen::MatrixXd e = Eigen::MatrixXd::Zero(dim, cols);
      for (Eigen::Index c = 0; c < cols; ++c) e(off + c0 + c, c) = 1.0;
      const Eigen::MatrixXd x = solver.solve(e);
      for (Eigen::Index c = 0; c < cols; ++c) {
        const Eigen::Index l = c0 + c;
        for (SpMat::InnerIterator it(penalty.S, l); it; ++it) cs_diag[it.row()] += x(off + it.row(), c) * it.value();
      }
    }
    out.segment(off, n) -= 2.0 * lambdas[k] * cs_diag;
  }
  return out;
}

}  // namespace

double SmoothingParams::lambda(std::size_t k) const { return std::exp(log_lambda.at(k)); }

std::vector<double> SmoothingParams::lambdas() const {
  std::vector<double> out;
  for (double r : log_lambda) out.push_back(std::exp(r));
  return out;
}

double SmoothingParams::lambda(Field f) const {
  for (std::size_t k = 0; k < fields.size(); ++k)
    if (fields[k] == f) return lambda(k);
  throw ValidationError("field '" + std::string(field_name(f)) + "' is not penalized in this fit");
}

FitResult fit_smooth(const GriddedDataset& data, const ModelSpec& spec, const CovariateSeries& cov,
                     const PenaltyMatrix& penalty, const FitOptions& opts) {
  if (data.n_boxes() == 0) throw ValidationError("dataset has no boxes");
  const ModelFrame frame = make_frame(spec, data, cov, penalty);
  const PenalizedProblem problem(data, frame, penalty, opts.threads);
  const auto& layout = problem.layout();
  const std::size_t m = problem.n_lambdas();

  Eigen::VectorXd theta0;
  if (opts.start) {
    check_shapes(*opts.start, spec, data.n_boxes());
    theta0 = layout.pack(*opts.start);
    if (frame.beta_active) theta0[layout.beta_index()] = opts.start->beta;
  } else {
    theta0 = initial_theta(problem, opts.init_smoothing_lambda);
  }

  FitResult result;
  result.frame = frame;
  result.layout = layout;
  result.lambdas.fields = layout.fields();
  std::vector<double> lambdas;
  InnerResult inner;

  if (opts.fixed_lambdas) {
    lambdas = *opts.fixed_lambdas;
    if (lambdas.size() != m)
      throw ValidationError("expected " + std::to_string(m) + " smoothing parameters, got " +
                            std::to_string(lambdas.size()));
    for (double l : lambdas)
      if (!(l >= 0.0) || !std::isfinite(l)) throw ValidationError("smoothing parameters must be finite and >= 0");
    inner = maximize_penalized(problem, theta0, lambdas, opts);
    result.iterations = inner.iterations;
    if (!inner.converged) {
      std::vector<double> last(inner.theta.data(), inner.theta.data() + inner.theta.size());
      throw FitError("inner optimization did not converge within " + std::to_string(opts.max_inner_iterations) +
                         " iterations",
                     std::move(last));
    }
    result.log_marginal = laplace_criterion(problem, inner, lambdas);
    result.lambda_search = "fixed";
  } else {
    OuterSearch search(problem, opts);
    std::optional<OuterPoint> start;
    for (double l10 : {opts.initial_log10_lambda, -1.0, 1.0, 3.0, 5.0}) {
      const Eigen::VectorXd rho = search.clamp(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), l10 * kLn10));
      auto cand = search.evaluate(rho, start ? start->inner.theta : theta0);
      if (cand && (!start || cand->criterion > start->criterion)) start = std::move(cand);
    }
    std::optional<OuterPoint> best;
    int outer = 0;
    if (start) {
      best = search.quasi_newton(*start, outer);
      if (best) result.lambda_search = "quasi-newton";
    }
    if (!best) {
      best = search.grid(start ? start->inner.theta : theta0, outer);
      result.lambda_search = "grid";
    }
    result.iterations = search.total_iterations;
    result.outer_iterations = outer;
    if (!best) {
      std::vector<double> last(theta0.data(), theta0.data() + theta0.size());
      throw FitError("no smoothing parameters gave a converged inner fit", std::move(last));
    }
    lambdas = to_lambdas(best->rho);
    result.log_marginal = best->criterion;
    inner = std::move(best->inner);
  }

  result.lambdas.log_lambda.clear();
  for (double l : lambdas) result.lambdas.log_lambda.push_back(std::log(l));
  result.theta = inner.theta;
  result.field = layout.unpack(inner.theta);
  result.penalized_ll = inner.value;
  result.unpenalized_ll = inner.loglik;
  result.precision = inner.h_pen;
  result.converged = inner.converged;
  result.coefficient_edf = coefficient_edf_impl(result.precision, layout, penalty, lambdas);
  result.edf = result.coefficient_edf.sum();
  for (const auto& b : data.grid.boxes()) {
    result.box_ids.push_back(b.id);
    result.regions.push_back(b.region);
  }
  result.years = data.years;
  return result;
}

IndependentFit fit_independent(const GriddedDataset& data, const ModelSpec& spec, const CovariateSeries& cov,
                               unsigned threads) {
  IndependentFit out;
  out.spec = spec;
  if (out.spec.mu_trend == TrendKind::Homogeneous) out.spec.mu_trend = TrendKind::Varying;
  out.spec.elevation_effect = false;
  const ParameterLayout layout(out.spec, 1, false);
  const BoxDesign design = layout.box_design(0, 0.0);
  out.xi_slot = design.xi;
  const CovariateSeries aligned = cov.aligned(data.years);

  const std::size_t n = data.n_boxes();
  out.boxes.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    BoxFit& bf = out.boxes[i];
    std::vector<double> y, x;
    for (std::size_t t = 0; t < data.n_years(); ++t) {
      if (data.missing(i, t)) continue;
      y.push_back(data.txx(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)));
      x.push_back(aligned.at(t));
    }
    if (y.size() < 5) {
      bf.message = "fewer than 5 observed years";
      return;
    }
    const StartValues s = lmoment_start(y);
    LocalVector c = LocalVector::Zero(design.size);
    c[design.mu0] = s.mu;
    c[design.s0] = s.log_sigma;
    c[design.xi] = s.xi;
    auto f = [&](const LocalVector& v, LocalVector* g, LocalMatrix* h) {
      return box_loglik(design, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), y, x, g, h);
    };
    if (!std::isfinite(f(c, nullptr, nullptr))) c[design.xi] = 0.0;
    auto project = [&](LocalVector& v) { v[design.xi] = std::max(v[design.xi], kXiFloor); };
    const auto r = detail::maximize_dense(f, c, project);
    bf.coef.assign(r.x.data(), r.x.data() + r.x.size());
    bf.loglik = r.value;
    if (!r.converged) {
      bf.message = "Newton iteration did not converge";
      return;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(Eigen::MatrixXd(r.neg_hessian));
    if (llt.info() != Eigen::Success) {
      bf.message = "observed information is not positive definite";
      return;
    }
    bf.covariance = llt.solve(Eigen::MatrixXd::Identity(design.size, design.size));
    for (int k = 0; k < design.size; ++k) bf.std_errors.push_back(std::sqrt(bf.covariance(k, k)));
    bf.converged = true;
  });

  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto& fld = out.field;
  fld.mu0.assign(n, nan);
  fld.sigma0.assign(n, nan);
  fld.xi.assign(n, nan);
  if (design.mu1 >= 0) fld.mu1.assign(n, nan);
  if (design.s1 >= 0) fld.sigma1.assign(n, nan);
  out.xi_se.assign(n, nan);
  for (std::size_t i = 0; i < n; ++i) {
    const BoxFit& bf = out.boxes[i];
    if (!bf.converged) continue;
    fld.mu0[i] = bf.coef[static_cast<std::size_t>(design.mu0)];
    fld.sigma0[i] = bf.coef[static_cast<std::size_t>(design.s0)];
    fld.xi[i] = bf.coef[static_cast<std::size_t>(design.xi)];
    if (design.mu1 >= 0) fld.mu1[i] = bf.coef[static_cast<std::size_t>(design.mu1)];
    if (design.s1 >= 0) fld.sigma1[i] = bf.coef[static_cast<std::size_t>(design.s1)];
    out.xi_se[i] = bf.std_errors[static_cast<std::size_t>(design.xi)];
  }
  return out;
}

Eigen::MatrixXd covariance_columns(const FitResult& fit, std::span<const int> indices) {
  Solver solver(fit.precision);
  if (solver.info() != Eigen::Success) throw FitError("precision matrix is not factorizable", {});
  const auto dim = fit.precision.rows();
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(dim, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    if (indices[c] < 0 || indices[c] >= dim) throw ValidationError("coefficient index out of range");
    e(indices[c], static_cast<Eigen::Index>(c)) = 1.0;
  }
  return solver.solve(e);
}

Eigen::VectorXd standard_errors(const FitResult& fit) {
  Solver solver(fit.precision);
  if (solver.info() != Eigen::Success) throw FitError("precision matrix is not factorizable", {});
  const auto dim = fit.precision.rows();
  Eigen::VectorXd out(dim);
  constexpr Eigen::Index chunk = 256;
  for (Eigen::Index c0 = 0; c0 < dim; c0 += chunk) {
    const Eigen::Index cols = std::min(chunk, dim - c0);
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(dim, cols);
    for (Eigen::Index c = 0; c < cols; ++c) e(c0 + c, c) = 1.0;
    const Eigen::MatrixXd x = solver.solve(e);
    for (Eigen::Index c = 0; c < cols; ++c) out[c0 + c] = std::sqrt(x(c0 + c, c));
  }
  return out;
}

std::vector<double> uncertainty_ratio(const IndependentFit& indep, const FitResult& smooth) {
  const std::size_t n = smooth.n_boxes();
  if (indep.boxes.size() != n) throw ValidationError("independent and smooth fits cover different boxes");
  const Eigen::VectorXd se = standard_errors(smooth);
  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < n; ++i) {
    if (!indep.boxes[i].converged) continue;
    out[i] = indep.xi_se[i] / se[smooth.layout.index(Field::Xi, i)];
  }
  return out;
}

struct PosteriorSampler::Impl {
  explicit Impl(const FitResult& fit) : theta(fit.theta), layout(fit.layout) {}
  Solver solver;
  Eigen::VectorXd theta;
  Eigen::VectorXd inv_sqrt_d;
  ParameterLayout layout;
};

PosteriorSampler::PosteriorSampler(const FitResult& fit) : impl_(std::make_unique<Impl>(fit)) {
  impl_->solver.compute(fit.precision);
  if (impl_->solver.info() != Eigen::Success || (impl_->solver.vectorD().array() <= 0.0).any())
    throw FitError(
        "precision matrix is singular; the penalty null space must be identified by the likelihood "
        "or constrained before sampling",
        {});
  impl_->inv_sqrt_d = impl_->solver.vectorD().array().rsqrt();
}

PosteriorSampler::~PosteriorSampler() = default;
PosteriorSampler::PosteriorSampler(PosteriorSampler&&) noexcept = default;
PosteriorSampler& PosteriorSampler::operator=(PosteriorSampler&&) noexcept = default;

Eigen::VectorXd PosteriorSampler::draw(std::uint64_t seed, std::uint64_t index) const {
  SplitMix64 rng(substream_seed(seed, index));
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(impl_->theta.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = normal(rng);
  const Eigen::VectorXd w = z.cwiseProduct(impl_->inv_sqrt_d);
  const Eigen::VectorXd u = impl_->solver.matrixU().solve(w);
  return impl_->theta + impl_->solver.permutationPinv() * u;
}

ParameterField PosteriorSampler::draw_field(std::uint64_t seed, std::uint64_t index) const {
  return impl_->layout.unpack(draw(seed, index));
}

std::vector<ParameterField> posterior_sample(const FitResult& fit, std::size_t count, std::uint64_t seed) {
  const PosteriorSampler sampler(fit);
  std::vector<ParameterField> out;
  out.reserve(count);
  for (std::size_t j = 0; j < count; ++j) out.push_back(sampler.draw_field(seed, j));
  return out;
}

double aic(const FitResult& fit) { return -2.0 * fit.unpenalized_ll + 2.0 * fit.edf; }

std::vector<int> block_indices(const FitResult& fit, const std::string& block) {
  std::vector<int> idx;
  const auto& layout = fit.layout;
  if (block == "beta") {
    if (layout.beta_index() >= 0) idx.push_back(layout.beta_index());
    return idx;
  }
  if (block == "mu1" && layout.mu1_global_index() >= 0) {
    idx.push_back(layout.mu1_global_index());
    return idx;
  }
  const auto f = field_from_name(block);
  if (!f) throw ValidationError("unknown coefficient block '" + block + "'");
  if (!layout.has(*f)) return idx;
  for (std::size_t i = 0; i < layout.n_boxes(); ++i) idx.push_back(layout.index(*f, i));
  return idx;
}

WaldTest wald_zero_test(const FitResult& fit, const std::string& block) {
  const auto idx = block_indices(fit, block);
  if (idx.empty()) throw ValidationError("coefficient block '" + block + "' is absent from this fit");
  const Eigen::MatrixXd cols = covariance_columns(fit, idx);
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd sigma(k, k);
  Eigen::VectorXd b(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    b[a] = fit.theta[idx[static_cast<std::size_t>(a)]];
    for (Eigen::Index c = 0; c < k; ++c) sigma(a, c) = cols(idx[static_cast<std::size_t>(a)], c);
  }
  sigma = 0.5 * (sigma + sigma.transpose());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff()))
    throw DomainError("block covariance of '" + block + "' is not invertible");

  WaldTest out;
  out.statistic = b.dot(ldlt.solve(b));
  for (int i : idx) out.edf += fit.coefficient_edf.size() > i ? fit.coefficient_edf[i] : 1.0;
  out.df = std::max(1, static_cast<int>(std::lround(out.edf)));
  out.p_value = boost::math::gamma_q(0.5 * out.df, 0.5 * out.statistic);
  return out;
}

}  // namespace smoothgev
