// Acceptance checks. Run with no arguments for every criterion, or pass
// criterion numbers to run a subset. Prints one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "oracles.hpp"
#include "smoothgev/cli.hpp"
#include "smoothgev/diagnostics.hpp"
#include "smoothgev/errors.hpp"
#include "smoothgev/fit.hpp"
#include "smoothgev/gev.hpp"
#include "smoothgev/grid.hpp"
#include "smoothgev/inference.hpp"
#include "smoothgev/objective.hpp"
#include "smoothgev/rng.hpp"
#include "smoothgev/scoring.hpp"
#include "smoothgev/synthetic.hpp"

using namespace smoothgev;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  /// Records a failed check; returns the condition.
  bool check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
    return ok;
  }
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

const std::vector<double> kShapes{-0.4, -0.1, 0.0, 0.1, 0.4};

SimulatedData simulate_with_penalty(const TruthScenario& s, PenaltyMatrix& penalty) {
  SimulatedData sim = simulate(s);
  penalty = build_penalty(build_neighborhood(sim.data.grid));
  return sim;
}

// 1 ---------------------------------------------------------------------------
void gev_math(Outcome& o) {
  const double mu = 10.0, sigma = 2.0;
  double worst_norm = 0.0, worst_round = 0.0, worst_cont = 0.0;
  for (double xi : kShapes) {
    const GevParams p{mu, sigma, xi};
    auto pdf = [&](double y) { return gev_pdf(p, y); };
    double lo = -oracle::kInf, hi = oracle::kInf;
    if (xi > 0.0) lo = oracle::support_end(mu, sigma, xi);
    if (xi < 0.0) hi = oracle::support_end(mu, sigma, xi);
    const double mass = oracle::integrate(pdf, lo, hi);
    worst_norm = std::max(worst_norm, std::abs(mass - 1.0));
    o.check(std::abs(mass - 1.0) <= 1e-8, "pdf mass " + fmt(mass, 16) + " at xi " + fmt(xi));

    for (double prob : {1e-6, 1e-3, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999, 1 - 1e-6}) {
      const double err = std::abs(gev_cdf(p, gev_quantile(p, prob)) - prob);
      worst_round = std::max(worst_round, err);
      o.check(err <= 1e-12, "round trip at xi " + fmt(xi) + " p " + fmt(prob));
    }

    // Monte Carlo moments by inverse-CDF sampling with the textbook quantile formula.
    const std::size_t n = 10'000'000;
    SplitMix64 rng(substream_seed(20261015, static_cast<std::uint64_t>((xi + 1.0) * 1000)));
    double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0, shift = mu;
    for (std::size_t k = 0; k < n; ++k) {
      const double u = rng.uniform_open();
      const double y = xi == 0.0 ? mu - sigma * std::log(-std::log(u))
                                 : mu + sigma * (std::pow(-std::log(u), -xi) - 1.0) / xi;
      const double d = y - shift, d2 = d * d;
      s1 += d;
      s2 += d2;
      s3 += d2 * d;
      s4 += d2 * d2;
    }
    const double nn = static_cast<double>(n);
    const double m1 = s1 / nn;
    const double var = s2 / nn - m1 * m1;
    const double m4 = s4 / nn - 4 * m1 * s3 / nn + 6 * m1 * m1 * s2 / nn - 3 * m1 * m1 * m1 * m1;
    const GevMoments exact = gev_mean_var(p);
    const double se_mean = std::sqrt(var / nn);
    const double se_var = std::sqrt(std::max(0.0, m4 - var * var) / nn);
    const double z_mean = (shift + m1 - exact.mean) / se_mean;
    const double z_var = (var - exact.variance) / se_var;
    o.check(std::abs(z_mean) <= 3.0, "MC mean at xi " + fmt(xi) + " off by " + fmt(z_mean) + " SE");
    o.check(std::abs(z_var) <= 3.0, "MC variance at xi " + fmt(xi) + " off by " + fmt(z_var) + " SE");
    o.detail << "xi=" << xi << " zmean=" << fmt(z_mean, 2) << " zvar=" << fmt(z_var, 2) << "; ";
  }
  for (double xi : {kXiEps, -kXiEps})
    for (double y = mu - 5 * sigma; y <= mu + 15 * sigma; y += 0.05 * sigma) {
      const double err = std::abs(gev_cdf({mu, sigma, xi}, y) - oracle::gev_cdf(mu, sigma, 0.0, y));
      worst_cont = std::max(worst_cont, err);
      o.check(err < 1e-8, "Gumbel continuity at y " + fmt(y));
    }
  o.detail << "max |mass-1|=" << fmt(worst_norm, 3) << " max round trip=" << fmt(worst_round, 3)
           << " max continuity gap=" << fmt(worst_cont, 3);
}

// 2 ---------------------------------------------------------------------------
void penalty_checks(Outcome& o) {
  SplitMix64 rng(99);
  std::vector<GridBox> boxes;
  std::int64_t id = 1;
  for (int iy = 0; iy < 10; ++iy)
    for (int ix = 0; ix < 10; ++ix)
      if (rng.uniform_open() < 0.8) boxes.push_back({id++, 0.5 * ix, 0.5 * iy, 0.0, "A"});
  const Grid grid(boxes, 0.5);
  const PenaltyMatrix pen = build_penalty(build_neighborhood(grid));
  const auto n = static_cast<Eigen::Index>(grid.size());

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      const long dx = std::lround((grid.box(i).lon - grid.box(j).lon) / 0.5);
      const long dy = std::lround((grid.box(i).lat - grid.box(j).lat) / 0.5);
      if (std::abs(dx) + std::abs(dy) == 1) pairs.emplace_back(i, j);
    }

  std::mt19937_64 gen(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0, worst_shift = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = 5.0 * normal(gen);
    double pair_sum = 0.0;
    for (auto [i, j] : pairs) pair_sum += (v[i] - v[j]) * (v[i] - v[j]);
    const double dense = v.dot(pen.S * v);
    const double scale = std::max(1.0, pair_sum);
    worst = std::max({worst, std::abs(dense - pair_sum) / scale, std::abs(pen.quadratic_form(v) - pair_sum) / scale});
    const Eigen::VectorXd shifted = v.array() + 3.7;
    worst_shift = std::max(worst_shift, std::abs(pen.quadratic_form(shifted) - pen.quadratic_form(v)) / scale);
    worst_shift = std::max(worst_shift, std::abs(shifted.dot(pen.S * shifted) - dense) / scale);
  }
  o.check(worst <= 1e-12, "quadratic form vs neighbour-pair sum, rel err " + fmt(worst));
  o.check(worst_shift <= 1e-12, "constant-shift invariance, rel err " + fmt(worst_shift));

  const Eigen::MatrixXd dense = Eigen::MatrixXd(pen.S);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense);
  const double min_ev = eig.eigenvalues().minCoeff();
  int null_dim = 0;
  for (Eigen::Index k = 0; k < n; ++k) null_dim += std::abs(eig.eigenvalues()[k]) < 1e-9 ? 1 : 0;
  o.check(min_ev >= -1e-10, "S has a negative eigenvalue " + fmt(min_ev));
  o.check(null_dim == pen.n_components, "null space dimension " + std::to_string(null_dim) + " vs " +
                                            std::to_string(pen.n_components) + " components");
  o.detail << n << " boxes, " << pairs.size() << " neighbour pairs; max rel err " << fmt(worst, 3)
           << ", shift " << fmt(worst_shift, 3) << ", min eigenvalue " << fmt(min_ev, 3) << ", nullity "
           << null_dim;
}

// 3 ---------------------------------------------------------------------------
void optimizer_limits(Outcome& o) {
  {
    TruthScenario s;
    s.nx = s.ny = 4;
    s.seed = 11;
    PenaltyMatrix pen;
    const SimulatedData sim = simulate_with_penalty(s, pen);
    const ModelSpec spec = ModelSpec::mod2();
    FitOptions opts;
    const ModelFrame frame = make_frame(spec, sim.data, sim.covariate, pen);
    opts.fixed_lambdas = std::vector<double>(ParameterLayout(spec, sim.data.n_boxes(), frame.beta_active).fields().size(), 0.0);
    const FitResult smooth = fit_smooth(sim.data, spec, sim.covariate, pen, opts);
    const IndependentFit indep = fit_independent(sim.data, spec, sim.covariate);
    double worst = 0.0;
    for (Field f : {Field::Mu0, Field::Mu1, Field::Sigma0, Field::Xi})
      for (std::size_t i = 0; i < sim.data.n_boxes(); ++i)
        worst = std::max(worst, std::abs(smooth.field.values(f)[i] - indep.field.values(f)[i]));
    o.check(smooth.converged, "lambda = 0 fit did not converge");
    o.check(worst <= 1e-5, "lambda = 0 differs from per-box MLE by " + fmt(worst));
    o.detail << "lambda=0 max diff " << fmt(worst, 3) << "; ";
  }
  {
    TruthScenario s;
    s.nx = s.ny = 6;
    s.seed = 12;
    PenaltyMatrix pen;
    const SimulatedData sim = simulate_with_penalty(s, pen);
    const ModelSpec spec = ModelSpec::mod2();
    const ModelFrame frame = make_frame(spec, sim.data, sim.covariate, pen);
    FitOptions opts;
    opts.fixed_lambdas = std::vector<double>(ParameterLayout(spec, sim.data.n_boxes(), frame.beta_active).fields().size(), 1e8);
    const FitResult fit = fit_smooth(sim.data, spec, sim.covariate, pen, opts);
    double worst = 0.0;
    for (Field f : {Field::Mu0, Field::Mu1, Field::Sigma0, Field::Xi})
      worst = std::max(worst, oracle::variance(fit.field.values(f)));
    o.check(fit.converged, "lambda = 1e8 fit did not converge");
    o.check(worst < 1e-4, "lambda = 1e8 spatial variance " + fmt(worst));
    o.detail << "lambda=1e8 max spatial variance " << fmt(worst, 3) << "; ";
  }
  {
    TruthScenario s;
    s.nx = s.ny = 3;
    s.seed = 3;
    s.spec = ModelSpec::mod4();
    s.elevation_km = {0.5, 0.3, 0.2, {}};
    s.sigma1 = {0.3, 0.1, 0.0, {}};
    PenaltyMatrix pen;
    const SimulatedData sim = simulate_with_penalty(s, pen);
    const ModelFrame frame = make_frame(s.spec, sim.data, sim.covariate, pen);
    const PenalizedProblem prob(sim.data, frame, pen);
    const Eigen::VectorXd theta = prob.layout().pack(sim.truth);
    const std::vector<double> lam(prob.n_lambdas(), 3.0);
    const auto ev = prob.evaluate(theta, lam);
    double worst = 0.0;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      const double h = 1e-5 * std::max(1.0, std::abs(theta[k]));
      Eigen::VectorXd tp = theta, tm = theta;
      tp[k] += h;
      tm[k] -= h;
      const double fd = (prob.value(tp, lam) - prob.value(tm, lam)) / (2 * h);
      worst = std::max(worst, std::abs(fd - ev.gradient[k]) / std::max(1.0, std::abs(ev.gradient[k])));
    }
    o.check(frame.beta_active, "elevation effect inactive in the gradient check");
    o.check(worst <= 1e-5, "gradient vs finite differences rel err " + fmt(worst));
    o.detail << "3x3 gradient (" << theta.size() << " coefficients) max rel err " << fmt(worst, 3);
  }
}

// 4 ---------------------------------------------------------------------------
void recovery(Outcome& o) {
  TruthScenario s;
  s.nx = s.ny = 15;
  s.n_years = 69;
  s.seed = 7;
  s.mu1 = {4.0, 6.0, 0.0, {{2.0, 0.0, 1.0, 0.3}}};
  PenaltyMatrix pen;
  const SimulatedData sim = simulate_with_penalty(s, pen);
  const FitResult fit = fit_smooth(sim.data, ModelSpec::mod2(), sim.covariate, pen);
  const std::size_t n = sim.data.n_boxes();
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) sse += std::pow(fit.field.mu1[i] - sim.truth.mu1[i], 2);
  const double rmse = std::sqrt(sse / static_cast<double>(n));
  const double truth_sd = std::sqrt(oracle::variance(sim.truth.mu1));
  const IndependentFit indep = fit_independent(sim.data, ModelSpec::mod2(), sim.covariate);
  const auto ratio = uncertainty_ratio(indep, fit);
  std::vector<double> finite;
  for (double r : ratio)
    if (std::isfinite(r)) finite.push_back(r);
  const double mean_ratio = finite.empty() ? NAN : oracle::mean(finite);
  o.check(fit.converged, "smooth fit did not converge");
  o.check(rmse < 0.5 * truth_sd, "mu1 RMSE " + fmt(rmse) + " vs truth sd " + fmt(truth_sd));
  o.check(mean_ratio > 1.0, "mean SE ratio " + fmt(mean_ratio));
  o.detail << "mu1 RMSE " << fmt(rmse) << " (0.5 x truth sd = " << fmt(0.5 * truth_sd) << "), mean xi SE ratio "
           << fmt(mean_ratio) << " over " << finite.size() << "/" << n << " boxes";
}

// 5 ---------------------------------------------------------------------------
void inference_identities(Outcome& o) {
  TruthScenario s;
  s.nx = s.ny = 6;
  s.seed = 21;
  PenaltyMatrix pen;
  const SimulatedData sim = simulate_with_penalty(s, pen);
  const std::size_t last = sim.data.n_years() - 1;
  const ReturnSpec rs{0.01, 0, last};

  const FitResult mod2 = fit_smooth(sim.data, ModelSpec::mod2(), sim.covariate, pen);
  const auto rl = return_level_difference(mod2.field, mod2.frame, rs);
  const auto loc = parameter_change(mod2.field, mod2.frame, 0, last).location;
  double worst = 0.0;
  for (std::size_t i = 0; i < rl.size(); ++i) worst = std::max(worst, std::abs(rl[i] - loc[i]));
  o.check(worst <= 1e-9, "Mod2 rl_diff differs from location change by " + fmt(worst));

  const FitResult mod1 = fit_smooth(sim.data, ModelSpec::mod1(), sim.covariate, pen);
  const auto rl1 = return_level_difference(mod1.field, mod1.frame, rs);
  const auto rr1 = risk_ratio(mod1.field, mod1.frame, rs);
  double worst_rl = 0.0, worst_rr = 0.0;
  for (std::size_t i = 0; i < rl1.size(); ++i) {
    worst_rl = std::max(worst_rl, std::abs(rl1[i]));
    worst_rr = std::max(worst_rr, std::abs(rr1[i] - 1.0));
  }
  o.check(worst_rl <= 1e-12, "Mod1 rl_diff not zero: " + fmt(worst_rl));
  o.check(worst_rr <= 1e-12, "Mod1 risk ratio not one: " + fmt(worst_rr));

  // Gumbel, location +2 between the two years, sigma = 1, p = 0.01.
  TruthScenario g;
  g.nx = 2;
  g.ny = 1;
  PenaltyMatrix gpen;
  const SimulatedData gs = simulate_with_penalty(g, gpen);
  const ModelFrame frame = make_frame(ModelSpec::mod2(), gs.data, gs.covariate, gpen);
  const std::size_t gl = gs.data.n_years() - 1;
  ParameterField field = gs.truth;
  const double dx = frame.covariate.at(gl) - frame.covariate.at(0);
  for (std::size_t i = 0; i < field.size(); ++i) {
    field.mu0[i] = 20.0;
    field.mu1[i] = 2.0 / dx;
    field.sigma0[i] = 0.0;
    field.xi[i] = 0.0;
  }
  const auto rr = risk_ratio(field, frame, {0.01, 0, gl});
  const double zp = -std::log(-std::log(0.99));
  const double hand = (1.0 - std::exp(-std::exp(-(zp - 2.0)))) / 0.01;
  o.check(std::abs(rr[0] - 7.16) <= 0.01, "Gumbel risk ratio " + fmt(rr[0], 8));
  o.check(std::abs(rr[0] - hand) <= 1e-9, "Gumbel risk ratio vs hand value " + fmt(hand, 10));
  o.detail << "Mod2 |rl_diff - dmu| <= " << fmt(worst, 3) << "; Mod1 max |rl_diff| " << fmt(worst_rl, 3)
           << ", max |RR-1| " << fmt(worst_rr, 3) << "; Gumbel RR " << fmt(rr[0], 6) << " (hand " << fmt(hand, 6)
           << ")";
}

// 6 ---------------------------------------------------------------------------
void interval_coverage(Outcome& o) {
  const int reps = 200;
  std::size_t covered = 0, total = 0;
  int failed = 0;
  for (int r = 0; r < reps; ++r) {
    TruthScenario s;
    s.nx = s.ny = 6;
    s.seed = 1000 + static_cast<std::uint64_t>(r);
    PenaltyMatrix pen;
    const SimulatedData sim = simulate_with_penalty(s, pen);
    const ModelFrame truth_frame = make_frame(ModelSpec::mod2(), sim.data, sim.covariate, pen);
    const ReturnSpec rs{0.01, 0, sim.data.n_years() - 1};
    const auto truth = return_level_difference(sim.truth, truth_frame, rs);
    total += truth.size();
    try {
      const FitResult fit = fit_smooth(sim.data, ModelSpec::mod2(), sim.covariate, pen);
      McOptions mc;
      mc.draws = 2000;
      mc.seed = static_cast<std::uint64_t>(r) + 1;
      const IntervalField iv = mc_intervals(fit, Functional::RlDiff, rs, mc);
      for (std::size_t i = 0; i < truth.size(); ++i) covered += (iv.lower[i] <= truth[i] && truth[i] <= iv.upper[i]);
    } catch (const std::exception&) {
      ++failed;
    }
  }
  const double coverage = static_cast<double>(covered) / static_cast<double>(total);
  o.check(coverage >= 0.88, "coverage " + fmt(coverage));
  const auto [lo, hi] = bonferroni_levels(0.05, 8);
  o.check(std::abs(lo - 0.003125) <= 1e-15 && std::abs(hi - 0.996875) <= 1e-15,
          "Bonferroni levels " + fmt(lo, 10) + ", " + fmt(hi, 10));
  o.detail << "coverage " << fmt(coverage) << " over " << total << " box-replicates (" << failed
           << " failed fits); Bonferroni levels " << lo << ", " << hi;
}

// 7 ---------------------------------------------------------------------------
void scoring_oracles(Outcome& o) {
  const double mu = 10.0, sigma = 2.0;
  double worst_crps = 0.0, worst_w = 0.0;
  int cases = 0;
  for (double xi : kShapes)
    for (double y : {mu - 6.0, mu - 1.5, mu, mu + 2.0, mu + 7.0, mu + 3.3}) {
      const GevParams f{mu, sigma, xi};
      const double closed = score_crp(f, y);
      const double quad = oracle::crps_quadrature(mu, sigma, xi, y);
      const double wcrp = score_wcrp(f, y, [](double) { return 1.0; });
      worst_crps = std::max(worst_crps, std::abs(closed - quad));
      worst_w = std::max(worst_w, std::abs(wcrp - closed));
      o.check(std::abs(closed - quad) <= 1e-6, "CRPS at xi " + fmt(xi) + " y " + fmt(y) + ": " + fmt(closed, 12) +
                                                   " vs quadrature " + fmt(quad, 12));
      o.check(std::abs(wcrp - closed) <= 5e-3, "unit-weight WCRP at xi " + fmt(xi) + " y " + fmt(y));
      ++cases;
    }

  struct Golden {
    GevParams f;
    double y, se, ds;
  };
  const Golden golden[] = {{{0.0, 1.0, 0.0}, 1.0, 0.17874659400465295, 0.60636520133027235},
                           {{20.0, 2.0, -0.2}, 24.0, 10.123134864024523, 3.7755673965911543},
                           {{10.0, 1.5, 0.2}, 9.0, 4.9805868923336501, 2.6800614867712109}};
  for (const auto& g : golden) {
    o.check(std::abs(score_se(g.f, g.y) - g.se) <= 1e-10 * g.se, "SE golden value " + fmt(g.se));
    o.check(std::abs(score_ds(g.f, g.y) - g.ds) <= 1e-10 * std::abs(g.ds), "DS golden value " + fmt(g.ds));
  }

  const GevParams truth{20.0, 1.5, -0.1};
  const GevParams shifted{20.5, 1.5, -0.1};
  SplitMix64 rng(31);
  ScoreSet st, ss;
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    const double y = gev_quantile(truth, rng.uniform_open());
    const ScoreSet a = score_all(truth, y), b = score_all(shifted, y);
    st.se += a.se, st.ds += a.ds, st.crp += a.crp, st.wcrp += a.wcrp;
    ss.se += b.se, ss.ds += b.ds, ss.crp += b.crp, ss.wcrp += b.wcrp;
  }
  o.check(st.se < ss.se && st.ds < ss.ds && st.crp < ss.crp && st.wcrp < ss.wcrp,
          "truth does not beat the shifted model on every rule");
  o.detail << cases << " CRPS cases, max |closed - quadrature| " << fmt(worst_crps, 3) << ", max |WCRP(w=1) - CRPS| "
           << fmt(worst_w, 3) << "; mean CRP truth " << fmt(st.crp / n) << " vs shifted " << fmt(ss.crp / n);
}

// 8 ---------------------------------------------------------------------------
void algorithm_one(Outcome& o) {
  const std::size_t J = 1'000'000;
  std::mt19937_64 gen(5);
  std::normal_distribution<double> normal(0.3, 1.0);
  double worst_z = 0.0;
  auto run_case = [&](const std::vector<double>& d, std::uint64_t seed) {
    std::vector<double> oriented = d;
    double sum = 0.0;
    for (double v : d) sum += v;
    if (sum < 0.0)
      for (double& v : oriented) v = -v;
    const double exact = oracle::sign_flip_p_exact(oriented);
    const std::vector<double> zero(d.size(), 0.0);
    const auto res = exchangeability_test(d, zero, J, seed);
    const double se = std::sqrt(exact * (1.0 - exact) / static_cast<double>(J));
    const double z = se > 0.0 ? std::abs(res.p_value - exact) / se : (res.p_value == exact ? 0.0 : INFINITY);
    worst_z = std::max(worst_z, z);
    o.check(z <= 3.0, "N=" + std::to_string(d.size()) + " p " + fmt(res.p_value, 6) + " vs exact " + fmt(exact, 6));
    return exact;
  };
  for (std::size_t n = 1; n <= 12; ++n) {
    std::vector<double> d(n);
    for (double& v : d) v = normal(gen);
    run_case(d, 100 + n);
  }
  const double p1 = run_case({0.7}, 1);
  const double p2 = run_case({0.5, 0.5}, 2);
  o.check(p1 == 0.5, "exact p for N=1 is " + fmt(p1));
  o.check(p2 == 0.25, "exact p for N=2 equal differences is " + fmt(p2));
  const std::vector<double> same{1.0, 2.0, 3.0};
  const auto deg = exchangeability_test(same, same, J, 3);
  o.check(deg.p_value == 1.0 && deg.degenerate && !deg.warning.empty(), "degenerate case");
  o.detail << "worst |p - exact| = " << fmt(worst_z, 3) << " binomial SE at J=1e6; degenerate p=" << deg.p_value
           << " with warning";
}

// 9 ---------------------------------------------------------------------------
void cv_ordering(Outcome& o) {
  const int reps = 10;
  int good = 0;
  const std::vector<ModelSpec> models{ModelSpec::mod1(), ModelSpec::mod2(), ModelSpec::mod3(), ModelSpec::mod4(),
                                      ModelSpec::mod5()};
  for (int r = 0; r < reps; ++r) {
    TruthScenario s;
    s.nx = s.ny = 10;
    s.seed = 300 + static_cast<std::uint64_t>(r);
    s.mu1 = {4.0, 6.0, 0.0, {{2.0, 0.0, 1.0, 0.3}}};
    PenaltyMatrix pen;
    const SimulatedData sim = simulate_with_penalty(s, pen);
    const FoldAssignment folds = make_folds(sim.data, 5, static_cast<std::uint64_t>(r) + 1);
    std::vector<std::pair<double, std::string>> ranked;
    bool ok = true;
    for (const auto& m : models) {
      const ScoreReport rep = cross_validate(sim.data, m, sim.covariate, pen, folds);
      ok = ok && rep.ok;
      ranked.emplace_back(rep.mean.crp, m.label);
    }
    std::sort(ranked.begin(), ranked.end());
    const std::set<std::string> top{ranked[0].second, ranked[1].second};
    const bool pass = ok && top == std::set<std::string>{"mod2", "mod4"} && ranked[2].second == "mod5" &&
                      ranked[4].second == "mod1";
    good += pass;
    o.detail << "rep " << r << ": ";
    for (const auto& [crp, label] : ranked) o.detail << label << ' ';
    o.detail << (pass ? "ok" : "MISS") << "; ";
  }
  o.check(good >= 9, std::to_string(good) + "/10 replicates in the expected order");
  o.detail << good << "/" << reps << " replicates ordered {mod2, mod4} < mod5 < mod3 < mod1";
}

// 10 --------------------------------------------------------------------------
void diagnostics_calibration(Outcome& o) {
  TruthScenario s;
  s.nx = s.ny = 10;
  s.n_years = 100;
  s.seed = 41;
  PenaltyMatrix pen;
  const SimulatedData sim = simulate_with_penalty(s, pen);
  const FitResult fit = fit_smooth(sim.data, ModelSpec::mod2(), sim.covariate, pen);
  const auto pit = pit_values(fit.field, fit.frame, sim.data);
  const double ks = oracle::ks_statistic(pit);
  const double ks_p = oracle::ks_p_value(ks, pit.size());
  o.check(ks_p > 0.01, "PIT KS p-value " + fmt(ks_p));
  const GumbelResiduals res = gumbel_residuals(fit.field, fit.frame, sim.data);
  const auto finite = res.finite();
  const PlotPoints pts = pp_qq_points(finite);
  const double dev = max_pp_deviation(pts);
  o.check(finite.size() == 10000, "expected 10000 residuals, got " + std::to_string(finite.size()));
  o.check(dev < 0.03, "pp deviation " + fmt(dev));
  const std::map<double, double> expected{{5.0, 0.9933}, {6.0, 0.9975}, {7.0, 0.9991}, {8.0, 0.9997}};
  for (const auto& g : gumbel_reference_quantiles()) {
    const double rounded = std::round(g.probability * 1e4) / 1e4;
    o.check(expected.count(g.z) && std::abs(rounded - expected.at(g.z)) < 1e-12,
            "Gumbel reference at " + fmt(g.z) + " is " + fmt(g.probability, 8));
  }
  o.detail << "m=" << finite.size() << ", PIT KS D=" << fmt(ks) << " p=" << fmt(ks_p) << ", max pp deviation "
           << fmt(dev) << ", reference quantiles reproduced";
}

// 11 --------------------------------------------------------------------------
std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) {
      std::ifstream in(e.path(), std::ios::binary);
      std::ostringstream s;
      s << in.rdbuf();
      files[fs::relative(e.path(), root).string()] = s.str();
    }
  return files;
}

void pipeline_determinism(Outcome& o) {
  const fs::path source = SMOOTHGEV_SOURCE_DIR;
  const std::string config = (source / "data/example/config.ini").string();
  const std::string scenario = (source / "data/example/scenario.json").string();
  const fs::path base = fs::current_path() / "acceptance_pipeline";
  fs::remove_all(base);
  std::vector<std::map<std::string, std::string>> trees;
  for (const char* threads : {"1", "3", "1"}) {
    const fs::path out = base / ("threads" + std::string(threads) + "_" + std::to_string(trees.size()));
    for (const char* cmd : {"simulate", "fit", "infer", "cv", "test"}) {
      std::ostringstream log, err;
      const int code = cli::run({cmd, "--config", config, "--scenario", scenario, "--out", out.string(), "--threads",
                                 threads},
                                log, err);
      o.check(code == 0, std::string(cmd) + " exited with " + std::to_string(code) + ": " + err.str());
    }
    trees.push_back(read_tree(out));
  }
  o.check(!trees[0].empty(), "pipeline produced no files");
  for (std::size_t k = 1; k < trees.size(); ++k) {
    o.check(trees[k].size() == trees[0].size(), "different file sets between runs");
    for (const auto& [name, bytes] : trees[0]) {
      const auto it = trees[k].find(name);
      o.check(it != trees[k].end() && it->second == bytes, name + " differs between runs");
    }
  }
  std::size_t bytes = 0;
  for (const auto& [name, b] : trees[0]) bytes += b.size();
  o.detail << trees[0].size() << " files (" << bytes << " bytes) identical across 3 runs with 1, 3 and 1 threads";
  fs::remove_all(base);
}

struct Criterion {
  int id;
  const char* name;
  std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "GEV math oracle suite", gev_math},
      {2, "penalty correctness", penalty_checks},
      {3, "optimizer limits", optimizer_limits},
      {4, "recovery at desk scale", recovery},
      {5, "inference identities", inference_identities},
      {6, "credible-interval coverage", interval_coverage},
      {7, "scoring oracles", scoring_oracles},
      {8, "randomization test exactness", algorithm_one},
      {9, "cross-validation ordering", cv_ordering},
      {10, "diagnostics calibration", diagnostics_calibration},
      {11, "end-to-end determinism", pipeline_determinism},
  };
  std::set<int> wanted;
  for (int a = 1; a < argc; ++a) wanted.insert(std::atoi(argv[a]));

  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += o.pass ? 0 : 1;
    std::printf("%s [%d] %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
