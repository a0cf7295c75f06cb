#include "smoothgev/log_density.hpp"

#include <cmath>
#include <limits>

namespace smoothgev {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Second-order forward-mode value in three variables (mu, eta, xi).
struct Jet {
  double v = 0.0;
  std::array<double, 3> g{};
  std::array<double, 9> h{};

  static Jet constant(double c) {
    Jet j;
    j.v = c;
    return j;
  }
  static Jet variable(double value, int k) {
    Jet j;
    j.v = value;
    j.g[k] = 1.0;
    return j;
  }
};

Jet operator+(const Jet& a, const Jet& b) {
  Jet r;
  r.v = a.v + b.v;
  for (int i = 0; i < 3; ++i) r.g[i] = a.g[i] + b.g[i];
  for (int i = 0; i < 9; ++i) r.h[i] = a.h[i] + b.h[i];
  return r;
}

Jet operator*(double s, const Jet& a) {
  Jet r;
  r.v = s * a.v;
  for (int i = 0; i < 3; ++i) r.g[i] = s * a.g[i];
  for (int i = 0; i < 9; ++i) r.h[i] = s * a.h[i];
  return r;
}

Jet operator-(const Jet& a, const Jet& b) { return a + (-1.0) * b; }

Jet operator*(const Jet& a, const Jet& b) {
  Jet r;
  r.v = a.v * b.v;
  for (int i = 0; i < 3; ++i) r.g[i] = a.v * b.g[i] + b.v * a.g[i];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r.h[3 * i + j] = a.v * b.h[3 * i + j] + b.v * a.h[3 * i + j] + a.g[i] * b.g[j] +
                       b.g[i] * a.g[j];
  return r;
}

// f(a) given f, f', f'' at a.v
Jet compose(const Jet& a, double f0, double f1, double f2) {
  Jet r;
  r.v = f0;
  for (int i = 0; i < 3; ++i) r.g[i] = f1 * a.g[i];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.h[3 * i + j] = f1 * a.h[3 * i + j] + f2 * a.g[i] * a.g[j];
  return r;
}

Jet exp(const Jet& a) {
  const double e = std::exp(a.v);
  return compose(a, e, e, e);
}

}  // namespace

std::array<double, 3> log1p_ratio(double u) {
  if (std::abs(u) < 0.1) {
    // derivatives of sum_k (-u)^k / (k+1), termwise
    double f1 = 0.0, f2 = 0.0;
    double pk = 1.0;  // u^k
    for (int k = 0; k < 40; ++k) {
      const double sign = (k % 2 == 0) ? 1.0 : -1.0;
      f1 -= sign * (k + 1) * pk / (k + 2);
      f2 += sign * (k + 2) * (k + 1) * pk / (k + 3);
      pk *= u;
      if (std::abs(pk) * (k + 3) * (k + 3) < 1e-17) break;
    }
    return {u == 0.0 ? 1.0 : std::log1p(u) / u, f1, f2};
  }
  const double l = std::log1p(u);
  const double op = 1.0 + u;
  const double f0 = l / u;
  const double f1 = (u / op - l) / (u * u);
  const double f2 = -1.0 / (op * op * u) - 2.0 / (op * u * u) + 2.0 * l / (u * u * u);
  return {f0, f1, f2};
}

namespace {

double log1p_ratio_value(double u) { return u == 0.0 ? 1.0 : std::log1p(u) / u; }

}  // namespace

double smooth_log_density(double y, double mu, double eta, double xi) {
  const double z = (y - mu) * std::exp(-eta);
  const double u = xi * z;
  if (!(1.0 + u > 0.0)) return kNegInf;
  const double a = z * log1p_ratio_value(u);
  return -eta - (1.0 + xi) * a - std::exp(-a);
}

LogDensityJet smooth_log_density_jet(double y, double mu, double eta, double xi) {
  LogDensityJet out;
  const Jet jmu = Jet::variable(mu, 0);
  const Jet jeta = Jet::variable(eta, 1);
  const Jet jxi = Jet::variable(xi, 2);

  const Jet z = (Jet::constant(y) - jmu) * exp((-1.0) * jeta);
  const Jet u = jxi * z;
  if (!(1.0 + u.v > 0.0)) {
    out.value = kNegInf;
    out.in_support = false;
    return out;
  }
  const auto lr = log1p_ratio(u.v);
  const Jet a = z * compose(u, lr[0], lr[1], lr[2]);
  const Jet l = (-1.0) * jeta - (Jet::constant(1.0) + jxi) * a - exp((-1.0) * a);
  out.value = l.v;
  out.grad = l.g;
  out.hess = l.h;
  return out;
}

double box_loglik(const BoxDesign& d, std::span<const double> c, std::span<const double> y,
                  std::span<const double> x, LocalVector* grad, LocalMatrix* hess) {
  const bool want = grad != nullptr || hess != nullptr;
  LocalVector g;
  LocalMatrix h;
  if (want) {
    g.setZero(d.size);
    h.setZero(d.size, d.size);
  }
  const double mu_base = c[d.mu0] + (d.beta >= 0 ? c[d.beta] * d.elevation : 0.0);
  const double xi = c[d.xi];
  double total = 0.0;

  // Each predictor is a sparse linear form in the local coefficients.
  struct Term {
    int slot;
    double coef;
  };
  std::array<std::array<Term, 3>, 3> terms{};
  std::array<int, 3> nterms{};

  for (std::size_t t = 0; t < y.size(); ++t) {
    const double xt = x[t];
    const double mu = mu_base + (d.mu1 >= 0 ? c[d.mu1] * xt : 0.0);
    const double eta = c[d.s0] + (d.s1 >= 0 ? c[d.s1] * xt : 0.0);
    if (!want) {
      const double v = smooth_log_density(y[t], mu, eta, xi);
      if (v == kNegInf) return kNegInf;
      total += v;
      continue;
    }
    const LogDensityJet jet = smooth_log_density_jet(y[t], mu, eta, xi);
    if (!jet.in_support) return kNegInf;
    total += jet.value;

    nterms = {0, 0, 0};
    terms[0][nterms[0]++] = {d.mu0, 1.0};
    if (d.mu1 >= 0) terms[0][nterms[0]++] = {d.mu1, xt};
    if (d.beta >= 0) terms[0][nterms[0]++] = {d.beta, d.elevation};
    terms[1][nterms[1]++] = {d.s0, 1.0};
    if (d.s1 >= 0) terms[1][nterms[1]++] = {d.s1, xt};
    terms[2][nterms[2]++] = {d.xi, 1.0};

    for (int p = 0; p < 3; ++p) {
      for (int a = 0; a < nterms[p]; ++a) {
        g[terms[p][a].slot] += terms[p][a].coef * jet.grad[p];
        for (int q = 0; q < 3; ++q) {
          const double hpq = jet.hess[3 * p + q];
          for (int b = 0; b < nterms[q]; ++b)
            h(terms[p][a].slot, terms[q][b].slot) += terms[p][a].coef * terms[q][b].coef * hpq;
        }
      }
    }
  }
  if (grad) *grad = g;
  if (hess) *hess = h;
  return total;
}

}  // namespace smoothgev
