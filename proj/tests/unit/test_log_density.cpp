#include <doctest.h>

#include <cmath>
#include <vector>

#include "smoothgev/gev.hpp"
#include "smoothgev/log_density.hpp"

using namespace smoothgev;

TEST_SUITE("log_density") {
  TEST_CASE("log1p ratio is smooth through zero") {
    for (double u : {-0.5, -0.09, -1e-3, -1e-9, 0.0, 1e-9, 1e-3, 0.09, 0.5, 3.0}) {
      const auto r = log1p_ratio(u);
      if (u != 0.0) {
        CHECK(r[0] == doctest::Approx(std::log1p(u) / u).epsilon(1e-13));
        CHECK(r[1] == doctest::Approx((u / (1 + u) - std::log1p(u)) / (u * u)).epsilon(1e-6));
      } else {
        CHECK(r[0] == 1.0);
        CHECK(r[1] == doctest::Approx(-0.5));
        CHECK(r[2] == doctest::Approx(2.0 / 3.0));
      }
    }
  }

  TEST_CASE("matches the distribution log density") {
    for (double xi : {-0.3, -1e-8, 0.0, 1e-8, 0.2})
      for (double y : {17.0, 19.5, 21.0, 24.0}) {
        const double expected = gev_log_pdf({20.0, std::exp(0.3), xi}, y);
        CHECK(smooth_log_density(y, 20.0, 0.3, xi) == doctest::Approx(expected).epsilon(1e-7));
      }
  }

  TEST_CASE("jet derivatives match finite differences") {
    const double y = 21.3;
    for (double xi : {-0.25, 0.0, 0.15}) {
      const double p[3] = {20.0, 0.2, xi};
      const auto jet = smooth_log_density_jet(y, p[0], p[1], p[2]);
      REQUIRE(jet.in_support);
      for (int a = 0; a < 3; ++a) {
        double hp[3] = {p[0], p[1], p[2]}, hm[3] = {p[0], p[1], p[2]};
        const double h = 1e-6;
        hp[a] += h;
        hm[a] -= h;
        const double fd = (smooth_log_density(y, hp[0], hp[1], hp[2]) - smooth_log_density(y, hm[0], hm[1], hm[2])) / (2 * h);
        CHECK(jet.grad[a] == doctest::Approx(fd).epsilon(1e-6));
        const auto jp = smooth_log_density_jet(y, hp[0], hp[1], hp[2]);
        const auto jm = smooth_log_density_jet(y, hm[0], hm[1], hm[2]);
        for (int b = 0; b < 3; ++b)
          CHECK(jet.hess[a * 3 + b] == doctest::Approx((jp.grad[b] - jm.grad[b]) / (2 * h)).epsilon(1e-5));
      }
    }
  }

  TEST_CASE("outside the support") {
    const auto jet = smooth_log_density_jet(10.0, 20.0, 0.0, 0.5);
    CHECK_FALSE(jet.in_support);
    CHECK(std::isinf(jet.value));
  }

  TEST_CASE("box log-likelihood gradient") {
    BoxDesign d;
    d.mu0 = 0;
    d.mu1 = 1;
    d.s0 = 2;
    d.s1 = 3;
    d.xi = 4;
    d.size = 5;
    const std::vector<double> coef{20.0, 1.5, 0.1, 0.3, -0.1};
    const std::vector<double> y{20.2, 21.7, 19.9, 22.4, 20.8};
    const std::vector<double> x{0.1, 0.15, 0.2, 0.3, 0.35};
    LocalVector g;
    LocalMatrix H;
    const double f = box_loglik(d, coef, y, x, &g, &H);
    REQUIRE(std::isfinite(f));
    for (int k = 0; k < 5; ++k) {
      auto cp = coef, cm = coef;
      cp[k] += 1e-6;
      cm[k] -= 1e-6;
      CHECK(g[k] == doctest::Approx((box_loglik(d, cp, y, x) - box_loglik(d, cm, y, x)) / 2e-6).epsilon(1e-5));
    }
    CHECK(H.isApprox(H.transpose()));
  }
}
