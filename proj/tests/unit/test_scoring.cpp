#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "smoothgev/errors.hpp"
#include "smoothgev/scoring.hpp"
#include "smoothgev/synthetic.hpp"

using namespace smoothgev;

TEST_SUITE("scoring") {
  TEST_CASE("squared error and Dawid-Sebastiani at the Gumbel mean") {
    const GevParams g{0.0, 1.0, 0.0};
    const double euler = std::numbers::egamma;
    CHECK(score_se(g, euler) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(score_se(g, euler + 2.0) == doctest::Approx(4.0));
    const double var = std::numbers::pi * std::numbers::pi / 6.0;
    CHECK(score_ds(g, euler) == doctest::Approx(std::log(var)));
  }

  TEST_CASE("closed-form CRPS agrees with quadrature") {
    for (double xi : {-0.3, -0.05, 0.0, 0.1, 0.4})
      for (double y : {-1.5, 0.2, 2.5}) {
        const GevParams g{0.5, 1.3, xi};
        CHECK(score_crp(g, y) == doctest::Approx(oracle::crps_quadrature(0.5, 1.3, xi, y)).epsilon(1e-8));
      }
  }

  TEST_CASE("moment-based scores reject heavy tails") {
    CHECK_THROWS_AS(score_se(GevParams{0.0, 1.0, 1.0}, 0.0), ScoreError);
    CHECK_THROWS_AS(score_crp(GevParams{0.0, 1.0, 1.2}, 0.0), ScoreError);
    CHECK_THROWS_AS(score_ds(GevParams{0.0, 1.0, 0.5}, 0.0), ScoreError);
    CHECK_NOTHROW(score_ds(GevParams{0.0, 1.0, 0.45}, 0.0));
  }

  TEST_CASE("weighted CRPS is non-negative and penalises upper-tail misses") {
    const GevParams g{0.0, 1.0, -0.1};
    CHECK(score_wcrp(g, 0.0) >= 0.0);
    CHECK(score_wcrp(g, 4.0) > score_wcrp(g, -4.0));
  }

  TEST_CASE("folds are balanced and reproducible") {
    TruthScenario s;
    s.nx = s.ny = 4;
    s.n_years = 23;
    s.missing_fraction = 0.1;
    const SimulatedData sim = simulate(s);
    const FoldAssignment a = make_folds(sim.data, 5, 9);
    CHECK(a.size() == sim.data.observed_count());
    std::size_t lo = a.size(), hi = 0;
    for (int f = 0; f < 5; ++f) {
      lo = std::min(lo, a.fold_size(f));
      hi = std::max(hi, a.fold_size(f));
    }
    CHECK(hi - lo <= 1);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK_FALSE(sim.data.missing(a.box[i], a.t[i]));
    const FoldAssignment b = make_folds(sim.data, 5, 9);
    CHECK(a.fold == b.fold);
    const FoldAssignment c = make_folds(sim.data, 5, 10);
    CHECK(a.fold != c.fold);
    CHECK_THROWS_AS(make_folds(sim.data, 1, 9), ValidationError);
  }

  TEST_CASE("exchangeability test") {
    std::vector<double> a{1.2, 0.8, 1.5, 1.1, 0.9, 1.3, 1.0, 1.4, 0.7, 1.6, 1.25, 0.95};
    std::vector<double> b{1.0, 0.9, 1.1, 1.0, 1.0, 1.0, 0.8, 1.1, 0.9, 1.2, 1.0, 1.0};
    const auto r1 = exchangeability_test(a, b, 20000, 3, 1);
    const auto r3 = exchangeability_test(a, b, 20000, 3, 3);
    CHECK(r1.p_value == r3.p_value);
    CHECK(r1.t_obs >= 0.0);
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    CHECK(r1.p_value == doctest::Approx(oracle::sign_flip_p_exact(d)).epsilon(0.02));

    const auto swapped = exchangeability_test(b, a, 20000, 3, 1);
    CHECK(swapped.swapped);
    CHECK(swapped.t_obs == doctest::Approx(r1.t_obs));

    const auto same = exchangeability_test(a, a, 1000, 3, 1);
    CHECK(same.degenerate);
    CHECK(same.p_value == 1.0);
    CHECK_FALSE(same.warning.empty());

    std::vector<double> shorter(a.begin(), a.end() - 1);
    CHECK_THROWS_AS(exchangeability_test(a, shorter), ValidationError);
  }

  TEST_CASE("score CSV round trip") {
    ScoreReport r1;
    r1.model = "mod2";
    r1.records.push_back({"mod2", 0, 11, 1990, 0.5, 1.25, 0.375, 0.125});
    r1.records.push_back({"mod2", 1, 12, 1991, 1.5, 2.25, 0.625, 0.25});
    ScoreReport r2;
    r2.model = "mod1";
    r2.records.push_back({"mod1", 0, 11, 1990, 2.0, 3.0, 0.75, 0.5});
    const std::vector<ScoreReport> reports{r1, r2};
    std::stringstream io;
    write_scores_csv(io, reports);
    const auto back = read_scores_csv(io);
    REQUIRE(back.size() == 2);
    CHECK(back[0].model == "mod2");
    CHECK(back[1].model == "mod1");
    REQUIRE(back[0].records.size() == 2);
    CHECK(back[0].records[1].box_id == 12);
    CHECK(back[0].records[1].year == 1991);
    CHECK(back[0].records[1].fold == 1);
    CHECK(back[0].mean.se == doctest::Approx(1.0));
    CHECK(back[0].mean.crp == doctest::Approx(0.5));

    std::istringstream bad("model,fold\nmod1,0\n");
    CHECK_THROWS_AS(read_scores_csv(bad), ValidationError);
  }
}
