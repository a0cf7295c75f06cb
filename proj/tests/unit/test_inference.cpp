#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "smoothgev/errors.hpp"
#include "smoothgev/inference.hpp"
#include "smoothgev/synthetic.hpp"

using namespace smoothgev;

TEST_SUITE("inference") {
  TEST_CASE("empirical quantile matches R type 7") {
    std::vector<double> v{4.0, 1.0, 3.0, 2.0, 5.0};
    CHECK(empirical_quantile(v, 0.0) == 1.0);
    CHECK(empirical_quantile(v, 1.0) == 5.0);
    CHECK(empirical_quantile(v, 0.5) == 3.0);
    CHECK(empirical_quantile(v, 0.1) == doctest::Approx(1.4));
    CHECK(empirical_quantile(v, 0.975) == doctest::Approx(4.9));
  }

  TEST_CASE("Bonferroni levels") {
    const auto [lo, hi] = bonferroni_levels(0.05, 8);
    CHECK(lo == doctest::Approx(0.003125));
    CHECK(hi == doctest::Approx(0.996875));
    CHECK_THROWS(bonferroni_levels(0.05, 0));
  }

  TEST_CASE("return spec validation") {
    CHECK_THROWS_AS((ReturnSpec{0.0, 0, 1}.validate(5)), DomainError);
    CHECK_THROWS_AS((ReturnSpec{0.01, 0, 5}.validate(5)), ValidationError);
    CHECK_NOTHROW((ReturnSpec{0.01, 4, 0}.validate(5)));
    CHECK(functional_from_name("risk_ratio") == Functional::RiskRatio);
    CHECK_THROWS_AS(functional_from_name("odds"), ValidationError);
  }

  TEST_CASE("plug-in functionals and intervals") {
    TruthScenario s;
    s.nx = s.ny = 4;
    s.n_regions = 2;
    const SimulatedData sim = simulate(s);
    const PenaltyMatrix pen = build_penalty(build_neighborhood(sim.data.grid));
    const FitResult fit = fit_smooth(sim.data, ModelSpec::mod2(), sim.covariate, pen);
    const ReturnSpec rs{0.01, 0, sim.data.n_years() - 1};
    const auto rl = return_level_difference(fit.field, fit.frame, rs);
    const auto rr = risk_ratio(fit.field, fit.frame, rs);
    for (std::size_t i = 0; i < rl.size(); ++i)
      if (rl[i] > 0.0) CHECK(rr[i] > 1.0);
    const double y = return_level(fit.field, fit.frame, 0, 0, 0.01);
    CHECK(gev_cdf(gev_params_at(fit.field, fit.frame, 0, 0), y) == doctest::Approx(0.99));

    McOptions mc;
    mc.draws = 500;
    const IntervalField iv = mc_intervals(fit, Functional::RlDiff, rs, mc);
    for (std::size_t i = 0; i < iv.estimate.size(); ++i) CHECK(iv.lower[i] <= iv.upper[i]);
    mc.threads = 3;
    const IntervalField iv3 = mc_intervals(fit, Functional::RlDiff, rs, mc);
    CHECK(iv3.lower == iv.lower);
    CHECK(iv3.upper == iv.upper);
    mc.draws = 50;
    CHECK_THROWS_AS(mc_intervals(fit, Functional::RlDiff, rs, mc), ValidationError);

    mc.draws = 500;
    const RegionalIntervals reg = regional_mc_intervals(fit, Functional::LocChange, rs, fit.regions, 2, mc);
    CHECK(reg.regions.size() == 2);
    CHECK(reg.lower_level == doctest::Approx(0.0125));
    for (const auto& r : reg.regions) {
      CHECK(r.n_boxes == 8);
      CHECK(r.lower <= r.estimate);
      CHECK(r.estimate <= r.upper);
    }

    std::ostringstream csv;
    write_interval_csv(csv, iv, fit.box_ids);
    CHECK(csv.str().rfind("box_id,estimate,lower,upper\n", 0) == 0);
  }

  TEST_CASE("averaged density integrates to about one") {
    TruthScenario s;
    s.nx = s.ny = 3;
    const SimulatedData sim = simulate(s);
    const PenaltyMatrix pen = build_penalty(build_neighborhood(sim.data.grid));
    const ModelFrame frame = make_frame(ModelSpec::mod2(), sim.data, sim.covariate, pen);
    const std::vector<std::size_t> boxes{0, 1, 2, 3};
    std::vector<double> grid;
    for (double y = 10.0; y <= 35.0; y += 0.01) grid.push_back(y);
    const auto dens = averaged_density(sim.truth, frame, boxes, 0, grid);
    double mass = 0.0;
    for (double d : dens) mass += d * 0.01;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
    const GevParams avg = averaged_params(sim.truth, frame, boxes, 0);
    double mu = 0.0;
    for (std::size_t i : boxes) mu += gev_params_at(sim.truth, frame, i, 0).mu / 4.0;
    CHECK(avg.mu == doctest::Approx(mu));
  }
}
