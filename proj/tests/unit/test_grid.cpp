#include <doctest.h>

#include <cmath>
#include <sstream>

#include "smoothgev/errors.hpp"
#include "smoothgev/grid.hpp"

using namespace smoothgev;

namespace {

const char* kGrid =
    "box_id,lon,lat,elevation_km,region\n"
    "1,0.0,0.0,0.1,A\n"
    "2,0.5,0.0,0.2,A\n"
    "3,0.0,0.5,0.3,B\n"
    "4,0.5,0.5,0.4,B\n";

const char* kTxx =
    "box_id,year,txx_celsius\n"
    "1,2000,30.1\n1,2001,31.2\n1,2002,29.8\n"
    "2,2000,28.4\n2,2001,\n2,2002,30.0\n"
    "3,2000,27.0\n3,2001,27.5\n3,2002,28.1\n"
    "4,2000,26.2\n4,2001,26.9\n4,2002,27.7\n";

GriddedDataset example() {
  std::istringstream txx(kTxx), grid(kGrid);
  return ingest_dataset(txx, grid);
}

}  // namespace

TEST_SUITE("grid") {
  TEST_CASE("well-formed 4-box, 3-year input") {
    const GriddedDataset d = example();
    CHECK(d.n_boxes() == 4);
    CHECK(d.n_years() == 3);
    CHECK(d.missing(1, 1));
    CHECK(d.observed_count() == 11);
    CHECK(d.grid.regions() == std::vector<std::string>{"A", "B"});
    CHECK(d.region("B").n_boxes() == 2);
    CHECK_THROWS_AS(d.region("C"), ValidationError);
  }

  TEST_CASE("duplicate coordinates and ids are rejected") {
    CHECK_THROWS_AS(Grid({{1, 0.0, 0.0, 0.0, "A"}, {2, 0.0, 0.0, 0.0, "A"}}), ValidationError);
    CHECK_THROWS_AS(Grid({{1, 0.0, 0.0, 0.0, "A"}, {1, 0.5, 0.0, 0.0, "A"}}), ValidationError);
  }

  TEST_CASE("duplicate rows and unknown boxes are rejected") {
    std::istringstream dup("box_id,year,txx_celsius\n1,2000,30\n1,2000,31\n"), g1(kGrid);
    CHECK_THROWS_AS(ingest_dataset(dup, g1), ValidationError);
    std::istringstream unknown("box_id,year,txx_celsius\n9,2000,30\n"), g2(kGrid);
    CHECK_THROWS_AS(ingest_dataset(unknown, g2), ValidationError);
  }

  TEST_CASE("boxes without observations are dropped with a warning") {
    std::istringstream txx("box_id,year,txx_celsius\n1,2000,30\n2,2000,\n3,2000,29\n4,2000,28\n"), grid(kGrid);
    IngestReport rep;
    const auto d = ingest_dataset(txx, grid, &rep);
    CHECK(d.n_boxes() == 3);
    CHECK(rep.dropped_boxes == std::vector<std::int64_t>{2});
    CHECK_FALSE(rep.warnings.empty());
  }

  TEST_CASE("written tables ingest back unchanged") {
    const GriddedDataset d = example();
    std::ostringstream txx, grid;
    write_txx_csv(txx, d);
    write_grid_csv(grid, d.grid);
    std::istringstream txx_in(txx.str()), grid_in(grid.str());
    const GriddedDataset back = ingest_dataset(txx_in, grid_in);
    CHECK(back.years == d.years);
    for (std::size_t i = 0; i < d.n_boxes(); ++i) {
      CHECK(back.grid.box(i).id == d.grid.box(i).id);
      CHECK(back.grid.box(i).elevation_km == d.grid.box(i).elevation_km);
      for (std::size_t t = 0; t < d.n_years(); ++t)
        if (d.missing(i, t))
          CHECK(back.missing(i, t));
        else
          CHECK(back.txx(i, t) == d.txx(i, t));
    }
  }

  TEST_CASE("neighbourhood and penalty") {
    const GriddedDataset d = example();
    const Neighborhood nb = build_neighborhood(d.grid);
    for (const auto& a : nb.adjacency) CHECK(a.size() == 2);
    const PenaltyMatrix pen = build_penalty(nb);
    CHECK(pen.n_components == 1);
    CHECK(pen.rank() == 3);
    CHECK(pen.edges.size() == 4);
    // eigenvalues of the 4-cycle Laplacian are 0, 2, 2, 4
    CHECK(pen.log_pdet == doctest::Approx(std::log(16.0)));
    Eigen::VectorXd v(4);
    v << 1.0, 2.0, 4.0, 8.0;
    CHECK(pen.quadratic_form(v) == doctest::Approx(v.dot(pen.S * v)));
    CHECK((pen.apply(v) - pen.S * v).norm() < 1e-12);
  }

  TEST_CASE("disconnected boxes form separate components") {
    const Grid g({{1, 0.0, 0.0, 0.0, "A"}, {2, 0.5, 0.0, 0.0, "A"}, {3, 2.0, 2.0, 0.0, "A"}}, 0.5);
    const Neighborhood nb = build_neighborhood(g);
    CHECK(nb.components() == std::vector<int>{0, 0, 1});
    CHECK(build_penalty(nb).n_components == 2);
  }

  TEST_CASE("annual maximum missing-day rule") {
    std::vector<double> days(365, 20.0);
    days[100] = 35.0;
    CHECK(annual_maximum(days, 365).value() == 35.0);
    for (int k = 0; k < 10; ++k) days[k] = NAN;
    CHECK(annual_maximum(days, 365).has_value());
    days[10] = NAN;
    CHECK_FALSE(annual_maximum(days, 365).has_value());
    CHECK(days_in_year(2000) == 366);
    CHECK(days_in_year(1900) == 365);
  }

  TEST_CASE("daily series to TXx") {
    std::istringstream grid(kGrid);
    const Grid g = read_grid_csv(grid);
    std::ostringstream daily;
    daily << "box_id,date,tmax_celsius\n";
    for (int box = 1; box <= 4; ++box)
      for (int day = 1; day <= 31; ++day) daily << box << ",2001-01-" << (day < 10 ? "0" : "") << day << ',' << (box + day * 0.1) << '\n';
    for (int month = 1; month <= 12; ++month)
      for (int day = 1; day <= 28; ++day)
        daily << "1,2002-" << (month < 10 ? "0" : "") << month << '-' << (day < 10 ? "0" : "") << day << ','
              << (month == 7 && day == 14 ? 33.0 : 20.0) << '\n';
    std::istringstream in(daily.str());
    const auto series = read_daily_csv(in);
    const GriddedDataset d = extract_txx(g, series);
    CHECK(d.years == std::vector<int>{2001, 2002});
    // 2001 has January only; 2002 lacks days 29-31 of each month (22 days in total)
    CHECK(d.observed_count() == 0);
    std::ostringstream full;
    full << "box_id,date,tmax_celsius\n";
    for (int month = 1; month <= 12; ++month)
      for (int day = 1; day <= 31; ++day) {
        if (day > 28 && (month == 2 || ((month == 4 || month == 6 || month == 9 || month == 11) && day == 31))) continue;
        full << "2,2003-" << (month < 10 ? "0" : "") << month << '-' << (day < 10 ? "0" : "") << day << ','
             << (month == 8 && day == 2 ? 34.5 : 21.0) << '\n';
      }
    std::istringstream in2(full.str());
    const GriddedDataset d2 = extract_txx(g, read_daily_csv(in2));
    CHECK(d2.txx(1, 0) == 34.5);
    CHECK(d2.observed_count() == 1);
  }
}
