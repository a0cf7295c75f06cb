#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "smoothgev/grid.hpp"
#include "smoothgev/model.hpp"

namespace smoothgev {

/// One low-frequency sinusoidal mode  amplitude * sin(2 pi (kx u + ky v) + phase).
struct SinusoidMode {
  double amplitude = 0.0;
  double kx = 0.0;
  double ky = 0.0;
  double phase = 0.0;
};

/**
 * Band-limited field on the unit square of lattice coordinates
 * u = ix / (nx - 1), v = iy / (ny - 1):
 *
 *   constant + slope_x (u - 1/2) + slope_y (v - 1/2) + sum of modes
 */
struct FieldGenerator {
  double constant = 0.0;
  double slope_x = 0.0;
  double slope_y = 0.0;
  std::vector<SinusoidMode> modes;

  double operator()(double u, double v) const;
};

struct TruthScenario {
  int nx = 10;
  int ny = 10;
  double lon0 = 0.0;
  double lat0 = 0.0;
  double spacing = 0.25;
  int first_year = 1950;
  int n_years = 69;
  /// Empty means the built-in smooth CO2 curve rising from 311 to 407 ppm.
  std::vector<double> co2_ppm;
  ModelSpec spec = ModelSpec::mod2();
  FieldGenerator mu0{20.0, 1.0, -1.0, {}};
  FieldGenerator mu1{2.0, 0.5, 0.5, {}};
  FieldGenerator sigma0{0.0, 0.1, 0.0, {}};  ///< log scale
  FieldGenerator sigma1{0.0, 0.0, 0.0, {}};
  FieldGenerator xi{-0.1, 0.0, 0.0, {}};
  double mu1_homogeneous = 2.0;
  double beta = 0.0;
  FieldGenerator elevation_km{0.0, 0.0, 0.0, {}};
  /// Splits the grid into this many vertical strips labelled R1, R2, ...
  int n_regions = 1;
  /// Probability that a box-year is missing.
  double missing_fraction = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SimulatedData {
  GriddedDataset data;
  ParameterField truth;
  CovariateSeries covariate;
};

/// The built-in CO2 curve, 311 * 1.31^(((t - 1) / (n - 1))^1.5) ppm for t = 1..n.
std::vector<double> default_co2_curve(int n_years);

/// Box layout, truth field and covariate of a scenario (no random numbers).
Grid scenario_grid(const TruthScenario& s);
ParameterField scenario_truth(const TruthScenario& s);
CovariateSeries scenario_covariate(const TruthScenario& s);

/// Draws every box-year by inverse-CDF sampling from its own RNG substream.
SimulatedData simulate(const TruthScenario& s, unsigned threads = 1);
/// Draws new observations for the given frame and field (same substream scheme).
GriddedDataset simulate_from(const Grid& grid, const std::vector<int>& years, const ParameterField& field,
                             const ModelFrame& frame, std::uint64_t seed, double missing_fraction = 0.0);

TruthScenario read_scenario_json(std::istream& in, const std::string& source = "<scenario>");
TruthScenario read_scenario_json(const std::string& path);
void write_scenario_json(std::ostream& out, const TruthScenario& s);

}  // namespace smoothgev
