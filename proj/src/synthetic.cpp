#include "smoothgev/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "smoothgev/errors.hpp"
#include "smoothgev/gev.hpp"
#include "smoothgev/parallel.hpp"
#include "smoothgev/rng.hpp"

namespace smoothgev {

namespace {

using nlohmann::json;

constexpr std::uint64_t kMissingStream = 0x4D495353ULL;

double unit_coord(int i, int n) { return n > 1 ? static_cast<double>(i) / (n - 1) : 0.5; }

json to_json(const FieldGenerator& g) {
  json modes = json::array();
  for (const auto& m : g.modes)
    modes.push_back({{"amplitude", m.amplitude}, {"kx", m.kx}, {"ky", m.ky}, {"phase", m.phase}});
  return {{"constant", g.constant}, {"slope_x", g.slope_x}, {"slope_y", g.slope_y}, {"modes", modes}};
}

FieldGenerator generator_from(const json& j, const FieldGenerator& fallback) {
  if (j.is_number()) return FieldGenerator{j.get<double>(), 0.0, 0.0, {}};
  FieldGenerator g = fallback;
  g.constant = j.value("constant", fallback.constant);
  g.slope_x = j.value("slope_x", fallback.slope_x);
  g.slope_y = j.value("slope_y", fallback.slope_y);
  if (j.contains("modes")) {
    g.modes.clear();
    for (const auto& m : j.at("modes"))
      g.modes.push_back({m.value("amplitude", 0.0), m.value("kx", 0.0), m.value("ky", 0.0), m.value("phase", 0.0)});
  }
  return g;
}

}  // namespace

double FieldGenerator::operator()(double u, double v) const {
  double out = constant + slope_x * (u - 0.5) + slope_y * (v - 0.5);
  for (const auto& m : modes) out += m.amplitude * std::sin(2.0 * M_PI * (m.kx * u + m.ky * v) + m.phase);
  return out;
}

void TruthScenario::validate() const {
  if (nx < 1 || ny < 1) throw ValidationError("scenario grid needs nx, ny >= 1");
  if (n_years < 2) throw ValidationError("scenario needs at least 2 years");
  if (!(spacing > 0.0)) throw ValidationError("scenario spacing must be positive");
  if (!co2_ppm.empty() && co2_ppm.size() != static_cast<std::size_t>(n_years))
    throw ValidationError("scenario co2_ppm must have n_years entries");
  if (n_regions < 1 || n_regions > nx) throw ValidationError("scenario n_regions must lie in [1, nx]");
  if (!(missing_fraction >= 0.0 && missing_fraction < 1.0))
    throw ValidationError("scenario missing_fraction must lie in [0, 1)");
}

std::vector<double> default_co2_curve(int n_years) {
  std::vector<double> out;
  for (int t = 1; t <= n_years; ++t) {
    const double s = n_years > 1 ? static_cast<double>(t - 1) / (n_years - 1) : 0.0;
    out.push_back(311.0 * std::exp(std::log(1.31) * std::pow(s, 1.5)));
  }
  return out;
}

Grid scenario_grid(const TruthScenario& s) {
  s.validate();
  std::vector<GridBox> boxes;
  for (int iy = 0; iy < s.ny; ++iy)
    for (int ix = 0; ix < s.nx; ++ix) {
      GridBox b;
      b.id = static_cast<std::int64_t>(iy) * s.nx + ix + 1;
      b.lon = s.lon0 + ix * s.spacing;
      b.lat = s.lat0 + iy * s.spacing;
      b.elevation_km = s.elevation_km(unit_coord(ix, s.nx), unit_coord(iy, s.ny));
      b.region = "R" + std::to_string(1 + ix * s.n_regions / s.nx);
      boxes.push_back(b);
    }
  return Grid(std::move(boxes), s.spacing);
}

ParameterField scenario_truth(const TruthScenario& s) {
  s.validate();
  ParameterField f;
  const bool mu1 = s.spec.mu_trend == TrendKind::Varying;
  for (int iy = 0; iy < s.ny; ++iy)
    for (int ix = 0; ix < s.nx; ++ix) {
      const double u = unit_coord(ix, s.nx), v = unit_coord(iy, s.ny);
      f.mu0.push_back(s.mu0(u, v));
      if (mu1) f.mu1.push_back(s.mu1(u, v));
      f.sigma0.push_back(s.sigma0(u, v));
      if (s.spec.sigma_trend) f.sigma1.push_back(s.sigma1(u, v));
      f.xi.push_back(std::clamp(s.xi(u, v), -0.5, 0.3));
    }
  if (s.spec.mu_trend == TrendKind::Homogeneous) f.mu1_global = s.mu1_homogeneous;
  f.beta = s.spec.elevation_effect ? s.beta : 0.0;
  return f;
}

CovariateSeries scenario_covariate(const TruthScenario& s) {
  s.validate();
  std::vector<int> years;
  for (int t = 0; t < s.n_years; ++t) years.push_back(s.first_year + t);
  return build_covariate(years, s.co2_ppm.empty() ? default_co2_curve(s.n_years) : s.co2_ppm);
}

GriddedDataset simulate_from(const Grid& grid, const std::vector<int>& years, const ParameterField& field,
                             const ModelFrame& frame, std::uint64_t seed, double missing_fraction) {
  check_shapes(field, frame.spec, grid.size());
  GriddedDataset data;
  data.grid = grid;
  data.years = years;
  const auto n = static_cast<Eigen::Index>(grid.size());
  const auto m = static_cast<Eigen::Index>(years.size());
  data.txx.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index t = 0; t < m; ++t) {
      const auto box = static_cast<std::size_t>(i), yt = static_cast<std::size_t>(t);
      SplitMix64 rng(substream_seed(seed, box, yt));
      const double u = rng.uniform_open();
      if (missing_fraction > 0.0) {
        SplitMix64 miss(substream_seed(seed ^ kMissingStream, box, yt));
        if (miss.uniform_open() < missing_fraction) {
          data.txx(i, t) = std::numeric_limits<double>::quiet_NaN();
          continue;
        }
      }
      data.txx(i, t) = gev_quantile(gev_params_at(field, frame, box, yt), u);
    }
  return data;
}

SimulatedData simulate(const TruthScenario& s, unsigned threads) {
  SimulatedData out;
  const Grid grid = scenario_grid(s);
  out.truth = scenario_truth(s);
  out.covariate = scenario_covariate(s);

  ModelFrame frame;
  frame.spec = s.spec;
  frame.covariate = out.covariate;
  double mean = 0.0;
  for (const auto& b : grid.boxes()) mean += b.elevation_km;
  mean /= static_cast<double>(grid.size());
  for (const auto& b : grid.boxes()) frame.elevation_centered.push_back(b.elevation_km - mean);
  frame.elevation_mean = mean;

  std::vector<std::vector<double>> rows(grid.size());
  const std::vector<int>& years = out.covariate.years;
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    rows[i].resize(years.size());
    for (std::size_t t = 0; t < years.size(); ++t) {
      if (s.missing_fraction > 0.0) {
        SplitMix64 miss(substream_seed(s.seed ^ kMissingStream, i, t));
        if (miss.uniform_open() < s.missing_fraction) {
          rows[i][t] = std::numeric_limits<double>::quiet_NaN();
          continue;
        }
      }
      SplitMix64 rng(substream_seed(s.seed, i, t));
      rows[i][t] = gev_quantile(gev_params_at(out.truth, frame, i, t), rng.uniform_open());
    }
  });
  out.data.grid = grid;
  out.data.years = years;
  out.data.txx.resize(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(years.size()));
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t t = 0; t < years.size(); ++t)
      out.data.txx(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = rows[i][t];
  return out;
}

TruthScenario read_scenario_json(std::istream& in, const std::string& source) {
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(source + ": not a valid JSON document (" + e.what() + ")");
  }
  try {
    TruthScenario s;
    s.nx = j.value("nx", s.nx);
    s.ny = j.value("ny", s.ny);
    s.lon0 = j.value("lon0", s.lon0);
    s.lat0 = j.value("lat0", s.lat0);
    s.spacing = j.value("spacing", s.spacing);
    s.first_year = j.value("first_year", s.first_year);
    s.n_years = j.value("n_years", s.n_years);
    if (j.contains("co2_ppm")) s.co2_ppm = j.at("co2_ppm").get<std::vector<double>>();
    if (j.contains("model")) s.spec = ModelSpec::named(j.at("model").get<std::string>());
    if (j.contains("elevation_effect")) s.spec.elevation_effect = j.at("elevation_effect").get<bool>();
    const json fields = j.value("fields", json::object());
    if (fields.contains("mu0")) s.mu0 = generator_from(fields.at("mu0"), s.mu0);
    if (fields.contains("mu1")) s.mu1 = generator_from(fields.at("mu1"), s.mu1);
    if (fields.contains("sigma0")) s.sigma0 = generator_from(fields.at("sigma0"), s.sigma0);
    if (fields.contains("sigma1")) s.sigma1 = generator_from(fields.at("sigma1"), s.sigma1);
    if (fields.contains("xi")) s.xi = generator_from(fields.at("xi"), s.xi);
    if (j.contains("elevation_km")) s.elevation_km = generator_from(j.at("elevation_km"), s.elevation_km);
    s.mu1_homogeneous = j.value("mu1_homogeneous", s.mu1_homogeneous);
    s.beta = j.value("beta", s.beta);
    s.n_regions = j.value("n_regions", s.n_regions);
    s.missing_fraction = j.value("missing_fraction", s.missing_fraction);
    s.seed = j.value("seed", s.seed);
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(source + ": malformed scenario (" + e.what() + ")");
  }
}

TruthScenario read_scenario_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return read_scenario_json(in, path);
}

void write_scenario_json(std::ostream& out, const TruthScenario& s) {
  json j;
  j["nx"] = s.nx;
  j["ny"] = s.ny;
  j["lon0"] = s.lon0;
  j["lat0"] = s.lat0;
  j["spacing"] = s.spacing;
  j["first_year"] = s.first_year;
  j["n_years"] = s.n_years;
  if (!s.co2_ppm.empty()) j["co2_ppm"] = s.co2_ppm;
  j["model"] = s.spec.label;
  j["elevation_effect"] = s.spec.elevation_effect;
  j["fields"] = {{"mu0", to_json(s.mu0)},
                 {"mu1", to_json(s.mu1)},
                 {"sigma0", to_json(s.sigma0)},
                 {"sigma1", to_json(s.sigma1)},
                 {"xi", to_json(s.xi)}};
  j["elevation_km"] = to_json(s.elevation_km);
  j["mu1_homogeneous"] = s.mu1_homogeneous;
  j["beta"] = s.beta;
  j["n_regions"] = s.n_regions;
  j["missing_fraction"] = s.missing_fraction;
  j["seed"] = s.seed;
  out << j.dump(2) << '\n';
}

}  // namespace smoothgev
