#include "smoothgev/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <ostream>
#include <utility>

#include "smoothgev/csv.hpp"
#include "smoothgev/errors.hpp"

namespace smoothgev {

double CovariateSeries::at_year(int year) const {
  const auto it = std::find(years.begin(), years.end(), year);
  if (it == years.end()) throw ValidationError("no covariate value for year " + std::to_string(year));
  return x[static_cast<std::size_t>(it - years.begin())];
}

CovariateSeries CovariateSeries::aligned(std::span<const int> wanted) const {
  CovariateSeries out;
  for (int y : wanted) {
    const auto it = std::find(years.begin(), years.end(), y);
    if (it == years.end()) throw ValidationError("no CO2 value for year " + std::to_string(y));
    const auto k = static_cast<std::size_t>(it - years.begin());
    out.years.push_back(y);
    out.co2_ppm.push_back(co2_ppm[k]);
    out.x.push_back(x[k]);
  }
  return out;
}

CovariateSeries build_covariate(std::span<const int> years, std::span<const double> co2_ppm) {
  if (years.size() != co2_ppm.size()) throw ValidationError("CO2 years and values differ in length");
  CovariateSeries out;
  for (std::size_t i = 0; i < years.size(); ++i) {
    if (!(co2_ppm[i] > 0.0) || !std::isfinite(co2_ppm[i]))
      throw ValidationError("CO2 concentration must be positive (year " + std::to_string(years[i]) + ")");
    if (i > 0 && years[i] <= years[i - 1]) throw ValidationError("CO2 years must be increasing");
    out.years.push_back(years[i]);
    out.co2_ppm.push_back(co2_ppm[i]);
    out.x.push_back(std::log(co2_ppm[i] / kPreindustrialCo2));
  }
  return out;
}

CovariateSeries read_co2_csv(std::istream& in, const std::string& source) {
  const csv::Table t = csv::read(in, source);
  const auto cy = t.column("year"), cc = t.column("co2_ppm");
  std::vector<int> years;
  std::vector<double> ppm;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    years.push_back(static_cast<int>(t.integer(r, cy)));
    ppm.push_back(t.number(r, cc));
  }
  return build_covariate(years, ppm);
}

CovariateSeries read_co2_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return read_co2_csv(in, path);
}

void write_co2_csv(std::ostream& out, const CovariateSeries& cov) {
  out << "year,co2_ppm\n";
  for (std::size_t i = 0; i < cov.size(); ++i) out << cov.years[i] << ',' << csv::format(cov.co2_ppm[i]) << '\n';
}

ModelSpec ModelSpec::named(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "mod1") return mod1();
  if (lower == "mod2") return mod2();
  if (lower == "mod3") return mod3();
  if (lower == "mod4") return mod4();
  if (lower == "mod5") return mod5();
  throw ValidationError("unknown model '" + std::string(name) + "' (expected mod1..mod5)");
}

std::string_view field_name(Field f) {
  switch (f) {
    case Field::Mu0: return "mu0";
    case Field::Mu1: return "mu1";
    case Field::Sigma0: return "sigma0";
    case Field::Sigma1: return "sigma1";
    case Field::Xi: return "xi";
  }
  return "?";
}

std::optional<Field> field_from_name(std::string_view name) {
  for (Field f : {Field::Mu0, Field::Mu1, Field::Sigma0, Field::Sigma1, Field::Xi})
    if (field_name(f) == name) return f;
  return std::nullopt;
}

const std::vector<double>& ParameterField::values(Field f) const {
  switch (f) {
    case Field::Mu0: return mu0;
    case Field::Mu1: return mu1;
    case Field::Sigma0: return sigma0;
    case Field::Sigma1: return sigma1;
    case Field::Xi: return xi;
  }
  return xi;
}

std::vector<double>& ParameterField::values(Field f) {
  return const_cast<std::vector<double>&>(std::as_const(*this).values(f));
}

ModelFrame make_frame(const ModelSpec& spec, const GriddedDataset& data, const CovariateSeries& cov,
                      const PenaltyMatrix& penalty) {
  ModelFrame frame;
  frame.spec = spec;
  frame.covariate = cov.aligned(data.years);
  const std::size_t n = data.n_boxes();
  double mean = 0.0;
  for (const auto& b : data.grid.boxes()) mean += b.elevation_km;
  mean /= static_cast<double>(std::max<std::size_t>(1, n));
  frame.elevation_mean = mean;
  frame.elevation_centered.resize(n);
  for (std::size_t i = 0; i < n; ++i) frame.elevation_centered[i] = data.grid.box(i).elevation_km - mean;

  frame.beta_active = false;
  if (spec.elevation_effect && penalty.size() == n) {
    // Elevation must vary within some component, else it lies in the penalty null space.
    std::vector<double> lo(static_cast<std::size_t>(penalty.n_components), 1e300);
    std::vector<double> hi(static_cast<std::size_t>(penalty.n_components), -1e300);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(penalty.component[i]);
      lo[c] = std::min(lo[c], frame.elevation_centered[i]);
      hi[c] = std::max(hi[c], frame.elevation_centered[i]);
    }
    for (std::size_t c = 0; c < lo.size(); ++c)
      if (hi[c] - lo[c] > 1e-9) frame.beta_active = true;
  }
  return frame;
}

void check_shapes(const ParameterField& f, const ModelSpec& spec, std::size_t n) {
  auto need = [&](const std::vector<double>& v, bool present, std::string_view name) {
    if (present ? v.size() != n : !v.empty())
      throw ValidationError("parameter field '" + std::string(name) + "' has " + std::to_string(v.size()) +
                            " entries, expected " + std::to_string(present ? n : 0));
  };
  need(f.mu0, true, "mu0");
  need(f.mu1, spec.mu_trend == TrendKind::Varying, "mu1");
  need(f.sigma0, true, "sigma0");
  need(f.sigma1, spec.sigma_trend, "sigma1");
  need(f.xi, true, "xi");
  if ((spec.mu_trend == TrendKind::Homogeneous) != f.mu1_global.has_value())
    throw ValidationError("homogeneous mu1 must be present exactly for a homogeneous location trend");
}

GevParams gev_params_at(const ParameterField& f, const ModelSpec& spec, std::size_t box, std::size_t t,
                        const CovariateSeries& cov, double elev_centered) {
  if (box >= f.size() || t >= cov.size()) throw ValidationError("box or year index out of range");
  const double x = cov.at(t);
  double mu = f.mu0[box] + f.beta * elev_centered;
  if (spec.mu_trend == TrendKind::Varying) mu += f.mu1.at(box) * x;
  if (spec.mu_trend == TrendKind::Homogeneous) mu += f.mu1_global.value() * x;
  double log_sigma = f.sigma0.at(box);
  if (spec.sigma_trend) log_sigma += f.sigma1.at(box) * x;
  return {mu, std::exp(log_sigma), f.xi.at(box)};
}

GevParams gev_params_at(const ParameterField& field, const ModelFrame& frame, std::size_t box, std::size_t t) {
  return gev_params_at(field, frame.spec, box, t, frame.covariate, frame.elevation_centered.at(box));
}

ParameterLayout::ParameterLayout(const ModelSpec& spec, std::size_t n_boxes, bool beta_active) : n_(n_boxes) {
  fields_.push_back(Field::Mu0);
  if (spec.mu_trend == TrendKind::Varying) fields_.push_back(Field::Mu1);
  fields_.push_back(Field::Sigma0);
  if (spec.sigma_trend) fields_.push_back(Field::Sigma1);
  fields_.push_back(Field::Xi);
  int next = 0;
  for (Field f : fields_) {
    offsets_[static_cast<int>(f)] = next;
    next += static_cast<int>(n_);
  }
  if (beta_active) beta_ = next++;
  if (spec.mu_trend == TrendKind::Homogeneous) mu1_global_ = next++;
  dim_ = static_cast<std::size_t>(next);
}

BoxDesign ParameterLayout::box_design(std::size_t, double elevation) const {
  BoxDesign d;
  int slot = 0;
  d.mu0 = slot++;
  d.mu1 = (has(Field::Mu1) || mu1_global_ >= 0) ? slot++ : -1;
  d.s0 = slot++;
  d.s1 = has(Field::Sigma1) ? slot++ : -1;
  d.xi = slot++;
  d.beta = beta_ >= 0 ? slot++ : -1;
  d.size = slot;
  d.elevation = elevation;
  return d;
}

std::array<int, kMaxLocal> ParameterLayout::local_to_global(std::size_t box) const {
  std::array<int, kMaxLocal> map{};
  map.fill(-1);
  int slot = 0;
  map[slot++] = index(Field::Mu0, box);
  if (has(Field::Mu1))
    map[slot++] = index(Field::Mu1, box);
  else if (mu1_global_ >= 0)
    map[slot++] = mu1_global_;
  map[slot++] = index(Field::Sigma0, box);
  if (has(Field::Sigma1)) map[slot++] = index(Field::Sigma1, box);
  map[slot++] = index(Field::Xi, box);
  if (beta_ >= 0) map[slot++] = beta_;
  return map;
}

Eigen::VectorXd ParameterLayout::pack(const ParameterField& field) const {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(dim_));
  for (Field f : fields_) {
    const auto& v = field.values(f);
    if (v.size() != n_) throw ValidationError("field '" + std::string(field_name(f)) + "' has wrong length");
    for (std::size_t i = 0; i < n_; ++i) theta[index(f, i)] = v[i];
  }
  if (beta_ >= 0) theta[beta_] = field.beta;
  if (mu1_global_ >= 0) theta[mu1_global_] = field.mu1_global.value_or(0.0);
  return theta;
}

ParameterField ParameterLayout::unpack(const Eigen::VectorXd& theta) const {
  ParameterField field;
  for (Field f : fields_) {
    auto& v = field.values(f);
    v.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) v[i] = theta[index(f, i)];
  }
  field.beta = beta_ >= 0 ? theta[beta_] : 0.0;
  if (mu1_global_ >= 0) field.mu1_global = theta[mu1_global_];
  return field;
}

std::string ParameterLayout::coefficient_name(int index) const {
  if (index == beta_) return "beta";
  if (index == mu1_global_) return "mu1";
  for (Field f : fields_) {
    const int off = offset(f);
    if (index >= off && index < off + static_cast<int>(n_))
      return std::string(field_name(f)) + "[" + std::to_string(index - off) + "]";
  }
  return "?";
}

}  // namespace smoothgev
