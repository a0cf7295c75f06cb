#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "smoothgev/gev.hpp"
#include "smoothgev/grid.hpp"
#include "smoothgev/log_density.hpp"

namespace smoothgev {

/// CO2 covariate x_t = log(co2_t / 280) indexed by calendar year.
struct CovariateSeries {
  std::vector<int> years;
  std::vector<double> co2_ppm;
  std::vector<double> x;

  std::size_t size() const noexcept { return x.size(); }
  double at(std::size_t t) const { return x.at(t); }
  /// Throws ValidationError when the year is not covered.
  double at_year(int year) const;
  /// Restriction to `years` (in that order); throws when any is absent.
  CovariateSeries aligned(std::span<const int> years) const;
};

inline constexpr double kPreindustrialCo2 = 280.0;

CovariateSeries build_covariate(std::span<const int> years, std::span<const double> co2_ppm);
CovariateSeries read_co2_csv(std::istream& in, const std::string& source = "<co2>");
CovariateSeries read_co2_csv(const std::string& path);
void write_co2_csv(std::ostream& out, const CovariateSeries& cov);

enum class TrendKind { None, Varying, Homogeneous };

/// Which GEV parameters carry the covariate and how.
struct ModelSpec {
  TrendKind mu_trend = TrendKind::None;
  bool sigma_trend = false;  ///< spatially varying trend in log sigma
  bool elevation_effect = true;
  std::string label = "custom";

  static ModelSpec mod1() { return {TrendKind::None, false, true, "mod1"}; }
  static ModelSpec mod2() { return {TrendKind::Varying, false, true, "mod2"}; }
  static ModelSpec mod3() { return {TrendKind::None, true, true, "mod3"}; }
  static ModelSpec mod4() { return {TrendKind::Varying, true, true, "mod4"}; }
  static ModelSpec mod5() { return {TrendKind::Homogeneous, false, true, "mod5"}; }

  /// mod1..mod5, case-insensitive; throws ValidationError otherwise.
  static ModelSpec named(std::string_view name);
};

/// Per-box coefficient fields; penalized fields are listed in this order.
enum class Field { Mu0, Mu1, Sigma0, Sigma1, Xi };

std::string_view field_name(Field f);
std::optional<Field> field_from_name(std::string_view name);

/**
 * Fitted or true coefficients. sigma0/sigma1 are on the log scale. mu1 is
 * per-box for a varying trend; mu1_global holds the homogeneous trend.
 * Absent fields are empty.
 */
struct ParameterField {
  std::vector<double> mu0;
  std::vector<double> mu1;
  std::optional<double> mu1_global;
  std::vector<double> sigma0;
  std::vector<double> sigma1;
  std::vector<double> xi;
  double beta = 0.0;  ///< degC per km of centred elevation

  std::size_t size() const noexcept { return mu0.size(); }
  const std::vector<double>& values(Field f) const;
  std::vector<double>& values(Field f);
};

/**
 * Everything besides the coefficients needed to evaluate a model: the spec,
 * the covariate aligned with the dataset years, and centred elevation.
 */
struct ModelFrame {
  ModelSpec spec;
  CovariateSeries covariate;
  std::vector<double> elevation_centered;
  double elevation_mean = 0.0;
  /// False when elevation is constant within every connected component, in
  /// which case it is confounded with the location intercept and beta = 0.
  bool beta_active = false;

  std::size_t n_boxes() const noexcept { return elevation_centered.size(); }
  std::size_t n_years() const noexcept { return covariate.size(); }
};

ModelFrame make_frame(const ModelSpec& spec, const GriddedDataset& data, const CovariateSeries& cov,
                      const PenaltyMatrix& penalty);

/// GEV parameters of `box` in year index t.
GevParams gev_params_at(const ParameterField& field, const ModelSpec& spec, std::size_t box,
                        std::size_t t, const CovariateSeries& cov, double elev_centered);
GevParams gev_params_at(const ParameterField& field, const ModelFrame& frame, std::size_t box,
                        std::size_t t);

void check_shapes(const ParameterField& field, const ModelSpec& spec, std::size_t n_boxes);

/**
 * Mapping between a ParameterField and the flat coefficient vector used by
 * the optimizer: one block of n entries per present field, then the fixed
 * effects (beta, homogeneous mu1).
 */
class ParameterLayout {
 public:
  ParameterLayout(const ModelSpec& spec, std::size_t n_boxes, bool beta_active);

  std::size_t n_boxes() const noexcept { return n_; }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<Field>& fields() const noexcept { return fields_; }
  bool has(Field f) const { return offset(f) >= 0; }
  /// First index of the field block, or -1 when absent.
  int offset(Field f) const { return offsets_[static_cast<int>(f)]; }
  int index(Field f, std::size_t box) const { return offset(f) + static_cast<int>(box); }
  int beta_index() const noexcept { return beta_; }
  int mu1_global_index() const noexcept { return mu1_global_; }

  /// Local design for one box and the global index of each local slot.
  BoxDesign box_design(std::size_t box, double elevation) const;
  std::array<int, kMaxLocal> local_to_global(std::size_t box) const;

  Eigen::VectorXd pack(const ParameterField& field) const;
  ParameterField unpack(const Eigen::VectorXd& theta) const;

  /// Human-readable coefficient name, e.g. "xi[12]" or "beta".
  std::string coefficient_name(int index) const;

 private:
  std::size_t n_;
  std::size_t dim_ = 0;
  std::vector<Field> fields_;
  std::array<int, 5> offsets_{-1, -1, -1, -1, -1};
  int beta_ = -1;
  int mu1_global_ = -1;
};

}  // namespace smoothgev
