#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "smoothgev/fit.hpp"
#include "smoothgev/model.hpp"

namespace smoothgev {

/// Exceedance probability p per year and the two year indices being compared (0-based).
struct ReturnSpec {
  double p = 0.01;
  std::size_t t_from = 0;
  std::size_t t_to = 0;

  void validate(std::size_t n_years) const;
};

/// y_it(p): the level exceeded with probability p in year t, i.e. the (1 - p) quantile.
double return_level(const ParameterField& field, const ModelFrame& frame, std::size_t box, std::size_t t,
                    double p);

/// Per-box y_{i,t_to}(p) - y_{i,t_from}(p).
std::vector<double> return_level_difference(const ParameterField& field, const ModelFrame& frame,
                                            const ReturnSpec& rs);

/// Per-box [1 - G(y_{i,t_from}(p); parameters in t_to)] / p.
std::vector<double> risk_ratio(const ParameterField& field, const ModelFrame& frame, const ReturnSpec& rs);

struct ParameterChange {
  std::vector<double> location;  ///< mu_{t_to} - mu_{t_from}
  std::vector<double> scale;     ///< sigma_{t_to} - sigma_{t_from}, natural scale
  double location_positive = 0.0;  ///< fraction of boxes with a positive change
  double location_negative = 0.0;
  double scale_positive = 0.0;
  double scale_negative = 0.0;
};

ParameterChange parameter_change(const ParameterField& field, const ModelFrame& frame, std::size_t t_from,
                                 std::size_t t_to);

enum class Functional { RlDiff, RiskRatio, LocChange, ScaleChange };

std::string_view functional_name(Functional f);
/// "rl_diff", "risk_ratio", "loc_change" or "scale_change".
Functional functional_from_name(std::string_view name);

/// Per-box value of a functional for one parameter field.
std::vector<double> evaluate_functional(Functional f, const ParameterField& field, const ModelFrame& frame,
                                        const ReturnSpec& rs);

struct McOptions {
  std::size_t draws = 2000;
  double level = 0.95;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct IntervalField {
  Functional functional = Functional::RlDiff;
  std::vector<double> estimate;  ///< plug-in at the fitted coefficients
  std::vector<double> lower;
  std::vector<double> upper;
  double level = 0.95;
  std::size_t draws = 0;
};

/// Per-box equal-tailed Monte Carlo intervals from joint posterior draws.
IntervalField mc_intervals(const FitResult& fit, Functional f, const ReturnSpec& rs, const McOptions& opt = {});

struct RegionalInterval {
  std::string region;
  std::size_t n_boxes = 0;
  double estimate = 0.0;  ///< regional mean of the plug-in values
  double lower = 0.0;
  double upper = 0.0;
};

struct RegionalIntervals {
  Functional functional = Functional::RlDiff;
  double alpha = 0.05;
  int bonferroni_m = 1;
  double lower_level = 0.025;
  double upper_level = 0.975;
  std::size_t draws = 0;
  std::vector<RegionalInterval> regions;
};

/// Quantile levels alpha / (2m) and 1 - alpha / (2m).
std::pair<double, double> bonferroni_levels(double alpha, int m);

/**
 * Intervals for the spatial mean of a functional over each region, with the
 * quantile levels Bonferroni-adjusted for m simultaneous regions. `labels`
 * gives the region of every box; regions are reported in first-appearance order.
 */
RegionalIntervals regional_mc_intervals(const FitResult& fit, Functional f, const ReturnSpec& rs,
                                        std::span<const std::string> labels, int bonferroni_m,
                                        const McOptions& opt = {});

/// Empirical quantile with linear interpolation between order statistics (R type 7). Sorts `values`.
double empirical_quantile(std::vector<double>& values, double prob);

/// GEV parameters averaged over `boxes` at year t.
GevParams averaged_params(const ParameterField& field, const ModelFrame& frame, std::span<const std::size_t> boxes,
                          std::size_t t);
/// Density with the averaged parameters evaluated on y_grid.
std::vector<double> averaged_density(const ParameterField& field, const ModelFrame& frame,
                                     std::span<const std::size_t> boxes, std::size_t t,
                                     std::span<const double> y_grid);

void write_interval_csv(std::ostream& out, const IntervalField& field, std::span<const std::int64_t> box_ids);
void write_regional_json(std::ostream& out, const RegionalIntervals& r, const ReturnSpec& rs,
                         std::span<const int> years);

}  // namespace smoothgev
