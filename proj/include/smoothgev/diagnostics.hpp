#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "smoothgev/gev.hpp"
#include "smoothgev/grid.hpp"
#include "smoothgev/model.hpp"

namespace smoothgev {

/// F_it(y_it) for every observed cell, in (box, year) order.
std::vector<double> pit_values(const ParameterField& field, const ModelFrame& frame, const GriddedDataset& data);

/// Counts in `bins` equal-width bins on [0, 1]; a value of exactly 1 goes to the last bin.
std::vector<std::size_t> pit_histogram(std::span<const double> pit, int bins = 20);

/// Standard-Gumbel transform of one observation. Outside the support the
/// result is -inf (below a lower bound) or +inf (above an upper bound).
double gumbel_residual(const GevParams& p, double y);

struct GumbelResiduals {
  std::vector<double> z;
  std::vector<std::size_t> box;
  std::vector<std::size_t> t;
  std::vector<bool> violation;  ///< observation outside the fitted support
  std::size_t n_violations = 0;

  /// Residuals of the observations inside the support.
  std::vector<double> finite() const;
};

GumbelResiduals gumbel_residuals(const ParameterField& field, const ModelFrame& frame, const GriddedDataset& data);

using PlotPoint = std::pair<double, double>;

struct PlotPoints {
  std::vector<PlotPoint> pp;  ///< (k/(m+1), exp(-exp(-z_(k))))
  std::vector<PlotPoint> qq;  ///< (z_(k), -log(-log(k/(m+1))))
};

/// Probability and quantile plot coordinates of standard-Gumbel residuals; needs m >= 2.
PlotPoints pp_qq_points(std::vector<double> z);

/// Largest |empirical - model| probability over the pp points.
double max_pp_deviation(const PlotPoints& pts);

struct PearsonResiduals {
  std::vector<std::vector<double>> residuals;  ///< per box, observed years with finite variance
  std::vector<double> mean;
  std::vector<double> sd;                      ///< sample standard deviation (n - 1)
  std::vector<std::size_t> flagged;            ///< per box, cells with infinite variance
  std::size_t total_flagged = 0;
};

/// (y - E[Y]) / sqrt(Var[Y]) with the fitted moments in each box-year.
PearsonResiduals pearson_residuals(const ParameterField& field, const ModelFrame& frame, const GriddedDataset& data);

struct GumbelReference {
  double z;
  double probability;
};

/// Standard Gumbel probabilities of the residual values 5, 6, 7 and 8.
std::vector<GumbelReference> gumbel_reference_quantiles();

void write_pit_histogram_csv(std::ostream& out, std::span<const std::size_t> counts);
void write_plot_points_csv(std::ostream& out, const PlotPoints& pts);
void write_pearson_csv(std::ostream& out, const PearsonResiduals& r, std::span<const std::int64_t> box_ids);

}  // namespace smoothgev
