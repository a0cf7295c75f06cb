#include "smoothgev/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "smoothgev/csv.hpp"
#include "smoothgev/errors.hpp"

namespace smoothgev {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_frame(const ParameterField& field, const ModelFrame& frame, const GriddedDataset& data) {
  if (field.size() != data.n_boxes() || frame.n_boxes() != data.n_boxes() || frame.n_years() != data.n_years())
    throw ValidationError("fit and dataset do not match");
}

}  // namespace

std::vector<double> pit_values(const ParameterField& field, const ModelFrame& frame, const GriddedDataset& data) {
  check_frame(field, frame, data);
  std::vector<double> out;
  for (std::size_t i = 0; i < data.n_boxes(); ++i)
    for (std::size_t t = 0; t < data.n_years(); ++t)
      if (!data.missing(i, t))
        out.push_back(gev_cdf(gev_params_at(field, frame, i, t),
                              data.txx(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t))));
  return out;
}

std::vector<std::size_t> pit_histogram(std::span<const double> pit, int bins) {
  if (bins < 1) throw ValidationError("histogram needs at least one bin");
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  for (double u : pit) {
    if (!(u >= 0.0 && u <= 1.0)) throw DomainError("PIT values must lie in [0, 1]");
    const auto b = std::min(bins - 1, static_cast<int>(u * bins));
    ++counts[static_cast<std::size_t>(b)];
  }
  return counts;
}

double gumbel_residual(const GevParams& p, double y) {
  validate(p);
  const double z = (y - p.mu) / p.sigma;
  if (std::abs(p.xi) <= kXiEps) return z;
  const double t = 1.0 + p.xi * z;
  if (t <= 0.0) return p.xi > 0.0 ? -kInf : kInf;
  return std::log1p(p.xi * z) / p.xi;
}

std::vector<double> GumbelResiduals::finite() const {
  std::vector<double> out;
  for (std::size_t k = 0; k < z.size(); ++k)
    if (!violation[k]) out.push_back(z[k]);
  return out;
}

GumbelResiduals gumbel_residuals(const ParameterField& field, const ModelFrame& frame, const GriddedDataset& data) {
  check_frame(field, frame, data);
  GumbelResiduals out;
  for (std::size_t i = 0; i < data.n_boxes(); ++i)
    for (std::size_t t = 0; t < data.n_years(); ++t) {
      if (data.missing(i, t)) continue;
      const double z = gumbel_residual(gev_params_at(field, frame, i, t),
                                       data.txx(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)));
      const bool bad = !std::isfinite(z);
      out.z.push_back(z);
      out.box.push_back(i);
      out.t.push_back(t);
      out.violation.push_back(bad);
      out.n_violations += bad ? 1 : 0;
    }
  return out;
}

PlotPoints pp_qq_points(std::vector<double> z) {
  const std::size_t m = z.size();
  if (m < 2) throw ValidationError("probability and quantile plots need at least 2 residuals");
  for (double v : z)
    if (!std::isfinite(v)) throw DomainError("residuals must be finite");
  std::sort(z.begin(), z.end());
  PlotPoints out;
  out.pp.reserve(m);
  out.qq.reserve(m);
  for (std::size_t k = 1; k <= m; ++k) {
    const double pk = static_cast<double>(k) / static_cast<double>(m + 1);
    const double zk = z[k - 1];
    out.pp.emplace_back(pk, std::exp(-std::exp(-zk)));
    out.qq.emplace_back(zk, -std::log(-std::log(pk)));
  }
  return out;
}

double max_pp_deviation(const PlotPoints& pts) {
  double d = 0.0;
  for (const auto& [a, b] : pts.pp) d = std::max(d, std::abs(a - b));
  return d;
}

PearsonResiduals pearson_residuals(const ParameterField& field, const ModelFrame& frame, const GriddedDataset& data) {
  check_frame(field, frame, data);
  PearsonResiduals out;
  const std::size_t n = data.n_boxes();
  out.residuals.resize(n);
  out.mean.assign(n, std::numeric_limits<double>::quiet_NaN());
  out.sd.assign(n, std::numeric_limits<double>::quiet_NaN());
  out.flagged.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = out.residuals[i];
    for (std::size_t t = 0; t < data.n_years(); ++t) {
      if (data.missing(i, t)) continue;
      const GevParams p = gev_params_at(field, frame, i, t);
      if (p.xi >= 0.5) {
        ++out.flagged[i];
        continue;
      }
      const GevMoments m = gev_mean_var(p);
      r.push_back((data.txx(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) - m.mean) /
                  std::sqrt(m.variance));
    }
    out.total_flagged += out.flagged[i];
    if (r.empty()) continue;
    double s = 0.0;
    for (double v : r) s += v;
    out.mean[i] = s / static_cast<double>(r.size());
    if (r.size() > 1) {
      double ss = 0.0;
      for (double v : r) ss += (v - out.mean[i]) * (v - out.mean[i]);
      out.sd[i] = std::sqrt(ss / static_cast<double>(r.size() - 1));
    }
  }
  return out;
}

std::vector<GumbelReference> gumbel_reference_quantiles() {
  std::vector<GumbelReference> out;
  for (double z : {5.0, 6.0, 7.0, 8.0}) out.push_back({z, std::exp(-std::exp(-z))});
  return out;
}

void write_pit_histogram_csv(std::ostream& out, std::span<const std::size_t> counts) {
  out << "bin_lower,bin_upper,count\n";
  const double w = 1.0 / static_cast<double>(counts.size());
  for (std::size_t b = 0; b < counts.size(); ++b)
    out << csv::format(b * w) << ',' << csv::format(b + 1 == counts.size() ? 1.0 : (b + 1) * w) << ',' << counts[b]
        << '\n';
}

void write_plot_points_csv(std::ostream& out, const PlotPoints& pts) {
  out << "k,pp_empirical,pp_model,qq_model,qq_empirical\n";
  for (std::size_t k = 0; k < pts.pp.size(); ++k)
    out << k + 1 << ',' << csv::format(pts.pp[k].first) << ',' << csv::format(pts.pp[k].second) << ','
        << csv::format(pts.qq[k].first) << ',' << csv::format(pts.qq[k].second) << '\n';
}

void write_pearson_csv(std::ostream& out, const PearsonResiduals& r, std::span<const std::int64_t> box_ids) {
  if (box_ids.size() != r.residuals.size()) throw ValidationError("box ids do not match the residuals");
  out << "box_id,n,mean,sd,flagged\n";
  for (std::size_t i = 0; i < box_ids.size(); ++i)
    out << box_ids[i] << ',' << r.residuals[i].size() << ',' << csv::format(r.mean[i]) << ','
        << csv::format(r.sd[i]) << ',' << r.flagged[i] << '\n';
}

}  // namespace smoothgev
