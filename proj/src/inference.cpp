#include "smoothgev/inference.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "smoothgev/csv.hpp"
#include "smoothgev/errors.hpp"
#include "smoothgev/gev.hpp"
#include "smoothgev/parallel.hpp"

namespace smoothgev {

void ReturnSpec::validate(std::size_t n_years) const {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("exceedance probability must lie in (0, 1)");
  if (t_from >= n_years || t_to >= n_years) throw ValidationError("year index outside the dataset range");
}

double return_level(const ParameterField& field, const ModelFrame& frame, std::size_t box, std::size_t t,
                    double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("exceedance probability must lie in (0, 1)");
  return gev_quantile(gev_params_at(field, frame, box, t), 1.0 - p);
}

std::vector<double> return_level_difference(const ParameterField& field, const ModelFrame& frame,
                                            const ReturnSpec& rs) {
  rs.validate(frame.n_years());
  std::vector<double> out(field.size());
  for (std::size_t i = 0; i < field.size(); ++i)
    out[i] = return_level(field, frame, i, rs.t_to, rs.p) - return_level(field, frame, i, rs.t_from, rs.p);
  return out;
}

std::vector<double> risk_ratio(const ParameterField& field, const ModelFrame& frame, const ReturnSpec& rs) {
  rs.validate(frame.n_years());
  std::vector<double> out(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double threshold = return_level(field, frame, i, rs.t_from, rs.p);
    out[i] = (1.0 - gev_cdf(gev_params_at(field, frame, i, rs.t_to), threshold)) / rs.p;
  }
  return out;
}

ParameterChange parameter_change(const ParameterField& field, const ModelFrame& frame, std::size_t t_from,
                                 std::size_t t_to) {
  if (t_from >= frame.n_years() || t_to >= frame.n_years())
    throw ValidationError("year index outside the dataset range");
  ParameterChange out;
  const std::size_t n = field.size();
  for (std::size_t i = 0; i < n; ++i) {
    const GevParams a = gev_params_at(field, frame, i, t_from), b = gev_params_at(field, frame, i, t_to);
    out.location.push_back(b.mu - a.mu);
    out.scale.push_back(b.sigma - a.sigma);
  }
  auto frac = [n](const std::vector<double>& v, int sign) {
    if (n == 0) return 0.0;
    const auto c = std::count_if(v.begin(), v.end(), [sign](double d) { return sign > 0 ? d > 0.0 : d < 0.0; });
    return static_cast<double>(c) / static_cast<double>(n);
  };
  out.location_positive = frac(out.location, 1);
  out.location_negative = frac(out.location, -1);
  out.scale_positive = frac(out.scale, 1);
  out.scale_negative = frac(out.scale, -1);
  return out;
}

std::string_view functional_name(Functional f) {
  switch (f) {
    case Functional::RlDiff: return "rl_diff";
    case Functional::RiskRatio: return "risk_ratio";
    case Functional::LocChange: return "loc_change";
    case Functional::ScaleChange: return "scale_change";
  }
  return "?";
}

Functional functional_from_name(std::string_view name) {
  for (Functional f : {Functional::RlDiff, Functional::RiskRatio, Functional::LocChange, Functional::ScaleChange})
    if (functional_name(f) == name) return f;
  throw ValidationError("unknown functional '" + std::string(name) +
                        "' (expected rl_diff, risk_ratio, loc_change or scale_change)");
}

std::vector<double> evaluate_functional(Functional f, const ParameterField& field, const ModelFrame& frame,
                                        const ReturnSpec& rs) {
  switch (f) {
    case Functional::RlDiff: return return_level_difference(field, frame, rs);
    case Functional::RiskRatio: return risk_ratio(field, frame, rs);
    case Functional::LocChange: return parameter_change(field, frame, rs.t_from, rs.t_to).location;
    case Functional::ScaleChange: return parameter_change(field, frame, rs.t_from, rs.t_to).scale;
  }
  return {};
}

double empirical_quantile(std::vector<double>& values, double prob) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

void check_mc(const FitResult& fit, const McOptions& opt) {
  if (!fit.converged) throw ValidationError("Monte Carlo intervals need a converged fit");
  if (opt.draws < 100) throw ValidationError("at least 100 posterior draws are required");
  if (!(opt.level > 0.0 && opt.level < 1.0)) throw DomainError("interval level must lie in (0, 1)");
}

/// draws x boxes matrix of functional values, one row per posterior draw.
Eigen::MatrixXd draw_functional(const FitResult& fit, Functional f, const ReturnSpec& rs, const McOptions& opt) {
  const PosteriorSampler sampler(fit);
  Eigen::MatrixXd values(static_cast<Eigen::Index>(opt.draws), static_cast<Eigen::Index>(fit.n_boxes()));
  parallel_for(opt.draws, opt.threads, [&](std::size_t j) {
    const ParameterField draw = sampler.draw_field(opt.seed, j);
    const auto v = evaluate_functional(f, draw, fit.frame, rs);
    for (std::size_t i = 0; i < v.size(); ++i)
      values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v[i];
  });
  return values;
}

}  // namespace

IntervalField mc_intervals(const FitResult& fit, Functional f, const ReturnSpec& rs, const McOptions& opt) {
  check_mc(fit, opt);
  rs.validate(fit.frame.n_years());
  IntervalField out;
  out.functional = f;
  out.level = opt.level;
  out.draws = opt.draws;
  out.estimate = evaluate_functional(f, fit.field, fit.frame, rs);
  const Eigen::MatrixXd values = draw_functional(fit, f, rs, opt);
  const double a = 0.5 * (1.0 - opt.level);
  for (Eigen::Index i = 0; i < values.cols(); ++i) {
    std::vector<double> col(values.col(i).data(), values.col(i).data() + values.rows());
    out.lower.push_back(empirical_quantile(col, a));
    out.upper.push_back(empirical_quantile(col, 1.0 - a));
  }
  return out;
}

std::pair<double, double> bonferroni_levels(double alpha, int m) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (m < 1) throw DomainError("number of comparisons must be at least 1");
  const double a = alpha / (2.0 * m);
  return {a, 1.0 - a};
}

RegionalIntervals regional_mc_intervals(const FitResult& fit, Functional f, const ReturnSpec& rs,
                                        std::span<const std::string> labels, int bonferroni_m,
                                        const McOptions& opt) {
  check_mc(fit, opt);
  rs.validate(fit.frame.n_years());
  if (labels.size() != fit.n_boxes()) throw ValidationError("every box needs a region label");
  RegionalIntervals out;
  out.functional = f;
  out.alpha = 1.0 - opt.level;
  out.bonferroni_m = bonferroni_m;
  std::tie(out.lower_level, out.upper_level) = bonferroni_levels(out.alpha, bonferroni_m);
  out.draws = opt.draws;

  std::vector<std::string> names;
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = std::find(names.begin(), names.end(), labels[i]);
    if (it == names.end()) {
      names.push_back(labels[i]);
      members.push_back({i});
    } else {
      members[static_cast<std::size_t>(it - names.begin())].push_back(i);
    }
  }

  const auto estimate = evaluate_functional(f, fit.field, fit.frame, rs);
  const Eigen::MatrixXd values = draw_functional(fit, f, rs, opt);
  for (std::size_t r = 0; r < names.size(); ++r) {
    if (members[r].empty()) throw ValidationError("region '" + names[r] + "' is empty");
    RegionalInterval ri;
    ri.region = names[r];
    ri.n_boxes = members[r].size();
    const double w = 1.0 / static_cast<double>(ri.n_boxes);
    for (std::size_t i : members[r]) ri.estimate += estimate[i] * w;
    std::vector<double> means(opt.draws, 0.0);
    for (std::size_t j = 0; j < opt.draws; ++j)
      for (std::size_t i : members[r]) means[j] += values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) * w;
    ri.lower = empirical_quantile(means, out.lower_level);
    ri.upper = empirical_quantile(means, out.upper_level);
    out.regions.push_back(ri);
  }
  return out;
}

GevParams averaged_params(const ParameterField& field, const ModelFrame& frame, std::span<const std::size_t> boxes,
                          std::size_t t) {
  if (boxes.empty()) throw ValidationError("region has no boxes");
  GevParams avg{0.0, 0.0, 0.0};
  for (std::size_t i : boxes) {
    const GevParams p = gev_params_at(field, frame, i, t);
    avg.mu += p.mu;
    avg.sigma += p.sigma;
    avg.xi += p.xi;
  }
  const double n = static_cast<double>(boxes.size());
  avg.mu /= n;
  avg.sigma /= n;
  avg.xi /= n;
  return avg;
}

std::vector<double> averaged_density(const ParameterField& field, const ModelFrame& frame,
                                     std::span<const std::size_t> boxes, std::size_t t,
                                     std::span<const double> y_grid) {
  const GevParams p = averaged_params(field, frame, boxes, t);
  std::vector<double> out;
  out.reserve(y_grid.size());
  for (double y : y_grid) out.push_back(gev_pdf(p, y));
  return out;
}

void write_interval_csv(std::ostream& out, const IntervalField& field, std::span<const std::int64_t> box_ids) {
  if (box_ids.size() != field.estimate.size()) throw ValidationError("box ids do not match the interval field");
  out << "box_id,estimate,lower,upper\n";
  for (std::size_t i = 0; i < box_ids.size(); ++i)
    out << box_ids[i] << ',' << csv::format(field.estimate[i]) << ',' << csv::format(field.lower[i]) << ','
        << csv::format(field.upper[i]) << '\n';
}

void write_regional_json(std::ostream& out, const RegionalIntervals& r, const ReturnSpec& rs,
                         std::span<const int> years) {
  nlohmann::json j;
  j["functional"] = std::string(functional_name(r.functional));
  j["p"] = rs.p;
  if (rs.t_from < years.size() && rs.t_to < years.size()) {
    j["year_from"] = years[rs.t_from];
    j["year_to"] = years[rs.t_to];
  }
  j["alpha"] = r.alpha;
  j["bonferroni_m"] = r.bonferroni_m;
  j["lower_level"] = r.lower_level;
  j["upper_level"] = r.upper_level;
  j["draws"] = r.draws;
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& ri : r.regions)
    regions.push_back({{"region", ri.region},
                       {"n_boxes", ri.n_boxes},
                       {"estimate", ri.estimate},
                       {"lower", ri.lower},
                       {"upper", ri.upper}});
  j["regions"] = regions;
  out << j.dump(2) << '\n';
}

}  // namespace smoothgev
