#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "smoothgev/csv.hpp"
#include "smoothgev/errors.hpp"
#include "smoothgev/fit.hpp"

namespace smoothgev {

namespace {

using nlohmann::json;

std::string trend_name(TrendKind k) {
  switch (k) {
    case TrendKind::None: return "none";
    case TrendKind::Varying: return "varying";
    case TrendKind::Homogeneous: return "homogeneous";
  }
  return "none";
}

TrendKind trend_from(const std::string& s) {
  if (s == "none") return TrendKind::None;
  if (s == "varying") return TrendKind::Varying;
  if (s == "homogeneous") return TrendKind::Homogeneous;
  throw ValidationError("unknown location trend '" + s + "'");
}

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void write_fit_json(std::ostream& out, const FitResult& fit) {
  json j;
  j["format"] = "smoothgev-fit";
  j["version"] = 1;
  const auto& spec = fit.frame.spec;
  j["spec"] = {{"label", spec.label},
               {"mu_trend", trend_name(spec.mu_trend)},
               {"sigma_trend", spec.sigma_trend},
               {"elevation_effect", spec.elevation_effect}};
  j["years"] = fit.years;
  j["co2_ppm"] = fit.frame.covariate.co2_ppm;
  j["box_ids"] = fit.box_ids;
  j["regions"] = fit.regions;
  j["elevation_centered"] = fit.frame.elevation_centered;
  j["elevation_mean"] = fit.frame.elevation_mean;
  j["beta_active"] = fit.frame.beta_active;

  json lam = json::object();
  for (std::size_t k = 0; k < fit.lambdas.size(); ++k)
    lam[std::string(field_name(fit.lambdas.fields[k]))] = fit.lambdas.lambda(k);
  j["lambda"] = lam;
  j["log_lambda"] = fit.lambdas.log_lambda;

  json coef = json::object();
  for (Field f : fit.layout.fields()) coef[std::string(field_name(f))] = fit.field.values(f);
  coef["beta"] = fit.field.beta;
  if (fit.field.mu1_global) coef["mu1_homogeneous"] = *fit.field.mu1_global;
  j["coefficients"] = coef;

  j["penalized_ll"] = fit.penalized_ll;
  j["unpenalized_ll"] = fit.unpenalized_ll;
  j["log_marginal"] = fit.log_marginal;
  j["edf"] = fit.edf;
  j["aic"] = aic(fit);
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["outer_iterations"] = fit.outer_iterations;
  j["lambda_search"] = fit.lambda_search;
  j["theta"] = vec(fit.theta);
  j["coefficient_edf"] = vec(fit.coefficient_edf);

  json trips = json::array();
  for (int col = 0; col < fit.precision.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(fit.precision, col); it; ++it)
      if (it.row() <= it.col()) trips.push_back({it.row(), it.col(), it.value()});
  j["precision"] = {{"dim", fit.precision.rows()}, {"upper_triplets", trips}};
  out << j.dump(1) << '\n';
}

FitResult read_fit_json(std::istream& in, const std::string& source) {
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(source + ": not a valid JSON document (" + e.what() + ")");
  }
  try {
    if (j.value("format", "") != "smoothgev-fit") throw ValidationError(source + ": not a fit result");
    FitResult fit;
    const auto& js = j.at("spec");
    ModelSpec spec;
    spec.label = js.at("label").get<std::string>();
    spec.mu_trend = trend_from(js.at("mu_trend").get<std::string>());
    spec.sigma_trend = js.at("sigma_trend").get<bool>();
    spec.elevation_effect = js.at("elevation_effect").get<bool>();

    fit.years = j.at("years").get<std::vector<int>>();
    fit.frame.spec = spec;
    fit.frame.covariate = build_covariate(fit.years, j.at("co2_ppm").get<std::vector<double>>());
    fit.frame.elevation_centered = j.at("elevation_centered").get<std::vector<double>>();
    fit.frame.elevation_mean = j.at("elevation_mean").get<double>();
    fit.frame.beta_active = j.at("beta_active").get<bool>();
    fit.box_ids = j.at("box_ids").get<std::vector<std::int64_t>>();
    fit.regions = j.at("regions").get<std::vector<std::string>>();
    const std::size_t n = fit.box_ids.size();
    if (fit.regions.size() != n || fit.frame.elevation_centered.size() != n)
      throw ValidationError(source + ": box arrays differ in length");

    fit.layout = ParameterLayout(spec, n, fit.frame.beta_active);
    fit.theta = to_eigen(j.at("theta").get<std::vector<double>>());
    if (static_cast<std::size_t>(fit.theta.size()) != fit.layout.dim())
      throw ValidationError(source + ": coefficient vector has the wrong length");
    fit.field = fit.layout.unpack(fit.theta);
    fit.lambdas.fields = fit.layout.fields();
    fit.lambdas.log_lambda = j.at("log_lambda").get<std::vector<double>>();
    if (fit.lambdas.log_lambda.size() != fit.lambdas.fields.size())
      throw ValidationError(source + ": wrong number of smoothing parameters");

    fit.penalized_ll = j.at("penalized_ll").get<double>();
    fit.unpenalized_ll = j.at("unpenalized_ll").get<double>();
    fit.log_marginal = j.value("log_marginal", 0.0);
    fit.edf = j.at("edf").get<double>();
    fit.coefficient_edf = to_eigen(j.at("coefficient_edf").get<std::vector<double>>());
    fit.converged = j.at("converged").get<bool>();
    fit.iterations = j.value("iterations", 0);
    fit.outer_iterations = j.value("outer_iterations", 0);
    fit.lambda_search = j.value("lambda_search", std::string("fixed"));

    const auto& jp = j.at("precision");
    const auto dim = jp.at("dim").get<Eigen::Index>();
    if (dim != static_cast<Eigen::Index>(fit.layout.dim())) throw ValidationError(source + ": precision has the wrong size");
    std::vector<Eigen::Triplet<double>> trips;
    for (const auto& t : jp.at("upper_triplets")) {
      const auto r = t.at(0).get<Eigen::Index>(), c = t.at(1).get<Eigen::Index>();
      const double v = t.at(2).get<double>();
      if (r < 0 || c < 0 || r >= dim || c >= dim) throw ValidationError(source + ": precision index out of range");
      trips.emplace_back(r, c, v);
      if (r != c) trips.emplace_back(c, r, v);
    }
    fit.precision.resize(dim, dim);
    fit.precision.setFromTriplets(trips.begin(), trips.end());
    return fit;
  } catch (const json::exception& e) {
    throw ValidationError(source + ": malformed fit result (" + e.what() + ")");
  }
}

FitResult read_fit_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return read_fit_json(in, path);
}

void write_coefficients_csv(std::ostream& out, const FitResult& fit) {
  out << "box_id,mu0,mu1,sigma0,sigma1,xi\n";
  const auto& f = fit.field;
  for (std::size_t i = 0; i < fit.n_boxes(); ++i) {
    const double mu0 = f.mu0[i] + f.beta * fit.frame.elevation_centered[i];
    out << fit.box_ids[i] << ',' << csv::format(mu0) << ',';
    if (!f.mu1.empty())
      out << csv::format(f.mu1[i]);
    else if (f.mu1_global)
      out << csv::format(*f.mu1_global);
    out << ',' << csv::format(f.sigma0[i]) << ',';
    if (!f.sigma1.empty()) out << csv::format(f.sigma1[i]);
    out << ',' << csv::format(f.xi[i]) << '\n';
  }
}

}  // namespace smoothgev
