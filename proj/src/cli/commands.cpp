#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "smoothgev/cli.hpp"
#include "smoothgev/csv.hpp"
#include "smoothgev/diagnostics.hpp"
#include "smoothgev/errors.hpp"
#include "smoothgev/fit.hpp"
#include "smoothgev/grid.hpp"
#include "smoothgev/inference.hpp"
#include "smoothgev/model.hpp"
#include "smoothgev/scoring.hpp"
#include "smoothgev/synthetic.hpp"

namespace smoothgev::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

template <typename Writer>
void write_file(const fs::path& path, Writer&& writer) {
  auto out = open_output(path);
  writer(out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

GriddedDataset load_dataset(const RunConfig& cfg, std::ostream& log) {
  IngestReport report;
  GriddedDataset data = ingest_dataset(cfg.txx_path(), cfg.grid_path(), &report);
  for (const auto& w : report.warnings) log << "warning: " << w << '\n';
  return data;
}

CovariateSeries load_covariate(const RunConfig& cfg, const GriddedDataset& data) {
  return read_co2_csv(cfg.co2_path()).aligned(data.years);
}

std::vector<std::string> selected_regions(const RunConfig& cfg, const std::vector<std::string>& available) {
  if (cfg.regions.empty()) return available;
  for (const auto& r : cfg.regions)
    if (std::find(available.begin(), available.end(), r) == available.end())
      throw ValidationError("unknown region '" + r + "'");
  return cfg.regions;
}

std::vector<ModelSpec> selected_models(const RunConfig& cfg, std::vector<std::string> defaults) {
  const auto& names = cfg.models.empty() ? defaults : cfg.models;
  std::vector<ModelSpec> out;
  for (const auto& n : names) out.push_back(ModelSpec::named(n));
  return out;
}

/// The --region list, or every region of the grid file.
std::vector<std::string> fitted_regions(const RunConfig& cfg) {
  if (!cfg.regions.empty()) return cfg.regions;
  if (fs::exists(cfg.grid_path())) {
    std::ifstream in(cfg.grid_path());
    const Grid g = read_grid_csv(in, cfg.grid_path());
    return g.regions();
  }
  throw ValidationError("no --region given and no grid file at " + cfg.grid_path());
}

FitResult load_fit(const RunConfig& cfg, const std::string& region, const std::string& model) {
  const fs::path path = fs::path(cfg.model_dir(region, model)) / "fit.json";
  if (!fs::exists(path)) throw ValidationError("no fit at " + path.string() + " (run `fit` first)");
  return read_fit_json(path.string());
}

std::size_t year_index(const std::vector<int>& years, int year, const char* what) {
  const auto it = std::find(years.begin(), years.end(), year);
  if (it == years.end()) throw ValidationError(std::string(what) + " " + std::to_string(year) + " is outside the fitted years");
  return static_cast<std::size_t>(it - years.begin());
}

/// The region's data restricted to the boxes and years of a fit.
GriddedDataset data_for_fit(const GriddedDataset& data, const FitResult& fit) {
  std::vector<std::size_t> boxes;
  for (auto id : fit.box_ids) {
    const auto i = data.grid.index_of(id);
    if (!i) throw ValidationError("box " + std::to_string(id) + " of the fit is missing from the data");
    boxes.push_back(*i);
  }
  GriddedDataset sub = data.subset(boxes);
  GriddedDataset out;
  out.grid = sub.grid;
  out.years = fit.years;
  out.txx.resize(static_cast<Eigen::Index>(boxes.size()), static_cast<Eigen::Index>(fit.years.size()));
  for (std::size_t t = 0; t < fit.years.size(); ++t) {
    const auto src = sub.year_index(fit.years[t]);
    if (!src) throw ValidationError("year " + std::to_string(fit.years[t]) + " of the fit is missing from the data");
    out.txx.col(static_cast<Eigen::Index>(t)) = sub.txx.col(static_cast<Eigen::Index>(*src));
  }
  return out;
}

void write_truth_csv(std::ostream& out, const Grid& grid, const ParameterField& f) {
  out << "box_id,mu0,mu1,sigma0,sigma1,xi\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double mu1 = f.mu1_global ? *f.mu1_global : (f.mu1.empty() ? 0.0 : f.mu1[i]);
    out << grid.box(i).id << ',' << csv::format(f.mu0[i]) << ',' << csv::format(mu1) << ','
        << csv::format(f.sigma0[i]) << ',' << csv::format(f.sigma1.empty() ? 0.0 : f.sigma1[i]) << ','
        << csv::format(f.xi[i]) << '\n';
  }
}

double ks_statistic(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    d = std::max({d, static_cast<double>(i + 1) / n - u[i], u[i] - static_cast<double>(i) / n});
  return d;
}

}  // namespace

int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  TruthScenario s = cfg.scenario.empty() ? TruthScenario{} : read_scenario_json(cfg.scenario);
  if (cfg.seed_given) s.seed = cfg.seed;
  const SimulatedData sim = simulate(s, cfg.threads);
  const fs::path out = cfg.out;
  write_file(out / "txx.csv", [&](std::ostream& o) { write_txx_csv(o, sim.data); });
  write_file(out / "grid.csv", [&](std::ostream& o) { write_grid_csv(o, sim.data.grid); });
  write_file(out / "co2.csv", [&](std::ostream& o) { write_co2_csv(o, sim.covariate); });
  write_file(out / "truth.csv", [&](std::ostream& o) { write_truth_csv(o, sim.data.grid, sim.truth); });
  write_file(out / "scenario.json", [&](std::ostream& o) { write_scenario_json(o, s); });
  log << "simulated " << sim.data.n_boxes() << " boxes x " << sim.data.n_years() << " years ("
      << sim.data.observed_count() << " observed) into " << out.string() << '\n';
  return kExitOk;
}

int cmd_ingest(const RunConfig& cfg, std::ostream& log) {
  if (cfg.grid.empty()) throw ValidationError("ingest needs --grid");
  GriddedDataset data;
  IngestReport report;
  if (!cfg.daily.empty()) {
    auto gin = open_input(cfg.grid);
    const Grid grid = read_grid_csv(gin, cfg.grid);
    auto din = open_input(cfg.daily);
    const auto daily = read_daily_csv(din, cfg.daily);
    data = extract_txx(grid, daily);
    for (const auto& r : data.grid.regions()) report.region_counts[r] = data.region(r).n_boxes();
  } else {
    if (cfg.txx.empty()) throw ValidationError("ingest needs --txx or --daily");
    data = ingest_dataset(cfg.txx, cfg.grid, &report);
  }
  std::optional<CovariateSeries> cov;
  if (!cfg.co2.empty()) cov = read_co2_csv(cfg.co2).aligned(data.years);

  const fs::path out = cfg.out;
  write_file(out / "txx.csv", [&](std::ostream& o) { write_txx_csv(o, data); });
  write_file(out / "grid.csv", [&](std::ostream& o) { write_grid_csv(o, data.grid); });
  if (cov) write_file(out / "co2.csv", [&](std::ostream& o) { write_co2_csv(o, *cov); });

  json j;
  j["n_boxes"] = data.n_boxes();
  j["n_years"] = data.n_years();
  j["first_year"] = data.years.empty() ? 0 : data.years.front();
  j["last_year"] = data.years.empty() ? 0 : data.years.back();
  j["observed"] = data.observed_count();
  j["warnings"] = report.warnings;
  j["dropped_boxes"] = report.dropped_boxes;
  j["region_counts"] = report.region_counts;
  write_file(out / "ingest_report.json", [&](std::ostream& o) { o << j.dump(2) << '\n'; });
  for (const auto& w : report.warnings) log << "warning: " << w << '\n';
  log << "ingested " << data.n_boxes() << " boxes x " << data.n_years() << " years into " << out.string() << '\n';
  return kExitOk;
}

int cmd_fit(const RunConfig& cfg, std::ostream& log) {
  const GriddedDataset data = load_dataset(cfg, log);
  const CovariateSeries cov = load_covariate(cfg, data);
  const auto models = selected_models(cfg, {"mod4"});
  FitOptions opts;
  opts.threads = cfg.threads;
  int status = kExitOk;
  for (const auto& region : selected_regions(cfg, data.grid.regions())) {
    const GriddedDataset rd = data.region(region);
    const PenaltyMatrix penalty = build_penalty(build_neighborhood(rd.grid));
    for (const auto& spec : models) {
      const fs::path dir = cfg.model_dir(region, spec.label);
      try {
        const FitResult fit = fit_smooth(rd, spec, cov, penalty, opts);
        write_file(dir / "fit.json", [&](std::ostream& o) { write_fit_json(o, fit); });
        write_file(dir / "coefficients.csv", [&](std::ostream& o) { write_coefficients_csv(o, fit); });
        log << region << ' ' << spec.label << ": loglik " << csv::format(fit.unpenalized_ll) << ", edf "
            << csv::format(fit.edf) << ", lambda search " << fit.lambda_search
            << (fit.converged ? "" : ", NOT CONVERGED") << '\n';
        if (!fit.converged) status = kExitConvergence;
      } catch (const FitError& e) {
        log << region << ' ' << spec.label << ": fit failed: " << e.what() << '\n';
        status = kExitConvergence;
      }
    }
  }
  return status;
}

int cmd_infer(const RunConfig& cfg, std::ostream& log) {
  const auto models = selected_models(cfg, {"mod4"});
  const auto regions = fitted_regions(cfg);
  const int m = static_cast<int>(regions.size());
  McOptions mc;
  mc.draws = cfg.draws;
  mc.seed = cfg.seed;
  mc.threads = cfg.threads;
  constexpr std::array functionals{Functional::RlDiff, Functional::RiskRatio, Functional::LocChange,
                                   Functional::ScaleChange};
  for (const auto& region : regions)
    for (const auto& spec : models) {
      const FitResult fit = load_fit(cfg, region, spec.label);
      ReturnSpec rs;
      rs.p = cfg.p;
      rs.t_from = cfg.year_from ? year_index(fit.years, *cfg.year_from, "--year-from") : 0;
      rs.t_to = cfg.year_to ? year_index(fit.years, *cfg.year_to, "--year-to") : fit.years.size() - 1;
      rs.validate(fit.years.size());
      const fs::path dir = cfg.model_dir(region, spec.label);
      for (Functional f : functionals) {
        const std::string name(functional_name(f));
        const IntervalField iv = mc_intervals(fit, f, rs, mc);
        write_file(dir / ("intervals_" + name + ".csv"),
                   [&](std::ostream& o) { write_interval_csv(o, iv, fit.box_ids); });
        const RegionalIntervals ri = regional_mc_intervals(fit, f, rs, fit.regions, m, mc);
        write_file(dir / ("regional_" + name + ".json"),
                   [&](std::ostream& o) { write_regional_json(o, ri, rs, fit.years); });
        for (const auto& r : ri.regions)
          log << region << ' ' << spec.label << ' ' << name << ": " << csv::format(r.estimate) << " ["
              << csv::format(r.lower) << ", " << csv::format(r.upper) << "]\n";
      }
      json wald = json::object();
      for (const char* block : {"mu1", "sigma1"}) {
        if (block_indices(fit, block).empty()) continue;
        try {
          const WaldTest w = wald_zero_test(fit, block);
          wald[block] = {{"statistic", w.statistic}, {"edf", w.edf}, {"df", w.df}, {"p_value", w.p_value}};
        } catch (const DomainError& e) {
          wald[block] = {{"error", e.what()}};
        }
      }
      write_file(dir / "wald.json", [&](std::ostream& o) { o << wald.dump(2) << '\n'; });
    }
  return kExitOk;
}

int cmd_cv(const RunConfig& cfg, std::ostream& log) {
  const GriddedDataset data = load_dataset(cfg, log);
  const CovariateSeries cov = load_covariate(cfg, data);
  const auto models = selected_models(cfg, {"mod1", "mod2", "mod3", "mod4", "mod5"});
  int status = kExitOk;
  std::vector<std::pair<std::string, ScoreReport>> table;
  for (const auto& region : selected_regions(cfg, data.grid.regions())) {
    const GriddedDataset rd = data.region(region);
    const PenaltyMatrix penalty = build_penalty(build_neighborhood(rd.grid));
    const FoldAssignment folds = make_folds(rd, cfg.folds, cfg.seed);
    std::vector<ScoreReport> reports;
    for (const auto& spec : models) {
      reports.push_back(cross_validate(rd, spec, cov, penalty, folds, FitOptions{}, cfg.threads));
      const auto& rep = reports.back();
      log << region << ' ' << spec.label << ": CRP " << csv::format(rep.mean.crp) << ", WCRP "
          << csv::format(rep.mean.wcrp) << (rep.ok ? "" : " (" + rep.error + ")") << '\n';
      if (!rep.ok) status = kExitConvergence;
      table.emplace_back(region, rep);
    }
    const fs::path dir = cfg.region_dir(region);
    write_file(dir / "scores.csv", [&](std::ostream& o) { write_scores_csv(o, reports); });
    write_file(dir / "cv_summary.json", [&](std::ostream& o) { write_score_summary_json(o, reports); });
  }
  write_file(fs::path(cfg.out) / "cv_summary.csv", [&](std::ostream& o) {
    o << "region,model,n,se,ds,crp,wcrp,ok\n";
    for (const auto& [region, rep] : table)
      o << region << ',' << rep.model << ',' << rep.records.size() << ',' << csv::format(rep.mean.se) << ','
        << csv::format(rep.mean.ds) << ',' << csv::format(rep.mean.crp) << ',' << csv::format(rep.mean.wcrp) << ','
        << (rep.ok ? "true" : "false") << '\n';
  });
  return status;
}

namespace {

struct TestRow {
  std::string region;
  std::string model_a;
  std::string model_b;
  std::size_t n = 0;
  ExchangeabilityResult crp;
  ExchangeabilityResult wcrp;
};

const ScoreReport& find_model(const std::vector<ScoreReport>& reports, const std::string& model,
                              const std::string& source) {
  for (const auto& r : reports)
    if (r.model == model) return r;
  throw ValidationError("model '" + model + "' has no scores in " + source);
}

TestRow compare(const std::string& region, const ScoreReport& a, const ScoreReport& b, const RunConfig& cfg) {
  std::map<std::pair<std::int64_t, int>, const ScoreRecord*> by_cell;
  for (const auto& r : b.records)
    if (!by_cell.emplace(std::make_pair(r.box_id, r.year), &r).second)
      throw ValidationError("duplicate score for box " + std::to_string(r.box_id) + " year " + std::to_string(r.year));
  if (a.records.size() != b.records.size()) throw ValidationError("score files cover different observations");
  std::vector<double> crp_a, crp_b, wcrp_a, wcrp_b;
  for (const auto& r : a.records) {
    const auto it = by_cell.find({r.box_id, r.year});
    if (it == by_cell.end())
      throw ValidationError("box " + std::to_string(r.box_id) + " year " + std::to_string(r.year) +
                            " is scored for " + a.model + " only");
    crp_a.push_back(r.crp);
    crp_b.push_back(it->second->crp);
    wcrp_a.push_back(r.wcrp);
    wcrp_b.push_back(it->second->wcrp);
  }
  TestRow row{region, a.model, b.model, crp_a.size(), {}, {}};
  row.crp = exchangeability_test(crp_a, crp_b, cfg.reps, cfg.seed, cfg.threads);
  row.wcrp = exchangeability_test(wcrp_a, wcrp_b, cfg.reps, cfg.seed, cfg.threads);
  return row;
}

}  // namespace

int cmd_test(const RunConfig& cfg, std::ostream& log) {
  if (cfg.models.size() != 0 && cfg.models.size() != 2) throw ValidationError("test compares exactly two models");
  std::vector<TestRow> rows;
  if (cfg.scores.size() == 2) {
    auto in_a = open_input(cfg.scores[0]);
    auto in_b = open_input(cfg.scores[1]);
    const auto a = read_scores_csv(in_a, cfg.scores[0]);
    const auto b = read_scores_csv(in_b, cfg.scores[1]);
    if (a.empty() || b.empty()) throw ValidationError("score file is empty");
    const ScoreReport& ra = cfg.models.empty() ? a.front() : find_model(a, cfg.models[0], cfg.scores[0]);
    const ScoreReport& rb = cfg.models.empty() ? b.front() : find_model(b, cfg.models[1], cfg.scores[1]);
    rows.push_back(compare("all", ra, rb, cfg));
  } else if (cfg.scores.size() > 2) {
    throw ValidationError("test takes one or two score files");
  } else {
    for (const auto& region : fitted_regions(cfg)) {
      const std::string path =
          cfg.scores.empty() ? (fs::path(cfg.region_dir(region)) / "scores.csv").string() : cfg.scores[0];
      auto in = open_input(path);
      const auto reports = read_scores_csv(in, path);
      std::vector<const ScoreReport*> pair;
      if (cfg.models.size() == 2) {
        pair = {&find_model(reports, cfg.models[0], path), &find_model(reports, cfg.models[1], path)};
      } else {
        std::vector<const ScoreReport*> ranked;
        for (const auto& r : reports)
          if (std::isfinite(r.mean.crp)) ranked.push_back(&r);
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const ScoreReport* x, const ScoreReport* y) { return x->mean.crp < y->mean.crp; });
        if (ranked.size() < 2) throw ValidationError(path + " needs scores of at least two models");
        pair = {ranked[0], ranked[1]};
      }
      rows.push_back(compare(region, *pair[0], *pair[1], cfg));
    }
  }

  const double m = static_cast<double>(rows.size());
  auto adjusted = [m](double p) { return std::min(1.0, p * m); };
  json j;
  j["replicates"] = cfg.reps;
  j["seed"] = cfg.seed;
  j["bonferroni_m"] = rows.size();
  json tests = json::array();
  for (const auto& r : rows) {
    for (const auto* res : {&r.crp, &r.wcrp})
      if (!res->warning.empty()) log << "warning: " << r.region << ' ' << r.model_a << '/' << r.model_b << ": " << res->warning << '\n';
    log << r.region << ' ' << r.model_a << " vs " << r.model_b << ": CRP p = " << csv::format(r.crp.p_value)
        << ", WCRP p = " << csv::format(r.wcrp.p_value) << '\n';
    json row = {{"region", r.region},
                {"model_a", r.model_a},
                {"model_b", r.model_b},
                {"n", r.n}};
    for (const auto& [key, res] : {std::pair{"crp", &r.crp}, std::pair{"wcrp", &r.wcrp}}) {
      json t = {{"t_obs", res->t_obs},
                {"p_value", res->p_value},
                {"p_bonferroni", adjusted(res->p_value)},
                {"swapped", res->swapped},
                {"degenerate", res->degenerate}};
      if (!res->warning.empty()) t["warning"] = res->warning;
      row[key] = t;
    }
    tests.push_back(row);
  }
  j["tests"] = tests;
  const fs::path out = cfg.out;
  write_file(out / "test.json", [&](std::ostream& o) { o << j.dump(2) << '\n'; });
  write_file(out / "test.csv", [&](std::ostream& o) {
    o << "region,model_a,model_b,n,crp_p,crp_p_bonferroni,wcrp_p,wcrp_p_bonferroni\n";
    for (const auto& r : rows)
      o << r.region << ',' << r.model_a << ',' << r.model_b << ',' << r.n << ',' << csv::format(r.crp.p_value) << ','
        << csv::format(adjusted(r.crp.p_value)) << ',' << csv::format(r.wcrp.p_value) << ','
        << csv::format(adjusted(r.wcrp.p_value)) << '\n';
  });
  return kExitOk;
}

int cmd_diagnose(const RunConfig& cfg, std::ostream& log) {
  const GriddedDataset data = load_dataset(cfg, log);
  const auto models = selected_models(cfg, {"mod4"});
  for (const auto& region : fitted_regions(cfg))
    for (const auto& spec : models) {
      const FitResult fit = load_fit(cfg, region, spec.label);
      const GriddedDataset rd = data_for_fit(data, fit);
      const auto pit = pit_values(fit.field, fit.frame, rd);
      const auto hist = pit_histogram(pit);
      const GumbelResiduals res = gumbel_residuals(fit.field, fit.frame, rd);
      const auto finite = res.finite();
      const PearsonResiduals pearson = pearson_residuals(fit.field, fit.frame, rd);
      const fs::path dir = cfg.model_dir(region, spec.label);
      write_file(dir / "pit_histogram.csv", [&](std::ostream& o) { write_pit_histogram_csv(o, hist); });
      write_file(dir / "pearson.csv", [&](std::ostream& o) { write_pearson_csv(o, pearson, fit.box_ids); });

      json j;
      j["n_observations"] = pit.size();
      j["support_violations"] = res.n_violations;
      j["pit_ks_statistic"] = pit.empty() ? json(nullptr) : json(ks_statistic(pit));
      j["pearson_flagged"] = pearson.total_flagged;
      if (finite.size() >= 2) {
        const PlotPoints pts = pp_qq_points(finite);
        write_file(dir / "pp_qq.csv", [&](std::ostream& o) { write_plot_points_csv(o, pts); });
        j["max_pp_deviation"] = max_pp_deviation(pts);
      } else {
        j["max_pp_deviation"] = nullptr;
      }
      double zmax = -INFINITY;
      for (double z : finite) zmax = std::max(zmax, z);
      j["max_residual"] = number_or_null(zmax);
      json ref = json::array();
      for (const auto& g : gumbel_reference_quantiles()) ref.push_back({{"z", g.z}, {"probability", g.probability}});
      j["gumbel_reference"] = ref;
      write_file(dir / "diagnostics.json", [&](std::ostream& o) { o << j.dump(2) << '\n'; });
      log << region << ' ' << spec.label << ": " << pit.size() << " observations, " << res.n_violations
          << " outside the support, PIT KS " << csv::format(pit.empty() ? NAN : ks_statistic(pit)) << '\n';
    }
  return kExitOk;
}

}  // namespace smoothgev::cli
