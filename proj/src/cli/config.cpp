#include <exception>
#include <filesystem>
#include <functional>
#include <ostream>

#include <CLI11.hpp>

#include "smoothgev/cli.hpp"
#include "smoothgev/errors.hpp"

namespace smoothgev::cli {

namespace fs = std::filesystem;

std::string RunConfig::txx_path() const { return txx.empty() ? (fs::path(out) / "txx.csv").string() : txx; }
std::string RunConfig::grid_path() const { return grid.empty() ? (fs::path(out) / "grid.csv").string() : grid; }
std::string RunConfig::co2_path() const { return co2.empty() ? (fs::path(out) / "co2.csv").string() : co2; }

std::string RunConfig::region_dir(const std::string& region) const { return (fs::path(out) / region).string(); }

std::string RunConfig::model_dir(const std::string& region, const std::string& model) const {
  return (fs::path(out) / region / model).string();
}

int run(int argc, const char* const* argv, std::ostream& log, std::ostream& err) {
  CLI::App app{"Spatially smooth GEV models for gridded annual maxima"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "Read settings from a file of key = value lines");
  app.allow_config_extras(false);

  RunConfig cfg;
  int year_from = 0, year_to = 0;
  app.add_option("--txx", cfg.txx, "Annual maxima CSV (box_id, year, txx_celsius)");
  app.add_option("--grid", cfg.grid, "Grid CSV (box_id, lon, lat, elevation_km, region)");
  app.add_option("--co2", cfg.co2, "Covariate CSV (year, co2_ppm)");
  app.add_option("--daily", cfg.daily, "Daily maxima CSV (box_id, date, tmax_celsius)");
  app.add_option("--scenario", cfg.scenario, "Synthetic truth scenario JSON");
  app.add_option("--scores", cfg.scores, "Score CSV files to compare")->delimiter(',');
  app.add_option("--model", cfg.models, "Model names mod1..mod5, comma separated")->delimiter(',');
  app.add_option("--region", cfg.regions, "Region labels, comma separated")->delimiter(',');
  app.add_option("--p", cfg.p, "Annual exceedance probability of the return level")->capture_default_str();
  auto* opt_from = app.add_option("--year-from", year_from, "Reference year of the comparison");
  auto* opt_to = app.add_option("--year-to", year_to, "Target year of the comparison");
  app.add_option("--draws", cfg.draws, "Monte Carlo posterior draws")->capture_default_str();
  app.add_option("--folds", cfg.folds, "Cross-validation folds")->capture_default_str();
  app.add_option("--reps", cfg.reps, "Random sign flips of the exchangeability test")->capture_default_str();
  auto* opt_seed = app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", cfg.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--out", cfg.out, "Output directory")->capture_default_str();

  std::function<int(const RunConfig&, std::ostream&)> command;
  auto sub = [&](const char* name, const char* help, int (*fn)(const RunConfig&, std::ostream&)) {
    app.add_subcommand(name, help)->callback([&command, fn] { command = fn; });
  };
  sub("simulate", "Draw a synthetic dataset from a truth scenario", cmd_simulate);
  sub("ingest", "Validate and normalise input tables", cmd_ingest);
  sub("fit", "Fit smooth GEV models per region", cmd_fit);
  sub("infer", "Return-level, risk-ratio and parameter-change intervals", cmd_infer);
  sub("cv", "Cross-validated scores per region and model", cmd_cv);
  sub("test", "Exchangeability test of two models' scores", cmd_test);
  sub("diagnose", "PIT, residual plot data and Pearson summaries", cmd_diagnose);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, log, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, log, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, log, err);
    return kExitValidation;
  }
  if (opt_from->count() > 0) cfg.year_from = year_from;
  if (opt_to->count() > 0) cfg.year_to = year_to;
  cfg.seed_given = opt_seed->count() > 0;

  try {
    return command(cfg, log);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const FitError& e) {
    err << "fit failed: " << e.what() << '\n';
    return kExitConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int run(const std::vector<std::string>& args, std::ostream& log, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("smoothgev");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), log, err);
}

}  // namespace smoothgev::cli
