#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace smoothgev::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitConvergence = 3;

/// Settings shared by every subcommand. Paths left empty fall back to files inside `out`.
struct RunConfig {
  std::string txx;
  std::string grid;
  std::string co2;
  std::string daily;
  std::string scenario;
  std::vector<std::string> scores;
  std::vector<std::string> models;   ///< empty selects the command default
  std::vector<std::string> regions;  ///< empty selects every region
  double p = 0.01;
  std::optional<int> year_from;
  std::optional<int> year_to;
  std::size_t draws = 2000;
  int folds = 5;
  std::size_t reps = 1000000;
  std::uint64_t seed = 1;
  bool seed_given = false;
  unsigned threads = 1;
  std::string out = "out";

  std::string txx_path() const;
  std::string grid_path() const;
  std::string co2_path() const;
  /// Directory of one region, `out/<region>`.
  std::string region_dir(const std::string& region) const;
  /// Directory of one fitted model, `out/<region>/<model>`.
  std::string model_dir(const std::string& region, const std::string& model) const;
};

int cmd_simulate(const RunConfig& cfg, std::ostream& log);
int cmd_ingest(const RunConfig& cfg, std::ostream& log);
int cmd_fit(const RunConfig& cfg, std::ostream& log);
int cmd_infer(const RunConfig& cfg, std::ostream& log);
int cmd_cv(const RunConfig& cfg, std::ostream& log);
int cmd_test(const RunConfig& cfg, std::ostream& log);
int cmd_diagnose(const RunConfig& cfg, std::ostream& log);

/**
 * Parses the command line (and an optional `--config` file of `key = value`
 * lines whose keys are the long flag names), runs the subcommand and maps
 * errors to exit codes: 2 for invalid input, 3 for a failed fit.
 */
int run(int argc, const char* const* argv, std::ostream& log, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& log, std::ostream& err);

}  // namespace smoothgev::cli
