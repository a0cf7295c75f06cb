#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "smoothgev/fit.hpp"
#include "smoothgev/gev.hpp"
#include "smoothgev/grid.hpp"
#include "smoothgev/model.hpp"

namespace smoothgev {

// All scores are negatively oriented: smaller is better.

/// (y - E[Y])^2; ScoreError when xi >= 1.
double score_se(const GevParams& f, double y);
/// ((y - E[Y]) / sd)^2 + log var; ScoreError when xi >= 1/2.
double score_ds(const GevParams& f, double y);
/// Continuous ranked probability score in closed form; ScoreError when xi >= 1.
double score_crp(const GevParams& f, double y);

using QuantileWeight = std::function<double(double)>;
/// w(p) = p^2, emphasising the upper tail.
double upper_tail_weight(double p);

/**
 * Quantile-weighted CRPS approximated by the sum
 *   (2/N) sum_{i=1}^{N-1} (1[y <= q_i] - p_i)(q_i - y) w(p_i),  p_i = i/N.
 */
double score_wcrp(const GevParams& f, double y, const QuantileWeight& w = upper_tail_weight, int n = 1000);

struct ScoreSet {
  double se = 0.0;
  double ds = 0.0;
  double crp = 0.0;
  double wcrp = 0.0;
};

ScoreSet score_all(const GevParams& f, double y);

/// Observation-level assignment to k folds; fold labels are 0..k-1.
struct FoldAssignment {
  int k = 5;
  std::uint64_t seed = 0;
  std::vector<std::size_t> box;
  std::vector<std::size_t> t;
  std::vector<int> fold;

  std::size_t size() const noexcept { return fold.size(); }
  std::size_t fold_size(int f) const;
};

/// Random split of the observed (box, year) cells: shuffle, then fold = position mod k.
FoldAssignment make_folds(const GriddedDataset& data, int k = 5, std::uint64_t seed = 1);

struct ScoreRecord {
  std::string model;
  int fold = 0;
  std::int64_t box_id = 0;
  int year = 0;
  double se = 0.0, ds = 0.0, crp = 0.0, wcrp = 0.0;
};

struct ScoreReport {
  std::string model;
  std::vector<ScoreRecord> records;
  ScoreSet mean;
  bool ok = true;
  std::string error;
};

/// Mean of each rule over the records.
ScoreSet mean_scores(std::span<const ScoreRecord> records);

/**
 * k-fold cross-validation: each fold is held out in turn, the model is fitted
 * to the rest and every held-out observation is scored against its fitted
 * predictive GEV. A failed fit marks the report as not ok.
 */
ScoreReport cross_validate(const GriddedDataset& data, const ModelSpec& spec, const CovariateSeries& cov,
                           const PenaltyMatrix& penalty, const FoldAssignment& folds, const FitOptions& opts = {},
                           unsigned threads = 1);

struct ExchangeabilityResult {
  double p_value = 1.0;
  double t_obs = 0.0;      ///< mean of the oriented differences, >= 0
  bool swapped = false;    ///< true when the second list had the higher mean
  bool degenerate = false; ///< T_obs = 0
  std::string warning;
  std::size_t replicates = 0;
};

/**
 * Randomization test of pairwise exchangeability of two score lists. The
 * differences d_i = a_i - b_i are oriented so that their mean is >= 0, and
 * p = (1/J) sum_j 1[T_j >= T_obs] over J random sign flips.
 */
ExchangeabilityResult exchangeability_test(std::span<const double> a, std::span<const double> b,
                                           std::size_t replicates = 1000000, std::uint64_t seed = 1,
                                           unsigned threads = 1);

void write_scores_csv(std::ostream& out, std::span<const ScoreReport> reports);
/// Records grouped by model in first-appearance order; means recomputed.
std::vector<ScoreReport> read_scores_csv(std::istream& in, const std::string& source = "<scores>");
/// Mean-score table, one row per model.
void write_score_summary_json(std::ostream& out, std::span<const ScoreReport> reports);

}  // namespace smoothgev
