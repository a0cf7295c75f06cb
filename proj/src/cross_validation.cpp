#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "smoothgev/csv.hpp"
#include "smoothgev/errors.hpp"
#include "smoothgev/parallel.hpp"
#include "smoothgev/scoring.hpp"

namespace smoothgev {

ScoreSet mean_scores(std::span<const ScoreRecord> records) {
  ScoreSet m;
  if (records.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan, nan};
  }
  for (const auto& r : records) {
    m.se += r.se;
    m.ds += r.ds;
    m.crp += r.crp;
    m.wcrp += r.wcrp;
  }
  const double n = static_cast<double>(records.size());
  m.se /= n;
  m.ds /= n;
  m.crp /= n;
  m.wcrp /= n;
  return m;
}

ScoreReport cross_validate(const GriddedDataset& data, const ModelSpec& spec, const CovariateSeries& cov,
                           const PenaltyMatrix& penalty, const FoldAssignment& folds, const FitOptions& opts,
                           unsigned threads) {
  ScoreReport report;
  report.model = spec.label;
  const auto k = static_cast<std::size_t>(folds.k);
  for (std::size_t j = 0; j < folds.size(); ++j)
    if (folds.box[j] >= data.n_boxes() || folds.t[j] >= data.n_years() || data.missing(folds.box[j], folds.t[j]))
      throw ValidationError("fold assignment does not match the dataset");

  std::vector<std::vector<ScoreRecord>> per_fold(k);
  std::vector<std::string> errors(k);
  FitOptions fold_opts = opts;
  fold_opts.threads = 1;
  parallel_for(k, threads, [&](std::size_t f) {
    GriddedDataset train = data;
    for (std::size_t j = 0; j < folds.size(); ++j)
      if (static_cast<std::size_t>(folds.fold[j]) == f)
        train.txx(static_cast<Eigen::Index>(folds.box[j]), static_cast<Eigen::Index>(folds.t[j])) =
            std::numeric_limits<double>::quiet_NaN();
    try {
      const FitResult fit = fit_smooth(train, spec, cov, penalty, fold_opts);
      for (std::size_t j = 0; j < folds.size(); ++j) {
        if (static_cast<std::size_t>(folds.fold[j]) != f) continue;
        const std::size_t i = folds.box[j], t = folds.t[j];
        const double y = data.txx(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
        const ScoreSet s = score_all(gev_params_at(fit.field, fit.frame, i, t), y);
        per_fold[f].push_back({spec.label, static_cast<int>(f) + 1, data.grid.box(i).id, data.years[t], s.se, s.ds,
                               s.crp, s.wcrp});
      }
    } catch (const FitError& e) {
      errors[f] = "fold " + std::to_string(f + 1) + ": " + e.what();
    } catch (const ScoreError& e) {
      errors[f] = "fold " + std::to_string(f + 1) + ": " + e.what();
    }
  });
  for (std::size_t f = 0; f < k; ++f) {
    if (!errors[f].empty()) {
      report.ok = false;
      report.error += (report.error.empty() ? "" : "; ") + errors[f];
    }
    report.records.insert(report.records.end(), per_fold[f].begin(), per_fold[f].end());
  }
  report.mean = mean_scores(report.records);
  return report;
}

void write_scores_csv(std::ostream& out, std::span<const ScoreReport> reports) {
  out << "model,fold,box_id,year,se,ds,crp,wcrp\n";
  for (const auto& rep : reports)
    for (const auto& r : rep.records)
      out << r.model << ',' << r.fold << ',' << r.box_id << ',' << r.year << ',' << csv::format(r.se) << ','
          << csv::format(r.ds) << ',' << csv::format(r.crp) << ',' << csv::format(r.wcrp) << '\n';
}

std::vector<ScoreReport> read_scores_csv(std::istream& in, const std::string& source) {
  const csv::Table t = csv::read(in, source);
  const auto cm = t.column("model"), cf = t.column("fold"), cb = t.column("box_id"), cy = t.column("year");
  const auto cse = t.column("se"), cds = t.column("ds"), ccrp = t.column("crp"), cw = t.column("wcrp");
  std::vector<ScoreReport> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    ScoreRecord rec;
    rec.model = t.text(r, cm);
    rec.fold = static_cast<int>(t.integer(r, cf));
    rec.box_id = t.integer(r, cb);
    rec.year = static_cast<int>(t.integer(r, cy));
    rec.se = t.number(r, cse);
    rec.ds = t.number(r, cds);
    rec.crp = t.number(r, ccrp);
    rec.wcrp = t.number(r, cw);
    auto it = std::find_if(out.begin(), out.end(), [&](const ScoreReport& s) { return s.model == rec.model; });
    if (it == out.end()) {
      out.push_back({});
      out.back().model = rec.model;
      it = out.end() - 1;
    }
    it->records.push_back(rec);
  }
  for (auto& rep : out) rep.mean = mean_scores(rep.records);
  return out;
}

void write_score_summary_json(std::ostream& out, std::span<const ScoreReport> reports) {
  nlohmann::json rows = nlohmann::json::array();
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  for (const auto& rep : reports) {
    nlohmann::json row = {{"model", rep.model},
                          {"n", rep.records.size()},
                          {"se", num(rep.mean.se)},
                          {"ds", num(rep.mean.ds)},
                          {"crp", num(rep.mean.crp)},
                          {"wcrp", num(rep.mean.wcrp)},
                          {"ok", rep.ok}};
    if (!rep.ok) row["error"] = rep.error;
    rows.push_back(row);
  }
  nlohmann::json j;
  j["mean_scores"] = rows;
  out << j.dump(2) << '\n';
}

}  // namespace smoothgev
