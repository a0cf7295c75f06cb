#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace smoothgev {

struct GridBox {
  std::int64_t id = 0;  ///< external box identifier
  double lon = 0.0;
  double lat = 0.0;
  double elevation_km = 0.0;
  std::string region;
};

/**
 * Grid boxes on (a subset of) a regular lon/lat lattice. Internal indices are
 * positions 0..n-1; external ids are kept for I/O.
 */
class Grid {
 public:
  Grid() = default;

  /// Validates unique ids and coordinates. The spacing is inferred as the
  /// smallest coordinate gap when not given; throws ValidationError when a
  /// box is not on the lattice.
  explicit Grid(std::vector<GridBox> boxes, std::optional<double> spacing = std::nullopt);

  std::size_t size() const noexcept { return boxes_.size(); }
  const GridBox& box(std::size_t i) const { return boxes_.at(i); }
  const std::vector<GridBox>& boxes() const noexcept { return boxes_; }
  double spacing() const noexcept { return spacing_; }

  /// Integer lattice position of box i relative to the minimum lon/lat.
  std::pair<long, long> lattice(std::size_t i) const { return lattice_.at(i); }

  std::optional<std::size_t> index_of(std::int64_t id) const;

  /// Distinct region labels in first-appearance order.
  std::vector<std::string> regions() const;

  Grid subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<GridBox> boxes_;
  std::vector<std::pair<long, long>> lattice_;
  std::map<std::int64_t, std::size_t> by_id_;
  double spacing_ = 1.0;
};

/// Edge-sharing neighbours of each box.
struct Neighborhood {
  std::vector<std::vector<std::size_t>> adjacency;

  std::size_t size() const noexcept { return adjacency.size(); }

  /// Connected-component label per box, labels 0..k-1 in order of first box.
  std::vector<int> components() const;
};

Neighborhood build_neighborhood(const Grid& grid);

/// Intrinsic GMRF structure matrix: S_ii = |N(i)|, S_ij = -1 for neighbours.
struct PenaltyMatrix {
  Eigen::SparseMatrix<double> S;
  std::vector<int> component;  ///< connected component of each box
  int n_components = 0;
  std::vector<std::pair<int, int>> edges;  ///< neighbour pairs, i < j
  double log_pdet = 0.0;  ///< log of the product of the nonzero eigenvalues of S

  std::size_t size() const noexcept { return static_cast<std::size_t>(S.rows()); }
  /// Rank n - (#components); the null space is spanned by component indicators.
  int rank() const noexcept { return static_cast<int>(size()) - n_components; }
  /// sum over neighbour pairs of (v_i - v_j)^2, which equals v' S v
  double quadratic_form(const Eigen::VectorXd& v) const;
  /// S v evaluated as sum_j (v_i - v_j), free of the cancellation in deg * v_i - sum v_j
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
};

PenaltyMatrix build_penalty(const Neighborhood& nb);

/**
 * Annual maxima on a grid: txx(i, t) is box i in calendar year years[t];
 * NaN marks a missing year. Years form a contiguous range.
 */
struct GriddedDataset {
  Grid grid;
  std::vector<int> years;
  Eigen::MatrixXd txx;

  std::size_t n_boxes() const noexcept { return grid.size(); }
  std::size_t n_years() const noexcept { return years.size(); }
  bool missing(std::size_t box, std::size_t t) const { return std::isnan(txx(box, t)); }
  std::size_t observed_count(std::size_t box) const;
  std::size_t observed_count() const;
  std::optional<std::size_t> year_index(int year) const;

  GriddedDataset subset(std::span<const std::size_t> boxes) const;
  /// Boxes labelled `region`; throws ValidationError if none.
  GriddedDataset region(const std::string& label) const;
};

/**
 * TXx of one year of daily maxima (NaN = missing day). The year is missing
 * when more than 10 days are missing, counting days absent from `daily`
 * relative to `days_in_year`, or when no day is observed.
 */
std::optional<double> annual_maximum(std::span<const double> daily, int days_in_year);

inline constexpr int kMaxMissingDays = 10;

int days_in_year(int year);

struct DailyYear {
  int year = 0;
  std::vector<double> tmax;  ///< NaN = missing day
};

struct DailySeries {
  std::int64_t box_id = 0;
  std::vector<DailyYear> years;
};

/// Builds the annual-maximum table for the boxes of `grid` from daily series.
GriddedDataset extract_txx(const Grid& grid, std::span<const DailySeries> daily);

/// Reads `box_id, date, tmax_celsius` rows into one calendar-year slot array per box-year.
std::vector<DailySeries> read_daily_csv(std::istream& in, const std::string& source = "<daily>");

struct IngestReport {
  std::vector<std::string> warnings;
  std::vector<std::int64_t> dropped_boxes;
  std::map<std::string, std::size_t> region_counts;
};

Grid read_grid_csv(std::istream& in, const std::string& source = "<grid>");

/// Joins a txx table with grid metadata. Boxes with no observed year are
/// dropped with a warning; duplicate (box, year) rows and unknown boxes throw.
GriddedDataset ingest_dataset(std::istream& txx, std::istream& grid, IngestReport* report = nullptr,
                              const std::string& txx_source = "<txx>",
                              const std::string& grid_source = "<grid>");
GriddedDataset ingest_dataset(const std::string& txx_path, const std::string& grid_path,
                              IngestReport* report = nullptr);

void write_grid_csv(std::ostream& out, const Grid& grid);
void write_txx_csv(std::ostream& out, const GriddedDataset& data);

}  // namespace smoothgev
