#include "smoothgev/grid.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <queue>
#include <set>

#include "smoothgev/csv.hpp"
#include "smoothgev/errors.hpp"

namespace smoothgev {

namespace {

double min_gap(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double d = v[i] - v[i - 1];
    if (d > 1e-9) gap = std::min(gap, d);
  }
  return gap;
}

long lattice_coord(double value, double origin, double spacing, std::int64_t id) {
  const double steps = (value - origin) / spacing;
  const long k = std::lround(steps);
  if (std::abs(steps - static_cast<double>(k)) > 1e-6)
    throw ValidationError("box " + std::to_string(id) + " is not on the " +
                          std::to_string(spacing) + "-degree lattice");
  return k;
}

}  // namespace

Grid::Grid(std::vector<GridBox> boxes, std::optional<double> spacing) : boxes_(std::move(boxes)) {
  if (boxes_.empty()) {
    spacing_ = spacing.value_or(1.0);
    return;
  }
  std::vector<double> lons, lats;
  for (std::size_t i = 0; i < boxes_.size(); ++i) {
    const auto& b = boxes_[i];
    if (!std::isfinite(b.lon) || !std::isfinite(b.lat) || !std::isfinite(b.elevation_km))
      throw ValidationError("box " + std::to_string(b.id) + " has non-finite metadata");
    if (!by_id_.emplace(b.id, i).second)
      throw ValidationError("duplicate box id " + std::to_string(b.id));
    lons.push_back(b.lon);
    lats.push_back(b.lat);
  }
  if (spacing) {
    if (!(*spacing > 0.0)) throw ValidationError("grid spacing must be positive");
    spacing_ = *spacing;
  } else {
    const double g = std::min(min_gap(lons), min_gap(lats));
    spacing_ = std::isfinite(g) ? g : 1.0;
  }
  const double lon0 = *std::min_element(lons.begin(), lons.end());
  const double lat0 = *std::min_element(lats.begin(), lats.end());
  std::set<std::pair<long, long>> seen;
  lattice_.reserve(boxes_.size());
  for (const auto& b : boxes_) {
    const std::pair<long, long> cell{lattice_coord(b.lon, lon0, spacing_, b.id),
                                     lattice_coord(b.lat, lat0, spacing_, b.id)};
    if (!seen.insert(cell).second)
      throw ValidationError("box " + std::to_string(b.id) + " duplicates the coordinates of another box");
    lattice_.push_back(cell);
  }
}

std::optional<std::size_t> Grid::index_of(std::int64_t id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Grid::regions() const {
  std::vector<std::string> out;
  for (const auto& b : boxes_)
    if (std::find(out.begin(), out.end(), b.region) == out.end()) out.push_back(b.region);
  return out;
}

Grid Grid::subset(std::span<const std::size_t> indices) const {
  std::vector<GridBox> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) picked.push_back(boxes_.at(i));
  return Grid(std::move(picked), spacing_);
}

std::vector<int> Neighborhood::components() const {
  std::vector<int> label(adjacency.size(), -1);
  int next = 0;
  for (std::size_t s = 0; s < adjacency.size(); ++s) {
    if (label[s] >= 0) continue;
    std::queue<std::size_t> q;
    q.push(s);
    label[s] = next;
    while (!q.empty()) {
      const std::size_t i = q.front();
      q.pop();
      for (std::size_t j : adjacency[i]) {
        if (label[j] < 0) {
          label[j] = next;
          q.push(j);
        }
      }
    }
    ++next;
  }
  return label;
}

Neighborhood build_neighborhood(const Grid& grid) {
  std::map<std::pair<long, long>, std::size_t> at;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!at.emplace(grid.lattice(i), i).second)
      throw ValidationError("duplicate coordinates for box " + std::to_string(grid.box(i).id));
  }
  Neighborhood nb;
  nb.adjacency.resize(grid.size());
  constexpr std::pair<long, long> kSteps[] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto [x, y] = grid.lattice(i);
    for (const auto& [dx, dy] : kSteps) {
      const auto it = at.find({x + dx, y + dy});
      if (it != at.end()) nb.adjacency[i].push_back(it->second);
    }
    std::sort(nb.adjacency[i].begin(), nb.adjacency[i].end());
  }
  return nb;
}

double PenaltyMatrix::quadratic_form(const Eigen::VectorXd& v) const {
  if (v.size() != S.rows()) throw ValidationError("vector length does not match the penalty matrix");
  double total = 0.0;
  for (const auto& [i, j] : edges) {
    const double d = v[i] - v[j];
    total += d * d;
  }
  return total;
}

Eigen::VectorXd PenaltyMatrix::apply(const Eigen::VectorXd& v) const {
  if (v.size() != S.rows()) throw ValidationError("vector length does not match the penalty matrix");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
  for (const auto& [i, j] : edges) {
    const double d = v[i] - v[j];
    out[i] += d;
    out[j] -= d;
  }
  return out;
}

PenaltyMatrix build_penalty(const Neighborhood& nb) {
  const auto n = static_cast<Eigen::Index>(nb.size());
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t i = 0; i < nb.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    trips.emplace_back(ii, ii, static_cast<double>(nb.adjacency[i].size()));
    for (std::size_t j : nb.adjacency[i]) trips.emplace_back(ii, static_cast<Eigen::Index>(j), -1.0);
  }
  PenaltyMatrix p;
  for (std::size_t i = 0; i < nb.size(); ++i)
    for (std::size_t j : nb.adjacency[i])
      if (i < j) p.edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
  p.S.resize(n, n);
  p.S.setFromTriplets(trips.begin(), trips.end());
  p.S.makeCompressed();
  p.component = nb.components();
  p.n_components =
      p.component.empty() ? 0 : *std::max_element(p.component.begin(), p.component.end()) + 1;

  // Matrix-tree theorem: pdet of a component's Laplacian is its size times the
  // determinant of the Laplacian with one row and column removed.
  std::vector<int> size(static_cast<std::size_t>(p.n_components), 0);
  std::vector<Eigen::Index> reduced(nb.size(), -1);
  Eigen::Index m = 0;
  for (std::size_t i = 0; i < nb.size(); ++i) {
    if (size[static_cast<std::size_t>(p.component[i])]++ > 0) reduced[i] = m++;
  }
  for (int c : size) p.log_pdet += std::log(static_cast<double>(c));
  if (m > 0) {
    std::vector<Eigen::Triplet<double>> rt;
    for (int col = 0; col < p.S.outerSize(); ++col)
      for (Eigen::SparseMatrix<double>::InnerIterator it(p.S, col); it; ++it)
        if (reduced[it.row()] >= 0 && reduced[it.col()] >= 0) rt.emplace_back(reduced[it.row()], reduced[it.col()], it.value());
    Eigen::SparseMatrix<double> r(m, m);
    r.setFromTriplets(rt.begin(), rt.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(r);
    if (ldlt.info() != Eigen::Success) throw ValidationError("penalty matrix factorization failed");
    p.log_pdet += ldlt.vectorD().array().log().sum();
  }
  return p;
}

std::size_t GriddedDataset::observed_count(std::size_t box) const {
  std::size_t c = 0;
  for (std::size_t t = 0; t < n_years(); ++t) c += missing(box, t) ? 0 : 1;
  return c;
}

std::size_t GriddedDataset::observed_count() const {
  std::size_t c = 0;
  for (std::size_t i = 0; i < n_boxes(); ++i) c += observed_count(i);
  return c;
}

std::optional<std::size_t> GriddedDataset::year_index(int year) const {
  const auto it = std::find(years.begin(), years.end(), year);
  if (it == years.end()) return std::nullopt;
  return static_cast<std::size_t>(it - years.begin());
}

GriddedDataset GriddedDataset::subset(std::span<const std::size_t> boxes) const {
  GriddedDataset out;
  out.grid = grid.subset(boxes);
  out.years = years;
  out.txx.resize(static_cast<Eigen::Index>(boxes.size()), txx.cols());
  for (std::size_t k = 0; k < boxes.size(); ++k)
    out.txx.row(static_cast<Eigen::Index>(k)) = txx.row(static_cast<Eigen::Index>(boxes[k]));
  return out;
}

GriddedDataset GriddedDataset::region(const std::string& label) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n_boxes(); ++i)
    if (grid.box(i).region == label) idx.push_back(i);
  if (idx.empty()) throw ValidationError("region '" + label + "' has no grid boxes");
  return subset(idx);
}

int days_in_year(int year) {
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  return leap ? 366 : 365;
}

std::optional<double> annual_maximum(std::span<const double> daily, int expected_days) {
  int missing = std::max(0, expected_days - static_cast<int>(daily.size()));
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (double v : daily) {
    if (std::isnan(v)) {
      ++missing;
      continue;
    }
    any = true;
    best = std::max(best, v);
  }
  if (!any || missing > kMaxMissingDays) return std::nullopt;
  return best;
}

GriddedDataset extract_txx(const Grid& grid, std::span<const DailySeries> daily) {
  int first = std::numeric_limits<int>::max();
  int last = std::numeric_limits<int>::min();
  for (const auto& s : daily)
    for (const auto& y : s.years) {
      first = std::min(first, y.year);
      last = std::max(last, y.year);
    }
  GriddedDataset out;
  out.grid = grid;
  if (first > last) throw ValidationError("daily input contains no years");
  for (int y = first; y <= last; ++y) out.years.push_back(y);
  out.txx = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(grid.size()),
                                      static_cast<Eigen::Index>(out.years.size()),
                                      std::numeric_limits<double>::quiet_NaN());
  for (const auto& s : daily) {
    const auto box = grid.index_of(s.box_id);
    if (!box) throw ValidationError("daily series for unknown box " + std::to_string(s.box_id));
    for (const auto& y : s.years) {
      if (auto m = annual_maximum(y.tmax, days_in_year(y.year)))
        out.txx(static_cast<Eigen::Index>(*box), y.year - first) = *m;
    }
  }
  return out;
}

namespace {

// Day of year (0-based) from an ISO-8601 date, validating the calendar.
std::pair<int, int> parse_iso_date(const std::string& text, const csv::Table& t, std::size_t row) {
  int y = 0, m = 0, d = 0;
  char dash1 = 0, dash2 = 0;
  if (text.size() != 10 || std::sscanf(text.c_str(), "%4d%c%2d%c%2d", &y, &dash1, &m, &dash2, &d) != 5 ||
      dash1 != '-' || dash2 != '-')
    t.fail(row, "date '" + text + "' is not YYYY-MM-DD");
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = days_in_year(y) == 366;
  if (m < 1 || m > 12) t.fail(row, "invalid month in '" + text + "'");
  const int month_days = kDays[m - 1] + (m == 2 && leap ? 1 : 0);
  if (d < 1 || d > month_days) t.fail(row, "invalid day in '" + text + "'");
  int doy = d - 1;
  for (int k = 0; k < m - 1; ++k) doy += kDays[k] + (k == 1 && leap ? 1 : 0);
  return {y, doy};
}

}  // namespace

std::vector<DailySeries> read_daily_csv(std::istream& in, const std::string& source) {
  const csv::Table t = csv::read(in, source);
  const auto cb = t.column("box_id"), cd = t.column("date"), cv = t.column("tmax_celsius");
  std::map<std::int64_t, std::map<int, DailyYear>> acc;
  std::set<std::tuple<std::int64_t, int, int>> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto id = t.integer(r, cb);
    const auto [year, doy] = parse_iso_date(t.text(r, cd), t, r);
    if (!seen.emplace(id, year, doy).second) t.fail(r, "duplicate (box_id, date) row");
    auto& dy = acc[id][year];
    if (dy.tmax.empty()) {
      dy.year = year;
      dy.tmax.assign(static_cast<std::size_t>(days_in_year(year)), std::numeric_limits<double>::quiet_NaN());
    }
    if (auto v = t.optional_number(r, cv)) dy.tmax[static_cast<std::size_t>(doy)] = *v;
  }
  std::vector<DailySeries> out;
  for (auto& [id, years] : acc) {
    DailySeries s;
    s.box_id = id;
    for (auto& [y, dy] : years) s.years.push_back(std::move(dy));
    out.push_back(std::move(s));
  }
  return out;
}

Grid read_grid_csv(std::istream& in, const std::string& source) {
  const csv::Table t = csv::read(in, source);
  const auto ci = t.column("box_id"), clon = t.column("lon"), clat = t.column("lat"),
             ce = t.column("elevation_km"), cr = t.column("region");
  std::vector<GridBox> boxes;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    GridBox b;
    b.id = t.integer(r, ci);
    b.lon = t.number(r, clon);
    b.lat = t.number(r, clat);
    b.elevation_km = t.number(r, ce);
    b.region = t.text(r, cr);
    if (b.region.empty()) t.fail(r, "empty region label");
    boxes.push_back(std::move(b));
  }
  if (boxes.empty()) throw ValidationError(source + ": grid has no boxes");
  return Grid(std::move(boxes));
}

GriddedDataset ingest_dataset(std::istream& txx_in, std::istream& grid_in, IngestReport* report,
                              const std::string& txx_source, const std::string& grid_source) {
  const Grid grid = read_grid_csv(grid_in, grid_source);
  const csv::Table t = csv::read(txx_in, txx_source);
  const auto cb = t.column("box_id"), cy = t.column("year"), cv = t.column("txx_celsius");

  struct Row {
    std::size_t box;
    int year;
    std::optional<double> value;
  };
  std::vector<Row> rows;
  std::set<std::pair<std::size_t, int>> seen;
  int first = std::numeric_limits<int>::max(), last = std::numeric_limits<int>::min();
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto id = t.integer(r, cb);
    const auto box = grid.index_of(id);
    if (!box) t.fail(r, "box_id " + std::to_string(id) + " is not in the grid file");
    const int year = static_cast<int>(t.integer(r, cy));
    if (!seen.emplace(*box, year).second)
      t.fail(r, "duplicate row for box_id " + std::to_string(id) + ", year " + std::to_string(year));
    rows.push_back({*box, year, t.optional_number(r, cv)});
    first = std::min(first, year);
    last = std::max(last, year);
  }
  if (rows.empty()) throw ValidationError(txx_source + ": no data rows");

  GriddedDataset all;
  all.grid = grid;
  for (int y = first; y <= last; ++y) all.years.push_back(y);
  all.txx = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(grid.size()),
                                      static_cast<Eigen::Index>(all.years.size()),
                                      std::numeric_limits<double>::quiet_NaN());
  for (const auto& r : rows)
    if (r.value) all.txx(static_cast<Eigen::Index>(r.box), r.year - first) = *r.value;

  IngestReport local;
  IngestReport& rep = report ? *report : local;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (all.observed_count(i) == 0) {
      rep.dropped_boxes.push_back(grid.box(i).id);
      rep.warnings.push_back("box " + std::to_string(grid.box(i).id) +
                             " has no observed year and was dropped");
    } else {
      keep.push_back(i);
    }
  }
  if (keep.empty()) throw ValidationError("no grid box has any observed year");
  GriddedDataset out = keep.size() == grid.size() ? std::move(all) : all.subset(keep);
  for (const auto& b : out.grid.boxes()) ++rep.region_counts[b.region];
  return out;
}

GriddedDataset ingest_dataset(const std::string& txx_path, const std::string& grid_path,
                              IngestReport* report) {
  std::ifstream txx(txx_path), grid(grid_path);
  if (!txx) throw ValidationError("cannot open '" + txx_path + "'");
  if (!grid) throw ValidationError("cannot open '" + grid_path + "'");
  return ingest_dataset(txx, grid, report, txx_path, grid_path);
}

void write_grid_csv(std::ostream& out, const Grid& grid) {
  out << "box_id,lon,lat,elevation_km,region\n";
  for (const auto& b : grid.boxes())
    out << b.id << ',' << csv::format(b.lon) << ',' << csv::format(b.lat) << ','
        << csv::format(b.elevation_km) << ',' << b.region << '\n';
}

void write_txx_csv(std::ostream& out, const GriddedDataset& data) {
  out << "box_id,year,txx_celsius\n";
  for (std::size_t i = 0; i < data.n_boxes(); ++i)
    for (std::size_t t = 0; t < data.n_years(); ++t)
      out << data.grid.box(i).id << ',' << data.years[t] << ','
          << csv::format(data.txx(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t))) << '\n';
}

}  // namespace smoothgev
