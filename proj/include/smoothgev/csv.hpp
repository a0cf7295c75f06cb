#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace smoothgev::csv {

/// A header plus rows of trimmed string cells. No quoting support: the
/// formats used here never embed commas.
struct Table {
  std::string source;  ///< name used in error messages
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  ///< 1-based source line of each row

  /// Column position; throws ValidationError if absent.
  std::size_t column(std::string_view name) const;
  std::optional<std::size_t> find_column(std::string_view name) const;

  /// Cell accessors that throw ValidationError naming the file, line and column.
  double number(std::size_t row, std::size_t col) const;
  std::optional<double> optional_number(std::size_t row, std::size_t col) const;
  long long integer(std::size_t row, std::size_t col) const;
  const std::string& text(std::size_t row, std::size_t col) const { return rows[row][col]; }

  [[noreturn]] void fail(std::size_t row, const std::string& message) const;
};

Table read(std::istream& in, std::string source = "<stream>");
Table read_file(const std::string& path);

/// Shortest decimal text that parses back to exactly `value`; empty for NaN.
std::string format(double value);

}  // namespace smoothgev::csv
