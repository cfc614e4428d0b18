#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace aerostate::csv {

struct Row {
  std::size_t line = 0;  // 1-based line number in the source file
  std::vector<std::string> fields;
};

// Minimal reader for the unquoted comma-separated layouts used by the input
// and output files. Blank lines are skipped; `\r\n` endings are accepted.
class Table {
 public:
  static Table read_file(const std::string& path);
  static Table parse(std::string_view text, std::string source_name);

  const std::string& source() const noexcept { return source_; }
  const std::vector<std::string>& header() const noexcept { return header_; }
  const std::vector<Row>& rows() const noexcept { return rows_; }

  // Throws SchemaError naming the missing column.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;

  // Field accessors that raise SchemaError with the row's line number.
  double number(const Row& row, std::size_t col) const;
  long integer(const Row& row, std::size_t col) const;
  const std::string& text(const Row& row, std::size_t col) const;

 private:
  std::string source_;
  std::vector<std::string> header_;
  std::vector<Row> rows_;
};

std::vector<std::string> split(std::string_view line, char sep = ',');

// Shortest round-trippable decimal rendering, stable across runs.
std::string format_number(double v);

}  // namespace aerostate::csv
