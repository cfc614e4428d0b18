#include "aerostate/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "aerostate/error.hpp"

namespace aerostate::csv {

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = line.find(sep, pos);
    out.emplace_back(line.substr(pos, next == std::string_view::npos ? line.npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.pop_back();
    std::size_t i = 0;
    while (i < f.size() && (f[i] == ' ' || f[i] == '\t')) ++i;
    f.erase(0, i);
  }
  return out;
}

Table Table::read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError(path, 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

Table Table::parse(std::string_view text, std::string source_name) {
  Table t;
  t.source_ = std::move(source_name);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == text.npos ? text.npos : nl - pos);
    pos = (nl == text.npos) ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    auto fields = split(line);
    if (!have_header) {
      t.header_ = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header_.size()) {
      throw SchemaError(t.source_, line_no,
                        "expected " + std::to_string(t.header_.size()) + " fields, found " +
                            std::to_string(fields.size()));
    }
    t.rows_.push_back({line_no, std::move(fields)});
  }
  if (!have_header) throw SchemaError(t.source_, 0, "empty file (no header)");
  return t;
}

bool Table::has_column(std::string_view name) const {
  for (const auto& h : header_)
    if (h == name) return true;
  return false;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return i;
  throw SchemaError(source_, 1, "missing column '" + std::string(name) + "'");
}

double Table::number(const Row& row, std::size_t col) const {
  const std::string& s = row.fields.at(col);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw SchemaError(source_, row.line,
                      "column '" + header_[col] + "': not a finite number: '" + s + "'");
  }
  return v;
}

long Table::integer(const Row& row, std::size_t col) const {
  const std::string& s = row.fields.at(col);
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw SchemaError(source_, row.line,
                      "column '" + header_[col] + "': not an integer: '" + s + "'");
  }
  return v;
}

const std::string& Table::text(const Row& row, std::size_t col) const { return row.fields.at(col); }

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

}  // namespace aerostate::csv
