#include "aerostate/dataset.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "aerostate/csv.hpp"
#include "aerostate/error.hpp"

namespace aerostate {

CenteredSeries center_temperature(std::span<const double> raw) {
  if (raw.empty()) throw ValidationError("cannot center an empty temperature series");
  for (double v : raw)
    if (!std::isfinite(v)) throw ValidationError("temperature series contains non-finite values");
  CenteredSeries out;
  out.mean = std::accumulate(raw.begin(), raw.end(), 0.0) / static_cast<double>(raw.size());
  out.values.reserve(raw.size());
  for (double v : raw) out.values.push_back(v - out.mean);
  return out;
}

namespace {

template <typename Map>
std::vector<std::string> keys_of(const Map& m) {
  std::vector<std::string> out;
  for (const auto& [k, v] : m) out.push_back(k);
  return out;
}

}  // namespace

WeeklyDataset::WeeklyDataset(std::vector<WeeklyObservation> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) throw ValidationError("dataset has no rows");
  pollutants_ = keys_of(rows_.front().pollutant_levels);
  causes_ = keys_of(rows_.front().deaths);
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& r = rows_[i];
    const std::string where = "row " + to_string(r.week);
    if (i > 0 && !(rows_[i - 1].week < r.week))
      throw ValidationError(where + ": weeks must be strictly increasing");
    if (keys_of(r.pollutant_levels) != pollutants_ || keys_of(r.valid_days) != pollutants_)
      throw ValidationError(where + ": inconsistent pollutant columns");
    if (keys_of(r.deaths) != causes_) throw ValidationError(where + ": inconsistent cause columns");
    for (const auto& [id, v] : r.pollutant_levels)
      if (!std::isfinite(v)) throw ValidationError(where + ": non-finite level for " + id);
    for (const auto& [id, n] : r.valid_days)
      if (n < 0 || n > 7) throw ValidationError(where + ": valid-day count out of 0..7 for " + id);
    for (const auto& [id, c] : r.deaths)
      if (c < 0) throw ValidationError(where + ": negative death count for " + id);
    if (!(r.population > 0.0) || !std::isfinite(r.population))
      throw ValidationError(where + ": population must be positive");
  }
  std::vector<double> raw;
  raw.reserve(rows_.size());
  for (const auto& r : rows_) raw.push_back(r.temperature_raw);
  auto c = center_temperature(raw);
  centered_ = std::move(c.values);
  temperature_mean_ = c.mean;
}

std::size_t WeeklyDataset::grid_length() const {
  return static_cast<std::size_t>(weeks_between(rows_.front().week, rows_.back().week)) + 1;
}

std::size_t WeeklyDataset::grid_index(std::size_t i) const {
  return static_cast<std::size_t>(weeks_between(rows_.front().week, rows_.at(i).week));
}

bool WeeklyDataset::has_pollutant(const std::string& id) const {
  return rows_.front().pollutant_levels.count(id) > 0;
}

bool WeeklyDataset::has_cause(const std::string& id) const {
  return rows_.front().deaths.count(id) > 0;
}

std::string WeeklyDataset::to_csv() const {
  std::ostringstream out;
  out << "mmwr_year,mmwr_week";
  for (const auto& p : pollutants_) out << ',' << p;
  for (const auto& p : pollutants_) out << ',' << p << "_n";
  out << ",temp_centered,offset";
  for (const auto& c : causes_) out << ',' << c;
  out << '\n';
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& r = rows_[i];
    out << r.week.year << ',' << r.week.week;
    for (const auto& p : pollutants_) out << ',' << csv::format_number(r.pollutant_levels.at(p));
    for (const auto& p : pollutants_) out << ',' << r.valid_days.at(p);
    out << ',' << csv::format_number(centered_[i]) << ',' << csv::format_number(r.population);
    for (const auto& c : causes_) out << ',' << r.deaths.at(c);
    out << '\n';
  }
  return out.str();
}

void WeeklyDataset::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset to " + path);
  out << to_csv();
}

WeeklyDataset WeeklyDataset::read_csv(const std::string& path) {
  const auto table = csv::Table::read_file(path);
  const auto& header = table.header();
  const auto year_col = table.column("mmwr_year");
  const auto week_col = table.column("mmwr_week");
  const auto temp_col = table.column("temp_centered");
  const auto offset_col = table.column("offset");

  // Pollutant columns are those with a matching `<id>_n` column; the
  // remaining columns after `offset` are causes.
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> pollutants;
  std::vector<std::pair<std::string, std::size_t>> causes;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& h = header[c];
    if (c == year_col || c == week_col || c == temp_col || c == offset_col) continue;
    if (h.size() > 2 && h.ends_with("_n") && table.has_column(h.substr(0, h.size() - 2))) continue;
    if (table.has_column(h + "_n")) {
      pollutants.push_back({h, {c, table.column(h + "_n")}});
    } else if (c > offset_col) {
      causes.push_back({h, c});
    } else {
      throw SchemaError(path, 1, "unexpected column '" + h + "'");
    }
  }
  if (table.rows().empty()) throw SchemaError(path, 0, "dataset has no rows");

  std::vector<WeeklyObservation> rows;
  for (const auto& row : table.rows()) {
    WeeklyObservation obs;
    try {
      obs.week = mmwr_week(static_cast<int>(table.integer(row, year_col)),
                           static_cast<int>(table.integer(row, week_col)));
    } catch (const RangeError& e) {
      throw SchemaError(path, row.line, e.what());
    }
    for (const auto& [id, cols] : pollutants) {
      obs.pollutant_levels[id] = table.number(row, cols.first);
      obs.valid_days[id] = static_cast<int>(table.integer(row, cols.second));
    }
    obs.temperature_raw = table.number(row, temp_col);
    obs.population = table.number(row, offset_col);
    for (const auto& [id, col] : causes) obs.deaths[id] = table.integer(row, col);
    rows.push_back(std::move(obs));
  }
  try {
    WeeklyDataset ds(std::move(rows));
    // The column is already centered; keep it bit-for-bit.
    for (std::size_t i = 0; i < ds.rows_.size(); ++i) ds.centered_[i] = ds.rows_[i].temperature_raw;
    ds.temperature_mean_ = 0.0;
    return ds;
  } catch (const ValidationError& e) {
    throw SchemaError(path, 0, e.what());
  }
}

}  // namespace aerostate
