#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "aerostate/calendar.hpp"

namespace aerostate {

struct CenteredSeries {
  std::vector<double> values;
  double mean = 0.0;
};

// Subtracts the series mean. Throws ValidationError for an empty series or
// non-finite values.
CenteredSeries center_temperature(std::span<const double> raw);

struct WeeklyObservation {
  MmwrWeek week;
  std::map<std::string, double> pollutant_levels;  // weekly mean concentration, source units
  std::map<std::string, int> valid_days;           // n_t per pollutant, 0..7
  double temperature_raw = 0.0;                    // degrees C
  std::map<std::string, long> deaths;              // per cause
  double population = 0.0;                         // offset
};

/// Weekly modelling table. Rows are strictly increasing in MMWR order;
/// weeks removed during ingestion leave gaps, which downstream code treats as
/// missing weeks on the underlying weekly grid.
class WeeklyDataset {
 public:
  // Validates and centers temperature over the supplied rows.
  explicit WeeklyDataset(std::vector<WeeklyObservation> rows);

  const std::vector<WeeklyObservation>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }
  double temperature_mean() const noexcept { return temperature_mean_; }
  double centered_temperature(std::size_t i) const { return centered_.at(i); }
  const std::vector<double>& centered_temperatures() const noexcept { return centered_; }

  const std::vector<std::string>& pollutants() const noexcept { return pollutants_; }
  const std::vector<std::string>& causes() const noexcept { return causes_; }

  // Number of calendar weeks spanned from the first to the last row.
  std::size_t grid_length() const;
  // Position of row i on that grid.
  std::size_t grid_index(std::size_t i) const;
  bool gap_free() const { return grid_length() == size(); }

  bool has_pollutant(const std::string& id) const;
  bool has_cause(const std::string& id) const;

  // Dataset dump with columns
  // mmwr_year,mmwr_week,<pollutant>...,<pollutant>_n...,temp_centered,offset,<cause>...
  void write_csv(const std::string& path) const;
  std::string to_csv() const;
  // Reads a dump; the centered temperature column is taken as-is.
  static WeeklyDataset read_csv(const std::string& path);

 private:
  std::vector<WeeklyObservation> rows_;
  std::vector<double> centered_;
  double temperature_mean_ = 0.0;
  std::vector<std::string> pollutants_;
  std::vector<std::string> causes_;
};

}  // namespace aerostate
