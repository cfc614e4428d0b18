#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aerostate/calendar.hpp"
#include "aerostate/dataset.hpp"

namespace aerostate::ingest {

struct DailyPollutantRecord {
  Date date;
  std::string station_id;
  std::string pollutant_id;
  double value = 0.0;
};

struct AnnualPopulationRecord {
  int year = 0;
  double population = 0.0;
};

struct Average {
  double value = 0.0;
  int count = 0;
};

// Station mean for one day and pollutant. Returns nullopt for an empty set;
// throws ValidationError when the records disagree on date or pollutant.
std::optional<Average> daily_average(std::span<const DailyPollutantRecord> records_for_day);

// Mean of the available daily values within `week`, ignoring days before
// `study_start`. `count` is the number of contributing days.
std::optional<Average> weekly_average(const std::map<Date, double>& daily_values,
                                      const MmwrWeek& week, Date study_start);

struct PopulationLine {
  double intercept = 0.0;
  double slope = 0.0;  // persons per year

  double at(double fractional_year) const { return intercept + slope * fractional_year; }
};

// Ordinary least squares of population on calendar year. Throws DataError for
// fewer than two distinct years.
PopulationLine fit_population_line(std::span<const AnnualPopulationRecord> annual);

// Line evaluated at the week midpoint; throws DataError when not positive.
double weekly_population(const PopulationLine& line, const MmwrWeek& week);

struct StudySpan {
  Date start;
  Date end;
};

struct DroppedWeek {
  MmwrWeek week;
  std::vector<std::string> reasons;
};

struct IngestResult {
  WeeklyDataset dataset;
  std::vector<DroppedWeek> dropped;
  PopulationLine population_line;
};

// File readers (layouts documented in README). All throw SchemaError citing
// the first offending line.
std::vector<DailyPollutantRecord> read_pollutant_csv(const std::string& path);
std::map<Date, double> read_temperature_csv(const std::string& path);
std::map<std::pair<int, int>, std::map<std::string, long>> read_deaths_csv(const std::string& path);
std::vector<AnnualPopulationRecord> read_population_csv(const std::string& path);

struct DailySeries {
  std::map<std::string, std::map<Date, double>> by_pollutant;
};

// Day-level station averaging for every pollutant, restricted to the span.
DailySeries aggregate_daily(std::span<const DailyPollutantRecord> records, const StudySpan& span);

IngestResult build_dataset(std::span<const DailyPollutantRecord> pollutant_records,
                           const std::map<Date, double>& daily_temperature,
                           const std::map<std::pair<int, int>, std::map<std::string, long>>& deaths,
                           std::span<const AnnualPopulationRecord> population,
                           const StudySpan& span);

IngestResult build_dataset(const std::vector<std::string>& pollutant_files,
                           const std::string& temperature_file, const std::string& deaths_file,
                           const std::string& population_file, const StudySpan& span);

std::string drop_report(const IngestResult& result);

}  // namespace aerostate::ingest
