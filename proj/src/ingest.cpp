#include "aerostate/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "aerostate/csv.hpp"
#include "aerostate/error.hpp"

namespace aerostate::ingest {

namespace {

// Sorting before summation makes the result independent of record order.
double ordered_mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

std::optional<Average> daily_average(std::span<const DailyPollutantRecord> records_for_day) {
  if (records_for_day.empty()) return std::nullopt;
  const auto& first = records_for_day.front();
  std::vector<double> values;
  values.reserve(records_for_day.size());
  for (const auto& r : records_for_day) {
    if (r.pollutant_id != first.pollutant_id)
      throw ValidationError("daily average over mixed pollutants: " + first.pollutant_id + " and " +
                            r.pollutant_id);
    if (r.date != first.date)
      throw ValidationError("daily average over mixed dates: " + format_date(first.date) + " and " +
                            format_date(r.date));
    values.push_back(r.value);
  }
  return Average{ordered_mean(std::move(values)), static_cast<int>(records_for_day.size())};
}

std::optional<Average> weekly_average(const std::map<Date, double>& daily_values,
                                      const MmwrWeek& week, Date study_start) {
  std::vector<double> values;
  for (auto it = daily_values.lower_bound(std::max(week.start_date, study_start));
       it != daily_values.end() && it->first <= week.end_date; ++it) {
    values.push_back(it->second);
  }
  if (values.empty()) return std::nullopt;
  const int n = static_cast<int>(values.size());
  return Average{ordered_mean(std::move(values)), n};
}

PopulationLine fit_population_line(std::span<const AnnualPopulationRecord> annual) {
  if (annual.size() < 2) throw DataError("population regression needs at least two years");
  // Center the years so the normal equations stay well conditioned.
  double mean_year = 0.0, mean_pop = 0.0;
  for (const auto& r : annual) {
    mean_year += r.year;
    mean_pop += r.population;
  }
  mean_year /= static_cast<double>(annual.size());
  mean_pop /= static_cast<double>(annual.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& r : annual) {
    const double dx = r.year - mean_year;
    sxx += dx * dx;
    sxy += dx * (r.population - mean_pop);
  }
  if (sxx <= 0.0) throw DataError("population regression has a degenerate design (identical years)");
  PopulationLine line;
  line.slope = sxy / sxx;
  line.intercept = mean_pop - line.slope * mean_year;
  return line;
}

double weekly_population(const PopulationLine& line, const MmwrWeek& week) {
  const double p = line.at(fractional_year_midpoint(week));
  if (!(p > 0.0)) {
    throw DataError("population line predicts a nonpositive population for " + to_string(week));
  }
  return p;
}

std::vector<DailyPollutantRecord> read_pollutant_csv(const std::string& path) {
  const auto t = csv::Table::read_file(path);
  const auto date_col = t.column("date");
  const auto station_col = t.column("station_id");
  const auto pollutant_col = t.column("pollutant");
  const auto value_col = t.column("value");
  std::vector<DailyPollutantRecord> out;
  out.reserve(t.rows().size());
  for (const auto& row : t.rows()) {
    DailyPollutantRecord r;
    try {
      r.date = parse_date(t.text(row, date_col));
    } catch (const ValidationError& e) {
      throw SchemaError(path, row.line, e.what());
    }
    r.station_id = t.text(row, station_col);
    r.pollutant_id = t.text(row, pollutant_col);
    if (r.pollutant_id.empty()) throw SchemaError(path, row.line, "empty pollutant id");
    r.value = t.number(row, value_col);
    if (r.value < 0.0) throw SchemaError(path, row.line, "negative concentration");
    out.push_back(std::move(r));
  }
  return out;
}

std::map<Date, double> read_temperature_csv(const std::string& path) {
  const auto t = csv::Table::read_file(path);
  const auto date_col = t.column("date");
  const auto temp_col = t.column("tavg_c");
  std::map<Date, double> out;
  for (const auto& row : t.rows()) {
    Date d;
    try {
      d = parse_date(t.text(row, date_col));
    } catch (const ValidationError& e) {
      throw SchemaError(path, row.line, e.what());
    }
    if (!out.emplace(d, t.number(row, temp_col)).second)
      throw SchemaError(path, row.line, "duplicate date " + format_date(d));
  }
  return out;
}

std::map<std::pair<int, int>, std::map<std::string, long>> read_deaths_csv(const std::string& path) {
  const auto t = csv::Table::read_file(path);
  const auto year_col = t.column("mmwr_year");
  const auto week_col = t.column("mmwr_week");
  const auto cause_col = t.column("cause");
  const auto count_col = t.column("count");
  std::map<std::pair<int, int>, std::map<std::string, long>> out;
  for (const auto& row : t.rows()) {
    const int year = static_cast<int>(t.integer(row, year_col));
    const int week = static_cast<int>(t.integer(row, week_col));
    try {
      (void)mmwr_week(year, week);
    } catch (const RangeError& e) {
      throw SchemaError(path, row.line, e.what());
    }
    const auto& cause = t.text(row, cause_col);
    if (cause.empty()) throw SchemaError(path, row.line, "empty cause id");
    const long count = t.integer(row, count_col);
    if (count < 0) throw SchemaError(path, row.line, "negative death count");
    if (!out[{year, week}].emplace(cause, count).second)
      throw SchemaError(path, row.line, "duplicate entry for cause " + cause);
  }
  return out;
}

std::vector<AnnualPopulationRecord> read_population_csv(const std::string& path) {
  const auto t = csv::Table::read_file(path);
  const auto year_col = t.column("year");
  const auto pop_col = t.column("population");
  std::vector<AnnualPopulationRecord> out;
  for (const auto& row : t.rows()) {
    AnnualPopulationRecord r{static_cast<int>(t.integer(row, year_col)), t.number(row, pop_col)};
    if (!(r.population > 0.0)) throw SchemaError(path, row.line, "population must be positive");
    if (!out.empty() && r.year <= out.back().year)
      throw SchemaError(path, row.line, "years must be strictly increasing");
    out.push_back(r);
  }
  return out;
}

DailySeries aggregate_daily(std::span<const DailyPollutantRecord> records, const StudySpan& span) {
  std::map<std::string, std::map<Date, std::vector<DailyPollutantRecord>>> grouped;
  for (const auto& r : records) {
    if (r.date < span.start || r.date > span.end) continue;
    grouped[r.pollutant_id][r.date].push_back(r);
  }
  DailySeries out;
  for (auto& [pollutant, days] : grouped) {
    auto& series = out.by_pollutant[pollutant];
    for (auto& [date, recs] : days) {
      if (auto avg = daily_average(recs)) series.emplace(date, avg->value);
    }
  }
  return out;
}

IngestResult build_dataset(std::span<const DailyPollutantRecord> pollutant_records,
                           const std::map<Date, double>& daily_temperature,
                           const std::map<std::pair<int, int>, std::map<std::string, long>>& deaths,
                           std::span<const AnnualPopulationRecord> population,
                           const StudySpan& span) {
  if (span.end < span.start) throw DataError("study span ends before it starts");
  const MmwrWeek first = mmwr_week_of(span.start);
  const MmwrWeek last = mmwr_week_of(span.end);
  if (weeks_between(first, last) + 1 < 3) throw DataError("study span must cover at least 3 weeks");

  std::set<std::string> all_pollutants;
  for (const auto& r : pollutant_records) all_pollutants.insert(r.pollutant_id);
  if (all_pollutants.empty()) throw DataError("no pollutant records supplied");
  std::set<std::string> all_causes;
  for (const auto& [wk, by_cause] : deaths)
    for (const auto& [cause, n] : by_cause) all_causes.insert(cause);
  if (all_causes.empty()) throw DataError("no death records supplied");

  const auto daily = aggregate_daily(pollutant_records, span);
  std::map<Date, double> temps;
  for (const auto& [d, v] : daily_temperature)
    if (d >= span.start && d <= span.end) temps.emplace(d, v);

  const PopulationLine line = fit_population_line(population);
  const std::map<Date, double> empty;

  std::vector<WeeklyObservation> rows;
  std::vector<DroppedWeek> dropped;
  for (MmwrWeek w = first; w <= last; w = next_week(w)) {
    WeeklyObservation obs;
    obs.week = w;
    std::vector<std::string> reasons;
    for (const auto& p : all_pollutants) {
      auto it = daily.by_pollutant.find(p);
      const auto avg = weekly_average(it == daily.by_pollutant.end() ? empty : it->second, w,
                                      span.start);
      if (!avg) {
        reasons.push_back("no " + p + " measurements");
        continue;
      }
      obs.pollutant_levels[p] = avg->value;
      obs.valid_days[p] = avg->count;
    }
    if (const auto t = weekly_average(temps, w, span.start)) {
      obs.temperature_raw = t->value;
    } else {
      reasons.push_back("no temperature");
    }
    const auto d = deaths.find({w.year, w.week});
    for (const auto& c : all_causes) {
      if (d == deaths.end() || !d->second.count(c)) {
        reasons.push_back("no " + c + " deaths");
      } else {
        obs.deaths[c] = d->second.at(c);
      }
    }
    if (!reasons.empty()) {
      dropped.push_back({w, std::move(reasons)});
      continue;
    }
    obs.population = weekly_population(line, w);
    rows.push_back(std::move(obs));
  }
  if (rows.empty()) throw DataError("no week has complete pollutant, temperature and death data");
  return IngestResult{WeeklyDataset(std::move(rows)), std::move(dropped), line};
}

IngestResult build_dataset(const std::vector<std::string>& pollutant_files,
                           const std::string& temperature_file, const std::string& deaths_file,
                           const std::string& population_file, const StudySpan& span) {
  std::vector<DailyPollutantRecord> records;
  for (const auto& f : pollutant_files) {
    auto part = read_pollutant_csv(f);
    if (part.empty()) throw SchemaError(f, 0, "pollutant file has no records");
    records.insert(records.end(), part.begin(), part.end());
  }
  const auto temps = read_temperature_csv(temperature_file);
  const auto deaths = read_deaths_csv(deaths_file);
  const auto pop = read_population_csv(population_file);
  return build_dataset(records, temps, deaths, pop, span);
}

std::string drop_report(const IngestResult& result) {
  std::ostringstream out;
  const auto& ds = result.dataset;
  out << "weeks kept: " << ds.size() << '\n';
  out << "weeks dropped: " << result.dropped.size() << '\n';
  out << "temperature mean (C): " << csv::format_number(ds.temperature_mean()) << '\n';
  out << "population line: " << csv::format_number(result.population_line.intercept) << " + "
      << csv::format_number(result.population_line.slope) << " * year\n";
  for (const auto& d : result.dropped) {
    out << "dropped " << to_string(d.week) << " (" << format_date(d.week.start_date) << "):";
    for (std::size_t i = 0; i < d.reasons.size(); ++i) out << (i ? "; " : " ") << d.reasons[i];
    out << '\n';
  }
  return out.str();
}

}  // namespace aerostate::ingest
