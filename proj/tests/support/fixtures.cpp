#include "fixtures.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include "aerostate/calendar.hpp"

namespace aerostate::testing {

namespace fs = std::filesystem;

std::string scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("aerostate_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

FixtureFiles write_fixture(const std::string& dir, std::uint64_t seed) {
  fs::create_directories(dir);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);

  FixtureFiles f;
  f.pollutants = {(fs::path(dir) / "pm25.csv").string(), (fs::path(dir) / "no2.csv").string()};
  f.temperature = (fs::path(dir) / "temperature.csv").string();
  f.deaths = (fs::path(dir) / "deaths.csv").string();
  f.population = (fs::path(dir) / "population.csv").string();

  // Daily series start on the Sunday opening 2018-W01 so the first study
  // week has one out-of-window day to ignore.
  const Date first = mmwr_week(2018, 1).start_date;
  const Date last = parse_date(f.end);
  std::ofstream pm(f.pollutants[0]), no2(f.pollutants[1]), temp(f.temperature);
  pm << "date,station_id,pollutant,value\n";
  no2 << "date,station_id,pollutant,value\n";
  temp << "date,tavg_c\n";
  std::map<Date, double> daily_temp;
  for (Date d = first; d <= last; d += std::chrono::days{1}) {
    const double doy = static_cast<double>((d - make_date(year_of(d), 1, 1)).count());
    const double season = std::cos(2.0 * std::numbers::pi * (doy - 15.0) / 365.25);
    const double t = 18.0 - 6.0 * season + 2.0 * z(rng);
    daily_temp[d] = t;
    temp << format_date(d) << ',' << t << '\n';
    for (int s = 1; s <= 3; ++s) {
      if (u(rng) < 0.05) continue;  // station offline
      const double pm_v = std::exp(2.4 + 0.3 * season + 0.35 * z(rng));
      const double no2_v = std::exp(2.9 + 0.25 * season + 0.3 * z(rng));
      pm << format_date(d) << ",S" << s << ",PM25," << pm_v << '\n';
      no2 << format_date(d) << ",S" << s << ",NO2," << no2_v << '\n';
    }
  }

  std::ofstream deaths(f.deaths);
  deaths << "mmwr_year,mmwr_week,cause,count\n";
  // Weekly temperature means drive the following week's deaths.
  std::vector<double> weekly_temp;
  std::vector<MmwrWeek> weeks;
  for (auto w = mmwr_week(2018, 1); w.start_date <= last; w = next_week(w)) {
    double s = 0.0;
    int n = 0;
    for (Date d = std::max(w.start_date, parse_date(f.start)); d <= w.end_date; d += std::chrono::days{1}) {
      s += daily_temp.at(d);
      ++n;
    }
    weeks.push_back(w);
    weekly_temp.push_back(s / n);
  }
  double mean_t = 0.0;
  for (double t : weekly_temp) mean_t += t / static_cast<double>(weekly_temp.size());
  for (std::size_t i = 0; i < weeks.size(); ++i) {
    const double lag = i > 0 ? weekly_temp[i - 1] - mean_t : 0.0;
    for (const auto& [cause, base, slope] :
         {std::tuple{"COPD", std::log(60.0), std::log(0.97)}, std::tuple{"CVD", std::log(400.0), std::log(0.99)}}) {
      std::poisson_distribution<long> pois(std::exp(base + slope * lag));
      deaths << weeks[i].year << ',' << weeks[i].week << ',' << cause << ',' << pois(rng) << '\n';
    }
  }

  std::ofstream pop(f.population);
  pop << "year,population\n";
  for (int y = 2017; y <= 2023; ++y) pop << y << ',' << 10'000'000.0 + 15'000.0 * (y - 2017) << '\n';
  return f;
}

}  // namespace aerostate::testing
