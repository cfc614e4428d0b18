#include <doctest.h>

#include <random>

#include "aerostate/calendar.hpp"
#include "aerostate/dataset.hpp"
#include "aerostate/error.hpp"

using namespace aerostate;
using std::chrono::days;

TEST_CASE("study start falls on day 2 of MMWR 2018 week 1") {
  const auto d = make_date(2018, 1, 1);
  const auto w = mmwr_week_of(d);
  CHECK(w.year == 2018);
  CHECK(w.week == 1);
  CHECK((d - w.start_date).count() + 1 == 2);
  CHECK(w.start_date == make_date(2017, 12, 31));
  CHECK(mmwr_week_of(make_date(2017, 12, 31)).start_date == make_date(2017, 12, 31));
}

TEST_CASE("week one contains January 4") {
  for (int y = 1971; y <= 2099; ++y) {
    const auto w = mmwr_week(y, 1);
    const auto jan4 = make_date(y, 1, 4);
    CHECK(w.start_date <= jan4);
    CHECK(jan4 <= w.end_date);
    CHECK(std::chrono::weekday(w.start_date) == std::chrono::Sunday);
    CHECK((w.end_date - w.start_date).count() == 6);
  }
}

TEST_CASE("Saturdays end their week and every date round-trips") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> off(0, 40000);
  const auto base = make_date(1971, 1, 1);
  for (int i = 0; i < 2000; ++i) {
    const Date d = base + days{off(rng)};
    const auto w = mmwr_week_of(d);
    CHECK(w.start_date <= d);
    CHECK(d <= w.end_date);
    if (std::chrono::weekday(d) == std::chrono::Saturday) CHECK(w.end_date == d);
    CHECK(mmwr_week(w.year, w.week) == w);
  }
}

TEST_CASE("consecutive weeks abut across year boundaries") {
  auto w = mmwr_week(2015, 1);
  for (int i = 0; i < 600; ++i) {
    const auto n = next_week(w);
    CHECK(w.end_date + days{1} == n.start_date);
    CHECK(previous_week(n) == w);
    w = n;
  }
}

TEST_CASE("53-week years are representable") {
  CHECK(weeks_in_mmwr_year(2020) == 53);
  CHECK(weeks_in_mmwr_year(2018) == 52);
  CHECK(mmwr_week(2020, 53).end_date == make_date(2021, 1, 2));
  CHECK_THROWS_AS(mmwr_week(2018, 53), RangeError);
}

TEST_CASE("study span covers 259 weeks") {
  const auto first = mmwr_week_of(make_date(2018, 1, 1));
  const auto last = mmwr_week_of(make_date(2022, 12, 17));
  CHECK(weeks_between(first, last) + 1 == 259);
  CHECK(last.year == 2022);
  CHECK(last.week == 50);
}

TEST_CASE("date parsing is strict") {
  CHECK(parse_date("2020-02-29") == make_date(2020, 2, 29));
  CHECK(format_date(parse_date("2019-07-04")) == "2019-07-04");
  CHECK_THROWS_AS(parse_date("2019-02-29"), ValidationError);
  CHECK_THROWS_AS(parse_date("2019-7-04"), ValidationError);
  CHECK_THROWS_AS(parse_date("garbage"), ValidationError);
  CHECK_THROWS_AS(mmwr_week_of(make_date(1960, 1, 1)), RangeError);
}

TEST_CASE("week midpoint as fractional year") {
  const auto w = mmwr_week(2019, 10);
  const double f = fractional_year_midpoint(w);
  CHECK(f > 2019.0);
  CHECK(f < 2020.0);
  CHECK(fractional_year_midpoint(next_week(w)) - f == doctest::Approx(7.0 / 365.0).epsilon(1e-9));
}

TEST_CASE("temperature centering") {
  const std::vector<double> raw{10, 20, 30};
  const auto c = center_temperature(raw);
  CHECK(c.mean == 20.0);
  CHECK(c.values == std::vector<double>{-10, 0, 10});

  const std::vector<double> flat(5, 3.5);
  const auto f = center_temperature(flat);
  CHECK(f.mean == 3.5);
  for (double v : f.values) CHECK(v == 0.0);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(17.28, 4.0);
  std::vector<double> series(259);
  for (auto& v : series) v = z(rng);
  const auto once = center_temperature(series);
  const auto twice = center_temperature(once.values);
  CHECK(std::abs(twice.mean) < 1e-9);
  for (std::size_t i = 0; i < series.size(); ++i) CHECK(twice.values[i] == doctest::Approx(once.values[i]).epsilon(1e-12));

  CHECK_THROWS_AS(center_temperature(std::vector<double>{}), ValidationError);
  CHECK_THROWS_AS(center_temperature(std::vector<double>{1.0, std::nan("")}), ValidationError);
}
