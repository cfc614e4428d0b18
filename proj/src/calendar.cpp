#include "aerostate/calendar.hpp"

#include <charconv>
#include <cstdio>

#include "aerostate/error.hpp"

namespace aerostate {

namespace chr = std::chrono;

namespace {

Date mmwr_year_start(int year) {
  const Date jan4 = make_date(year, 1, 4);
  const chr::weekday wd{jan4};
  return jan4 - chr::days{wd.c_encoding()};
}

void check_supported(int year) {
  if (year < kMinSupportedYear || year > kMaxSupportedYear) {
    throw RangeError("date outside supported range " + std::to_string(kMinSupportedYear) + "-" +
                     std::to_string(kMaxSupportedYear) + ": year " + std::to_string(year));
  }
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

Date make_date(int year, unsigned month, unsigned day) {
  const chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
  if (!ymd.ok()) {
    throw ValidationError("invalid calendar date " + std::to_string(year) + "-" +
                          std::to_string(month) + "-" + std::to_string(day));
  }
  return Date{ymd};
}

Date parse_date(std::string_view text) {
  int y = 0, m = 0, d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !parse_int(text.substr(0, 4), y) ||
      !parse_int(text.substr(5, 2), m) || !parse_int(text.substr(8, 2), d) || m < 1 || d < 1) {
    throw ValidationError("malformed date '" + std::string(text) + "' (expected YYYY-MM-DD)");
  }
  return make_date(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

std::string format_date(Date d) {
  const chr::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int year_of(Date d) { return static_cast<int>(chr::year_month_day{d}.year()); }

MmwrWeek mmwr_week_of(Date d) {
  const int y = year_of(d);
  check_supported(y);
  int mmwr_year = y;
  if (d >= mmwr_year_start(y + 1)) {
    mmwr_year = y + 1;
  } else if (d < mmwr_year_start(y)) {
    mmwr_year = y - 1;
  }
  const Date first = mmwr_year_start(mmwr_year);
  const int week = static_cast<int>((d - first).count() / 7) + 1;
  const Date start = first + chr::days{7 * (week - 1)};
  return {mmwr_year, week, start, start + chr::days{6}};
}

int weeks_in_mmwr_year(int year) {
  return static_cast<int>((mmwr_year_start(year + 1) - mmwr_year_start(year)).count() / 7);
}

MmwrWeek mmwr_week(int year, int week) {
  check_supported(year);
  if (week < 1 || week > weeks_in_mmwr_year(year)) {
    throw RangeError("MMWR year " + std::to_string(year) + " has no week " + std::to_string(week));
  }
  const Date start = mmwr_year_start(year) + chr::days{7 * (week - 1)};
  return {year, week, start, start + chr::days{6}};
}

MmwrWeek next_week(const MmwrWeek& w) { return mmwr_week_of(w.end_date + chr::days{1}); }

MmwrWeek previous_week(const MmwrWeek& w) { return mmwr_week_of(w.start_date - chr::days{1}); }

long weeks_between(const MmwrWeek& from, const MmwrWeek& to) {
  return static_cast<long>((to.start_date - from.start_date).count() / 7);
}

double fractional_year_midpoint(const MmwrWeek& w) {
  // Wednesday 12:00 is 3.5 days after Sunday 00:00.
  const double mid = static_cast<double>(w.start_date.time_since_epoch().count()) + 3.5;
  const Date mid_day{chr::days{static_cast<long>(mid)}};
  const int y = year_of(mid_day);
  const double jan1 = static_cast<double>(make_date(y, 1, 1).time_since_epoch().count());
  const double next = static_cast<double>(make_date(y + 1, 1, 1).time_since_epoch().count());
  return y + (mid - jan1) / (next - jan1);
}

std::string to_string(const MmwrWeek& w) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-W%02d", w.year, w.week);
  return buf;
}

}  // namespace aerostate
