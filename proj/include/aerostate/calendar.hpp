#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace aerostate {

using Date = std::chrono::sys_days;

Date make_date(int year, unsigned month, unsigned day);

// Parses an ISO `YYYY-MM-DD` date. Throws ValidationError on malformed text
// or impossible calendar dates.
Date parse_date(std::string_view text);
std::string format_date(Date d);

int year_of(Date d);

/// CDC epidemiological (MMWR) week: Sunday through Saturday, week 1 being the
/// week that contains January 4.
struct MmwrWeek {
  int year = 0;
  int week = 0;
  Date start_date{};
  Date end_date{};

  friend bool operator==(const MmwrWeek& a, const MmwrWeek& b) {
    return a.start_date == b.start_date;
  }
  friend auto operator<=>(const MmwrWeek& a, const MmwrWeek& b) {
    return a.start_date <=> b.start_date;
  }
};

inline constexpr int kMinSupportedYear = 1970;
inline constexpr int kMaxSupportedYear = 2100;

// Throws RangeError outside 1970..2100.
MmwrWeek mmwr_week_of(Date d);

// Week `week` of MMWR year `year`; throws RangeError when the year has no such
// week (52 or 53 weeks per year).
MmwrWeek mmwr_week(int year, int week);

int weeks_in_mmwr_year(int year);

MmwrWeek next_week(const MmwrWeek& w);
MmwrWeek previous_week(const MmwrWeek& w);

// Signed number of weeks from `from` to `to`.
long weeks_between(const MmwrWeek& from, const MmwrWeek& to);

// Center of the week (Wednesday noon) as a fractional calendar year.
double fractional_year_midpoint(const MmwrWeek& w);

std::string to_string(const MmwrWeek& w);

}  // namespace aerostate
