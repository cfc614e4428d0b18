#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace aerostate::testing {

struct FixtureFiles {
  std::vector<std::string> pollutants;  // one file per pollutant
  std::string temperature;
  std::string deaths;
  std::string population;
  std::string start = "2018-01-01";
  std::string end = "2022-12-17";
};

// Synthetic daily inputs spanning the 2018-01-01..2022-12-17 study window:
// PM25 and NO2 from three stations with a few station-days missing,
// daily mean temperature, weekly COPD and CVD counts that fall with warmer
// lagged temperature, and annual population 2017-2023.
FixtureFiles write_fixture(const std::string& dir, std::uint64_t seed = 7);

// Fresh empty directory under the system temp dir.
std::string scratch_dir(const std::string& name);

}  // namespace aerostate::testing
