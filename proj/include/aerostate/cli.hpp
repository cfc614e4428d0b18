#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "aerostate/outcome.hpp"
#include "aerostate/sampler.hpp"

namespace aerostate::cli {

/// Declarative run configuration (JSON). Relative paths are resolved against
/// the directory holding the config file; command-line flags override it.
struct RunConfig {
  std::vector<std::string> pollutant_files;
  std::string temperature_file;
  std::string deaths_file;
  std::string population_file;
  std::string dataset_file;
  std::string study_start = "2018-01-01";
  std::string study_end = "2022-12-17";

  outcome::OutcomeSpec outcome;
  sampler::StateSpaceSpec state_space;
  sampler::SamplerConfig sampler;
  std::string output_dir = "out";
};

// Throws ConfigError for malformed content or referenced files that do not exist.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& json_text, const std::string& base_dir);

// 64-bit FNV-1a of the file bytes, as 16 hex digits.
std::string checksum_file(const std::string& path);
std::string checksum_text(const std::string& text);

// Runs one command line. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace aerostate::cli
