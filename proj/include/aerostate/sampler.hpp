#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "aerostate/dataset.hpp"
#include "aerostate/outcome.hpp"
#include "aerostate/statespace.hpp"

namespace aerostate::sampler {

struct StateSpaceSpec {
  statespace::MeanKind mean = statespace::MeanKind::constant;
  statespace::NoiseMode noise = statespace::NoiseMode::scaled_by_n;
};

struct SamplerConfig {
  int chains = 4;
  int iterations = 15000;
  int burn_in = 5000;
  int thin = 5;
  int latent_thin = 50;  // keep every k-th retained draw of the latent path
  int latent_block = 13;  // weeks per latent block when counts depend on the path
  std::uint64_t seed = 20240101;
  int adapt_window = -1;  // < 0: adapt throughout burn-in
  double target_accept = 0.44;
  // Parameters held at fixed values (name -> value); their blocks are skipped.
  std::map<std::string, double> fixed;
  // Ignore every data likelihood term (samples the prior).
  bool prior_only = false;
  int threads = 0;  // 0: AEROSTATE_THREADS or hardware concurrency

  void validate() const;
};

struct BlockStats {
  std::string name;
  long proposed = 0;
  long accepted = 0;
  double rate() const { return proposed ? static_cast<double>(accepted) / proposed : 0.0; }
};

/// Retained draws from every chain, stored row-wise in chain order.
struct PosteriorDraws {
  std::vector<std::string> parameter_names;
  std::vector<std::vector<double>> values;     // [draw][parameter]
  std::vector<int> chain;                      // per draw
  std::vector<long> iteration;                 // per draw (1-based, post burn-in)
  std::vector<std::vector<double>> pointwise;  // [draw][point]
  std::vector<std::size_t> pointwise_weeks;    // grid week of each point
  std::vector<std::vector<double>> latent;     // [kept draw][grid week]
  std::vector<int> latent_chain;
  int chains = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> chain_seeds;
  std::vector<std::vector<BlockStats>> acceptance;  // [chain][block], post burn-in
  long nonfinite_events = 0;                        // non-finite densities met after burn-in

  std::size_t draws() const { return values.size(); }
  std::size_t parameter_index(const std::string& name) const;  // throws ValidationError
  bool has_parameter(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
  std::vector<std::vector<double>> by_chain(const std::string& name) const;
};

// Full parameter vector in a named layout; used for initial states too.
struct ModelState {
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<double> latent;  // empty when there is no latent pollutant

  double get(const std::string& name) const;
  void set(const std::string& name, double v);
};

// Start values: beta0 from the count/offset ratio, other coefficients 0,
// mu at the log-scale mean of the observed pollutant, phi = 0.5, moment-based
// sigmas, latent path at the observed log pollutant. With `jitter`, chains
// are dispersed around that point. Throws InitializationError.
ModelState initialize(const outcome::OutcomeDesign& design, const outcome::OutcomeSpec& spec,
                      const StateSpaceSpec& ss, std::mt19937_64& rng, bool jitter = false);

PosteriorDraws fit(const WeeklyDataset& dataset, const outcome::OutcomeSpec& outcome_spec,
                   const StateSpaceSpec& ss_spec, const SamplerConfig& config);

PosteriorDraws fit(const outcome::OutcomeDesign& design, const outcome::OutcomeSpec& outcome_spec,
                   const StateSpaceSpec& ss_spec, const SamplerConfig& config);

std::uint64_t chain_seed(std::uint64_t seed, int chain);

// Draws export: `chain,iteration,parameter,value` and a pointwise sidecar
// `chain,iteration,<week>...`.
void write_draws_csv(const PosteriorDraws& draws, const std::string& path);
void write_pointwise_csv(const PosteriorDraws& draws, const std::string& path);
PosteriorDraws read_draws_csv(const std::string& draws_path, const std::string& pointwise_path);

}  // namespace aerostate::sampler
