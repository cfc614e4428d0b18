#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "aerostate/outcome.hpp"
#include "aerostate/sampler.hpp"
#include "aerostate/statespace.hpp"

namespace aerostate::simstudy {

/// How a model variant sees the simulated pollutant.
enum class VariantKind {
  latent,        // measurement-error state-space model on log P
  plug_in,       // log P entered directly as a covariate
  misscaled,     // measurement-error model handed the raw-scale series, so it logs a log
};

struct Variant {
  std::string name;
  VariantKind kind = VariantKind::latent;
  statespace::NoiseMode noise = statespace::NoiseMode::scaled_by_n;
};

struct Scenario {
  std::string name;
  std::size_t T = 259;
  int replications = 20;
  std::uint64_t seed = 1;

  // Latent AR(1) generator.
  double mu_x = 10.0;
  double phi = 0.7;
  double sigma2_ar = 0.5;
  bool generate_me = true;  // false: the predictor is observed exactly
  statespace::NoiseMode noise = statespace::NoiseMode::constant;
  double noise_variance = 0.9;  // sigma2_v, or sigma2_x when scaled by n_t
  std::vector<int> n_schedule{7};

  // Outcome generator; disabled when `counts` is false.
  bool counts = false;
  double beta0 = 10.0;
  double beta_me = -1.0;
  std::vector<double> beta_cov;  // on log C_j, log C_j ~ N(0, 1)

  std::vector<Variant> variants;
  sampler::SamplerConfig sampler;
  outcome::PriorSpec priors;

  void validate() const;
};

struct ParameterScore {
  std::string name;  // generator name: phi, mu, beta0, beta1, ...
  double truth = 0.0;
  double mean = 0.0, sd = 0.0, lower = 0.0, upper = 0.0;
  bool covered = false;
};

struct ReplicationResult {
  int replication = 0;
  bool ok = true;
  std::string failure;  // why the fit was scored as a failure
  double waic = std::numeric_limits<double>::infinity();
  double max_rhat = 1.0;
  std::vector<ParameterScore> parameters;
};

/// Scores for one variant across replications.
struct RecoveryScore {
  std::string scenario;
  std::string variant;
  std::vector<ReplicationResult> replications;

  double coverage_rate(const std::string& parameter) const;
  // Fraction of replications whose posterior mean lies in [lo, hi].
  double mean_in_range_rate(const std::string& parameter, double lo, double hi) const;
  double failure_rate() const;
};

struct ScenarioResult {
  Scenario scenario;
  std::vector<RecoveryScore> variants;

  const RecoveryScore& variant(const std::string& name) const;
  // Fraction of replications in which `a` has strictly lower WAIC than `b`.
  double win_rate(const std::string& a, const std::string& b) const;
};

/// One replication's generated series, shared by every variant.
struct SimulatedData {
  std::vector<double> latent;                   // X_true
  std::vector<double> log_observed;             // X_obs
  std::vector<int> n;                           // n_t
  std::vector<std::vector<double>> log_covariates;  // [j][t]
  std::vector<long> counts;                     // t = 0 unused (no lagged predictor)
};

SimulatedData simulate(const Scenario& s, std::uint64_t seed);

// Dataset as a variant sees it: pollutant "P" holds exp(X_obs), or X_obs
// itself for the misscaled variant (DataError when any X_obs <= 0);
// covariates "C<j+2>"; cause "sim"; unit population.
WeeklyDataset to_dataset(const SimulatedData& data, VariantKind kind);
outcome::OutcomeSpec variant_spec(const Scenario& s, const Variant& v);

std::vector<std::string> builtin_names();
// Throws ConfigError listing the registry for an unknown name.
Scenario builtin(const std::string& name);

ScenarioResult run_scenario(const Scenario& s);

struct RankingRow {
  std::string variant;
  int wins = 0;
  double mean_rank = 0.0;
  double median_waic = 0.0;
};

// Per-replication WAIC ranking; ties go to the alphabetically first variant.
std::vector<RankingRow> compare_variants(const std::vector<RecoveryScore>& scores);

void write_scores_csv(const ScenarioResult& r, const std::string& path);
void write_ranking_csv(const std::vector<RankingRow>& rows, const std::string& path);
std::string summary_text(const ScenarioResult& r);

}  // namespace aerostate::simstudy
