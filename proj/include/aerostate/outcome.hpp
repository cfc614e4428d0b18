#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "aerostate/dataset.hpp"

namespace aerostate::outcome {

inline constexpr int kLagWeeks = 1;
inline constexpr double kMaxLogIntensity = 700.0;

/// Prior configuration. Normal "scales" are read as variances unless
/// `scale_is_variance` is false, in which case they are precisions
/// (the BUGS/JAGS convention).
struct PriorSpec {
  double coefficient_scale = 0.1;  // beta0, beta_temp, beta_me, covariate betas
  double level_scale = 0.1;        // mu, centred on the log-scale mean of the observed pollutant
  bool scale_is_variance = true;
  double sigma_upper = 20.0;       // sigma_ar, sigma_x ~ Uniform(0, upper)
  double amplitude_variance = 1.0; // seasonal amplitudes alpha0, alpha1 ~ N(0, v)
  double shape_b_upper = 10.0;     // b1, b2 ~ Uniform(0, upper)
  double shape_c_bound = 1.0;      // c1, c2 ~ Uniform(-bound, bound)

  double coefficient_variance() const {
    return scale_is_variance ? coefficient_scale : 1.0 / coefficient_scale;
  }
  double level_variance() const { return scale_is_variance ? level_scale : 1.0 / level_scale; }
  void validate() const;
};

/// Which series play which role. An empty `cause` switches the count channel
/// off, leaving a pure measurement-error state-space fit of `me_pollutant`.
struct OutcomeSpec {
  std::string cause;
  std::optional<std::string> me_pollutant;
  std::vector<std::string> covariates;
  bool include_temperature = true;
  PriorSpec priors;

  bool has_counts() const { return !cause.empty(); }
  void validate() const;
};

struct LinearPredictorParams {
  double beta0 = 0.0;
  double beta_temp = 0.0;
  double beta_me = 0.0;
  std::vector<double> beta;  // one per covariate
};

// log(offset_t) + beta0 + beta_temp*T_{t-1} + beta_me*X_{t-1} + sum beta_j*log(C_{j,t-1}).
// Throws DomainError for a nonpositive offset or covariate.
double log_intensity(const LinearPredictorParams& params, double temperature_lag, double latent_lag,
                     std::span<const double> covariates_lag, double offset);

// y*log(lambda) - lambda - log(y!). Throws DomainError for y < 0 or a
// non-finite log intensity.
double poisson_loglik_pointwise(long y, double log_lambda);

/// Lag-aligned view of a dataset on its weekly grid. Outcome point p pairs the
/// count at grid week `week[p]` with predictors read at `week[p] - 1`.
struct OutcomeDesign {
  std::size_t grid_length = 0;
  std::vector<std::size_t> week;       // grid index of each outcome point
  std::vector<std::size_t> lag_week;   // week - 1
  std::vector<long> count;
  std::vector<double> log_offset;
  // Fixed predictors at the lag week: temperature (if included) then log covariates.
  std::vector<std::vector<double>> fixed;
  std::vector<std::string> fixed_names;  // "beta_temp", "beta[<id>]"
  // Measurement-error pollutant on the grid (NaN where the week is missing).
  std::vector<double> me_log_obs;
  std::vector<int> me_n;
  bool has_counts = false;
  bool has_me = false;

  std::size_t points() const { return week.size(); }
};

// Throws ValidationError for unknown series, nonpositive covariate levels or
// n_t = 0 on the measurement-error pollutant.
OutcomeDesign build_design(const WeeklyDataset& dataset, const OutcomeSpec& spec);

struct PredictorFrame {
  std::vector<double> temperature;                 // centred, one per week
  std::vector<std::vector<double>> covariates;     // [week][j], raw positive levels
  std::vector<double> offsets;
};

// Counts for weeks 2..T (index 0 of the result is week 2), drawn independently
// given lambda. Throws SimulationError naming the week when log lambda > 700
// or is not finite.
std::vector<long> simulate_outcome(const LinearPredictorParams& params, const PredictorFrame& frame,
                                   std::span<const double> latent, std::mt19937_64& rng);

}  // namespace aerostate::outcome
