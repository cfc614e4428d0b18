#include "aerostate/outcome.hpp"

#include <cmath>

#include "aerostate/error.hpp"

namespace aerostate::outcome {

void PriorSpec::validate() const {
  if (!(coefficient_scale > 0.0) || !(level_scale > 0.0) || !(amplitude_variance > 0.0))
    throw ValidationError("prior scales must be positive");
  if (!(sigma_upper > 0.0) || !(shape_b_upper > 0.0) || !(shape_c_bound > 0.0))
    throw ValidationError("uniform prior bounds must be ordered");
}

void OutcomeSpec::validate() const {
  priors.validate();
  if (me_pollutant) {
    for (const auto& c : covariates)
      if (c == *me_pollutant)
        throw ValidationError("pollutant '" + c + "' cannot be both latent and a plug-in covariate");
  }
  for (std::size_t i = 0; i < covariates.size(); ++i)
    for (std::size_t j = i + 1; j < covariates.size(); ++j)
      if (covariates[i] == covariates[j])
        throw ValidationError("covariate '" + covariates[i] + "' listed twice");
  if (!has_counts() && !me_pollutant)
    throw ValidationError("a fit needs a cause, a measurement-error pollutant, or both");
}

double log_intensity(const LinearPredictorParams& params, double temperature_lag, double latent_lag,
                     std::span<const double> covariates_lag, double offset) {
  if (!(offset > 0.0)) throw DomainError("offset must be positive");
  if (covariates_lag.size() != params.beta.size())
    throw DomainError("covariate count does not match coefficient count");
  double eta = std::log(offset) + params.beta0 + params.beta_temp * temperature_lag +
               params.beta_me * latent_lag;
  for (std::size_t j = 0; j < covariates_lag.size(); ++j) {
    if (!(covariates_lag[j] > 0.0)) throw DomainError("covariate levels must be positive before logging");
    eta += params.beta[j] * std::log(covariates_lag[j]);
  }
  return eta;
}

double poisson_loglik_pointwise(long y, double log_lambda) {
  if (y < 0) throw DomainError("Poisson count must be nonnegative");
  if (!std::isfinite(log_lambda)) throw DomainError("Poisson intensity must be positive and finite");
  const double yd = static_cast<double>(y);
  return yd * log_lambda - std::exp(log_lambda) - std::lgamma(yd + 1.0);
}

OutcomeDesign build_design(const WeeklyDataset& dataset, const OutcomeSpec& spec) {
  spec.validate();
  if (spec.has_counts() && !dataset.has_cause(spec.cause))
    throw ValidationError("dataset has no cause '" + spec.cause + "'");
  if (spec.me_pollutant && !dataset.has_pollutant(*spec.me_pollutant))
    throw ValidationError("dataset has no pollutant '" + *spec.me_pollutant + "'");
  for (const auto& c : spec.covariates)
    if (!dataset.has_pollutant(c)) throw ValidationError("dataset has no pollutant '" + c + "'");

  OutcomeDesign d;
  d.grid_length = dataset.grid_length();
  d.has_counts = spec.has_counts();
  d.has_me = spec.me_pollutant.has_value();
  if (spec.include_temperature && d.has_counts) d.fixed_names.push_back("beta_temp");
  for (const auto& c : spec.covariates) d.fixed_names.push_back("beta[" + c + "]");

  std::vector<long> row_at(d.grid_length, -1);
  for (std::size_t i = 0; i < dataset.size(); ++i) row_at[dataset.grid_index(i)] = static_cast<long>(i);
  const auto& rows = dataset.rows();

  if (d.has_me) {
    d.me_log_obs.assign(d.grid_length, std::nan(""));
    d.me_n.assign(d.grid_length, 0);
    for (std::size_t g = 0; g < d.grid_length; ++g) {
      if (row_at[g] < 0) continue;
      const auto& r = rows[static_cast<std::size_t>(row_at[g])];
      const double level = r.pollutant_levels.at(*spec.me_pollutant);
      const int n = r.valid_days.at(*spec.me_pollutant);
      if (!(level > 0.0))
        throw ValidationError("nonpositive " + *spec.me_pollutant + " level at " + to_string(r.week));
      if (n < 1)
        throw ValidationError("no valid days for " + *spec.me_pollutant + " at " + to_string(r.week));
      d.me_log_obs[g] = std::log(level);
      d.me_n[g] = n;
    }
  }

  if (!d.has_counts) return d;
  for (std::size_t g = kLagWeeks; g < d.grid_length; ++g) {
    if (row_at[g] < 0 || row_at[g - kLagWeeks] < 0) continue;
    const auto& now = rows[static_cast<std::size_t>(row_at[g])];
    const auto lag_row = static_cast<std::size_t>(row_at[g - kLagWeeks]);
    const auto& lag = rows[lag_row];
    std::vector<double> z;
    if (spec.include_temperature) z.push_back(dataset.centered_temperature(lag_row));
    for (const auto& c : spec.covariates) {
      const double v = lag.pollutant_levels.at(c);
      if (!(v > 0.0)) throw ValidationError("nonpositive " + c + " level at " + to_string(lag.week));
      z.push_back(std::log(v));
    }
    d.week.push_back(g);
    d.lag_week.push_back(g - kLagWeeks);
    d.count.push_back(now.deaths.at(spec.cause));
    d.log_offset.push_back(std::log(now.population));
    d.fixed.push_back(std::move(z));
  }
  if (d.points() == 0) throw ValidationError("no outcome week has a preceding week of predictors");
  return d;
}

std::vector<long> simulate_outcome(const LinearPredictorParams& params, const PredictorFrame& frame,
                                   std::span<const double> latent, std::mt19937_64& rng) {
  const std::size_t T = frame.offsets.size();
  if (frame.temperature.size() != T || frame.covariates.size() != T)
    throw ValidationError("predictor frame columns must have equal length");
  if (!latent.empty() && latent.size() != T)
    throw ValidationError("latent path length does not match the predictor frame");
  std::vector<long> counts;
  counts.reserve(T > 0 ? T - 1 : 0);
  for (std::size_t t = kLagWeeks; t < T; ++t) {
    const double x = latent.empty() ? 0.0 : latent[t - kLagWeeks];
    const double eta = log_intensity(params, frame.temperature[t - kLagWeeks], x,
                                     frame.covariates[t - kLagWeeks], frame.offsets[t]);
    if (!(eta <= kMaxLogIntensity) || !std::isfinite(eta)) {
      throw SimulationError("log intensity " + std::to_string(eta) + " out of range at week " +
                            std::to_string(t + 1));
    }
    const double lambda = std::exp(eta);
    if (lambda > 9.0e15) {
      throw SimulationError("intensity too large to draw integer counts at week " + std::to_string(t + 1));
    }
    std::poisson_distribution<long> pois(lambda);
    counts.push_back(lambda > 0.0 ? pois(rng) : 0);
  }
  return counts;
}

}  // namespace aerostate::outcome
