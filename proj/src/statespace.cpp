#include "aerostate/statespace.hpp"

#include <cmath>
#include <numbers>

#include "aerostate/error.hpp"

namespace aerostate::statespace {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double normal_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

void check_params(const Ar1Params& ar, const ObservationNoise& noise) {
  if (!std::isfinite(ar.phi) || std::abs(ar.phi) >= 1.0)
    throw DomainError("AR coefficient must lie in (-1, 1) for stationary initialisation");
  if (!std::isfinite(ar.sigma2) || ar.sigma2 < 0.0)
    throw DomainError("process variance must be finite and nonnegative");
  if (!std::isfinite(noise.variance) || noise.variance < 0.0)
    throw DomainError("observation variance must be finite and nonnegative");
}

void check_observations(const Observations& obs, const ObservationNoise& noise) {
  if (obs.y.empty()) throw DomainError("observation series is empty");
  for (std::size_t t = 0; t < obs.y.size(); ++t) {
    if (std::isinf(obs.y[t])) throw DomainError("observation series contains infinite values");
    if (noise.mode == NoiseMode::scaled_by_n && !std::isnan(obs.y[t])) {
      if (t >= obs.n.size() || obs.n[t] < 1)
        throw DomainError("scaled observation noise needs n_t >= 1 at every observed week");
    }
  }
  if (!obs.extra_y.empty() && (obs.extra_y.size() != obs.y.size() || obs.extra_var.size() != obs.y.size()))
    throw DomainError("pseudo-observation series length mismatch");
}

}  // namespace

double warped_cos(double angle, double b, double c) {
  const double ca = std::cos(angle);
  return std::sqrt((1.0 + b * b) / (1.0 + b * b * ca * ca)) * std::cos(angle + c * ca);
}

double warped_sin(double angle, double b, double c) {
  const double sa = std::sin(angle);
  return std::sqrt((1.0 + b * b) / (1.0 + b * b * sa * sa)) * std::sin(angle + c * sa);
}

double mean_at(const MeanStructure& m, double t) {
  const double angle = 2.0 * std::numbers::pi * kSeasonalFrequency * (t + m.phase);
  switch (m.kind) {
    case MeanKind::constant:
      return m.level;
    case MeanKind::harmonic:
      return m.amplitude0 * std::cos(angle);
    case MeanKind::warped:
      return m.amplitude0 * warped_cos(angle, m.b1, m.c1) + m.amplitude1 * warped_sin(angle, m.b2, m.c2);
  }
  return 0.0;
}

double ObservationNoise::at(int n) const {
  const double v = mode == NoiseMode::scaled_by_n ? variance / static_cast<double>(n) : variance;
  return std::max(v, kMinObservationVariance);
}

FilterResult kalman_filter(const Observations& obs, const Ar1Params& ar, const ObservationNoise& noise) {
  check_params(ar, noise);
  check_observations(obs, noise);
  const std::size_t T = obs.y.size();
  FilterResult f;
  f.pred_mean.resize(T);
  f.pred_var.resize(T);
  f.filt_mean.resize(T);
  f.filt_var.resize(T);

  double a = 0.0;
  double P = ar.stationary_variance();
  for (std::size_t t = 0; t < T; ++t) {
    f.pred_mean[t] = a;
    f.pred_var[t] = P;
    const double m = mean_at(ar.mean, static_cast<double>(t + 1));
    if (!std::isnan(obs.y[t])) {
      const double R = noise.at(obs.n.empty() ? 1 : obs.n[t]);
      const double v = obs.y[t] - m - a;
      const double F = P + R;
      f.log_likelihood += -0.5 * (kLog2Pi + std::log(F) + v * v / F);
      a += P / F * v;
      P = P * R / F;
    }
    if (!obs.extra_y.empty() && std::isfinite(obs.extra_var[t]) && std::isfinite(obs.extra_y[t])) {
      // Pseudo-observations only shape the proposal; they do not enter the likelihood.
      const double R = std::max(obs.extra_var[t], kMinObservationVariance);
      const double v = obs.extra_y[t] - m - a;
      const double F = P + R;
      a += P / F * v;
      P = P * R / F;
    }
    f.filt_mean[t] = a;
    f.filt_var[t] = P;
    a = ar.phi * a;
    P = ar.phi * ar.phi * P + ar.sigma2;
  }
  return f;
}

double kalman_loglik(std::span<const double> y, std::span<const int> n, const Ar1Params& ar,
                     const ObservationNoise& noise) {
  return kalman_filter({y, n}, ar, noise).log_likelihood;
}

SmoothResult smooth(const Observations& obs, const Ar1Params& ar, const ObservationNoise& noise) {
  const auto f = kalman_filter(obs, ar, noise);
  const std::size_t T = obs.y.size();
  SmoothResult s;
  s.mean.resize(T);
  s.var.resize(T);
  double ms = f.filt_mean[T - 1];
  double Ps = f.filt_var[T - 1];
  s.mean[T - 1] = ms;
  s.var[T - 1] = Ps;
  for (std::size_t k = T - 1; k-- > 0;) {
    const double Pp = f.pred_var[k + 1];
    const double J = Pp > 0.0 ? f.filt_var[k] * ar.phi / Pp : 0.0;
    ms = f.filt_mean[k] + J * (ms - f.pred_mean[k + 1]);
    Ps = f.filt_var[k] + J * J * (Ps - Pp);
    s.mean[k] = ms;
    s.var[k] = std::max(Ps, 0.0);
  }
  for (std::size_t t = 0; t < T; ++t) s.mean[t] += mean_at(ar.mean, static_cast<double>(t + 1));
  return s;
}

SmoothResult smooth(std::span<const double> y, std::span<const int> n, const Ar1Params& ar,
                    const ObservationNoise& noise) {
  return smooth(Observations{y, n}, ar, noise);
}

std::vector<double> ffbs_sample(const Observations& obs, const Ar1Params& ar,
                                const ObservationNoise& noise, std::mt19937_64& rng) {
  const auto f = kalman_filter(obs, ar, noise);
  const std::size_t T = obs.y.size();
  std::normal_distribution<double> z;
  std::vector<double> d(T);
  d[T - 1] = f.filt_mean[T - 1] + std::sqrt(f.filt_var[T - 1]) * z(rng);
  for (std::size_t k = T - 1; k-- > 0;) {
    const double Pp = f.pred_var[k + 1];
    double mean = f.filt_mean[k];
    double var = f.filt_var[k];
    if (Pp > 0.0) {
      const double J = f.filt_var[k] * ar.phi / Pp;
      mean += J * (d[k + 1] - ar.phi * f.filt_mean[k]);
      var = f.filt_var[k] * ar.sigma2 / Pp;
    }
    d[k] = mean + std::sqrt(std::max(var, 0.0)) * z(rng);
  }
  for (std::size_t t = 0; t < T; ++t) d[t] += mean_at(ar.mean, static_cast<double>(t + 1));
  return d;
}

std::vector<double> ffbs_sample(std::span<const double> y, std::span<const int> n,
                                const Ar1Params& ar, const ObservationNoise& noise,
                                std::mt19937_64& rng) {
  return ffbs_sample(Observations{y, n}, ar, noise, rng);
}

double ar1_log_density(std::span<const double> x, const Ar1Params& ar) {
  double lp = 0.0;
  double prev = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double d = x[t] - mean_at(ar.mean, static_cast<double>(t + 1));
    lp += t == 0 ? normal_logpdf(d, 0.0, ar.stationary_variance())
                 : normal_logpdf(d, ar.phi * prev, ar.sigma2);
    prev = d;
  }
  return lp;
}

SimulatedSeries simulate_ar1(const Ar1Params& ar, const ObservationNoise& noise,
                             std::span<const int> n_schedule, std::size_t T, std::mt19937_64& rng) {
  if (T < 1) throw ValidationError("simulation length must be at least 1");
  if (std::abs(ar.phi) >= 1.0) throw DomainError("AR coefficient must lie in (-1, 1)");
  if (noise.mode == NoiseMode::scaled_by_n && n_schedule.empty())
    throw ValidationError("scaled observation noise needs an n_t schedule");
  std::normal_distribution<double> z;
  SimulatedSeries s;
  s.latent.resize(T);
  s.observed.resize(T);
  s.log_observed.resize(T);
  double d = std::sqrt(ar.stationary_variance()) * z(rng);
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) d = ar.phi * d + std::sqrt(ar.sigma2) * z(rng);
    s.latent[t] = mean_at(ar.mean, static_cast<double>(t + 1)) + d;
    double var = 0.0;
    if (noise.mode == NoiseMode::constant) {
      var = noise.variance;
    } else {
      const int n = n_schedule[t % n_schedule.size()];
      if (n < 1) throw ValidationError("n_t schedule entries must be >= 1");
      var = noise.variance / n;
    }
    s.log_observed[t] = s.latent[t] + std::sqrt(var) * z(rng);
    s.observed[t] = std::exp(s.log_observed[t]);
  }
  return s;
}

}  // namespace aerostate::statespace
