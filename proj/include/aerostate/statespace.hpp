#pragma once

#include <random>
#include <span>
#include <vector>

namespace aerostate::statespace {

enum class MeanKind { constant, harmonic, warped };

inline constexpr double kSeasonalFrequency = 1.0 / 52.0;
inline constexpr double kMinObservationVariance = 1e-12;

/// Seasonal mean of the latent log concentration. The harmonic and warped
/// forms carry no level term and are meant for demeaned (deviation) series.
struct MeanStructure {
  MeanKind kind = MeanKind::constant;
  double level = 0.0;  // mu (constant kind)
  double amplitude0 = 0.0;
  double amplitude1 = 0.0;
  double phase = 0.0;  // weeks
  double b1 = 0.0, c1 = 0.0, b2 = 0.0, c2 = 0.0;

  static MeanStructure constant(double mu) { return {MeanKind::constant, mu}; }
  static MeanStructure harmonic(double alpha0, double omega) {
    MeanStructure m;
    m.kind = MeanKind::harmonic;
    m.amplitude0 = alpha0;
    m.phase = omega;
    return m;
  }
  static MeanStructure warped(double alpha0, double alpha1, double omega, double b1, double c1,
                              double b2, double c2) {
    return {MeanKind::warped, 0.0, alpha0, alpha1, omega, b1, c1, b2, c2};
  }
};

double warped_cos(double angle, double b, double c);  // g1
double warped_sin(double angle, double b, double c);  // g2

// Mean at 1-based week index t.
double mean_at(const MeanStructure& mean, double t);

struct Ar1Params {
  double phi = 0.5;
  double sigma2 = 1.0;  // process-noise variance
  MeanStructure mean;

  double stationary_variance() const { return sigma2 / (1.0 - phi * phi); }
};

enum class NoiseMode { scaled_by_n, constant };

struct ObservationNoise {
  NoiseMode mode = NoiseMode::constant;
  double variance = 1.0;  // sigma_x^2 or sigma_v^2

  // Variance at a week with `n` valid days (floored at 1e-12).
  double at(int n) const;
};

/// Observation series on the weekly grid. NaN entries in `y` are missing
/// weeks; `n` is only read in scaled_by_n mode and must be >= 1 where y is
/// present. An optional extra Gaussian pseudo-observation per week can be
/// attached; it enters the filter update but not the log-likelihood.
struct Observations {
  std::span<const double> y;
  std::span<const int> n;
  std::span<const double> extra_y{};
  std::span<const double> extra_var{};
};

struct FilterResult {
  double log_likelihood = 0.0;
  std::vector<double> pred_mean, pred_var;      // of the deviation X_t - mean_t
  std::vector<double> filt_mean, filt_var;
};

// Forward pass with stationary initialisation. Throws DomainError for
// non-finite inputs or |phi| >= 1.
FilterResult kalman_filter(const Observations& obs, const Ar1Params& ar, const ObservationNoise& noise);

double kalman_loglik(std::span<const double> y, std::span<const int> n, const Ar1Params& ar,
                     const ObservationNoise& noise);

struct SmoothResult {
  std::vector<double> mean;  // E[X_t | y]
  std::vector<double> var;   // Var[X_t | y]
};

SmoothResult smooth(const Observations& obs, const Ar1Params& ar, const ObservationNoise& noise);
SmoothResult smooth(std::span<const double> y, std::span<const int> n, const Ar1Params& ar,
                    const ObservationNoise& noise);

// One draw of X_1..X_T from p(X | y) by forward filtering, backward sampling.
std::vector<double> ffbs_sample(const Observations& obs, const Ar1Params& ar,
                                const ObservationNoise& noise, std::mt19937_64& rng);
std::vector<double> ffbs_sample(std::span<const double> y, std::span<const int> n,
                                const Ar1Params& ar, const ObservationNoise& noise,
                                std::mt19937_64& rng);

// log p(X_1..X_T | ar) under the stationary AR(1) prior.
double ar1_log_density(std::span<const double> x, const Ar1Params& ar);

struct SimulatedSeries {
  std::vector<double> latent;    // X
  std::vector<double> observed;  // P = exp(y)
  std::vector<double> log_observed;  // y
};

// `n_schedule` supplies n_t (cycled if shorter than T; ignored in constant mode).
SimulatedSeries simulate_ar1(const Ar1Params& ar, const ObservationNoise& noise,
                             std::span<const int> n_schedule, std::size_t T, std::mt19937_64& rng);

}  // namespace aerostate::statespace
