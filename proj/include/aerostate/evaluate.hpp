#pragma once

#include <string>
#include <vector>

#include "aerostate/outcome.hpp"
#include "aerostate/sampler.hpp"

namespace aerostate::evaluate {

inline constexpr double kPointwiseWarnThreshold = 0.4;
inline constexpr double kPollutantStep = 1.1;  // effects reported per +10%

struct WaicReport {
  double lppd = 0.0;
  double p_waic = 0.0;
  double waic = 0.0;
  std::vector<double> lppd_point;
  std::vector<double> p_waic_point;
  std::size_t unreliable_points = 0;  // p_waic contribution above 0.4

  bool reliable() const { return unreliable_points == 0; }
};

// Rows are draws, columns are points. Variance uses the S-1 denominator.
WaicReport waic(const std::vector<std::vector<double>>& pointwise_loglik);

struct Summary {
  double mean = 0.0, sd = 0.0, q025 = 0.0, q50 = 0.0, q975 = 0.0;
};

// Linear interpolation between order statistics at (n-1)p.
double percentile(std::vector<double> values, double p);
Summary summarize(const std::vector<double>& values);
Summary summarize(const sampler::PosteriorDraws& draws, const std::string& parameter);

enum class EffectKind { temperature, pollutant };

struct EffectRow {
  std::string predictor;  // "temperature" or the pollutant id
  std::string parameter;
  EffectKind kind = EffectKind::pollutant;
  Summary coefficient;
  double multiplier = 0.0;  // posterior mean of exp(b) or 1.1^b
  double lower = 0.0, upper = 0.0;
  double percent = 0.0, percent_lower = 0.0, percent_upper = 0.0;
  bool significant = false;
};

using EffectTable = std::vector<EffectRow>;

double multiplier_of(EffectKind kind, double coefficient);
EffectTable effect_table(const sampler::PosteriorDraws& draws, const outcome::OutcomeSpec& spec);

std::string format_effect_table(const EffectTable& table);
std::string format_waic(const WaicReport& report);
void write_effects_csv(const EffectTable& table, const std::string& path);
void write_waic_csv(const WaicReport& report, const std::string& path);

// Percent-change curves with 95% bands, one CSV per predictor in `dir`.
// Temperature spans -10..10 degC, pollutants 0..100% increase.
std::vector<std::string> write_plot_data(const sampler::PosteriorDraws& draws, const EffectTable& table,
                                         const std::string& dir);

}  // namespace aerostate::evaluate
