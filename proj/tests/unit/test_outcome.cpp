#include <doctest.h>

#include <cmath>
#include <random>

#include "aerostate/error.hpp"
#include "aerostate/outcome.hpp"

using namespace aerostate;
using namespace aerostate::outcome;

namespace {

WeeklyDataset small_dataset(std::size_t T, bool drop_middle = false) {
  std::vector<WeeklyObservation> rows;
  auto w = mmwr_week(2019, 1);
  for (std::size_t t = 0; t < T; ++t, w = next_week(w)) {
    if (drop_middle && t == T / 2) continue;
    WeeklyObservation o;
    o.week = w;
    o.pollutant_levels = {{"PM25", 10.0 + t}, {"NO2", 20.0 + 2.0 * t}};
    o.valid_days = {{"PM25", 7}, {"NO2", 6}};
    o.temperature_raw = 15.0 + static_cast<double>(t % 5);
    o.deaths = {{"copd", static_cast<long>(40 + t)}};
    o.population = 1e6;
    rows.push_back(o);
  }
  return WeeklyDataset(rows);
}

}  // namespace

TEST_CASE("log intensity") {
  LinearPredictorParams zero;
  zero.beta = {0.0};
  const std::vector<double> cov{5.0};
  CHECK(std::exp(log_intensity(zero, 1.0, 2.0, cov, 250.0)) == doctest::Approx(250.0).epsilon(1e-12));

  LinearPredictorParams p;
  p.beta0 = -3.0;
  p.beta_temp = std::log(0.9820);
  p.beta = {0.4};
  const double base = log_intensity(p, 2.0, 0.0, cov, 100.0);
  CHECK(std::exp(log_intensity(p, 3.0, 0.0, cov, 100.0) - base) == doctest::Approx(0.9820).epsilon(1e-12));

  p.beta = {std::log(1.0063) / std::log(1.1)};
  const std::vector<double> up{5.5};
  CHECK(std::exp(log_intensity(p, 2.0, 0.0, up, 100.0) - log_intensity(p, 2.0, 0.0, cov, 100.0)) ==
        doctest::Approx(1.0063).epsilon(1e-12));

  for (double s : {0.5, 1.1, 3.0}) {
    const std::vector<double> scaled{5.0 * s};
    const double ratio = std::exp(log_intensity(p, 0.0, 0.0, scaled, 1.0) - log_intensity(p, 0.0, 0.0, cov, 1.0));
    CHECK(std::abs(ratio - std::pow(s, p.beta[0])) < 1e-12);
  }
  CHECK_THROWS_AS(log_intensity(p, 0.0, 0.0, cov, 0.0), DomainError);
  const std::vector<double> neg{-1.0};
  CHECK_THROWS_AS(log_intensity(p, 0.0, 0.0, neg, 1.0), DomainError);
}

TEST_CASE("Poisson pointwise log-likelihood") {
  CHECK(poisson_loglik_pointwise(0, 0.0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(poisson_loglik_pointwise(3, std::log(3.0)) ==
        doctest::Approx(3.0 * std::log(3.0) - 3.0 - std::log(6.0)).epsilon(1e-14));
  CHECK_THROWS_AS(poisson_loglik_pointwise(-1, 0.0), DomainError);
  CHECK_THROWS_AS(poisson_loglik_pointwise(1, std::nan("")), DomainError);

  // Independent summation of log(lambda^y e^-lambda / y!) with an explicit factorial.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> lam(0.5, 30.0);
  double a = 0.0, b = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double l = lam(rng);
    std::poisson_distribution<long> pois(l);
    const long y = pois(rng);
    a += poisson_loglik_pointwise(y, std::log(l));
    double logfact = 0.0;
    for (long k = 2; k <= y; ++k) logfact += std::log(static_cast<double>(k));
    b += y * std::log(l) - l - logfact;
  }
  CHECK(std::abs(a - b) < 1e-10);
}

TEST_CASE("design reads predictors at the previous week only") {
  const auto ds = small_dataset(12);
  OutcomeSpec spec;
  spec.cause = "copd";
  spec.me_pollutant = "PM25";
  spec.covariates = {"NO2"};
  const auto d = build_design(ds, spec);
  REQUIRE(d.points() == 11);
  CHECK(d.fixed_names == std::vector<std::string>{"beta_temp", "beta[NO2]"});
  for (std::size_t p = 0; p < d.points(); ++p) {
    CHECK(d.lag_week[p] + 1 == d.week[p]);
    CHECK(d.count[p] == ds.rows()[d.week[p]].deaths.at("copd"));
    CHECK(d.fixed[p][0] == ds.centered_temperature(d.lag_week[p]));
    CHECK(d.fixed[p][1] == doctest::Approx(std::log(ds.rows()[d.lag_week[p]].pollutant_levels.at("NO2"))));
    CHECK(d.log_offset[p] == doctest::Approx(std::log(1e6)));
  }
  CHECK(d.me_log_obs[0] == doctest::Approx(std::log(10.0)));
  CHECK(d.me_n[0] == 7);
}

TEST_CASE("a missing week removes the two outcome points that touch it") {
  const auto ds = small_dataset(12, true);
  OutcomeSpec spec;
  spec.cause = "copd";
  spec.me_pollutant = "PM25";
  const auto d = build_design(ds, spec);
  CHECK(d.grid_length == 12);
  CHECK(d.points() == 9);
  CHECK(std::isnan(d.me_log_obs[6]));
}

TEST_CASE("design validation") {
  const auto ds = small_dataset(6);
  OutcomeSpec spec;
  spec.cause = "flu";
  CHECK_THROWS_AS(build_design(ds, spec), ValidationError);
  spec.cause = "copd";
  spec.covariates = {"SO2"};
  CHECK_THROWS_AS(build_design(ds, spec), ValidationError);
}

TEST_CASE("outcome simulation") {
  const std::size_t T = 40;
  PredictorFrame frame;
  frame.temperature.assign(T, 0.0);
  frame.offsets.assign(T, 1.0);
  frame.covariates.assign(T, {1.0, 1.0});
  std::vector<double> latent(T, 10.0);
  LinearPredictorParams p;
  p.beta0 = 10.0;
  p.beta_me = -1.0;
  p.beta = {0.1, -0.5};
  std::mt19937_64 rng(1);
  const auto y = simulate_outcome(p, frame, latent, rng);
  CHECK(y.size() == T - 1);

  // Law of large numbers at a fixed week.
  latent.assign(T, 8.0);
  const double lambda = std::exp(2.0);
  double mean = 0.0;
  const int R = 100000;
  for (int r = 0; r < R; ++r) mean += static_cast<double>(simulate_outcome(p, frame, latent, rng)[5]) / R;
  CHECK(std::abs(mean / lambda - 1.0) < 0.01);

  p.beta0 = 800.0;
  CHECK_THROWS_AS(simulate_outcome(p, frame, latent, rng), SimulationError);
  p.beta0 = -std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(simulate_outcome(p, frame, latent, rng), SimulationError);
}

TEST_CASE("prior readings") {
  PriorSpec p;
  CHECK(p.coefficient_variance() == 0.1);
  p.scale_is_variance = false;
  CHECK(p.coefficient_variance() == doctest::Approx(10.0));
}
