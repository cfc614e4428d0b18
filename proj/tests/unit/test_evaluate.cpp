#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "../support/fixtures.hpp"
#include "aerostate/error.hpp"
#include "aerostate/evaluate.hpp"

using namespace aerostate;
using namespace aerostate::evaluate;

namespace {

std::vector<std::vector<double>> random_loglik(std::size_t S, std::size_t N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> ll(S, std::vector<double>(N));
  for (std::size_t j = 0; j < N; ++j) {
    const double centre = -2.0 + 0.3 * z(rng);
    for (std::size_t s = 0; s < S; ++s) ll[s][j] = centre + 0.2 * z(rng);
  }
  return ll;
}

sampler::PosteriorDraws constant_draws(const std::vector<std::string>& names, const std::vector<double>& values,
                                       int n = 40) {
  sampler::PosteriorDraws d;
  d.parameter_names = names;
  d.chains = 1;
  for (int i = 0; i < n; ++i) {
    d.values.push_back(values);
    d.chain.push_back(0);
    d.iteration.push_back(i + 1);
  }
  return d;
}

}  // namespace

TEST_CASE("WAIC hand computation") {
  const std::vector<std::vector<double>> ll{{std::log(0.5)}, {std::log(0.25)}};
  const auto r = waic(ll);
  CHECK(r.lppd == doctest::Approx(std::log(0.375)).epsilon(1e-14));
  const double d = std::log(0.5) - std::log(0.25);
  CHECK(r.p_waic == doctest::Approx(d * d / 2.0).epsilon(1e-14));  // S-1 denominator
  CHECK(r.waic == doctest::Approx(-2.0 * (r.lppd - r.p_waic)).epsilon(1e-14));
  CHECK(r.lppd_point.size() == 1);
}

TEST_CASE("identical draws give zero penalty") {
  const std::vector<std::vector<double>> ll(5, std::vector<double>{-1.0, -2.5, -0.25});
  const auto r = waic(ll);
  CHECK(r.p_waic == 0.0);
  CHECK(r.waic == doctest::Approx(2.0 * 3.75).epsilon(1e-14));
  CHECK(r.reliable());
}

TEST_CASE("lppd matches a direct average on a small matrix") {
  const auto ll = random_loglik(7, 5, 2);
  const auto r = waic(ll);
  double lppd = 0.0, pw = 0.0;
  for (std::size_t j = 0; j < 5; ++j) {
    double m = 0.0, mean = 0.0;
    for (const auto& row : ll) {
      m += std::exp(row[j]) / 7.0;
      mean += row[j] / 7.0;
    }
    double v = 0.0;
    for (const auto& row : ll) v += (row[j] - mean) * (row[j] - mean) / 6.0;
    lppd += std::log(m);
    pw += v;
  }
  CHECK(r.lppd == doctest::Approx(lppd).epsilon(1e-12));
  CHECK(r.p_waic == doctest::Approx(pw).epsilon(1e-12));
  CHECK(r.p_waic >= 0.0);

  // Stable far from zero probability.
  auto far = ll;
  for (auto& row : far)
    for (auto& v : row) v -= 2000.0;
  const auto rf = waic(far);
  CHECK(rf.lppd == doctest::Approx(lppd - 5 * 2000.0).epsilon(1e-12));
}

TEST_CASE("WAIC is invariant to reordering draws and points") {
  auto ll = random_loglik(400, 60, 11);
  const auto base = waic(ll);
  std::mt19937_64 rng(3);
  std::shuffle(ll.begin(), ll.end(), rng);
  const auto by_draw = waic(ll);
  std::vector<std::size_t> perm(60);
  for (std::size_t i = 0; i < 60; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  for (auto& row : ll) {
    auto copy = row;
    for (std::size_t j = 0; j < 60; ++j) row[j] = copy[perm[j]];
  }
  const auto by_point = waic(ll);
  CHECK(std::abs(by_draw.waic - base.waic) < 1e-9);
  CHECK(std::abs(by_point.waic - base.waic) < 1e-9);
  CHECK(std::abs(by_point.p_waic - base.p_waic) < 1e-9);
}

TEST_CASE("a jitter column raises the penalty") {
  auto ll = random_loglik(300, 20, 5);
  const auto base = waic(ll);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z;
  for (auto& row : ll) row.push_back(z(rng));
  const auto jittered = waic(ll);
  CHECK(jittered.p_waic > base.p_waic);
  CHECK(jittered.unreliable_points == base.unreliable_points + 1);
}

TEST_CASE("WAIC input errors") {
  CHECK_THROWS_AS(waic({{-1.0, -2.0}}), ValidationError);
  CHECK_THROWS_AS(waic({{-1.0}, {std::nan("")}}), ValidationError);
  CHECK_THROWS_AS(waic({{-1.0}, {-std::numeric_limits<double>::infinity()}}), ValidationError);
}

TEST_CASE("summaries") {
  const auto c = summarize(std::vector<double>(20, 2.5));
  CHECK(c.mean == 2.5);
  CHECK(c.sd == 0.0);
  CHECK(c.q025 == 2.5);
  CHECK(c.q50 == 2.5);
  CHECK(c.q975 == 2.5);

  std::vector<double> hundred;
  for (int i = 1; i <= 100; ++i) hundred.push_back(i);
  CHECK(summarize(hundred).q50 == 50.5);
  CHECK(percentile(hundred, 0.025) == doctest::Approx(1.0 + 99 * 0.025));

  std::mt19937_64 rng(12);
  std::normal_distribution<double> z;
  std::vector<double> normal(100000);
  for (auto& v : normal) v = z(rng);
  CHECK(std::abs(summarize(normal).q975 - 1.959964) < 0.02);

  CHECK_THROWS_AS(summarize(std::vector<double>(9, 1.0)), ValidationError);
  const auto d = constant_draws({"a"}, {1.0});
  CHECK_THROWS_AS(summarize(d, "b"), ValidationError);
}

TEST_CASE("effect table conventions") {
  outcome::OutcomeSpec spec;
  spec.cause = "copd";
  spec.me_pollutant = "PM25";
  spec.covariates = {"NO2"};
  const double me = std::log(1.0063) / std::log(1.1);
  const auto d = constant_draws({"beta0", "beta_temp", "beta[NO2]", "beta_me"}, {-9.0, std::log(0.9820), 0.0, me});
  const auto t = effect_table(d, spec);
  REQUIRE(t.size() == 3);
  const auto row = [&](const std::string& p) {
    return *std::find_if(t.begin(), t.end(), [&](const EffectRow& r) { return r.parameter == p; });
  };
  const auto temp = row("beta_temp");
  CHECK(temp.kind == EffectKind::temperature);
  CHECK(std::abs(temp.multiplier - 0.9820) < 1e-12);
  CHECK(std::abs(temp.percent - (-1.8)) < 1e-9);
  CHECK(std::abs(row("beta[NO2]").percent) < 1e-12);
  CHECK(std::abs(row("beta_me").multiplier - 1.0063) < 1e-12);
  CHECK(std::abs(row("beta_me").percent - 0.63) < 1e-9);
  CHECK(row("beta_me").predictor == "PM25");
  CHECK(row("beta_me").significant);
  CHECK_FALSE(row("beta[NO2]").significant);

  const auto text = format_effect_table(t);
  CHECK(text.find("0.9820") != std::string::npos);
}

TEST_CASE("multiplicative intervals are exact transforms of coefficient percentiles") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> z;
  outcome::OutcomeSpec spec;
  spec.cause = "x";
  spec.covariates = {"NO2"};
  sampler::PosteriorDraws d;
  d.parameter_names = {"beta0", "beta_temp", "beta[NO2]"};
  d.chains = 1;
  for (int i = 0; i < 997; ++i) {
    d.values.push_back({z(rng), -0.02 + 0.01 * z(rng), 0.05 + 0.2 * z(rng)});
    d.chain.push_back(0);
    d.iteration.push_back(i + 1);
  }
  for (const auto& r : effect_table(d, spec)) {
    const auto col = d.column(r.parameter);
    const double lo = percentile(col, 0.025), hi = percentile(col, 0.975);
    CHECK(std::abs(r.lower - multiplier_of(r.kind, lo)) < 1e-12);
    CHECK(std::abs(r.upper - multiplier_of(r.kind, hi)) < 1e-12);
    CHECK(r.lower <= r.multiplier);
    CHECK(r.multiplier <= r.upper);
    CHECK(std::abs(r.percent_lower - (r.lower - 1.0) * 100.0) < 1e-9);
  }
  CHECK(multiplier_of(EffectKind::temperature, 0.3) == std::exp(0.3));
  CHECK(multiplier_of(EffectKind::pollutant, 0.3) == std::pow(1.1, 0.3));
}

TEST_CASE("report files") {
  const auto dir = testing::scratch_dir("evaluate_out");
  outcome::OutcomeSpec spec;
  spec.cause = "x";
  spec.covariates = {"NO2"};
  const auto d = constant_draws({"beta0", "beta_temp", "beta[NO2]"}, {0.0, -0.01, 0.2});
  const auto t = effect_table(d, spec);
  write_effects_csv(t, dir + "/effects.csv");
  write_waic_csv(waic(random_loglik(10, 4, 1)), dir + "/waic.csv");
  const auto plots = write_plot_data(d, t, dir + "/plots");
  CHECK(plots.size() == 2);
  for (const auto& p : plots) CHECK(std::filesystem::exists(p));
  CHECK(std::filesystem::exists(dir + "/effects.csv"));
  CHECK(std::filesystem::exists(dir + "/waic.csv"));
}
