#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "../support/fixtures.hpp"
#include "aerostate/error.hpp"
#include "aerostate/evaluate.hpp"
#include "aerostate/sampler.hpp"
#include "aerostate/simstudy.hpp"

using namespace aerostate;
using namespace aerostate::sampler;

namespace {

simstudy::Scenario latent_scenario(std::size_t T) {
  simstudy::Scenario s;
  s.name = "unit-latent";
  s.T = T;
  s.phi = 0.7;
  s.sigma2_ar = 0.5;
  s.noise = statespace::NoiseMode::constant;
  s.noise_variance = 0.9;
  return s;
}

outcome::OutcomeSpec latent_spec() {
  outcome::OutcomeSpec spec;
  spec.me_pollutant = "P";
  spec.include_temperature = false;
  spec.priors.scale_is_variance = false;
  return spec;
}

const StateSpaceSpec kConstantNoise{statespace::MeanKind::constant, statespace::NoiseMode::constant};

SamplerConfig short_config(int chains, int iterations, int burn_in, int thin = 1) {
  SamplerConfig c;
  c.chains = chains;
  c.iterations = iterations;
  c.burn_in = burn_in;
  c.thin = thin;
  c.threads = 2;
  return c;
}

// Kolmogorov-Smirnov distance of a sample against Uniform(0, 1).
double ks_uniform(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    d = std::max({d, (i + 1) / n - x[i], x[i] - i / n});
  return d;
}

}  // namespace

TEST_CASE("configuration errors") {
  auto c = short_config(1, 10, 5);
  c.iterations = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = short_config(0, 10, 5);
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = short_config(1, 10, 10);
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = short_config(1, 10, 5, 0);
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = short_config(1, 10, 5);
  c.target_accept = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  const auto data = simstudy::simulate(latent_scenario(20), 1);
  const auto ds = simstudy::to_dataset(data, simstudy::VariantKind::latent);
  c = short_config(1, 0, 0);
  CHECK_THROWS_AS(fit(ds, latent_spec(), kConstantNoise, c), ConfigError);
  c = short_config(1, 10, 5);
  c.fixed["nope"] = 1.0;
  CHECK_THROWS_AS(fit(ds, latent_spec(), kConstantNoise, c), ConfigError);
}

TEST_CASE("chain seeds are distinct and reproducible") {
  CHECK(chain_seed(42, 0) == chain_seed(42, 0));
  CHECK(chain_seed(42, 0) != chain_seed(42, 1));
  CHECK(chain_seed(42, 0) != chain_seed(43, 0));
}

TEST_CASE("initialization") {
  auto s = latent_scenario(60);
  s.counts = true;
  s.beta0 = 2.0;
  s.beta_me = 0.0;
  s.mu_x = 1.0;
  s.beta_cov = {0.0};
  const auto data = simstudy::simulate(s, 3);
  const auto ds = simstudy::to_dataset(data, simstudy::VariantKind::latent);
  auto spec = latent_spec();
  spec.cause = "sim";
  spec.covariates = {"C2"};
  const auto design = outcome::build_design(ds, spec);
  std::mt19937_64 rng(1);
  const auto st = initialize(design, spec, kConstantNoise, rng);

  double ys = 0.0, os = 0.0;
  for (std::size_t p = 0; p < design.points(); ++p) {
    ys += static_cast<double>(design.count[p]);
    os += std::exp(design.log_offset[p]);
  }
  CHECK(st.get("beta0") == doctest::Approx(std::log(ys / os)).epsilon(1e-12));
  CHECK(st.get("beta_me") == 0.0);
  CHECK(st.get("beta[C2]") == 0.0);

  double lm = 0.0;
  for (double v : data.log_observed) lm += v / static_cast<double>(data.log_observed.size());
  CHECK(st.get("mu") == doctest::Approx(lm).epsilon(1e-12));
  CHECK(st.get("phi") == 0.5);
  for (const char* name : {"sigma_ar", "sigma_x"}) {
    CHECK(st.get(name) > 0.0);
    CHECK(st.get(name) < spec.priors.sigma_upper);
  }
  REQUIRE(st.latent.size() == data.log_observed.size());
  for (std::size_t t = 0; t < st.latent.size(); ++t) CHECK(st.latent[t] == doctest::Approx(data.log_observed[t]));

  // Dispersed starts stay inside the support too.
  for (int k = 0; k < 50; ++k) {
    const auto j = initialize(design, spec, kConstantNoise, rng, true);
    CHECK(j.get("phi") > 0.0);
    CHECK(j.get("phi") < 1.0);
    CHECK(j.get("sigma_ar") > 0.0);
    CHECK(j.get("sigma_x") > 0.0);
  }

  auto zero = design;
  std::fill(zero.count.begin(), zero.count.end(), 0L);
  CHECK_THROWS_AS(initialize(zero, spec, kConstantNoise, rng), InitializationError);
}

TEST_CASE("identical inputs give identical draws") {
  auto s = latent_scenario(40);
  s.counts = true;
  s.mu_x = 1.0;
  s.beta0 = 2.0;
  s.beta_me = 0.5;
  const auto ds = simstudy::to_dataset(simstudy::simulate(s, 5), simstudy::VariantKind::latent);
  auto spec = latent_spec();
  spec.cause = "sim";
  auto cfg = short_config(2, 600, 200, 2);
  cfg.latent_thin = 5;
  const auto a = fit(ds, spec, kConstantNoise, cfg);
  cfg.threads = 1;
  const auto b = fit(ds, spec, kConstantNoise, cfg);
  CHECK(a.values == b.values);
  CHECK(a.pointwise == b.pointwise);
  CHECK(a.latent == b.latent);
  CHECK(a.chain == b.chain);
  cfg.seed += 1;
  const auto c = fit(ds, spec, kConstantNoise, cfg);
  CHECK(a.values != c.values);

  CHECK(a.draws() == 2 * 200);
  CHECK(a.pointwise.size() == a.draws());
  CHECK(a.pointwise_weeks.size() == a.pointwise.front().size());
  CHECK(a.latent.size() == 2 * 40);
  for (const auto& row : a.pointwise)
    for (double v : row) CHECK(std::isfinite(v));

  // Prior support on every retained draw.
  for (const auto& name : {"phi", "sigma_ar", "sigma_x"}) {
    for (double v : a.column(name)) {
      CHECK(v > 0.0);
      CHECK(v < (std::string(name) == "phi" ? 1.0 : 20.0));
    }
  }

  // Per-parameter random-walk blocks end burn-in tuned into [0.1, 0.6].
  for (const auto& chain : a.acceptance)
    for (const auto& blk : chain)
      if (a.has_parameter(blk.name) && blk.proposed > 0) {
        CHECK_MESSAGE(blk.rate() >= 0.1, blk.name << " " << blk.rate());
        CHECK_MESSAGE(blk.rate() <= 0.6, blk.name << " " << blk.rate());
      }

  // CSV round trip.
  const auto dir = testing::scratch_dir("sampler_csv");
  write_draws_csv(a, dir + "/draws.csv");
  write_pointwise_csv(a, dir + "/pointwise.csv");
  const auto back = read_draws_csv(dir + "/draws.csv", dir + "/pointwise.csv");
  CHECK(back.parameter_names == a.parameter_names);
  CHECK(back.chain == a.chain);
  CHECK(back.iteration == a.iteration);
  CHECK(back.values == a.values);
  CHECK(back.pointwise == a.pointwise);
}

TEST_CASE("with no likelihood, phi follows its uniform prior") {
  const auto ds = simstudy::to_dataset(simstudy::simulate(latent_scenario(12), 9), simstudy::VariantKind::latent);
  auto cfg = short_config(4, 1000 + 2500 * 20, 1000, 20);
  cfg.prior_only = true;
  cfg.latent_thin = 1000;
  const auto d = fit(ds, latent_spec(), kConstantNoise, cfg);
  const auto phi = d.column("phi");
  REQUIRE(phi.size() == 10000);
  const double D = ks_uniform(phi);
  // 1% critical value of the one-sample KS statistic.
  CHECK(D < 1.628 / std::sqrt(10000.0));
}

TEST_CASE("latent draws reproduce the exact smoother when hyperparameters are fixed") {
  auto s = latent_scenario(30);
  const auto data = simstudy::simulate(s, 11);
  const auto ds = simstudy::to_dataset(data, simstudy::VariantKind::latent);
  auto cfg = short_config(2, 4100, 100);
  cfg.latent_thin = 1;
  cfg.fixed = {{"mu", 10.0}, {"phi", 0.7}, {"sigma_ar", std::sqrt(0.5)}, {"sigma_x", std::sqrt(0.9)}};
  const auto d = fit(ds, latent_spec(), kConstantNoise, cfg);

  statespace::Ar1Params ar;
  ar.phi = 0.7;
  ar.sigma2 = 0.5;
  ar.mean = statespace::MeanStructure::constant(10.0);
  const auto sm = statespace::smooth(data.log_observed, data.n, ar, {statespace::NoiseMode::constant, 0.9});

  const double S = static_cast<double>(d.latent.size());
  REQUIRE(S == 8000);
  for (std::size_t t = 0; t < data.log_observed.size(); ++t) {
    double m = 0.0;
    for (const auto& path : d.latent) m += path[t] / S;
    CHECK_MESSAGE(std::abs(m - sm.mean[t]) < 4.0 * std::sqrt(sm.var[t] / S), "week " << t);
  }
}

TEST_CASE("exact-predictor regression recovers the generating coefficients") {
  auto s = simstudy::builtin("outcome-no-me");
  const auto data = simstudy::simulate(s, chain_seed(s.seed, 0));
  const simstudy::Variant plug{"no-me", simstudy::VariantKind::plug_in};
  const auto ds = simstudy::to_dataset(data, plug.kind);
  auto cfg = short_config(2, 3000, 1000, 2);
  const auto d = fit(ds, simstudy::variant_spec(s, plug), {}, cfg);
  const auto b0 = evaluate::summarize(d, "beta0");
  const auto b1 = evaluate::summarize(d, "beta[P]");
  CHECK(b0.mean >= 9.9);
  CHECK(b0.mean <= 10.1);
  CHECK(b1.mean >= -1.02);
  CHECK(b1.mean <= -0.97);
}

TEST_CASE("latent-only data recover the autoregression") {
  const auto s = simstudy::builtin("ssm-basic");
  const auto data = simstudy::simulate(s, chain_seed(s.seed, 0));
  const auto ds = simstudy::to_dataset(data, simstudy::VariantKind::latent);
  const auto d = fit(ds, simstudy::variant_spec(s, s.variants.front()), {statespace::MeanKind::constant, s.variants.front().noise},
                     s.sampler);
  const auto phi = evaluate::summarize(d, "phi");
  CHECK(phi.mean >= 0.59);
  CHECK(phi.mean <= 0.86);
}
