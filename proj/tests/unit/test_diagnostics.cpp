#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "../support/fixtures.hpp"
#include "aerostate/diagnostics.hpp"

using namespace aerostate;
using namespace aerostate::diagnostics;

namespace {

std::vector<std::vector<double>> normal_chains(int m, int n, std::uint64_t seed, double shift = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> chains(m);
  for (int c = 0; c < m; ++c)
    for (int i = 0; i < n; ++i) chains[c].push_back(z(rng) + c * shift);
  return chains;
}

}  // namespace

TEST_CASE("iid chains: ESS near the draw count and R-hat near one") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const auto chains = normal_chains(4, 2500, seed);
    const double ess = effective_sample_size(chains);
    CHECK(std::abs(ess / 10000.0 - 1.0) < 0.2);
    CHECK(*split_rhat(chains) < 1.01);
  }
}

TEST_CASE("AR(1) chains have ESS near the theoretical value") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z;
  const double rho = 0.8;
  std::vector<std::vector<double>> chains(4);
  for (auto& ch : chains) {
    double x = z(rng) / std::sqrt(1 - rho * rho);
    for (int i = 0; i < 20000; ++i) {
      x = rho * x + z(rng);
      ch.push_back(x);
    }
  }
  const double expected = 80000.0 * (1 - rho) / (1 + rho);
  CHECK(std::abs(effective_sample_size(chains) / expected - 1.0) < 0.15);
}

TEST_CASE("shifted chains are flagged") {
  const auto chains = normal_chains(4, 1000, 9, 1.0);
  CHECK(*split_rhat(chains) > kRhatFlag);

  // A trend inside one chain shows up through the split halves.
  std::vector<std::vector<double>> trend{std::vector<double>(1000), std::vector<double>(1000)};
  for (int i = 0; i < 1000; ++i) trend[0][i] = trend[1][i] = i / 100.0;
  CHECK(*split_rhat(trend) > kRhatFlag);
}

TEST_CASE("degenerate inputs") {
  const std::vector<std::vector<double>> constant{std::vector<double>(50, 3.0), std::vector<double>(50, 3.0)};
  CHECK(*split_rhat(constant) == 1.0);
  const std::vector<std::vector<double>> apart{std::vector<double>(50, 3.0), std::vector<double>(50, 4.0)};
  CHECK(std::isinf(*split_rhat(apart)));

  const auto one = normal_chains(1, 4000, 3);
  CHECK_FALSE(split_rhat(one).has_value());
  CHECK(std::abs(effective_sample_size(one) / 4000.0 - 1.0) < 0.2);
}

TEST_CASE("diagnose walks every parameter") {
  sampler::PosteriorDraws d;
  d.parameter_names = {"a", "b"};
  d.chains = 2;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 500; ++i) {
      d.values.push_back({z(rng), z(rng) + 3.0 * c});
      d.chain.push_back(c);
      d.iteration.push_back(i + 1);
    }
  const auto diags = diagnose(d);
  REQUIRE(diags.size() == 2);
  CHECK(diags[0].name == "a");
  CHECK_FALSE(diags[0].flagged);
  CHECK(diags[1].flagged);
  CHECK(any_flagged(diags));
  CHECK(max_rhat(diags) == *diags[1].rhat);

  const auto path = testing::scratch_dir("diag") + "/diagnostics.csv";
  write_diagnostics_csv(diags, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "parameter,rhat,ess,flag");
}
