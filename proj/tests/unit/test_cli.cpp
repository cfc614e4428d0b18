#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "../support/fixtures.hpp"
#include "aerostate/cli.hpp"
#include "aerostate/dataset.hpp"
#include "aerostate/error.hpp"
#include "aerostate/evaluate.hpp"

using namespace aerostate;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "aerostate");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> ingest_args(const testing::FixtureFiles& f, const std::string& out) {
  std::vector<std::string> a{"ingest"};
  for (const auto& p : f.pollutants) {
    a.push_back("--pollutant");
    a.push_back(p);
  }
  for (const auto& [flag, v] : std::vector<std::pair<std::string, std::string>>{{"--temperature", f.temperature},
                                                                                {"--deaths", f.deaths},
                                                                                {"--population", f.population},
                                                                                {"--start", f.start},
                                                                                {"--end", f.end},
                                                                                {"--out", out}}) {
    a.push_back(flag);
    a.push_back(v);
  }
  return a;
}

// Shared ingest of the fixture files.
const std::string& fixture_dataset() {
  static const std::string path = [] {
    const auto dir = testing::scratch_dir("cli_fixture");
    const auto f = testing::write_fixture(dir + "/in");
    const auto r = invoke(ingest_args(f, dir + "/ds"));
    REQUIRE(r.code == 0);
    return dir + "/ds/dataset.csv";
  }();
  return path;
}

std::vector<std::string> quick_fit(const std::string& out, std::vector<std::string> model) {
  std::vector<std::string> a{"fit",          "--dataset", fixture_dataset(), "--cause", "COPD",
                             "--chains",     "2",         "--iterations",    "1500",    "--burn-in",
                             "500",          "--thin",    "2",               "--seed",  "11",
                             "--out",        out};
  a.insert(a.end(), model.begin(), model.end());
  return a;
}

}  // namespace

TEST_CASE("help on every command") {
  const auto top = invoke({"--help"});
  CHECK(top.code == 0);
  for (const auto* sub : {"ingest", "fit", "compare", "simulate", "report"})
    CHECK(top.out.find(sub) != std::string::npos);

  const auto fit = invoke({"fit", "--help"});
  CHECK(fit.code == 0);
  for (const auto* flag : {"--config", "--seed", "--chains", "--iterations", "--burn-in", "--thin", "--strict", "--out"})
    CHECK_MESSAGE(fit.out.find(flag) != std::string::npos, flag);
  for (const auto* sub : {"ingest", "compare", "simulate", "report"}) {
    const auto r = invoke({sub, "--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("--") != std::string::npos);
  }
  CHECK(invoke({"ingest", "--help"}).out.find("--config") != std::string::npos);
  CHECK(invoke({"simulate", "--help"}).out.find("--replications") != std::string::npos);
}

TEST_CASE("usage errors") {
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"fit", "--chains", "0"}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
  const auto r = invoke({"simulate", "no-such-scenario"});
  CHECK(r.code != 0);
  CHECK(r.err.find("ssm-basic") != std::string::npos);
  CHECK(r.err.find("outcome-me-full") != std::string::npos);
}

TEST_CASE("ingest writes the 259-week dump deterministically") {
  const auto dir = testing::scratch_dir("cli_ingest");
  const auto f = testing::write_fixture(dir + "/in");
  const auto before = cli::checksum_file(f.pollutants.front());
  REQUIRE(invoke(ingest_args(f, dir + "/a")).code == 0);
  REQUIRE(invoke(ingest_args(f, dir + "/b")).code == 0);
  CHECK(WeeklyDataset::read_csv(dir + "/a/dataset.csv").size() == 259);
  CHECK(cli::checksum_file(dir + "/a/dataset.csv") == cli::checksum_file(dir + "/b/dataset.csv"));
  CHECK(fs::exists(dir + "/a/drop_report.txt"));
  CHECK(cli::checksum_file(f.pollutants.front()) == before);

  std::ofstream(dir + "/empty.csv").close();
  auto bad = f;
  bad.pollutants.front() = dir + "/empty.csv";
  const auto r = invoke(ingest_args(bad, dir + "/c"));
  CHECK(r.code != 0);
  CHECK(r.err.find("empty.csv") != std::string::npos);
}

TEST_CASE("config file drives ingest with flags on top") {
  const auto dir = testing::scratch_dir("cli_config");
  const auto f = testing::write_fixture(dir + "/in");
  std::ofstream(dir + "/run.json") << R"({
    "data": {"pollutants": ["in/)" << fs::path(f.pollutants[0]).filename().string() << R"(", "in/)"
                                   << fs::path(f.pollutants[1]).filename().string() << R"("],
             "temperature": "in/)" << fs::path(f.temperature).filename().string() << R"(",
             "deaths": "in/)" << fs::path(f.deaths).filename().string() << R"(",
             "population": "in/)" << fs::path(f.population).filename().string() << R"("},
    "output": "from_config"
  })";
  const auto r = invoke({"ingest", "--config", dir + "/run.json", "--out", dir + "/flag_out"});
  CHECK(r.code == 0);
  CHECK(fs::exists(dir + "/flag_out/dataset.csv"));
  CHECK_FALSE(fs::exists(dir + "/from_config"));

  const auto c = cli::load_config(dir + "/run.json");
  CHECK(c.temperature_file == (fs::path(dir) / "in" / fs::path(f.temperature).filename()).string());
  CHECK_THROWS_AS(cli::parse_config(R"({"data": {"deaths": "missing.csv"}})", dir), ConfigError);
  CHECK_THROWS_AS(cli::parse_config("{not json", dir), ConfigError);
  const auto p = cli::parse_config(R"({"priors": {"prior_scale_is_variance": false}, "sampler": {"chains": 3}})", dir);
  CHECK_FALSE(p.outcome.priors.scale_is_variance);
  CHECK(p.sampler.chains == 3);
}

TEST_CASE("temperature-only COPD fit") {
  const auto dir = testing::scratch_dir("cli_fit");
  const auto a = invoke(quick_fit(dir + "/a", {}));
  REQUIRE_MESSAGE(a.code == 0, a.err);
  for (const auto* file : {"draws.csv", "pointwise.csv", "effects.csv", "waic.csv", "diagnostics.csv", "fit_meta.json"})
    CHECK_MESSAGE(fs::exists(dir + "/a/" + std::string(file)), file);
  CHECK(a.out.find("temperature") != std::string::npos);

  const auto effects = slurp(dir + "/a/effects.csv");
  std::istringstream rows(effects);
  std::string header, row;
  std::getline(rows, header);
  std::getline(rows, row);
  CHECK(row.rfind("temperature,", 0) == 0);
  const auto draws = sampler::read_draws_csv(dir + "/a/draws.csv", dir + "/a/pointwise.csv");
  const auto s = evaluate::summarize(draws, "beta_temp");
  CHECK(std::exp(s.mean) < 1.0);

  const auto b = invoke(quick_fit(dir + "/b", {}));
  REQUIRE(b.code == 0);
  CHECK(slurp(dir + "/a/draws.csv") == slurp(dir + "/b/draws.csv"));
  CHECK(slurp(dir + "/a/pointwise.csv") == slurp(dir + "/b/pointwise.csv"));

  const auto rep = invoke({"report", dir + "/a"});
  CHECK(rep.code == 0);
  CHECK(rep.out.find("WAIC") != std::string::npos);
}

TEST_CASE("a short, unconverged run warns and fails under --strict") {
  const auto dir = testing::scratch_dir("cli_strict");
  std::vector<std::string> args{"fit",     "--dataset", fixture_dataset(), "--cause", "CVD",   "--me",
                                "PM25",    "--chains",  "4",               "--iterations", "30",
                                "--burn-in", "10",     "--thin",          "1",       "--out", dir + "/x"};
  const auto loose = invoke(args);
  REQUIRE_MESSAGE(loose.code == 0, loose.err);
  CHECK(loose.err.find("WARN") != std::string::npos);
  args.push_back("--strict");
  CHECK(invoke(args).code != 0);
}

TEST_CASE("compare ranks by WAIC and refuses mismatched fits") {
  const auto dir = testing::scratch_dir("cli_compare");
  REQUIRE(invoke(quick_fit(dir + "/temp", {})).code == 0);
  REQUIRE(invoke(quick_fit(dir + "/cov", {"--covariate", "NO2"})).code == 0);
  REQUIRE(invoke(quick_fit(dir + "/same", {})).code == 0);

  const auto r = invoke({"compare", dir + "/temp", dir + "/cov", "--out", dir + "/cmp"});
  REQUIRE(r.code == 0);
  const auto table = slurp(dir + "/cmp/comparison.csv");
  CHECK(table.rfind("rank,fit,waic,model,significant,tie\n", 0) == 0);

  const auto tie = invoke({"compare", dir + "/temp", dir + "/same"});
  CHECK(tie.code == 0);
  CHECK(tie.out.find("(tie)") != std::string::npos);

  // Another cause on the same dataset.
  auto cvd = quick_fit(dir + "/cvd", {});
  cvd[4] = "CVD";
  REQUIRE(invoke(cvd).code == 0);
  const auto refuse_cause = invoke({"compare", dir + "/temp", dir + "/cvd"});
  CHECK(refuse_cause.code != 0);
  CHECK(refuse_cause.err.find("outcome") != std::string::npos);

  // Another dataset.
  const auto other = testing::scratch_dir("cli_compare_other");
  const auto f = testing::write_fixture(other + "/in", 99);
  REQUIRE(invoke(ingest_args(f, other + "/ds")).code == 0);
  auto fit_other = quick_fit(dir + "/other", {});
  fit_other[2] = other + "/ds/dataset.csv";
  REQUIRE(invoke(fit_other).code == 0);
  const auto refuse = invoke({"compare", dir + "/temp", dir + "/other"});
  CHECK(refuse.code != 0);
  CHECK(refuse.err.find("different datasets") != std::string::npos);
}

TEST_CASE("simulate is reproducible") {
  const auto dir = testing::scratch_dir("cli_sim");
  std::ofstream(dir + "/tiny.json") << R"({"base": "ssm-basic", "name": "tiny-ssm", "T": 60})";
  const std::vector<std::string> common{"--replications", "1", "--seed", "7", "--iterations", "600", "--burn-in", "200"};
  auto a = std::vector<std::string>{"simulate", dir + "/tiny.json", "--out", dir + "/a"};
  auto b = std::vector<std::string>{"simulate", dir + "/tiny.json", "--out", dir + "/b"};
  a.insert(a.end(), common.begin(), common.end());
  b.insert(b.end(), common.begin(), common.end());
  const auto ra = invoke(a);
  REQUIRE_MESSAGE(ra.code == 0, ra.err);
  REQUIRE(invoke(b).code == 0);
  CHECK(ra.out.find("coverage") != std::string::npos);
  for (const auto* file : {"tiny-ssm_scores.csv", "tiny-ssm_summary.txt"})
    CHECK(slurp(dir + "/a/" + std::string(file)) == slurp(dir + "/b/" + std::string(file)));
}

#ifdef AEROSTATE_CLI_PATH
TEST_CASE("the installed binary reports exit codes") {
  const std::string bin = AEROSTATE_CLI_PATH;
  CHECK(std::system((bin + " --help > /dev/null").c_str()) == 0);
  CHECK(std::system((bin + " fit --chains 0 > /dev/null 2>&1").c_str()) != 0);
}
#endif
