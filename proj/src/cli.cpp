#include "aerostate/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "aerostate/csv.hpp"
#include "aerostate/diagnostics.hpp"
#include "aerostate/error.hpp"
#include "aerostate/evaluate.hpp"
#include "aerostate/ingest.hpp"
#include "aerostate/simstudy.hpp"

namespace aerostate::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitFailure = 1;
constexpr int kExitStrict = 3;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute() || base.empty()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

void require_file(const std::string& path, const std::string& what) {
  if (!path.empty() && !fs::exists(path)) throw ConfigError(what + " file does not exist: " + path);
}

statespace::MeanKind parse_mean(const std::string& s) {
  if (s == "constant") return statespace::MeanKind::constant;
  if (s == "harmonic") return statespace::MeanKind::harmonic;
  if (s == "warped") return statespace::MeanKind::warped;
  throw ConfigError("unknown mean structure '" + s + "' (constant, harmonic, warped)");
}

std::string mean_name(statespace::MeanKind k) {
  switch (k) {
    case statespace::MeanKind::constant:
      return "constant";
    case statespace::MeanKind::harmonic:
      return "harmonic";
    case statespace::MeanKind::warped:
      return "warped";
  }
  return "constant";
}

statespace::NoiseMode parse_noise(const std::string& s) {
  if (s == "scaled") return statespace::NoiseMode::scaled_by_n;
  if (s == "constant") return statespace::NoiseMode::constant;
  throw ConfigError("unknown noise mode '" + s + "' (scaled, constant)");
}

std::string noise_name(statespace::NoiseMode m) {
  return m == statespace::NoiseMode::constant ? "constant" : "scaled";
}

template <class T>
void take(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

void apply_sampler(const json& j, sampler::SamplerConfig& c) {
  take(j, "chains", c.chains);
  take(j, "iterations", c.iterations);
  take(j, "burn_in", c.burn_in);
  take(j, "thin", c.thin);
  take(j, "latent_thin", c.latent_thin);
  take(j, "latent_block", c.latent_block);
  take(j, "seed", c.seed);
  take(j, "adapt_window", c.adapt_window);
  take(j, "target_accept", c.target_accept);
  take(j, "prior_only", c.prior_only);
  take(j, "threads", c.threads);
  if (j.contains("fixed"))
    for (const auto& [k, v] : j.at("fixed").items()) c.fixed[k] = v.get<double>();
}

void apply_priors(const json& j, outcome::PriorSpec& p) {
  take(j, "coefficient_scale", p.coefficient_scale);
  take(j, "level_scale", p.level_scale);
  take(j, "prior_scale_is_variance", p.scale_is_variance);
  take(j, "sigma_upper", p.sigma_upper);
  take(j, "amplitude_variance", p.amplitude_variance);
  take(j, "shape_b_upper", p.shape_b_upper);
  take(j, "shape_c_bound", p.shape_c_bound);
}

json sampler_json(const sampler::SamplerConfig& c) {
  json fixed = json::object();
  for (const auto& [k, v] : c.fixed) fixed[k] = v;
  return {{"chains", c.chains},           {"iterations", c.iterations}, {"burn_in", c.burn_in},
          {"thin", c.thin},               {"latent_thin", c.latent_thin}, {"latent_block", c.latent_block},
          {"seed", c.seed},               {"adapt_window", c.adapt_window},
          {"target_accept", c.target_accept}, {"prior_only", c.prior_only}, {"fixed", fixed}};
}

json priors_json(const outcome::PriorSpec& p) {
  return {{"coefficient_scale", p.coefficient_scale},
          {"level_scale", p.level_scale},
          {"prior_scale_is_variance", p.scale_is_variance},
          {"sigma_upper", p.sigma_upper},
          {"amplitude_variance", p.amplitude_variance},
          {"shape_b_upper", p.shape_b_upper},
          {"shape_c_bound", p.shape_c_bound}};
}

json outcome_json(const outcome::OutcomeSpec& o) {
  json j = {{"cause", o.cause},
            {"covariates", o.covariates},
            {"include_temperature", o.include_temperature},
            {"priors", priors_json(o.priors)}};
  j["me_pollutant"] = o.me_pollutant ? json(*o.me_pollutant) : json(nullptr);
  return j;
}

outcome::OutcomeSpec outcome_from_json(const json& j) {
  outcome::OutcomeSpec o;
  take(j, "cause", o.cause);
  if (j.contains("me_pollutant") && !j.at("me_pollutant").is_null())
    o.me_pollutant = j.at("me_pollutant").get<std::string>();
  take(j, "covariates", o.covariates);
  take(j, "include_temperature", o.include_temperature);
  if (j.contains("priors")) apply_priors(j.at("priors"), o.priors);
  return o;
}

std::string fixed_digits(double v, int d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", d, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("output directory is not writable: " + dir);
}

void write_latent_csv(const sampler::PosteriorDraws& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "chain,draw";
  const std::size_t G = d.latent.empty() ? 0 : d.latent.front().size();
  for (std::size_t g = 0; g < G; ++g) out << ",w" << g;
  out << '\n';
  for (std::size_t i = 0; i < d.latent.size(); ++i) {
    out << d.latent_chain[i] << ',' << i;
    for (double v : d.latent[i]) out << ',' << csv::format_number(v);
    out << '\n';
  }
}

// Options shared by commands that run the sampler.
struct SamplerFlags {
  std::optional<std::uint64_t> seed;
  std::optional<int> chains, iterations, burn_in, thin;

  void add(CLI::App& app) {
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--chains", chains, "Number of chains (>= 1)")->check(CLI::PositiveNumber);
    app.add_option("--iterations", iterations, "Iterations per chain, burn-in included (>= 1)")
        ->check(CLI::PositiveNumber);
    app.add_option("--burn-in", burn_in, "Burn-in iterations")->check(CLI::NonNegativeNumber);
    app.add_option("--thin", thin, "Keep every k-th post burn-in iteration (>= 1)")->check(CLI::PositiveNumber);
  }
  void apply(sampler::SamplerConfig& c) const {
    if (seed) c.seed = *seed;
    if (chains) c.chains = *chains;
    if (iterations) c.iterations = *iterations;
    if (burn_in) c.burn_in = *burn_in;
    if (thin) c.thin = *thin;
  }
};

// ---------------------------------------------------------------- ingest

struct IngestArgs {
  std::string config;
  std::vector<std::string> pollutants;
  std::string temperature, deaths, population, start, end, out;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_config(a.config);
  if (!a.pollutants.empty()) cfg.pollutant_files = a.pollutants;
  if (!a.temperature.empty()) cfg.temperature_file = a.temperature;
  if (!a.deaths.empty()) cfg.deaths_file = a.deaths;
  if (!a.population.empty()) cfg.population_file = a.population;
  if (!a.start.empty()) cfg.study_start = a.start;
  if (!a.end.empty()) cfg.study_end = a.end;
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (cfg.pollutant_files.empty() || cfg.temperature_file.empty() || cfg.deaths_file.empty() ||
      cfg.population_file.empty())
    throw ConfigError("ingest needs pollutant, temperature, deaths and population files");
  for (const auto& f : cfg.pollutant_files) require_file(f, "pollutant");
  require_file(cfg.temperature_file, "temperature");
  require_file(cfg.deaths_file, "deaths");
  require_file(cfg.population_file, "population");

  const ingest::StudySpan span{parse_date(cfg.study_start), parse_date(cfg.study_end)};
  const auto result = ingest::build_dataset(cfg.pollutant_files, cfg.temperature_file, cfg.deaths_file,
                                            cfg.population_file, span);
  ensure_dir(cfg.output_dir);
  const auto dataset_path = (fs::path(cfg.output_dir) / "dataset.csv").string();
  result.dataset.write_csv(dataset_path);
  const auto report = ingest::drop_report(result);
  write_text(fs::path(cfg.output_dir) / "drop_report.txt", report);
  out << report;
  out << "dataset: " << dataset_path << " (" << result.dataset.size() << " rows, checksum "
      << checksum_file(dataset_path) << ")\n";
  return 0;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string config, dataset, cause, me, mean, noise, out;
  std::vector<std::string> covariates;
  bool no_temperature = false;
  bool prior_only = false;
  bool strict = false;
  SamplerFlags sampler;
};

struct FitArtifacts {
  evaluate::EffectTable effects;
  evaluate::WaicReport waic;
  std::vector<diagnostics::ParameterDiagnostic> diags;
};

FitArtifacts write_fit_reports(const sampler::PosteriorDraws& draws, const outcome::OutcomeSpec& spec,
                               const std::string& dir, std::ostream& out) {
  FitArtifacts a;
  a.diags = diagnostics::diagnose(draws);
  diagnostics::write_diagnostics_csv(a.diags, (fs::path(dir) / "diagnostics.csv").string());
  a.waic = evaluate::waic(draws.pointwise);
  evaluate::write_waic_csv(a.waic, (fs::path(dir) / "waic.csv").string());
  a.effects = evaluate::effect_table(draws, spec);
  evaluate::write_effects_csv(a.effects, (fs::path(dir) / "effects.csv").string());
  evaluate::write_plot_data(draws, a.effects, (fs::path(dir) / "plots").string());

  std::ostringstream rep;
  if (!a.effects.empty()) rep << evaluate::format_effect_table(a.effects) << '\n';
  rep << evaluate::format_waic(a.waic);
  rep << "parameter           mean        sd          2.5%        97.5%       R-hat   ESS\n";
  for (const auto& d : a.diags) {
    const auto s = evaluate::summarize(draws, d.name);
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-18s %11.5g %11.5g %11.5g %11.5g  %6s  %6.0f%s\n", d.name.c_str(), s.mean, s.sd,
                  s.q025, s.q975, d.rhat ? fixed_digits(*d.rhat, 3).c_str() : "NA", d.ess,
                  d.flagged ? "  <-- R-hat > 1.05" : "");
    rep << buf;
  }
  write_text(fs::path(dir) / "report.txt", rep.str());
  out << rep.str();
  return a;
}

int finish_with_rhat(const FitArtifacts& a, bool strict, std::ostream& out, std::ostream& err) {
  if (!diagnostics::any_flagged(a.diags)) return 0;
  err << "WARN: R-hat above " << diagnostics::kRhatFlag << " for";
  for (const auto& d : a.diags)
    if (d.flagged) err << ' ' << d.name;
  err << "; chains have not converged, run longer before trusting these results\n";
  (void)out;
  return strict ? kExitStrict : 0;
}

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_config(a.config);
  if (!a.dataset.empty()) cfg.dataset_file = a.dataset;
  if (!a.cause.empty()) cfg.outcome.cause = a.cause;
  if (!a.me.empty()) cfg.outcome.me_pollutant = a.me;
  if (!a.covariates.empty()) cfg.outcome.covariates = a.covariates;
  if (a.no_temperature) cfg.outcome.include_temperature = false;
  if (!a.mean.empty()) cfg.state_space.mean = parse_mean(a.mean);
  if (!a.noise.empty()) cfg.state_space.noise = parse_noise(a.noise);
  if (a.prior_only) cfg.sampler.prior_only = true;
  if (!a.out.empty()) cfg.output_dir = a.out;
  a.sampler.apply(cfg.sampler);
  if (cfg.dataset_file.empty()) throw ConfigError("fit needs a dataset (--dataset or data.dataset)");
  require_file(cfg.dataset_file, "dataset");
  cfg.sampler.validate();
  cfg.outcome.validate();

  const auto dataset = WeeklyDataset::read_csv(cfg.dataset_file);
  const auto draws = sampler::fit(dataset, cfg.outcome, cfg.state_space, cfg.sampler);
  ensure_dir(cfg.output_dir);
  const fs::path dir(cfg.output_dir);
  sampler::write_draws_csv(draws, (dir / "draws.csv").string());
  sampler::write_pointwise_csv(draws, (dir / "pointwise.csv").string());
  if (!draws.latent.empty()) write_latent_csv(draws, (dir / "latent.csv").string());
  const auto art = write_fit_reports(draws, cfg.outcome, cfg.output_dir, out);

  json acc = json::array();
  for (const auto& chain : draws.acceptance) {
    json c = json::object();
    for (const auto& b : chain) c[b.name] = b.rate();
    acc.push_back(c);
  }
  const json meta = {{"dataset", cfg.dataset_file},
                     {"dataset_checksum", checksum_file(cfg.dataset_file)},
                     {"cause", cfg.outcome.cause},
                     {"outcome", outcome_json(cfg.outcome)},
                     {"state_space", {{"mean", mean_name(cfg.state_space.mean)},
                                      {"noise", noise_name(cfg.state_space.noise)}}},
                     {"sampler", sampler_json(cfg.sampler)},
                     {"chain_seeds", draws.chain_seeds},
                     {"acceptance", acc},
                     {"nonfinite_events", draws.nonfinite_events},
                     {"waic", art.waic.waic},
                     {"max_rhat", diagnostics::max_rhat(art.diags)}};
  write_text(dir / "fit_meta.json", meta.dump(2) + "\n");
  out << "outputs written to " << cfg.output_dir << '\n';
  return finish_with_rhat(art, a.strict, out, err);
}

// ---------------------------------------------------------------- report

int cmd_report(const std::string& fit_dir, bool strict, std::ostream& out, std::ostream& err) {
  const fs::path dir(fit_dir);
  const auto meta_path = (dir / "fit_meta.json").string();
  if (!fs::exists(meta_path)) throw ConfigError("not a fit output directory (no fit_meta.json): " + fit_dir);
  const json meta = json::parse(read_text(meta_path));
  const auto spec = outcome_from_json(meta.at("outcome"));
  auto draws = sampler::read_draws_csv((dir / "draws.csv").string(), (dir / "pointwise.csv").string());
  const auto art = write_fit_reports(draws, spec, fit_dir, out);
  return finish_with_rhat(art, strict, out, err);
}

// ---------------------------------------------------------------- compare

struct FitSummary {
  std::string dir;
  std::string label;
  double waic = 0.0;
  std::string checksum, cause;
  std::string annotations;
};

FitSummary load_fit_summary(const std::string& d) {
  const fs::path dir(d);
  const auto meta_path = (dir / "fit_meta.json").string();
  if (!fs::exists(meta_path)) throw ConfigError("not a fit output directory (no fit_meta.json): " + d);
  const json meta = json::parse(read_text(meta_path));
  FitSummary s;
  s.dir = d;
  s.checksum = meta.at("dataset_checksum").get<std::string>();
  s.cause = meta.at("cause").get<std::string>();
  const auto waic_table = csv::Table::read_file((dir / "waic.csv").string());
  s.waic = waic_table.number(waic_table.rows().at(0), waic_table.column("waic"));

  const auto spec = outcome_from_json(meta.at("outcome"));
  std::string label;
  if (spec.include_temperature) label += "temperature";
  if (spec.me_pollutant) label += std::string(label.empty() ? "" : " + ") + "latent " + *spec.me_pollutant;
  for (const auto& c : spec.covariates) label += std::string(label.empty() ? "" : " + ") + c;
  s.label = label.empty() ? "intercept only" : label;

  const auto effects = csv::Table::read_file((dir / "effects.csv").string());
  const auto pc = effects.column("predictor"), sc = effects.column("significant"), lc = effects.column("lower");
  for (const auto& row : effects.rows()) {
    if (effects.integer(row, sc) == 0) continue;
    const bool positive = effects.number(row, lc) > 1.0;
    if (!s.annotations.empty()) s.annotations += ' ';
    s.annotations += (positive ? "+" : "-") + effects.text(row, pc);
  }
  return s;
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& out_dir, std::ostream& out) {
  if (dirs.size() < 2) throw ConfigError("compare needs at least two fit output directories");
  std::vector<FitSummary> fits;
  for (const auto& d : dirs) fits.push_back(load_fit_summary(d));
  for (const auto& f : fits) {
    if (f.checksum != fits.front().checksum)
      throw ValidationError("fits were run on different datasets (" + fits.front().dir + " has checksum " +
                            fits.front().checksum + ", " + f.dir + " has " + f.checksum +
                            "); WAIC is only comparable on identical data");
    if (f.cause != fits.front().cause)
      throw ValidationError("fits model different outcomes ('" + fits.front().cause + "' vs '" + f.cause +
                            "'); WAIC is only comparable on the same outcome");
  }
  std::stable_sort(fits.begin(), fits.end(), [](const auto& a, const auto& b) {
    if (a.waic != b.waic) return a.waic < b.waic;
    return a.dir < b.dir;
  });
  std::ostringstream table;
  table << "rank  WAIC        fit                         model / significant effects\n";
  std::ostringstream csv_out;
  csv_out << "rank,fit,waic,model,significant,tie\n";
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& f = fits[i];
    const bool tie = (i > 0 && fits[i - 1].waic == f.waic) || (i + 1 < fits.size() && fits[i + 1].waic == f.waic);
    char buf[512];
    std::snprintf(buf, sizeof buf, "%-5zu %-11s %-27s %s%s%s%s\n", i + 1, fixed_digits(f.waic, 2).c_str(),
                  f.dir.c_str(), f.label.c_str(), f.annotations.empty() ? "" : "  [",
                  f.annotations.c_str(), f.annotations.empty() ? (tie ? "  (tie)" : "") : (tie ? "]  (tie)" : "]"));
    table << buf;
    csv_out << i + 1 << ',' << f.dir << ',' << csv::format_number(f.waic) << ',' << f.label << ','
            << f.annotations << ',' << (tie ? 1 : 0) << '\n';
  }
  out << table.str();
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_text(fs::path(out_dir) / "comparison.csv", csv_out.str());
  }
  return 0;
}

// ---------------------------------------------------------------- simulate

simstudy::VariantKind parse_variant_kind(const std::string& s) {
  if (s == "latent") return simstudy::VariantKind::latent;
  if (s == "plug_in") return simstudy::VariantKind::plug_in;
  if (s == "misscaled") return simstudy::VariantKind::misscaled;
  throw ConfigError("unknown variant kind '" + s + "' (latent, plug_in, misscaled)");
}

simstudy::Scenario scenario_from_json(const json& j) {
  simstudy::Scenario s = j.contains("base") ? simstudy::builtin(j.at("base").get<std::string>()) : simstudy::Scenario{};
  take(j, "name", s.name);
  take(j, "T", s.T);
  take(j, "replications", s.replications);
  take(j, "seed", s.seed);
  take(j, "mu_x", s.mu_x);
  take(j, "phi", s.phi);
  take(j, "sigma2_ar", s.sigma2_ar);
  take(j, "generate_me", s.generate_me);
  if (j.contains("noise")) s.noise = parse_noise(j.at("noise").get<std::string>());
  take(j, "noise_variance", s.noise_variance);
  take(j, "n_schedule", s.n_schedule);
  take(j, "counts", s.counts);
  take(j, "beta0", s.beta0);
  take(j, "beta_me", s.beta_me);
  take(j, "beta_cov", s.beta_cov);
  if (j.contains("variants")) {
    s.variants.clear();
    for (const auto& v : j.at("variants")) {
      simstudy::Variant var;
      var.name = v.at("name").get<std::string>();
      if (v.contains("kind")) var.kind = parse_variant_kind(v.at("kind").get<std::string>());
      if (v.contains("noise")) var.noise = parse_noise(v.at("noise").get<std::string>());
      s.variants.push_back(var);
    }
  }
  if (j.contains("sampler")) apply_sampler(j.at("sampler"), s.sampler);
  if (j.contains("priors")) apply_priors(j.at("priors"), s.priors);
  return s;
}

struct SimulateArgs {
  std::string scenario, out;
  std::optional<int> replications;
  SamplerFlags sampler;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  simstudy::Scenario s;
  if (fs::exists(a.scenario) && fs::is_regular_file(a.scenario)) {
    try {
      s = scenario_from_json(json::parse(read_text(a.scenario)));
    } catch (const json::exception& e) {
      throw ConfigError("scenario file " + a.scenario + ": " + e.what());
    }
  } else {
    s = simstudy::builtin(a.scenario);
  }
  if (a.replications) s.replications = *a.replications;
  // --seed sets the scenario seed; per-fit seeds derive from it.
  if (a.sampler.seed) s.seed = *a.sampler.seed;
  SamplerFlags rest = a.sampler;
  rest.seed.reset();
  rest.apply(s.sampler);
  const auto result = simstudy::run_scenario(s);
  const std::string dir = a.out.empty() ? "out" : a.out;
  ensure_dir(dir);
  simstudy::write_scores_csv(result, (fs::path(dir) / (s.name + "_scores.csv")).string());
  if (result.variants.size() >= 2)
    simstudy::write_ranking_csv(simstudy::compare_variants(result.variants),
                                (fs::path(dir) / (s.name + "_ranking.csv")).string());
  const auto text = simstudy::summary_text(result);
  write_text(fs::path(dir) / (s.name + "_summary.txt"), text);
  out << text;
  return 0;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  try {
    if (j.contains("data")) {
      const auto& d = j.at("data");
      if (d.contains("pollutants")) {
        for (const auto& p : d.at("pollutants")) c.pollutant_files.push_back(resolve(base_dir, p.get<std::string>()));
      }
      take(d, "temperature", c.temperature_file);
      take(d, "deaths", c.deaths_file);
      take(d, "population", c.population_file);
      take(d, "dataset", c.dataset_file);
      take(d, "start", c.study_start);
      take(d, "end", c.study_end);
      c.temperature_file = resolve(base_dir, c.temperature_file);
      c.deaths_file = resolve(base_dir, c.deaths_file);
      c.population_file = resolve(base_dir, c.population_file);
      c.dataset_file = resolve(base_dir, c.dataset_file);
    }
    if (j.contains("outcome")) {
      auto priors = c.outcome.priors;
      c.outcome = outcome_from_json(j.at("outcome"));
      if (!j.at("outcome").contains("priors")) c.outcome.priors = priors;
    }
    if (j.contains("priors")) apply_priors(j.at("priors"), c.outcome.priors);
    if (j.contains("state_space")) {
      const auto& s = j.at("state_space");
      if (s.contains("mean")) c.state_space.mean = parse_mean(s.at("mean").get<std::string>());
      if (s.contains("noise")) c.state_space.noise = parse_noise(s.at("noise").get<std::string>());
    }
    if (j.contains("sampler")) apply_sampler(j.at("sampler"), c.sampler);
    if (j.contains("output")) c.output_dir = resolve(base_dir, j.at("output").get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& f : c.pollutant_files) require_file(f, "pollutant");
  require_file(c.temperature_file, "temperature");
  require_file(c.deaths_file, "deaths");
  require_file(c.population_file, "population");
  require_file(c.dataset_file, "dataset");
  return c;
}

RunConfig load_config(const std::string& path) {
  return parse_config(read_text(path), fs::path(path).parent_path().string());
}

std::string checksum_text(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string checksum_file(const std::string& path) { return checksum_text(read_text(path)); }

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"aerostate: Bayesian state-space models of air pollution and weekly mortality"};
  app.name("aerostate");
  app.require_subcommand(1);

  IngestArgs ia;
  auto* ingest = app.add_subcommand("ingest", "Aggregate daily input files into the weekly dataset");
  ingest->add_option("--config", ia.config, "JSON run configuration");
  ingest->add_option("--pollutant", ia.pollutants, "Daily pollutant CSV (repeatable)");
  ingest->add_option("--temperature", ia.temperature, "Daily temperature CSV");
  ingest->add_option("--deaths", ia.deaths, "Weekly deaths CSV");
  ingest->add_option("--population", ia.population, "Annual population CSV");
  ingest->add_option("--start", ia.start, "Study start date, YYYY-MM-DD");
  ingest->add_option("--end", ia.end, "Study end date, YYYY-MM-DD");
  ingest->add_option("--out", ia.out, "Output directory");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit the outcome / measurement-error model by MCMC");
  fit->add_option("--config", fa.config, "JSON run configuration");
  fit->add_option("--dataset", fa.dataset, "Weekly dataset CSV from `ingest`");
  fit->add_option("--cause", fa.cause, "Outcome cause column");
  fit->add_option("--me", fa.me, "Pollutant modelled with measurement error");
  fit->add_option("--covariate", fa.covariates, "Plug-in pollutant covariate (repeatable)");
  fit->add_flag("--no-temperature", fa.no_temperature, "Drop lagged temperature from the model");
  fit->add_option("--mean", fa.mean, "Latent mean structure: constant, harmonic, warped");
  fit->add_option("--noise", fa.noise, "Observation noise: scaled (sigma_x^2/n_t) or constant");
  fit->add_flag("--prior-only", fa.prior_only, "Ignore all data and sample the prior");
  fit->add_flag("--strict", fa.strict, "Exit nonzero when any R-hat exceeds 1.05");
  fit->add_option("--out", fa.out, "Output directory");
  fa.sampler.add(*fit);

  std::vector<std::string> compare_dirs;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Rank fits on the same data by WAIC");
  compare->add_option("fits", compare_dirs, "Fit output directories")->required();
  compare->add_option("--out", compare_out, "Directory for comparison.csv");

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Run a simulation scenario");
  simulate->add_option("scenario", sa.scenario, "Built-in scenario name or scenario JSON file")->required();
  simulate->add_option("--replications", sa.replications, "Override the replication count")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--out", sa.out, "Output directory");
  sa.sampler.add(*simulate);

  std::string report_dir;
  bool report_strict = false;
  auto* report = app.add_subcommand("report", "Rebuild reports from a fit output directory");
  report->add_option("fit", report_dir, "Fit output directory")->required();
  report->add_flag("--strict", report_strict, "Exit nonzero when any R-hat exceeds 1.05");

  for (auto* sub : {ingest, fit, compare, simulate, report}) sub->footer("Env: AEROSTATE_THREADS caps worker threads.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << (e.get_name() == "CallForAllHelp" ? app.help("", CLI::AppFormatMode::All) : app.help());
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "usage error: " << e.what() << "\n";
    err << "run `aerostate --help` for usage\n";
    return kExitUsage;
  }
  try {
    if (ingest->parsed()) return cmd_ingest(ia, out);
    if (fit->parsed()) return cmd_fit(fa, out, err);
    if (compare->parsed()) return cmd_compare(compare_dirs, compare_out, out);
    if (simulate->parsed()) return cmd_simulate(sa, out);
    if (report->parsed()) return cmd_report(report_dir, report_strict, out, err);
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace aerostate::cli
