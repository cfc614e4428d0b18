#include "aerostate/simstudy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "aerostate/csv.hpp"
#include "aerostate/diagnostics.hpp"
#include "aerostate/error.hpp"
#include "aerostate/evaluate.hpp"

namespace aerostate::simstudy {

using statespace::NoiseMode;

namespace {
constexpr double kDivergenceRhat = 1.2;
const std::string kPollutant = "P";
const std::string kCause = "sim";

std::string covariate_name(std::size_t j) { return "C" + std::to_string(j + 2); }
}  // namespace

void Scenario::validate() const {
  if (name.empty()) throw ConfigError("scenario needs a name");
  if (replications < 1) throw ConfigError("scenario '" + name + "': replications must be at least 1");
  if (T < 3) throw ConfigError("scenario '" + name + "': T must be at least 3");
  for (double v : {mu_x, phi, sigma2_ar, noise_variance, beta0, beta_me})
    if (!std::isfinite(v)) throw ConfigError("scenario '" + name + "': true parameters must be finite");
  for (double v : beta_cov)
    if (!std::isfinite(v)) throw ConfigError("scenario '" + name + "': true parameters must be finite");
  if (!(std::abs(phi) < 1.0)) throw ConfigError("scenario '" + name + "': |phi| must be below 1");
  if (!(sigma2_ar > 0.0) || !(noise_variance >= 0.0))
    throw ConfigError("scenario '" + name + "': variances must be positive");
  if (n_schedule.empty() || std::any_of(n_schedule.begin(), n_schedule.end(), [](int n) { return n < 1 || n > 7; }))
    throw ConfigError("scenario '" + name + "': n schedule entries must lie in 1..7");
  if (variants.empty()) throw ConfigError("scenario '" + name + "': no model variants listed");
  for (const auto& v : variants)
    if (!counts && v.kind != VariantKind::latent)
      throw ConfigError("scenario '" + name + "': variant '" + v.name + "' needs the outcome generator");
  sampler.validate();
  priors.validate();
}

double RecoveryScore::coverage_rate(const std::string& parameter) const {
  if (replications.empty()) return 0.0;
  int hit = 0;
  for (const auto& r : replications)
    for (const auto& p : r.parameters)
      if (p.name == parameter && r.ok && p.covered) ++hit;
  return static_cast<double>(hit) / static_cast<double>(replications.size());
}

double RecoveryScore::mean_in_range_rate(const std::string& parameter, double lo, double hi) const {
  if (replications.empty()) return 0.0;
  int hit = 0;
  for (const auto& r : replications)
    for (const auto& p : r.parameters)
      if (p.name == parameter && r.ok && p.mean >= lo && p.mean <= hi) ++hit;
  return static_cast<double>(hit) / static_cast<double>(replications.size());
}

double RecoveryScore::failure_rate() const {
  if (replications.empty()) return 0.0;
  const auto bad = std::count_if(replications.begin(), replications.end(), [](const auto& r) { return !r.ok; });
  return static_cast<double>(bad) / static_cast<double>(replications.size());
}

const RecoveryScore& ScenarioResult::variant(const std::string& name) const {
  for (const auto& v : variants)
    if (v.variant == name) return v;
  throw ValidationError("scenario '" + scenario.name + "' has no variant '" + name + "'");
}

double ScenarioResult::win_rate(const std::string& a, const std::string& b) const {
  const auto& va = variant(a);
  const auto& vb = variant(b);
  if (va.replications.empty()) return 0.0;
  int wins = 0;
  for (std::size_t i = 0; i < va.replications.size(); ++i)
    if (va.replications[i].waic < vb.replications[i].waic) ++wins;
  return static_cast<double>(wins) / static_cast<double>(va.replications.size());
}

SimulatedData simulate(const Scenario& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  statespace::Ar1Params ar;
  ar.phi = s.phi;
  ar.sigma2 = s.sigma2_ar;
  ar.mean = statespace::MeanStructure::constant(s.mu_x);
  const statespace::ObservationNoise noise{s.noise, s.generate_me ? s.noise_variance : 0.0};
  auto series = statespace::simulate_ar1(ar, noise, s.n_schedule, s.T, rng);

  SimulatedData d;
  d.latent = std::move(series.latent);
  d.log_observed = s.generate_me ? std::move(series.log_observed) : d.latent;
  for (std::size_t t = 0; t < s.T; ++t) d.n.push_back(s.n_schedule[t % s.n_schedule.size()]);
  if (!s.counts) return d;

  std::normal_distribution<double> z;
  d.log_covariates.assign(s.beta_cov.size(), std::vector<double>(s.T));
  for (std::size_t t = 0; t < s.T; ++t)
    for (auto& c : d.log_covariates) c[t] = z(rng);

  outcome::PredictorFrame frame;
  frame.temperature.assign(s.T, 0.0);
  frame.offsets.assign(s.T, 1.0);
  frame.covariates.assign(s.T, std::vector<double>(s.beta_cov.size()));
  for (std::size_t t = 0; t < s.T; ++t)
    for (std::size_t j = 0; j < s.beta_cov.size(); ++j) frame.covariates[t][j] = std::exp(d.log_covariates[j][t]);
  outcome::LinearPredictorParams params;
  params.beta0 = s.beta0;
  params.beta_me = s.beta_me;
  params.beta = s.beta_cov;
  const auto counts = outcome::simulate_outcome(params, frame, d.latent, rng);
  d.counts.assign(1, 0);
  d.counts.insert(d.counts.end(), counts.begin(), counts.end());
  return d;
}

WeeklyDataset to_dataset(const SimulatedData& data, VariantKind kind) {
  const std::size_t T = data.log_observed.size();
  std::vector<WeeklyObservation> rows;
  rows.reserve(T);
  auto week = mmwr_week(2018, 1);
  for (std::size_t t = 0; t < T; ++t, week = next_week(week)) {
    WeeklyObservation o;
    o.week = week;
    double p = std::exp(data.log_observed[t]);
    if (kind == VariantKind::misscaled) {
      p = data.log_observed[t];
      if (!(p > 0.0))
        throw DataError("week " + std::to_string(t + 1) + ": raw-scale pollutant is not positive, cannot take its log");
    }
    o.pollutant_levels[kPollutant] = p;
    o.valid_days[kPollutant] = data.n[t];
    for (std::size_t j = 0; j < data.log_covariates.size(); ++j) {
      o.pollutant_levels[covariate_name(j)] = std::exp(data.log_covariates[j][t]);
      o.valid_days[covariate_name(j)] = 7;
    }
    o.temperature_raw = 0.0;
    o.deaths[kCause] = data.counts.empty() ? 0 : data.counts[t];
    o.population = 1.0;
    rows.push_back(std::move(o));
  }
  return WeeklyDataset(std::move(rows));
}

outcome::OutcomeSpec variant_spec(const Scenario& s, const Variant& v) {
  outcome::OutcomeSpec spec;
  spec.include_temperature = false;
  spec.priors = s.priors;
  if (s.counts) spec.cause = kCause;
  if (v.kind == VariantKind::plug_in) {
    spec.covariates.push_back(kPollutant);
  } else {
    spec.me_pollutant = kPollutant;
  }
  for (std::size_t j = 0; j < s.beta_cov.size(); ++j) spec.covariates.push_back(covariate_name(j));
  return spec;
}

namespace {

// (generator name, truth, fitted parameter name) for a variant.
std::vector<std::tuple<std::string, double, std::string>> scored_parameters(const Scenario& s, const Variant& v) {
  std::vector<std::tuple<std::string, double, std::string>> out;
  if (!s.counts) {
    out.emplace_back("phi", s.phi, "phi");
    out.emplace_back("mu", s.mu_x, "mu");
    out.emplace_back("sigma_ar", std::sqrt(s.sigma2_ar), "sigma_ar");
    out.emplace_back("sigma_x", std::sqrt(s.noise_variance), "sigma_x");
    return out;
  }
  out.emplace_back("beta0", s.beta0, "beta0");
  out.emplace_back("beta1", s.beta_me, v.kind == VariantKind::plug_in ? "beta[" + kPollutant + "]" : "beta_me");
  for (std::size_t j = 0; j < s.beta_cov.size(); ++j)
    out.emplace_back("beta" + std::to_string(j + 2), s.beta_cov[j], "beta[" + covariate_name(j) + "]");
  return out;
}

ReplicationResult fit_variant(const Scenario& s, const Variant& v, const SimulatedData* data,
                              const std::string& data_failure, int rep, std::uint64_t seed) {
  ReplicationResult r;
  r.replication = rep;
  const auto scored = scored_parameters(s, v);
  auto fail = [&](const std::string& why) {
    r.ok = false;
    r.failure = why;
    r.waic = std::numeric_limits<double>::infinity();
    r.parameters.clear();
    for (const auto& [name, truth, fitted] : scored) r.parameters.push_back({name, truth, 0, 0, 0, 0, false});
    return r;
  };
  if (!data) return fail(data_failure);
  try {
    const auto dataset = to_dataset(*data, v.kind);
    const auto spec = variant_spec(s, v);
    auto cfg = s.sampler;
    cfg.seed = seed;
    sampler::StateSpaceSpec ss;
    ss.noise = v.noise;
    const auto draws = sampler::fit(dataset, spec, ss, cfg);
    const auto diags = diagnostics::diagnose(draws);
    r.max_rhat = diagnostics::max_rhat(diags);
    r.waic = evaluate::waic(draws.pointwise).waic;
    for (const auto& [name, truth, fitted] : scored) {
      const auto sm = evaluate::summarize(draws, fitted);
      r.parameters.push_back({name, truth, sm.mean, sm.sd, sm.q025, sm.q975, sm.q025 <= truth && truth <= sm.q975});
    }
    if (draws.nonfinite_events > 0) {
      const double waic = r.waic;
      auto params = r.parameters;
      fail("non-finite density after burn-in");
      r.parameters = params;
      for (auto& p : r.parameters) p.covered = false;
      (void)waic;
    } else if (r.max_rhat > kDivergenceRhat) {
      auto params = r.parameters;
      char buf[64];
      std::snprintf(buf, sizeof buf, "R-hat %.3f above %.1f", r.max_rhat, kDivergenceRhat);
      fail(buf);
      r.parameters = params;
      for (auto& p : r.parameters) p.covered = false;
    }
  } catch (const Error& e) {
    return fail(e.what());
  }
  return r;
}

int replication_workers(int replications) {
  int n = 0;
  if (const char* env = std::getenv("AEROSTATE_THREADS")) n = std::atoi(env);
  if (n <= 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return std::max(1, std::min(n, replications));
}

}  // namespace

ScenarioResult run_scenario(const Scenario& s) {
  s.validate();
  ScenarioResult out;
  out.scenario = s;
  for (const auto& v : s.variants) out.variants.push_back({s.name, v.name, {}});
  for (auto& v : out.variants) v.replications.resize(static_cast<std::size_t>(s.replications));

  auto run_rep = [&](int rep) {
    const std::uint64_t rep_seed = sampler::chain_seed(s.seed, rep);
    std::optional<SimulatedData> data;
    std::string why;
    try {
      data = simulate(s, rep_seed);
    } catch (const Error& e) {
      why = std::string("simulation failed: ") + e.what();
    }
    for (std::size_t vi = 0; vi < s.variants.size(); ++vi)
      out.variants[vi].replications[static_cast<std::size_t>(rep)] =
          fit_variant(s, s.variants[vi], data ? &*data : nullptr, why, rep,
                      sampler::chain_seed(rep_seed, 1000 + static_cast<int>(vi)));
  };

  const int workers = replication_workers(s.replications);
  if (workers == 1) {
    for (int rep = 0; rep < s.replications; ++rep) run_rep(rep);
  } else {
    // Replications are spread over workers; chains inside a fit then run serially.
    out.scenario.sampler.threads = 1;
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (int rep = w; rep < s.replications; rep += workers) run_rep(rep);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<RankingRow> compare_variants(const std::vector<RecoveryScore>& scores) {
  if (scores.empty()) throw ValidationError("nothing to compare");
  const std::size_t R = scores.front().replications.size();
  for (const auto& s : scores)
    if (s.replications.size() != R)
      throw ValidationError("variants '" + scores.front().variant + "' and '" + s.variant +
                            "' have different replication counts");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a].variant < scores[b].variant; });

  std::vector<RankingRow> rows(scores.size());
  for (std::size_t k = 0; k < scores.size(); ++k) rows[k].variant = scores[k].variant;
  for (std::size_t r = 0; r < R; ++r) {
    auto ranked = order;
    std::stable_sort(ranked.begin(), ranked.end(), [&](auto a, auto b) {
      return scores[a].replications[r].waic < scores[b].replications[r].waic;
    });
    ++rows[ranked.front()].wins;
    for (std::size_t pos = 0; pos < ranked.size(); ++pos)
      rows[ranked[pos]].mean_rank += static_cast<double>(pos + 1) / static_cast<double>(std::max<std::size_t>(R, 1));
  }
  for (std::size_t k = 0; k < scores.size(); ++k) {
    std::vector<double> w;
    for (const auto& rep : scores[k].replications) w.push_back(rep.waic);
    if (!w.empty()) {
      std::sort(w.begin(), w.end());
      rows[k].median_waic = w.size() % 2 ? w[w.size() / 2] : 0.5 * (w[w.size() / 2 - 1] + w[w.size() / 2]);
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.wins != b.wins) return a.wins > b.wins;
    if (a.mean_rank != b.mean_rank) return a.mean_rank < b.mean_rank;
    return a.variant < b.variant;
  });
  return rows;
}

void write_scores_csv(const ScenarioResult& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "scenario,variant,replication,status,waic,max_rhat,parameter,truth,mean,sd,lower,upper,covered\n";
  for (const auto& v : r.variants)
    for (const auto& rep : v.replications)
      for (const auto& p : rep.parameters) {
        out << r.scenario.name << ',' << v.variant << ',' << rep.replication << ','
            << (rep.ok ? "ok" : "failed") << ',' << csv::format_number(rep.waic) << ','
            << csv::format_number(rep.max_rhat) << ',' << p.name;
        for (double x : {p.truth, p.mean, p.sd, p.lower, p.upper}) out << ',' << csv::format_number(x);
        out << ',' << (p.covered ? 1 : 0) << '\n';
      }
}

void write_ranking_csv(const std::vector<RankingRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "rank,variant,wins,mean_rank,median_waic\n";
  int k = 1;
  for (const auto& row : rows)
    out << k++ << ',' << row.variant << ',' << row.wins << ',' << csv::format_number(row.mean_rank) << ','
        << csv::format_number(row.median_waic) << '\n';
}

std::string summary_text(const ScenarioResult& r) {
  std::ostringstream os;
  char buf[160];
  os << "scenario " << r.scenario.name << ": " << r.scenario.replications << " replication(s), T = "
     << r.scenario.T << ", seed " << r.scenario.seed << '\n';
  for (const auto& v : r.variants) {
    std::snprintf(buf, sizeof buf, "  variant %-14s failures %.2f\n", v.variant.c_str(), v.failure_rate());
    os << buf;
    if (v.replications.empty()) continue;
    for (const auto& p : v.replications.front().parameters) {
      double mean = 0.0;
      int ok = 0;
      for (const auto& rep : v.replications)
        for (const auto& q : rep.parameters)
          if (q.name == p.name && rep.ok) {
            mean += q.mean;
            ++ok;
          }
      std::snprintf(buf, sizeof buf, "    %-9s truth %9.4f  mean estimate %9.4f  coverage %.2f\n", p.name.c_str(),
                    p.truth, ok ? mean / ok : std::nan(""), v.coverage_rate(p.name));
      os << buf;
    }
    for (const auto& rep : v.replications)
      if (!rep.ok) os << "    replication " << rep.replication << " failed: " << rep.failure << '\n';
  }
  if (r.variants.size() >= 2) {
    os << "  WAIC ranking (wins over " << r.scenario.replications << "):\n";
    for (const auto& row : compare_variants(r.variants)) {
      std::snprintf(buf, sizeof buf, "    %-14s wins %3d  mean rank %.2f  median WAIC %.1f\n", row.variant.c_str(),
                    row.wins, row.mean_rank, row.median_waic);
      os << buf;
    }
  }
  return os.str();
}

namespace {

sampler::SamplerConfig scenario_sampler() {
  sampler::SamplerConfig c;
  c.chains = 2;
  c.iterations = 4000;
  c.burn_in = 1500;
  c.thin = 5;
  c.latent_thin = 1000000;
  c.seed = 0;
  return c;
}

outcome::PriorSpec scenario_priors() {
  outcome::PriorSpec p;
  p.scale_is_variance = false;  // 0.1 read as a precision
  return p;
}

}  // namespace

std::vector<std::string> builtin_names() {
  return {"ssm-basic", "outcome-no-me", "outcome-me-full", "outcome-me-scaling", "outcome-me-ragged"};
}

Scenario builtin(const std::string& name) {
  Scenario s;
  s.name = name;
  s.sampler = scenario_sampler();
  s.priors = scenario_priors();
  if (name == "ssm-basic") {
    s.seed = 20240101;
    s.mu_x = 10.0;
    s.phi = 0.7;
    s.sigma2_ar = 0.5;
    s.noise = NoiseMode::constant;
    s.noise_variance = 0.9;
    s.variants = {{"ssm", VariantKind::latent, NoiseMode::constant}};
    // Cheap collapsed fits, but the sigma_v -> 0 funnel needs long chains.
    s.sampler.chains = 4;
    s.sampler.iterations = 20000;
    s.sampler.burn_in = 5000;
    s.sampler.thin = 10;
    return s;
  }
  // Outcome scenarios share the latent generator.
  s.counts = true;
  s.mu_x = 10.0;
  s.phi = 0.5;
  s.sigma2_ar = 4.0;
  s.noise = NoiseMode::scaled_by_n;
  s.noise_variance = 16.0;
  s.beta0 = 10.0;
  s.beta_me = -1.0;
  if (name == "outcome-no-me") {
    s.seed = 20240202;
    s.generate_me = false;
    s.variants = {{"no-me", VariantKind::plug_in}, {"me", VariantKind::latent}};
  } else if (name == "outcome-me-full") {
    s.seed = 20240303;
    s.beta_cov = {0.1, -0.5};
    s.variants = {{"me", VariantKind::latent}, {"no-me", VariantKind::plug_in}};
  } else if (name == "outcome-me-scaling") {
    s.seed = 20240404;
    s.replications = 10;
    s.beta_cov = {0.1, -0.5};
    s.variants = {{"me", VariantKind::latent}, {"me-misscaled", VariantKind::misscaled}};
  } else if (name == "outcome-me-ragged") {
    s.seed = 20240505;
    s.replications = 5;
    s.beta_cov = {0.1, -0.5};
    s.n_schedule = {7, 6, 7, 5, 7, 3, 7, 7, 4, 7};
    s.variants = {{"me", VariantKind::latent}};
  } else {
    std::string known;
    for (const auto& n : builtin_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown scenario '" + name + "'; built-in scenarios: " + known);
  }
  return s;
}

}  // namespace aerostate::simstudy
