#include "aerostate/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "aerostate/csv.hpp"
#include "aerostate/error.hpp"

namespace aerostate::evaluate {

WaicReport waic(const std::vector<std::vector<double>>& ll) {
  const std::size_t S = ll.size();
  if (S < 2) throw ValidationError("WAIC needs at least 2 draws");
  const std::size_t N = ll.front().size();
  for (const auto& row : ll) {
    if (row.size() != N) throw ValidationError("ragged pointwise log-likelihood matrix");
    for (double v : row)
      if (!std::isfinite(v)) throw ValidationError("non-finite pointwise log-likelihood");
  }
  WaicReport r;
  r.lppd_point.resize(N);
  r.p_waic_point.resize(N);
  const double s = static_cast<double>(S);
  for (std::size_t i = 0; i < N; ++i) {
    double mx = ll[0][i], sum = 0.0;
    for (std::size_t k = 1; k < S; ++k) mx = std::max(mx, ll[k][i]);
    for (std::size_t k = 0; k < S; ++k) sum += ll[k][i];
    double acc = 0.0, ss = 0.0;
    const double mean = sum / s;
    for (std::size_t k = 0; k < S; ++k) {
      acc += std::exp(ll[k][i] - mx);
      ss += (ll[k][i] - mean) * (ll[k][i] - mean);
    }
    r.lppd_point[i] = mx + std::log(acc / s);
    r.p_waic_point[i] = ss / (s - 1.0);
    if (r.p_waic_point[i] > kPointwiseWarnThreshold) ++r.unreliable_points;
  }
  // Summing in sorted order keeps the totals independent of point order.
  auto sorted_sum = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return std::accumulate(v.begin(), v.end(), 0.0);
  };
  r.lppd = sorted_sum(r.lppd_point);
  r.p_waic = sorted_sum(r.p_waic_point);
  r.waic = -2.0 * (r.lppd - r.p_waic);
  return r;
}

double percentile(std::vector<double> v, double p) {
  if (v.empty()) throw ValidationError("percentile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Summary summarize(const std::vector<double>& v) {
  if (v.size() < 10) throw ValidationError("summaries need at least 10 draws");
  Summary s;
  std::vector<double> sorted(v);
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(v.size());
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : sorted) ss += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(ss / (n - 1.0));
  // constant draws must come back exactly constant
  if (sorted.front() == sorted.back()) {
    s.mean = sorted.front();
    s.sd = 0.0;
  }
  s.q025 = percentile(sorted, 0.025);
  s.q50 = percentile(sorted, 0.5);
  s.q975 = percentile(sorted, 0.975);
  return s;
}

Summary summarize(const sampler::PosteriorDraws& draws, const std::string& parameter) {
  return summarize(draws.column(parameter));
}

double multiplier_of(EffectKind kind, double b) {
  return kind == EffectKind::temperature ? std::exp(b) : std::pow(kPollutantStep, b);
}

EffectTable effect_table(const sampler::PosteriorDraws& draws, const outcome::OutcomeSpec& spec) {
  struct Entry {
    std::string predictor, parameter;
    EffectKind kind;
  };
  std::vector<Entry> entries;
  if (spec.include_temperature) entries.push_back({"temperature", "beta_temp", EffectKind::temperature});
  if (spec.me_pollutant) entries.push_back({*spec.me_pollutant, "beta_me", EffectKind::pollutant});
  for (const auto& c : spec.covariates) entries.push_back({c, "beta[" + c + "]", EffectKind::pollutant});

  EffectTable table;
  for (const auto& e : entries) {
    const auto b = draws.column(e.parameter);
    EffectRow row;
    row.predictor = e.predictor;
    row.parameter = e.parameter;
    row.kind = e.kind;
    row.coefficient = summarize(b);
    double acc = 0.0;
    for (double v : b) acc += multiplier_of(e.kind, v);
    row.multiplier = acc / static_cast<double>(b.size());
    if (row.coefficient.sd == 0.0) row.multiplier = multiplier_of(e.kind, row.coefficient.mean);
    // Both transforms are increasing, so the interval maps endpoint-wise.
    row.lower = multiplier_of(e.kind, row.coefficient.q025);
    row.upper = multiplier_of(e.kind, row.coefficient.q975);
    row.percent = (row.multiplier - 1.0) * 100.0;
    row.percent_lower = (row.lower - 1.0) * 100.0;
    row.percent_upper = (row.upper - 1.0) * 100.0;
    row.significant = row.lower > 1.0 || row.upper < 1.0;
    table.push_back(row);
  }
  return table;
}

namespace {
std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}
}  // namespace

std::string format_effect_table(const EffectTable& table) {
  std::ostringstream os;
  os << "predictor            unit        multiplier [95% CI]            change %      sig\n";
  for (const auto& r : table) {
    std::string name = r.predictor;
    name.resize(std::max<std::size_t>(name.size(), 20), ' ');
    std::string unit = r.kind == EffectKind::temperature ? "per 1 degC" : "per +10%";
    unit.resize(11, ' ');
    std::string ci = fixed(r.multiplier, 4) + " [" + fixed(r.lower, 4) + ", " + fixed(r.upper, 4) + "]";
    ci.resize(std::max<std::size_t>(ci.size(), 30), ' ');
    std::string pct = fixed(r.percent, 2) + "%";
    pct.resize(std::max<std::size_t>(pct.size(), 13), ' ');
    os << name << ' ' << unit << ' ' << ci << ' ' << pct << ' '
       << (r.significant ? (r.upper < 1.0 ? "-" : "+") : "") << '\n';
  }
  return os.str();
}

std::string format_waic(const WaicReport& r) {
  std::ostringstream os;
  os << "WAIC " << fixed(r.waic, 2) << "  (lppd " << fixed(r.lppd, 2) << ", p_waic " << fixed(r.p_waic, 2)
     << ", points " << r.lppd_point.size() << ")\n";
  if (!r.reliable())
    os << "warning: " << r.unreliable_points << " point(s) have p_waic above " << kPointwiseWarnThreshold
       << "; WAIC may be unreliable\n";
  return os.str();
}

void write_effects_csv(const EffectTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "predictor,parameter,unit,coef_mean,coef_sd,coef_q025,coef_q50,coef_q975,multiplier,lower,upper,"
         "percent_change,percent_lower,percent_upper,significant\n";
  for (const auto& r : table) {
    const auto& c = r.coefficient;
    out << r.predictor << ',' << r.parameter << ',' << (r.kind == EffectKind::temperature ? "degC" : "+10%");
    for (double v : {c.mean, c.sd, c.q025, c.q50, c.q975, r.multiplier, r.lower, r.upper, r.percent,
                     r.percent_lower, r.percent_upper})
      out << ',' << csv::format_number(v);
    out << ',' << (r.significant ? 1 : 0) << '\n';
  }
}

void write_waic_csv(const WaicReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "waic,lppd,p_waic,points,unreliable_points\n";
  out << csv::format_number(r.waic) << ',' << csv::format_number(r.lppd) << ',' << csv::format_number(r.p_waic)
      << ',' << r.lppd_point.size() << ',' << r.unreliable_points << '\n';
}

std::vector<std::string> write_plot_data(const sampler::PosteriorDraws& draws, const EffectTable& table,
                                         const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;
  for (const auto& r : table) {
    const auto b = draws.column(r.parameter);
    std::string stem = r.predictor;
    for (auto& ch : stem)
      if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
    const auto path = (std::filesystem::path(dir) / ("plot_" + stem + ".csv")).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    const bool temp = r.kind == EffectKind::temperature;
    out << (temp ? "delta_degc" : "increase_percent") << ",percent_change,lower,upper\n";
    for (int i = 0; i <= 20; ++i) {
      const double x = temp ? -10.0 + i : 5.0 * i;
      const double log_factor = temp ? x : std::log1p(x / 100.0);
      std::vector<double> pct;
      pct.reserve(b.size());
      for (double v : b) pct.push_back((std::exp(v * log_factor) - 1.0) * 100.0);
      double mean = std::accumulate(pct.begin(), pct.end(), 0.0) / static_cast<double>(pct.size());
      double lo = (std::exp(r.coefficient.q025 * log_factor) - 1.0) * 100.0;
      double hi = (std::exp(r.coefficient.q975 * log_factor) - 1.0) * 100.0;
      if (lo > hi) std::swap(lo, hi);
      out << csv::format_number(x) << ',' << csv::format_number(mean) << ',' << csv::format_number(lo) << ','
          << csv::format_number(hi) << '\n';
    }
    written.push_back(path);
  }
  return written;
}

}  // namespace aerostate::evaluate
