#include "aerostate/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "aerostate/csv.hpp"
#include "aerostate/error.hpp"

namespace aerostate::diagnostics {
namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

std::vector<std::vector<double>> split(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    if (h < 2) continue;
    // odd lengths drop the middle draw
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(h));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(h), c.end());
  }
  return out;
}

double autocovariance_at(const std::vector<double>& centered, std::size_t k) {
  const std::size_t n = centered.size();
  double s = 0.0;
  for (std::size_t i = 0; i + k < n; ++i) s += centered[i] * centered[i + k];
  return s / static_cast<double>(n);
}

}  // namespace

std::optional<double> split_rhat(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) return std::nullopt;
  const auto parts = split(chains);
  if (parts.size() < 2) return std::nullopt;
  const std::size_t n = std::min_element(parts.begin(), parts.end(), [](const auto& a, const auto& b) {
                          return a.size() < b.size();
                        })->size();
  std::vector<double> means, vars;
  for (const auto& p : parts) {
    std::vector<double> q(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(n));
    means.push_back(mean_of(q));
    vars.push_back(var_of(q));
  }
  const double W = mean_of(vars);
  const double B = static_cast<double>(n) * var_of(means);
  if (W <= 0.0) return B <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double nn = static_cast<double>(n);
  const double var_plus = (nn - 1.0) / nn * W + B / nn;
  return std::sqrt(var_plus / W);
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> cs;
  for (const auto& c : chains)
    if (c.size() >= 4) cs.push_back(c);
  if (cs.empty()) return 0.0;
  const std::size_t n = std::min_element(cs.begin(), cs.end(), [](const auto& a, const auto& b) {
                          return a.size() < b.size();
                        })->size();
  for (auto& c : cs) c.resize(n);
  const double m = static_cast<double>(cs.size());
  const double nn = static_cast<double>(n);

  std::vector<std::vector<double>> centered;
  std::vector<double> means, vars;
  for (const auto& c : cs) {
    means.push_back(mean_of(c));
    auto& z = centered.emplace_back(c);
    for (auto& v : z) v -= means.back();
    vars.push_back(autocovariance_at(z, 0) * nn / (nn - 1.0));
  }
  const double W = mean_of(vars);
  const double B_over_n = cs.size() > 1 ? var_of(means) : 0.0;
  const double var_plus = (nn - 1.0) / nn * W + B_over_n;
  if (!(var_plus > 0.0)) return m * nn;

  auto rho = [&](std::size_t t) {
    double s = 0.0;
    for (const auto& z : centered) s += autocovariance_at(z, t);
    return 1.0 - (W - s / m) / var_plus;
  };
  // Geyer: sum adjacent pairs while positive, enforcing monotonicity.
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t + 1 < n; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(m * nn));
  return m * nn / tau;
}

std::vector<ParameterDiagnostic> diagnose(const sampler::PosteriorDraws& draws) {
  std::vector<ParameterDiagnostic> out;
  for (const auto& name : draws.parameter_names) {
    const auto chains = draws.by_chain(name);
    ParameterDiagnostic d;
    d.name = name;
    d.rhat = split_rhat(chains);
    d.ess = effective_sample_size(chains);
    d.flagged = d.rhat && *d.rhat > kRhatFlag;
    out.push_back(d);
  }
  return out;
}

bool any_flagged(const std::vector<ParameterDiagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const auto& d) { return d.flagged; });
}

double max_rhat(const std::vector<ParameterDiagnostic>& diags) {
  double m = 1.0;
  for (const auto& d : diags)
    if (d.rhat) m = std::max(m, *d.rhat);
  return m;
}

void write_diagnostics_csv(const std::vector<ParameterDiagnostic>& diags, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "parameter,rhat,ess,flag\n";
  for (const auto& d : diags)
    out << d.name << ',' << (d.rhat ? csv::format_number(*d.rhat) : std::string("NA")) << ','
        << csv::format_number(d.ess) << ',' << (d.flagged ? "rhat>1.05" : "") << '\n';
}

}  // namespace aerostate::diagnostics
