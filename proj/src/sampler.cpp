#include "aerostate/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "aerostate/csv.hpp"
#include "aerostate/error.hpp"

namespace aerostate::sampler {

using outcome::OutcomeDesign;
using outcome::OutcomeSpec;
using statespace::MeanKind;
using statespace::NoiseMode;

void SamplerConfig::validate() const {
  if (chains < 1) throw ConfigError("chains must be at least 1");
  if (iterations < 1) throw ConfigError("iterations must be at least 1");
  if (burn_in < 0 || burn_in >= iterations) throw ConfigError("burn-in must lie in [0, iterations)");
  if (thin < 1) throw ConfigError("thin must be at least 1");
  if (latent_thin < 1) throw ConfigError("latent thin must be at least 1");
  if (latent_block < 1) throw ConfigError("latent block length must be at least 1");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw ConfigError("target acceptance must lie in (0, 1)");
}

std::size_t PosteriorDraws::parameter_index(const std::string& name) const {
  for (std::size_t i = 0; i < parameter_names.size(); ++i)
    if (parameter_names[i] == name) return i;
  throw ValidationError("unknown parameter '" + name + "'");
}

bool PosteriorDraws::has_parameter(const std::string& name) const {
  return std::find(parameter_names.begin(), parameter_names.end(), name) != parameter_names.end();
}

std::vector<double> PosteriorDraws::column(const std::string& name) const {
  const auto k = parameter_index(name);
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& row : values) out.push_back(row[k]);
  return out;
}

std::vector<std::vector<double>> PosteriorDraws::by_chain(const std::string& name) const {
  const auto k = parameter_index(name);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(chains));
  for (std::size_t i = 0; i < values.size(); ++i) out[static_cast<std::size_t>(chain[i])].push_back(values[i][k]);
  return out;
}

double ModelState::get(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return values[i];
  throw ValidationError("unknown parameter '" + name + "'");
}

void ModelState::set(const std::string& name, double v) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) {
      values[i] = v;
      return;
    }
  throw ValidationError("unknown parameter '" + name + "'");
}

std::uint64_t chain_seed(std::uint64_t seed, int chain) {
  // splitmix64 finaliser over (seed, chain)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(chain + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kPeriod = 52.0;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

enum class Role { coefficient, hyper };
enum class Transform { identity, bounded, circular };

struct ParamInfo {
  std::string name;
  Role role = Role::coefficient;
  Transform transform = Transform::identity;
  double lo = 0.0, hi = 0.0;
};

// Indices into the parameter vector; -1 when absent.
struct Layout {
  std::vector<ParamInfo> params;
  int beta0 = -1, beta_me = -1;
  std::vector<int> fixed;  // design.fixed order
  int mu = -1, alpha0 = -1, alpha1 = -1, omega = -1, b1 = -1, c1 = -1, b2 = -1, c2 = -1;
  int phi = -1, sigma_ar = -1, sigma_x = -1;

  int add(ParamInfo p) {
    params.push_back(std::move(p));
    return static_cast<int>(params.size()) - 1;
  }
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& p : params) out.push_back(p.name);
    return out;
  }
};

Layout make_layout(const OutcomeDesign& d, const OutcomeSpec& spec, const StateSpaceSpec& ss) {
  const auto& pr = spec.priors;
  Layout L;
  if (d.has_counts) {
    L.beta0 = L.add({"beta0"});
    for (const auto& n : d.fixed_names) L.fixed.push_back(L.add({n}));
    if (d.has_me) L.beta_me = L.add({"beta_me"});
  }
  if (d.has_me) {
    const ParamInfo b{"", Role::hyper, Transform::bounded, 0.0, pr.shape_b_upper};
    const ParamInfo c{"", Role::hyper, Transform::bounded, -pr.shape_c_bound, pr.shape_c_bound};
    auto named = [](ParamInfo p, std::string n) {
      p.name = std::move(n);
      return p;
    };
    switch (ss.mean) {
      case MeanKind::constant:
        L.mu = L.add({"mu", Role::hyper});
        break;
      case MeanKind::harmonic:
        L.alpha0 = L.add({"alpha0", Role::hyper});
        L.omega = L.add({"omega", Role::hyper, Transform::circular, 0.0, kPeriod});
        break;
      case MeanKind::warped:
        L.alpha0 = L.add({"alpha0", Role::hyper});
        L.alpha1 = L.add({"alpha1", Role::hyper});
        L.omega = L.add({"omega", Role::hyper, Transform::circular, 0.0, kPeriod});
        L.b1 = L.add(named(b, "b1"));
        L.c1 = L.add(named(c, "c1"));
        L.b2 = L.add(named(b, "b2"));
        L.c2 = L.add(named(c, "c2"));
        break;
    }
    L.phi = L.add({"phi", Role::hyper, Transform::bounded, 0.0, 1.0});
    L.sigma_ar = L.add({"sigma_ar", Role::hyper, Transform::bounded, 0.0, pr.sigma_upper});
    L.sigma_x = L.add({"sigma_x", Role::hyper, Transform::bounded, 0.0, pr.sigma_upper});
  }
  return L;
}

double normal_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

double observed_mean(const std::vector<double>& y) {
  double s = 0.0;
  int n = 0;
  for (double v : y)
    if (!std::isnan(v)) {
      s += v;
      ++n;
    }
  return n ? s / n : 0.0;
}

double observed_variance(const std::vector<double>& y) {
  const double m = observed_mean(y);
  double s = 0.0;
  int n = 0;
  for (double v : y)
    if (!std::isnan(v)) {
      s += (v - m) * (v - m);
      ++n;
    }
  return n > 1 ? s / (n - 1) : 0.0;
}

/// Log posterior pieces for one chain. The latent path is stored on the
/// internal scale X~ = X - shift, where `shift` is the observed log-scale
/// mean for the level-free seasonal mean structures and 0 otherwise.
class Model {
 public:
  Model(const OutcomeDesign& d, const OutcomeSpec& spec, const StateSpaceSpec& ss, const SamplerConfig& cfg)
      : d_(d), spec_(spec), ss_(ss), L_(make_layout(d, spec, ss)) {
    use_counts_ = d.has_counts && !cfg.prior_only;
    if (d.has_me) {
      ybar_ = observed_mean(d.me_log_obs);
      shift_ = ss.mean == MeanKind::constant ? 0.0 : ybar_;
      y_.resize(d.grid_length);
      for (std::size_t g = 0; g < d.grid_length; ++g)
        y_[g] = cfg.prior_only ? std::nan("") : d.me_log_obs[g] - shift_;
      n_ = d.me_n;
      for (std::size_t g = 0; g < d.grid_length; ++g)
        if (!std::isnan(y_[g])) {
          ++observed_weeks_;
          sum_log_n_ += std::log(static_cast<double>(std::max(n_[g], 1)));
        }
    }
    if (d.has_counts) {
      for (long c : d.count) lgamma_sum_ += std::lgamma(static_cast<double>(c) + 1.0);
      zbar_.assign(d.fixed_names.size(), 0.0);
      for (const auto& z : d.fixed)
        for (std::size_t j = 0; j < z.size(); ++j) zbar_[j] += z[j] / static_cast<double>(d.points());
    }
  }

  const Layout& layout() const { return L_; }
  const OutcomeDesign& design() const { return d_; }
  bool use_counts() const { return use_counts_; }
  bool latent() const { return d_.has_me; }
  double shift() const { return shift_; }
  double ybar() const { return ybar_; }
  const std::vector<double>& y() const { return y_; }
  const std::vector<int>& n() const { return n_; }
  const std::vector<double>& zbar() const { return zbar_; }

  statespace::Ar1Params ar(const std::vector<double>& th) const {
    statespace::Ar1Params a;
    a.phi = th[L_.phi];
    a.sigma2 = th[L_.sigma_ar] * th[L_.sigma_ar];
    switch (ss_.mean) {
      case MeanKind::constant:
        a.mean = statespace::MeanStructure::constant(th[L_.mu]);
        break;
      case MeanKind::harmonic:
        a.mean = statespace::MeanStructure::harmonic(th[L_.alpha0], th[L_.omega]);
        break;
      case MeanKind::warped:
        a.mean = statespace::MeanStructure::warped(th[L_.alpha0], th[L_.alpha1], th[L_.omega], th[L_.b1],
                                                   th[L_.c1], th[L_.b2], th[L_.c2]);
        break;
    }
    return a;
  }

  statespace::ObservationNoise noise(const std::vector<double>& th) const {
    return {ss_.noise, th[L_.sigma_x] * th[L_.sigma_x]};
  }

  double log_prior(const std::vector<double>& th) const {
    const auto& pr = spec_.priors;
    double lp = 0.0;
    for (std::size_t k = 0; k < L_.params.size(); ++k) {
      const auto& p = L_.params[k];
      const double v = th[k];
      if (!std::isfinite(v)) return kNegInf;
      if (p.role == Role::coefficient) {
        lp += normal_logpdf(v, 0.0, pr.coefficient_variance());
      } else if (static_cast<int>(k) == L_.mu) {
        lp += normal_logpdf(v, ybar_, pr.level_variance());
      } else if (static_cast<int>(k) == L_.alpha0 || static_cast<int>(k) == L_.alpha1) {
        lp += normal_logpdf(v, 0.0, pr.amplitude_variance);
      } else if (p.transform == Transform::bounded) {
        if (!(v > p.lo && v < p.hi)) return kNegInf;
        lp -= std::log(p.hi - p.lo);
      } else if (p.transform == Transform::circular) {
        if (!(v >= p.lo && v < p.hi)) return kNegInf;
        lp -= std::log(p.hi - p.lo);
      }
    }
    return lp;
  }

  // AR(1) prior of the path plus the measurement-error density of the
  // observed pollutant given the path.
  double gaussian_ll(const std::vector<double>& th, const std::vector<double>& x) const {
    const auto a = ar(th);
    const double phi = a.phi, s2 = a.sigma2;
    if (!(s2 > 0.0)) return kNegInf;
    const std::size_t G = x.size();
    const bool constant = ss_.mean == MeanKind::constant;
    auto mean = [&](std::size_t g) {
      return constant ? a.mean.level : statespace::mean_at(a.mean, static_cast<double>(g + 1));
    };
    double prev = x[0] - mean(0);
    double lp = normal_logpdf(prev, 0.0, s2 / (1.0 - phi * phi));
    double ss = 0.0;
    for (std::size_t g = 1; g < G; ++g) {
      const double dev = x[g] - mean(g);
      const double e = dev - phi * prev;
      ss += e * e;
      prev = dev;
    }
    lp += -0.5 * (static_cast<double>(G - 1) * (kLog2Pi + std::log(s2)) + ss / s2);

    const double v = th[L_.sigma_x] * th[L_.sigma_x];
    if (observed_weeks_ > 0) {
      if (ss_.noise == NoiseMode::constant) {
        const double R = std::max(v, statespace::kMinObservationVariance);
        double sse = 0.0;
        for (std::size_t g = 0; g < G; ++g)
          if (!std::isnan(y_[g])) sse += (y_[g] - x[g]) * (y_[g] - x[g]);
        lp += -0.5 * (observed_weeks_ * (kLog2Pi + std::log(R)) + sse / R);
      } else {
        double acc = 0.0;
        for (std::size_t g = 0; g < G; ++g) {
          if (std::isnan(y_[g])) continue;
          const double R = std::max(v / n_[g], statespace::kMinObservationVariance);
          const double e = y_[g] - x[g];
          acc += std::log(R) + e * e / R;
        }
        lp += -0.5 * (observed_weeks_ * kLog2Pi + acc);
      }
    }
    return lp;
  }

  // Linear predictor without the latent term, one entry per outcome point.
  void fixed_eta(const std::vector<double>& th, std::vector<double>& out) const {
    const std::size_t P = d_.points();
    out.resize(P);
    const double b0 = th[L_.beta0];
    for (std::size_t p = 0; p < P; ++p) {
      double e = d_.log_offset[p] + b0;
      const auto& z = d_.fixed[p];
      for (std::size_t j = 0; j < z.size(); ++j) e += th[L_.fixed[j]] * z[j];
      out[p] = e;
    }
  }

  double latent_actual(const std::vector<double>& x, std::size_t g) const { return x[g] + shift_; }

  double poisson_ll(const std::vector<double>& th, const std::vector<double>& x) const {
    if (!use_counts_) return 0.0;
    const std::size_t P = d_.points();
    const double b = L_.beta_me >= 0 ? th[L_.beta_me] : 0.0;
    const double b0 = th[L_.beta0];
    double ll = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
      double e = d_.log_offset[p] + b0;
      const auto& z = d_.fixed[p];
      for (std::size_t j = 0; j < z.size(); ++j) e += th[L_.fixed[j]] * z[j];
      if (b != 0.0) e += b * latent_actual(x, d_.lag_week[p]);
      if (e > outcome::kMaxLogIntensity) return kNegInf;
      ll += static_cast<double>(d_.count[p]) * e - std::exp(e);
    }
    return ll - lgamma_sum_;
  }

  double collapsed_ll(const std::vector<double>& th) const {
    return statespace::kalman_filter({y_, n_}, ar(th), noise(th)).log_likelihood;
  }

  double log_post(const std::vector<double>& th, const std::vector<double>& x) const {
    double lp = log_prior(th);
    if (lp == kNegInf) return lp;
    if (d_.has_me) lp += gaussian_ll(th, x);
    if (d_.has_counts) lp += poisson_ll(th, x);
    return lp;
  }

  void pointwise(const std::vector<double>& th, const std::vector<double>& x, std::vector<double>& out) const {
    out.clear();
    if (d_.has_counts) {
      const double b = L_.beta_me >= 0 ? th[L_.beta_me] : 0.0;
      std::vector<double> eta;
      fixed_eta(th, eta);
      for (std::size_t p = 0; p < d_.points(); ++p) {
        const double e = eta[p] + (b != 0.0 ? b * latent_actual(x, d_.lag_week[p]) : 0.0);
        out.push_back(static_cast<double>(d_.count[p]) * e - std::exp(e) -
                      std::lgamma(static_cast<double>(d_.count[p]) + 1.0));
      }
    } else {
      const auto nz = noise(th);
      for (std::size_t g = 0; g < d_.grid_length; ++g) {
        if (std::isnan(d_.me_log_obs[g])) continue;
        out.push_back(normal_logpdf(d_.me_log_obs[g] - shift_, x[g], nz.at(d_.me_n[g])));
      }
    }
  }

  std::vector<std::size_t> pointwise_weeks() const {
    if (d_.has_counts) return d_.week;
    std::vector<std::size_t> out;
    for (std::size_t g = 0; g < d_.grid_length; ++g)
      if (!std::isnan(d_.me_log_obs[g])) out.push_back(g);
    return out;
  }

 private:
  const OutcomeDesign& d_;
  const OutcomeSpec& spec_;
  StateSpaceSpec ss_;
  Layout L_;
  bool use_counts_ = false;
  double ybar_ = 0.0, shift_ = 0.0;
  std::vector<double> y_;
  std::vector<int> n_;
  double observed_weeks_ = 0.0;
  double sum_log_n_ = 0.0;
  double lgamma_sum_ = 0.0;
  std::vector<double> zbar_;
};

// Transformed-scale helpers for random-walk proposals.
double to_unconstrained(const ParamInfo& p, double v) {
  if (p.transform != Transform::bounded) return v;
  const double u = (v - p.lo) / (p.hi - p.lo);
  return std::log(u) - std::log1p(-u);
}

double from_unconstrained(const ParamInfo& p, double u) {
  switch (p.transform) {
    case Transform::bounded: {
      const double s = 1.0 / (1.0 + std::exp(-u));
      return p.lo + (p.hi - p.lo) * s;
    }
    case Transform::circular: {
      double w = std::fmod(u - p.lo, p.hi - p.lo);
      if (w < 0.0) w += p.hi - p.lo;
      return p.lo + w;
    }
    case Transform::identity:
      break;
  }
  return u;
}

double log_jacobian(const ParamInfo& p, double v) {
  if (p.transform != Transform::bounded) return 0.0;
  return std::log(v - p.lo) + std::log(p.hi - v) - std::log(p.hi - p.lo);
}

struct Adaptive {
  std::string name;
  double log_scale = std::log(0.1);
  long proposed = 0, accepted = 0;      // post burn-in
  long adapt_steps = 0;

  double scale() const { return std::exp(log_scale); }
  void record(bool accepted_now, bool adapting, bool counting, double target) {
    if (adapting) {
      ++adapt_steps;
      const double gamma = std::pow(static_cast<double>(adapt_steps) + 1.0, -0.6);
      log_scale += gamma * ((accepted_now ? 1.0 : 0.0) - target);
      log_scale = std::clamp(log_scale, -30.0, 5.0);
    }
    if (counting) {
      ++proposed;
      if (accepted_now) ++accepted;
    }
  }
};

struct ChainOutput {
  std::vector<std::vector<double>> values;
  std::vector<long> iteration;
  std::vector<std::vector<double>> pointwise;
  std::vector<std::vector<double>> latent;
  std::vector<BlockStats> stats;
  long nonfinite = 0;
};

bool accept(double log_ratio, std::mt19937_64& rng) {
  if (std::isnan(log_ratio)) return false;
  if (log_ratio >= 0.0) return true;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return std::log(u(rng)) < log_ratio;
}

class Chain {
 public:
  Chain(const Model& model, const SamplerConfig& cfg, ModelState init, std::uint64_t seed)
      : m_(model), cfg_(cfg), rng_(seed), th_(std::move(init.values)), x_(std::move(init.latent)) {
    const auto& L = m_.layout();
    fixed_.assign(L.params.size(), false);
    for (const auto& [name, value] : cfg.fixed) {
      for (std::size_t k = 0; k < L.params.size(); ++k)
        if (L.params[k].name == name) {
          th_[k] = value;
          fixed_[k] = true;
        }
    }
    for (std::size_t k = 0; k < L.params.size(); ++k) {
      if (fixed_[k]) continue;
      Adaptive a;
      a.name = L.params[k].name;
      a.log_scale = std::log(initial_scale(static_cast<int>(k)));
      rw_.push_back({static_cast<int>(k), a});
    }
    eta_moves_ = m_.use_counts() && m_.latent() && !fixed(L.beta0) && !fixed(L.beta_me);
    if (eta_moves_) {
      shift_.name = "shift";
      shift_.log_scale = std::log(0.05);
      scale_.name = "scale";
      scale_.log_scale = std::log(0.01);
      scale_ok_ = !fixed(L.sigma_ar) && !fixed(L.mu) && !fixed(L.alpha0) && !fixed(L.alpha1);
      for (std::size_t j = 0; j < L.fixed.size(); ++j) {
        if (fixed(L.fixed[j])) continue;
        Adaptive a;
        a.name = "joint:" + L.params[L.fixed[j]].name;
        a.log_scale = std::log(0.01);
        joint_.push_back({j, a});
      }
    }
    latent_stats_.name = "latent";
    for (const auto& [k, a] : rw_)
      if (L.params[static_cast<std::size_t>(k)].role == Role::coefficient) coef_idx_.push_back(k);
    joint_coef_.name = "coefficients";
    joint_coef_.log_scale = 0.0;
    residual_ok_ = m_.latent() && !fixed(L.sigma_x) && !m_.y().empty();
    residual_.name = "residual";
    residual_.log_scale = std::log(0.1);
  }

  ChainOutput run() {
    const int adapt_until = cfg_.adapt_window < 0 ? cfg_.burn_in : std::min(cfg_.adapt_window, cfg_.burn_in);
    ChainOutput out;
    long retained = 0;
    for (int it = 0; it < cfg_.iterations; ++it) {
      adapting_ = it < adapt_until;
      counting_ = it >= cfg_.burn_in;
      step();
      if (!counting_) continue;
      const int post = it - cfg_.burn_in + 1;
      if (post % cfg_.thin != 0) continue;
      const double lp = m_.log_post(th_, x_);
      if (!std::isfinite(lp)) ++nonfinite_;
      out.values.push_back(th_);
      out.iteration.push_back(post);
      std::vector<double> pw;
      m_.pointwise(th_, x_, pw);
      out.pointwise.push_back(std::move(pw));
      if (m_.latent() && retained % cfg_.latent_thin == 0) {
        std::vector<double> xs(x_);
        for (auto& v : xs) v += m_.shift();
        out.latent.push_back(std::move(xs));
      }
      ++retained;
    }
    for (const auto& [k, a] : rw_) out.stats.push_back({a.name, a.proposed, a.accepted});
    if (m_.latent() && m_.use_counts())
      out.stats.push_back({latent_stats_.name, latent_stats_.proposed, latent_stats_.accepted});
    if (!chol_.empty()) out.stats.push_back({joint_coef_.name, joint_coef_.proposed, joint_coef_.accepted});
    if (residual_ok_ && m_.use_counts())
      out.stats.push_back({residual_.name, residual_.proposed, residual_.accepted});
    if (eta_moves_) {
      out.stats.push_back({shift_.name, shift_.proposed, shift_.accepted});
      if (scale_ok_) out.stats.push_back({scale_.name, scale_.proposed, scale_.accepted});
      for (const auto& [j, a] : joint_) out.stats.push_back({a.name, a.proposed, a.accepted});
    }
    out.nonfinite = nonfinite_;
    return out;
  }

 private:
  bool fixed(int k) const { return k < 0 ? false : fixed_[static_cast<std::size_t>(k)]; }

  double initial_scale(int k) {
    const auto& L = m_.layout();
    const auto& p = L.params[static_cast<std::size_t>(k)];
    if (p.role == Role::coefficient && m_.use_counts()) {
      // Inverse square root of the Fisher information at the start point.
      const auto& d = m_.design();
      std::vector<double> eta;
      m_.fixed_eta(th_, eta);
      const double b = L.beta_me >= 0 ? th_[L.beta_me] : 0.0;
      double info = 0.0;
      for (std::size_t q = 0; q < d.points(); ++q) {
        const double xl = m_.latent() ? m_.latent_actual(x_, d.lag_week[q]) : 0.0;
        const double lam = std::exp(std::min(eta[q] + b * xl, 50.0));
        double z = 1.0;
        if (k == L.beta_me) {
          z = xl;
        } else {
          for (std::size_t j = 0; j < L.fixed.size(); ++j)
            if (L.fixed[j] == k) z = d.fixed[q][j] - m_.zbar()[j];
        }
        info += lam * z * z;
      }
      return info > 0.0 ? 2.4 / std::sqrt(info) : 0.1;
    }
    if (p.transform == Transform::circular) return 2.0;
    return 0.1;
  }

  double evaluate(const std::vector<double>& th, const std::vector<double>& x) const {
    return m_.log_post(th, x);
  }

  void step() {
    const auto& L = m_.layout();
    if (m_.latent() && m_.use_counts()) {
      latent_update();
    }
    for (auto& [k, a] : rw_)
      if (L.params[static_cast<std::size_t>(k)].role == Role::coefficient) coefficient_update(k, a);
    learn_coefficient_covariance();
    if (!chol_.empty()) joint_coefficient_update();
    if (eta_moves_) {
      shift_move();
      if (scale_ok_) scale_move();
      for (auto& [j, a] : joint_) joint_move(j, a);
    }
    const bool collapsed = m_.latent() && !m_.use_counts();
    for (auto& [k, a] : rw_)
      if (L.params[static_cast<std::size_t>(k)].role == Role::hyper) hyper_update(k, a, collapsed);
    if (residual_ok_ && !collapsed) residual_move();
    if (collapsed) {
      x_ = statespace::ffbs_sample({m_.y(), m_.n()}, m_.ar(th_), m_.noise(th_), rng_);
    }
  }

  void note_nonfinite(double v) {
    if (counting_ && std::isnan(v)) ++nonfinite_;
  }

  void coefficient_update(int k, Adaptive& a) {
    const auto& L = m_.layout();
    std::normal_distribution<double> z;
    const double delta = a.scale() * z(rng_);
    // Moving the intercept against the predictor mean keeps the linear
    // predictor's average fixed, which decorrelates the two.
    double comp = 0.0;
    if (k == L.beta_me) {
      const auto& d = m_.design();
      for (std::size_t p = 0; p < d.points(); ++p) comp += m_.latent_actual(x_, d.lag_week[p]);
      comp /= static_cast<double>(d.points());
    } else {
      for (std::size_t j = 0; j < L.fixed.size(); ++j)
        if (L.fixed[j] == k) comp = m_.zbar()[j];
    }
    if (fixed(L.beta0)) comp = 0.0;
    auto prop = th_;
    prop[static_cast<std::size_t>(k)] += delta;
    if (k != L.beta0) prop[static_cast<std::size_t>(L.beta0)] -= delta * comp;
    const double cur = current_lp();
    const double nxt = evaluate(prop, x_);
    note_nonfinite(nxt);
    const bool ok = accept(nxt - cur, rng_);
    if (ok) set_state(std::move(prop), x_, nxt);
    a.record(ok, adapting_, counting_, cfg_.target_accept);
  }

  // Coefficient draws from the second quarter of burn-in give a covariance
  // for a joint random-walk block, switched on from mid burn-in; it is
  // refreshed once at three quarters and frozen with the rest of adaptation.
  void learn_coefficient_covariance() {
    if (coef_idx_.size() < 2 || !m_.use_counts()) return;
    const int B = cfg_.burn_in;
    if (B < 40) return;
    ++iter_;
    const bool collect = (iter_ > B / 4 && iter_ <= B / 2) || (iter_ > B / 2 && iter_ <= 3 * B / 4);
    if (collect) {
      std::vector<double> row;
      for (int k : coef_idx_) row.push_back(th_[static_cast<std::size_t>(k)]);
      history_.push_back(std::move(row));
    }
    if (iter_ == B / 2 || iter_ == 3 * B / 4) {
      factor_covariance();
      history_.clear();
    }
  }

  void factor_covariance() {
    const std::size_t d = coef_idx_.size();
    const double n = static_cast<double>(history_.size());
    if (n < 2.0 * static_cast<double>(d) + 2.0) return;
    std::vector<double> mean(d, 0.0);
    for (const auto& r : history_)
      for (std::size_t i = 0; i < d; ++i) mean[i] += r[i] / n;
    std::vector<double> c(d * d, 0.0);
    for (const auto& r : history_)
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) c[i * d + j] += (r[i] - mean[i]) * (r[j] - mean[j]) / (n - 1.0);
    for (std::size_t i = 0; i < d; ++i) c[i * d + i] += 1e-12 + 1e-6 * c[i * d + i];
    std::vector<double> l(d * d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      double v = c[j * d + j];
      for (std::size_t k = 0; k < j; ++k) v -= l[j * d + k] * l[j * d + k];
      if (!(v > 0.0)) return;
      l[j * d + j] = std::sqrt(v);
      for (std::size_t i = j + 1; i < d; ++i) {
        double w = c[i * d + j];
        for (std::size_t k = 0; k < j; ++k) w -= l[i * d + k] * l[j * d + k];
        l[i * d + j] = w / l[j * d + j];
      }
    }
    chol_ = std::move(l);
    if (joint_coef_.adapt_steps == 0) joint_coef_.log_scale = std::log(2.38 / std::sqrt(static_cast<double>(d)));
  }

  void joint_coefficient_update() {
    const std::size_t d = coef_idx_.size();
    std::normal_distribution<double> z;
    std::vector<double> e(d);
    for (auto& v : e) v = z(rng_);
    auto prop = th_;
    const double sc = joint_coef_.scale();
    for (std::size_t i = 0; i < d; ++i) {
      double step = 0.0;
      for (std::size_t k = 0; k <= i; ++k) step += chol_[i * d + k] * e[k];
      prop[static_cast<std::size_t>(coef_idx_[i])] += sc * step;
    }
    const double cur = current_lp();
    const double nxt = evaluate(prop, x_);
    note_nonfinite(nxt);
    const bool ok = accept(nxt - cur, rng_);
    if (ok) set_state(std::move(prop), x_, nxt);
    joint_coef_.record(ok, adapting_, counting_, 0.234);
  }

  void hyper_update(int k, Adaptive& a, bool collapsed) {
    const auto& p = m_.layout().params[static_cast<std::size_t>(k)];
    std::normal_distribution<double> z;
    auto prop = th_;
    const double u = to_unconstrained(p, th_[static_cast<std::size_t>(k)]);
    prop[static_cast<std::size_t>(k)] = from_unconstrained(p, u + a.scale() * z(rng_));
    const double v_new = prop[static_cast<std::size_t>(k)];
    const double v_old = th_[static_cast<std::size_t>(k)];
    double cur, nxt;
    if (collapsed) {
      cur = collapsed_target(th_);
      nxt = collapsed_target(prop);
    } else {
      cur = current_lp();
      nxt = evaluate(prop, x_);
    }
    note_nonfinite(nxt);
    const double log_ratio = nxt - cur + log_jacobian(p, v_new) - log_jacobian(p, v_old);
    const bool ok = std::isfinite(nxt) && accept(log_ratio, rng_);
    if (ok) {
      th_ = std::move(prop);
      lp_valid_ = false;
      if (collapsed) collapsed_cache_ = nxt, collapsed_valid_ = true;
    }
    a.record(ok, adapting_, counting_, cfg_.target_accept);
  }

  double collapsed_target(const std::vector<double>& th) {
    if (&th == &th_ && collapsed_valid_) return collapsed_cache_;
    double lp = m_.log_prior(th);
    if (lp != kNegInf) {
      try {
        lp += m_.collapsed_ll(th);
      } catch (const DomainError&) {
        lp = kNegInf;
      }
    }
    if (&th == &th_) {
      collapsed_cache_ = lp;
      collapsed_valid_ = true;
    }
    return lp;
  }

  double current_lp() {
    if (!lp_valid_) {
      lp_ = evaluate(th_, x_);
      lp_valid_ = true;
    }
    return lp_;
  }

  void set_state(std::vector<double> th, std::vector<double> x, double lp) {
    th_ = std::move(th);
    x_ = std::move(x);
    lp_ = lp;
    lp_valid_ = true;
    collapsed_valid_ = false;
  }

  // The latent path is refreshed in blocks of cfg.latent_block weeks with a
  // random phase. Within a block, the AR(1) prior given the two boundary
  // values and the pollutant observations form a Gaussian with tridiagonal
  // precision; the Poisson terms are replaced by their second-order expansion
  // at the conditional mode (Newton iterations). The resulting Gaussian is an
  // independence proposal for the block, corrected by Metropolis-Hastings.
  // It depends only on the parameters and the boundaries, never on the
  // block's current values.
  void latent_update() {
    const std::size_t G = x_.size();
    const std::size_t L = static_cast<std::size_t>(cfg_.latent_block);
    std::uniform_int_distribution<std::size_t> phase_dist(0, L - 1);
    const std::size_t phase = std::min(phase_dist(rng_), G - 1);
    prepare_block_terms();
    std::size_t a = 0;
    std::size_t e = phase == 0 ? std::min(L, G) - 1 : phase - 1;
    while (a < G) {
      block_update(a, e);
      a = e + 1;
      e = std::min(a + L, G) - 1;
    }
    lp_valid_ = false;
  }

  // Per-iteration constants for the block updates.
  void prepare_block_terms() {
    const auto& Lay = m_.layout();
    const auto& d = m_.design();
    const std::size_t G = x_.size();
    ar_ = m_.ar(th_);
    noise_ = m_.noise(th_);
    mean_.resize(G);
    for (std::size_t g = 0; g < G; ++g)
      mean_[g] = ar_.mean.kind == MeanKind::constant ? ar_.mean.level
                                                     : statespace::mean_at(ar_.mean, static_cast<double>(g + 1));
    b_ = th_[static_cast<std::size_t>(Lay.beta_me)];
    std::vector<double> eta;
    m_.fixed_eta(th_, eta);
    // Poisson terms indexed by the lag week they depend on.
    k_at_.assign(G, std::nan(""));
    y_at_.assign(G, 0.0);
    for (std::size_t p = 0; p < d.points(); ++p) {
      k_at_[d.lag_week[p]] = eta[p] + b_ * m_.shift();
      y_at_[d.lag_week[p]] = static_cast<double>(d.count[p]);
    }
  }

  struct Tridiag {
    std::vector<double> diag, off, lin;  // off[i] couples i and i+1
  };

  // Gaussian part of the block conditional in terms of deviations from the mean.
  Tridiag gaussian_block(std::size_t a, std::size_t e) const {
    const std::size_t G = x_.size();
    const std::size_t n = e - a + 1;
    const double phi = ar_.phi, s2 = ar_.sigma2;
    Tridiag q;
    q.diag.assign(n, 0.0);
    q.off.assign(n > 0 ? n - 1 : 0, -phi / s2);
    q.lin.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t g = a + i;
      const bool first = g == 0, last = g + 1 == G;
      q.diag[i] = (first || last) ? 1.0 / s2 : (1.0 + phi * phi) / s2;
      if (first && last) q.diag[i] = (1.0 - phi * phi) / s2;
      const double y = m_.y()[g];
      if (!std::isnan(y)) {
        const double R = noise_.at(m_.n()[g]);
        q.diag[i] += 1.0 / R;
        q.lin[i] += (y - mean_[g]) / R;
      }
    }
    if (a > 0) q.lin[0] += phi / s2 * (x_[a - 1] - mean_[a - 1]);
    if (e + 1 < G) q.lin[n - 1] += phi / s2 * (x_[e + 1] - mean_[e + 1]);
    return q;
  }

  double poisson_block(std::size_t a, const std::vector<double>& dev) const {
    double ll = 0.0;
    for (std::size_t i = 0; i < dev.size(); ++i) {
      const std::size_t g = a + i;
      if (std::isnan(k_at_[g])) continue;
      const double eta = k_at_[g] + b_ * (dev[i] + mean_[g]);
      if (eta > outcome::kMaxLogIntensity) return kNegInf;
      ll += y_at_[g] * eta - std::exp(eta);
    }
    return ll;
  }

  static double quad(const Tridiag& q, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      s += -0.5 * q.diag[i] * v[i] * v[i] + q.lin[i] * v[i];
      if (i + 1 < v.size()) s -= q.off[i] * v[i] * v[i + 1];
    }
    return s;
  }

  // Cholesky of a symmetric positive-definite tridiagonal matrix: returns
  // false when it is not positive definite.
  static bool cholesky(const Tridiag& q, std::vector<double>& ld, std::vector<double>& lo) {
    const std::size_t n = q.diag.size();
    ld.resize(n);
    lo.resize(n > 0 ? n - 1 : 0);
    for (std::size_t i = 0; i < n; ++i) {
      double v = q.diag[i];
      if (i > 0) v -= lo[i - 1] * lo[i - 1];
      if (!(v > 0.0)) return false;
      ld[i] = std::sqrt(v);
      if (i + 1 < n) lo[i] = q.off[i] / ld[i];
    }
    return true;
  }

  static std::vector<double> solve(const std::vector<double>& ld, const std::vector<double>& lo,
                                   std::vector<double> rhs) {
    const std::size_t n = ld.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) rhs[i] -= lo[i - 1] * rhs[i - 1];
      rhs[i] /= ld[i];
    }
    for (std::size_t i = n; i-- > 0;) {
      if (i + 1 < n) rhs[i] -= lo[i] * rhs[i + 1];
      rhs[i] /= ld[i];
    }
    return rhs;
  }

  // Adds the Poisson expansion at `at` to the Gaussian block.
  Tridiag expanded(const Tridiag& base, std::size_t a, const std::vector<double>& at) const {
    Tridiag q = base;
    for (std::size_t i = 0; i < at.size(); ++i) {
      const std::size_t g = a + i;
      if (std::isnan(k_at_[g]) || b_ == 0.0) continue;
      const double eta = std::min(k_at_[g] + b_ * (at[i] + mean_[g]), outcome::kMaxLogIntensity);
      const double lam = std::exp(eta);
      const double h = b_ * b_ * lam;
      q.diag[i] += h;
      q.lin[i] += h * at[i] + b_ * (y_at_[g] - lam);
    }
    return q;
  }

  void block_update(std::size_t a, std::size_t e) {
    const std::size_t n = e - a + 1;
    const Tridiag base = gaussian_block(a, e);
    std::vector<double> ld, lo;
    if (!cholesky(base, ld, lo)) {
      latent_stats_proposal(false);
      return;
    }
    auto target = [&](const std::vector<double>& dev) { return quad(base, dev) + poisson_block(a, dev); };

    // Newton iterations from the Gaussian-only conditional mean.
    std::vector<double> mode = solve(ld, lo, base.lin);
    double f = target(mode);
    for (int it = 0; it < 30 && b_ != 0.0; ++it) {
      const Tridiag q = expanded(base, a, mode);
      if (!cholesky(q, ld, lo)) break;
      auto next = solve(ld, lo, q.lin);
      double fn = target(next);
      for (int h = 0; h < 20 && !(fn >= f); ++h) {
        for (std::size_t i = 0; i < n; ++i) next[i] = 0.5 * (next[i] + mode[i]);
        fn = target(next);
      }
      if (!(fn >= f)) break;
      double diff = 0.0;
      for (std::size_t i = 0; i < n; ++i) diff = std::max(diff, std::abs(next[i] - mode[i]));
      mode = std::move(next);
      f = fn;
      if (diff < 1e-9) break;
    }
    const Tridiag q = expanded(base, a, mode);
    if (!cholesky(q, ld, lo)) {
      latent_stats_proposal(false);
      return;
    }
    // Proposal N(mode, Q^-1): draw via the transposed Cholesky factor.
    std::normal_distribution<double> z;
    std::vector<double> eps(n);
    for (auto& v : eps) v = z(rng_);
    for (std::size_t i = n; i-- > 0;) {
      if (i + 1 < n) eps[i] -= lo[i] * eps[i + 1];
      eps[i] /= ld[i];
    }
    std::vector<double> prop(n), cur(n);
    for (std::size_t i = 0; i < n; ++i) {
      prop[i] = mode[i] + eps[i];
      cur[i] = x_[a + i] - mean_[a + i];
    }
    auto log_q = [&](const std::vector<double>& dev) {
      std::vector<double> r(n);
      for (std::size_t i = 0; i < n; ++i) r[i] = dev[i] - mode[i];
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        s += q.diag[i] * r[i] * r[i];
        if (i + 1 < n) s += 2.0 * q.off[i] * r[i] * r[i + 1];
      }
      return -0.5 * s;
    };
    const double w_new = target(prop) - log_q(prop);
    const double w_old = target(cur) - log_q(cur);
    note_nonfinite(w_new);
    const bool ok = std::isfinite(w_new) && accept(w_new - w_old, rng_);
    if (ok)
      for (std::size_t i = 0; i < n; ++i) x_[a + i] = prop[i] + mean_[a + i];
    latent_stats_proposal(ok);
  }

  // sigma_x * a with the observation residuals X - y scaled by a at every
  // observed week. Near sigma_x = 0 the path and sigma_x are pinned to each
  // other; moving them together avoids the funnel.
  void residual_move() {
    const auto& L = m_.layout();
    const auto& p = L.params[static_cast<std::size_t>(L.sigma_x)];
    std::normal_distribution<double> z;
    const double log_a = residual_.scale() * z(rng_);
    const double a = std::exp(log_a);
    auto th = th_;
    auto x = x_;
    th[static_cast<std::size_t>(L.sigma_x)] *= a;
    double observed = 0.0;
    for (std::size_t g = 0; g < x.size(); ++g) {
      const double y = m_.y()[g];
      if (std::isnan(y)) continue;
      x[g] = y + a * (x[g] - y);
      observed += 1.0;
    }
    const double cur = current_lp();
    const double nxt = evaluate(th, x);
    note_nonfinite(nxt);
    const double s_new = th[static_cast<std::size_t>(L.sigma_x)];
    const bool ok = s_new < p.hi && accept(nxt - cur + (observed + 1.0) * log_a, rng_);
    if (ok) set_state(std::move(th), std::move(x), nxt);
    residual_.record(ok, adapting_, counting_, cfg_.target_accept);
  }

  void latent_stats_proposal(bool ok) {
    if (counting_) {
      ++latent_stats_.proposed;
      if (ok) ++latent_stats_.accepted;
    }
  }

  // X + c, level + c, beta0 - beta_me * c: leaves every linear predictor and
  // the AR density unchanged.
  void shift_move() {
    const auto& L = m_.layout();
    std::normal_distribution<double> z;
    const double c = shift_.scale() * z(rng_);
    auto th = th_;
    auto x = x_;
    for (auto& v : x) v += c;
    if (L.mu >= 0 && !fixed(L.mu)) th[static_cast<std::size_t>(L.mu)] += c;
    th[static_cast<std::size_t>(L.beta0)] -= th[static_cast<std::size_t>(L.beta_me)] * c;
    const double cur = current_lp();
    const double nxt = evaluate(th, x);
    note_nonfinite(nxt);
    const bool ok = accept(nxt - cur, rng_);
    if (ok) set_state(std::move(th), std::move(x), nxt);
    shift_.record(ok, adapting_, counting_, cfg_.target_accept);
  }

  // Scales the latent deviations about the observed mean by a, with
  // beta_me / a, sigma_ar * a and the mean level or amplitudes rescaled so
  // that every linear predictor is unchanged.
  void scale_move() {
    const auto& L = m_.layout();
    std::normal_distribution<double> z;
    const double log_a = scale_.scale() * z(rng_);
    const double a = std::exp(log_a);
    const double c = m_.ybar() - m_.shift();  // centre on the internal scale
    auto th = th_;
    auto x = x_;
    for (auto& v : x) v = c + a * (v - c);
    const double b = th[static_cast<std::size_t>(L.beta_me)];
    const double b_new = b / a;
    const double c_actual = m_.ybar();
    th[static_cast<std::size_t>(L.beta_me)] = b_new;
    th[static_cast<std::size_t>(L.beta0)] += (b - b_new) * c_actual;
    th[static_cast<std::size_t>(L.sigma_ar)] *= a;
    int scaled_mean_params = 0;
    if (L.mu >= 0) {
      th[static_cast<std::size_t>(L.mu)] = c + a * (th[static_cast<std::size_t>(L.mu)] - c);
      ++scaled_mean_params;
    }
    for (int k : {L.alpha0, L.alpha1})
      if (k >= 0) {
        th[static_cast<std::size_t>(k)] *= a;
        ++scaled_mean_params;
      }
    const double G = static_cast<double>(x.size());
    const double log_jac = (G + static_cast<double>(scaled_mean_params)) * log_a;  // X, sigma_ar, 1/beta_me, mean
    const double cur = current_lp();
    const double nxt = evaluate(th, x);
    note_nonfinite(nxt);
    const bool ok = accept(nxt - cur + log_jac, rng_);
    if (ok) set_state(std::move(th), std::move(x), nxt);
    scale_.record(ok, adapting_, counting_, cfg_.target_accept);
  }

  // beta_j + delta with X_{t-1} - delta * z_j / beta_me at every outcome
  // point, which leaves the linear predictors unchanged.
  void joint_move(std::size_t j, Adaptive& a) {
    const auto& L = m_.layout();
    const auto& d = m_.design();
    const double b = th_[static_cast<std::size_t>(L.beta_me)];
    if (std::abs(b) < 1e-8) return;
    std::normal_distribution<double> z;
    const double delta = a.scale() * z(rng_);
    auto th = th_;
    auto x = x_;
    th[static_cast<std::size_t>(L.fixed[j])] += delta;
    for (std::size_t p = 0; p < d.points(); ++p) x[d.lag_week[p]] -= delta * d.fixed[p][j] / b;
    const double cur = current_lp();
    const double nxt = evaluate(th, x);
    note_nonfinite(nxt);
    const bool ok = accept(nxt - cur, rng_);
    if (ok) set_state(std::move(th), std::move(x), nxt);
    a.record(ok, adapting_, counting_, cfg_.target_accept);
  }

  const Model& m_;
  const SamplerConfig& cfg_;
  std::mt19937_64 rng_;
  std::vector<double> th_;
  std::vector<double> x_;
  std::vector<bool> fixed_;
  std::vector<std::pair<int, Adaptive>> rw_;
  std::vector<std::pair<std::size_t, Adaptive>> joint_;
  Adaptive shift_, scale_, residual_, joint_coef_;
  std::vector<int> coef_idx_;
  std::vector<std::vector<double>> history_;
  std::vector<double> chol_;
  int iter_ = 0;
  bool residual_ok_ = false;
  BlockStats latent_stats_;
  bool eta_moves_ = false;
  bool scale_ok_ = false;
  bool adapting_ = false;
  bool counting_ = false;
  double lp_ = 0.0;
  bool lp_valid_ = false;
  double collapsed_cache_ = 0.0;
  bool collapsed_valid_ = false;
  long nonfinite_ = 0;
  // block-update scratch
  statespace::Ar1Params ar_;
  statespace::ObservationNoise noise_;
  std::vector<double> mean_, k_at_, y_at_;
  double b_ = 0.0;
};

int worker_count(const SamplerConfig& cfg) {
  int n = cfg.threads;
  if (n <= 0) {
    if (const char* env = std::getenv("AEROSTATE_THREADS")) n = std::atoi(env);
  }
  if (n <= 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return std::max(1, std::min(n, cfg.chains));
}

}  // namespace

ModelState initialize(const OutcomeDesign& design, const OutcomeSpec& spec, const StateSpaceSpec& ss,
                      std::mt19937_64& rng, bool jitter) {
  const Layout L = make_layout(design, spec, ss);
  ModelState s;
  s.names = L.names();
  s.values.assign(L.params.size(), 0.0);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  if (design.has_counts) {
    double ys = 0.0, off = 0.0;
    for (std::size_t p = 0; p < design.points(); ++p) {
      ys += static_cast<double>(design.count[p]);
      off += std::exp(design.log_offset[p]);
    }
    if (!(ys > 0.0)) throw InitializationError("coefficient block: every outcome count is zero");
    s.values[L.beta0] = std::log(ys / off);
  }
  if (design.has_me) {
    const double ybar = observed_mean(design.me_log_obs);
    double var = observed_variance(design.me_log_obs);
    if (!(var > 0.0)) var = 0.01;
    double nbar = 0.0;
    int cnt = 0;
    for (std::size_t g = 0; g < design.grid_length; ++g)
      if (!std::isnan(design.me_log_obs[g])) {
        nbar += design.me_n[g];
        ++cnt;
      }
    nbar = cnt ? nbar / cnt : 1.0;
    const double phi = 0.5;
    const double sx2 = ss.noise == NoiseMode::scaled_by_n ? 0.5 * var * nbar : 0.5 * var;
    const double sar2 = (1.0 - phi * phi) * 0.5 * var;
    const double cap = 0.9 * spec.priors.sigma_upper;
    if (L.mu >= 0) s.values[L.mu] = ybar;
    if (L.b1 >= 0) s.values[L.b1] = s.values[L.b2] = 0.5;
    s.values[L.phi] = phi;
    s.values[L.sigma_ar] = std::min(std::sqrt(sar2), cap);
    s.values[L.sigma_x] = std::min(std::sqrt(sx2), cap);
    const double shift = ss.mean == MeanKind::constant ? 0.0 : ybar;
    s.latent.assign(design.grid_length, 0.0);
    double last = ybar;
    for (std::size_t g = 0; g < design.grid_length; ++g) {
      if (!std::isnan(design.me_log_obs[g])) last = design.me_log_obs[g];
      s.latent[g] = last - shift;
    }
    if (jitter) {
      s.values[L.phi] = 0.5 + 0.3 * u(rng);
      s.values[L.sigma_ar] *= std::exp(0.3 * u(rng));
      s.values[L.sigma_x] *= std::exp(0.3 * u(rng));
      if (L.mu >= 0) s.values[L.mu] += 0.1 * std::sqrt(var) * z(rng);
    }
  }
  if (design.has_counts && jitter) s.values[L.beta0] += 0.05 * z(rng);

  // Every start value must sit inside its prior support with finite density.
  SamplerConfig cfg;
  const Model model(design, spec, ss, cfg);
  if (model.log_prior(s.values) == kNegInf)
    throw InitializationError("prior block: start values fall outside the prior support");
  if (design.has_me && !std::isfinite(model.gaussian_ll(s.values, s.latent)))
    throw InitializationError("latent block: non-finite state-space density at the start values");
  if (design.has_counts && !std::isfinite(model.poisson_ll(s.values, s.latent)))
    throw InitializationError("coefficient block: non-finite Poisson likelihood at the start values");
  return s;
}

PosteriorDraws fit(const WeeklyDataset& dataset, const OutcomeSpec& outcome_spec,
                   const StateSpaceSpec& ss_spec, const SamplerConfig& config) {
  config.validate();
  const auto design = outcome::build_design(dataset, outcome_spec);
  return fit(design, outcome_spec, ss_spec, config);
}

PosteriorDraws fit(const OutcomeDesign& design, const OutcomeSpec& outcome_spec,
                   const StateSpaceSpec& ss_spec, const SamplerConfig& config) {
  config.validate();
  outcome_spec.validate();
  const Model model(design, outcome_spec, ss_spec, config);
  const auto names = model.layout().names();
  for (const auto& [name, v] : config.fixed)
    if (std::find(names.begin(), names.end(), name) == names.end())
      throw ConfigError("cannot fix unknown parameter '" + name + "'");

  std::vector<ModelState> inits;
  std::vector<std::uint64_t> seeds;
  for (int c = 0; c < config.chains; ++c) {
    seeds.push_back(chain_seed(config.seed, c));
    std::mt19937_64 init_rng(seeds.back() ^ 0xA5A5A5A5A5A5A5A5ULL);
    inits.push_back(initialize(design, outcome_spec, ss_spec, init_rng, c > 0));
    for (const auto& [name, v] : config.fixed) inits.back().set(name, v);
    if (!std::isfinite(model.log_post(inits.back().values, inits.back().latent)))
      throw InitializationError("non-finite posterior density at the start values of chain " + std::to_string(c));
  }

  std::vector<ChainOutput> outputs(static_cast<std::size_t>(config.chains));
  const int workers = worker_count(config);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(config.chains));
  auto run_chain = [&](int c) {
    try {
      Chain chain(model, config, inits[static_cast<std::size_t>(c)], seeds[static_cast<std::size_t>(c)]);
      outputs[static_cast<std::size_t>(c)] = chain.run();
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  };
  if (workers == 1) {
    for (int c = 0; c < config.chains; ++c) run_chain(c);
  } else {
    for (int start = 0; start < config.chains; start += workers) {
      std::vector<std::thread> pool;
      for (int c = start; c < std::min(config.chains, start + workers); ++c) pool.emplace_back(run_chain, c);
      for (auto& t : pool) t.join();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  PosteriorDraws out;
  out.parameter_names = names;
  out.chains = config.chains;
  out.seed = config.seed;
  out.chain_seeds = seeds;
  out.pointwise_weeks = model.pointwise_weeks();
  for (int c = 0; c < config.chains; ++c) {
    auto& o = outputs[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < o.values.size(); ++i) {
      out.values.push_back(std::move(o.values[i]));
      out.iteration.push_back(o.iteration[i]);
      out.chain.push_back(c);
      out.pointwise.push_back(std::move(o.pointwise[i]));
    }
    for (auto& l : o.latent) {
      out.latent.push_back(std::move(l));
      out.latent_chain.push_back(c);
    }
    out.acceptance.push_back(std::move(o.stats));
    out.nonfinite_events += o.nonfinite;
  }
  return out;
}

void write_draws_csv(const PosteriorDraws& draws, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "chain,iteration,parameter,value\n";
  for (std::size_t i = 0; i < draws.values.size(); ++i)
    for (std::size_t k = 0; k < draws.parameter_names.size(); ++k)
      out << draws.chain[i] << ',' << draws.iteration[i] << ',' << draws.parameter_names[k] << ','
          << csv::format_number(draws.values[i][k]) << '\n';
}

void write_pointwise_csv(const PosteriorDraws& draws, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "chain,iteration";
  for (auto w : draws.pointwise_weeks) out << ",w" << w;
  out << '\n';
  for (std::size_t i = 0; i < draws.pointwise.size(); ++i) {
    out << draws.chain[i] << ',' << draws.iteration[i];
    for (double v : draws.pointwise[i]) out << ',' << csv::format_number(v);
    out << '\n';
  }
}

PosteriorDraws read_draws_csv(const std::string& draws_path, const std::string& pointwise_path) {
  PosteriorDraws d;
  const auto t = csv::Table::read_file(draws_path);
  const auto cc = t.column("chain"), ic = t.column("iteration"), pc = t.column("parameter"), vc = t.column("value");
  std::map<std::pair<long, long>, std::size_t> row_of;
  for (const auto& row : t.rows()) {
    const long chain = t.integer(row, cc), iter = t.integer(row, ic);
    const auto& name = t.text(row, pc);
    auto pit = std::find(d.parameter_names.begin(), d.parameter_names.end(), name);
    std::size_t k;
    if (pit == d.parameter_names.end()) {
      d.parameter_names.push_back(name);
      k = d.parameter_names.size() - 1;
      for (auto& v : d.values) v.resize(d.parameter_names.size(), std::nan(""));
    } else {
      k = static_cast<std::size_t>(pit - d.parameter_names.begin());
    }
    auto [it, inserted] = row_of.emplace(std::make_pair(chain, iter), d.values.size());
    if (inserted) {
      d.values.emplace_back(d.parameter_names.size(), std::nan(""));
      d.chain.push_back(static_cast<int>(chain));
      d.iteration.push_back(iter);
    }
    d.values[it->second][k] = t.number(row, vc);
  }
  int max_chain = -1;
  for (int c : d.chain) max_chain = std::max(max_chain, c);
  d.chains = max_chain + 1;

  const auto pw = csv::Table::read_file(pointwise_path);
  const auto pcc = pw.column("chain"), pic = pw.column("iteration");
  for (std::size_t c = 0; c < pw.header().size(); ++c)
    if (c != pcc && c != pic) d.pointwise_weeks.push_back(std::stoul(pw.header()[c].substr(1)));
  d.pointwise.assign(d.values.size(), {});
  for (const auto& row : pw.rows()) {
    const auto key = std::make_pair(pw.integer(row, pcc), pw.integer(row, pic));
    auto it = row_of.find(key);
    if (it == row_of.end()) throw SchemaError(pointwise_path, row.line, "draw not present in draws file");
    auto& dst = d.pointwise[it->second];
    for (std::size_t c = 0; c < pw.header().size(); ++c)
      if (c != pcc && c != pic) dst.push_back(pw.number(row, c));
  }
  return d;
}

}  // namespace aerostate::sampler
