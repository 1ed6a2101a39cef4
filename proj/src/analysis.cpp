#include "pals/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

namespace pals {
namespace analysis {

using std::numbers::pi;

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

// exp(x^2) * erfc(x) for x >= 0, overflow-safe.
double erfcx_pos(double x) {
  if (x < 12.0) return std::exp(x * x) * std::erfc(x);
  double ix2 = 1.0 / (x * x);
  double s = 1.0, term = 1.0;
  for (int k = 1; k <= 6; ++k) {
    term *= -(2 * k - 1) * 0.5 * ix2;
    s += term;
  }
  return s / (x * std::sqrt(pi));
}

// exp(rate^2 sigma^2 / 2 - rate t) * Phi(t/sigma - rate sigma), the decaying
// term of the EMG CDF, computed without overflow on either side.
double emg_tail(double t, double rate, double sigma) {
  double z = t / sigma;
  double u = (rate * sigma - z) / kSqrt2;
  if (u >= 0.0) return 0.5 * erfcx_pos(u) * std::exp(-0.5 * z * z);
  double g = 0.5 * rate * rate * sigma * sigma - rate * t;
  return 0.5 * std::exp(g) * std::erfc(u);
}

}  // namespace

double emg_cdf(double t, double rate, double sigma) {
  if (sigma <= 0.0) return t > 0.0 ? -std::expm1(-rate * t) : 0.0;
  double z = t / sigma;
  double phi_z = 0.5 * std::erfc(-z / kSqrt2);
  double f = phi_z - emg_tail(t, rate, sigma);
  return std::clamp(f, 0.0, 1.0);
}

double emg_cdf_drate(double t, double rate, double sigma) {
  if (sigma <= 0.0) return t > 0.0 ? t * std::exp(-rate * t) : 0.0;
  double z = t / sigma;
  double phi_pdf = kInvSqrt2Pi * std::exp(-0.5 * z * z);
  return (t - rate * sigma * sigma) * emg_tail(t, rate, sigma) + sigma * phi_pdf;
}

FitModelSpec FitModelSpec::from_config(const FitConfig& fc, const DetectorSpec& det) {
  FitModelSpec s;
  s.n_components = fc.n_components;
  s.fixed_rates.assign(fc.n_components, std::nullopt);
  for (size_t j = 0; j < fc.fixed_rates.size() && j < s.fixed_rates.size(); ++j)
    s.fixed_rates[j] = fc.fixed_rates[j];
  s.initial_rates = fc.initial_rates;
  s.background_free = fc.background_free;
  s.background_value = fc.background_value;
  s.response_fwhm = fc.response_fwhm > 0 ? fc.response_fwhm : det.timing_fwhm;
  s.window_min = fc.window_min;
  s.window_max = fc.window_max;
  s.variance_model = fc.variance_model == "poisson" ? VarianceModel::poisson
                                                    : VarianceModel::gaussian_approx;
  s.max_iterations = fc.max_iterations;
  return s;
}

namespace {

// Fit problem over the bins inside the window, with parameters packed as
// [log rate_j (free ones), log amp_j (all), log bg (if free)].
struct Problem {
  const TimeSpectrum* data;
  FitModelSpec spec;
  double sigma;
  int first_bin, last_bin;  // inclusive bin range inside the window
  int ncomp;
  std::vector<bool> rate_free;
  int n_params;

  Problem(const TimeSpectrum& d, const FitModelSpec& s) : data(&d), spec(s) {
    sigma = s.response_fwhm / 2.3548200450309493;
    ncomp = s.n_components;
    if (ncomp < 1) throw FitError("fit needs at least one component");
    rate_free.assign(ncomp, true);
    spec.fixed_rates.resize(ncomp);
    for (int j = 0; j < ncomp; ++j)
      if (spec.fixed_rates[j]) rate_free[j] = false;
    first_bin = -1;
    last_bin = -2;
    for (int i = 0; i < d.bins(); ++i) {
      double c = d.center(i);
      if (c >= s.window_min && c <= s.window_max) {
        if (first_bin < 0) first_bin = i;
        last_bin = i;
      }
    }
    if (first_bin < 0 || last_bin - first_bin + 1 < 4)
      throw FitError("fit window contains too few bins");
    n_params = 0;
    for (int j = 0; j < ncomp; ++j) n_params += rate_free[j] ? 2 : 1;
    if (spec.background_free) ++n_params;
  }

  int n_bins() const { return last_bin - first_bin + 1; }

  void unpack(const std::vector<double>& p, std::vector<double>& rates,
              std::vector<double>& amps, double& bg) const {
    rates.resize(ncomp);
    amps.resize(ncomp);
    int k = 0;
    for (int j = 0; j < ncomp; ++j)
      rates[j] = rate_free[j] ? std::exp(p[k++]) : *spec.fixed_rates[j];
    for (int j = 0; j < ncomp; ++j) amps[j] = std::exp(p[k++]);
    bg = spec.background_free ? std::exp(p[k++]) : spec.background_value;
  }

  std::vector<double> pack(const std::vector<double>& rates,
                           const std::vector<double>& amps, double bg) const {
    std::vector<double> p;
    for (int j = 0; j < ncomp; ++j)
      if (rate_free[j]) p.push_back(std::log(rates[j]));
    for (int j = 0; j < ncomp; ++j) p.push_back(std::log(std::max(amps[j], 1e-300)));
    if (spec.background_free) p.push_back(std::log(std::max(bg, 1e-300)));
    return p;
  }

  std::vector<std::string> param_names() const {
    std::vector<std::string> names;
    for (int j = 0; j < ncomp; ++j)
      if (rate_free[j]) names.push_back("log_rate_" + std::to_string(j));
    for (int j = 0; j < ncomp; ++j) names.push_back("log_amp_" + std::to_string(j));
    if (spec.background_free) names.push_back("log_background");
    return names;
  }

  // Objective, gradient, and Gauss-Newton (Fisher) Hessian approximation.
  double evaluate(const std::vector<double>& p, std::vector<double>* grad,
                  std::vector<double>* hess) const {
    std::vector<double> rates, amps;
    double bg;
    unpack(p, rates, amps, bg);

    const int nb = n_bins();
    const int np = n_params;
    // per-edge CDF and its rate derivative for each component
    std::vector<std::vector<double>> cdf(ncomp), dcdf(ncomp);
    for (int j = 0; j < ncomp; ++j) {
      cdf[j].resize(nb + 1);
      if (grad || hess) dcdf[j].resize(nb + 1);
      for (int e = 0; e <= nb; ++e) {
        double t = data->edge(first_bin + e);
        cdf[j][e] = emg_cdf(t, rates[j], sigma);
        if (grad || hess) dcdf[j][e] = emg_cdf_drate(t, rates[j], sigma);
      }
    }

    if (grad) grad->assign(np, 0.0);
    if (hess) hess->assign(np * np, 0.0);
    std::vector<double> dmu(np);
    double value = 0.0;
    const bool poisson = spec.variance_model == VarianceModel::poisson;
    for (int i = 0; i < nb; ++i) {
      double n = data->counts[first_bin + i];
      double mu = bg;
      int k = 0;
      for (int j = 0; j < ncomp; ++j) {
        double dF = cdf[j][i + 1] - cdf[j][i];
        mu += amps[j] * dF;
      }
      mu = std::max(mu, 1e-12);
      double dval_dmu, w;
      if (poisson) {
        value += 2.0 * (mu - n + (n > 0 ? n * std::log(n / mu) : 0.0));
        dval_dmu = 2.0 * (1.0 - n / mu);
        w = 1.0 / mu;
      } else {
        double v = std::max(n, 1.0);
        double r = n - mu;
        value += r * r / v;
        dval_dmu = -2.0 * r / v;
        w = 1.0 / v;
      }
      if (!grad && !hess) continue;
      k = 0;
      for (int j = 0; j < ncomp; ++j)
        if (rate_free[j])
          dmu[k++] = amps[j] * rates[j] * (dcdf[j][i + 1] - dcdf[j][i]);
      for (int j = 0; j < ncomp; ++j)
        dmu[k++] = amps[j] * (cdf[j][i + 1] - cdf[j][i]);
      if (spec.background_free) dmu[k++] = bg;
      if (grad)
        for (int a = 0; a < np; ++a) (*grad)[a] += dval_dmu * dmu[a];
      if (hess)
        for (int a = 0; a < np; ++a)
          for (int b = a; b < np; ++b) (*hess)[a * np + b] += 2.0 * w * dmu[a] * dmu[b];
    }
    if (hess)
      for (int a = 0; a < np; ++a)
        for (int b = 0; b < a; ++b) (*hess)[a * np + b] = (*hess)[b * np + a];
    return value;
  }
};

// Cholesky solve of (A)x = b for small symmetric positive definite A.
bool cholesky_solve(std::vector<double> a, std::vector<double> b, int n,
                    std::vector<double>& x) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a[i * n + j];
      for (int k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      if (i == j) {
        if (s <= 0.0) return false;
        a[i * n + i] = std::sqrt(s);
      } else {
        a[i * n + j] = s / a[j * n + j];
      }
    }
  }
  // forward then backward substitution
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
    b[i] = s / a[i * n + i];
  }
  x.assign(n, 0.0);
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= a[k * n + i] * x[k];
    x[i] = s / a[i * n + i];
  }
  return true;
}

bool invert_spd(const std::vector<double>& a, int n, std::vector<double>& inv) {
  inv.assign(n * n, 0.0);
  std::vector<double> e(n), col;
  for (int j = 0; j < n; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    if (!cholesky_solve(a, e, n, col)) return false;
    for (int i = 0; i < n; ++i) inv[i * n + j] = col[i];
  }
  return true;
}

// Weighted log-slope estimate of the decay rate on [t_lo, t_hi].
double log_slope_rate(const TimeSpectrum& d, double t_lo, double t_hi, double bg) {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < d.bins(); ++i) {
    double t = d.center(i);
    if (t < t_lo || t > t_hi) continue;
    double c = d.counts[i] - bg;
    if (c < 0.5) continue;
    double w = c;  // Poisson weight of log counts
    double y = std::log(c);
    sw += w;
    sx += w * t;
    sy += w * y;
    sxx += w * t * t;
    sxy += w * t * y;
  }
  if (sw <= 0) return 0.0;
  double denom = sxx - sx * sx / sw;
  if (denom <= 0) return 0.0;
  double slope = (sxy - sx * sy / sw) / denom;
  return -slope;
}

struct InitResult {
  std::vector<double> rates, amps;
  double bg;
};

InitResult auto_initialize(const Problem& prob) {
  const TimeSpectrum& d = *prob.data;
  const FitModelSpec& s = prob.spec;
  InitResult init;
  // background from pre-peak bins
  double bg = 0;
  int nbg = 0;
  for (int i = prob.first_bin; i <= prob.last_bin; ++i)
    if (d.center(i) < -1.0) {
      bg += d.counts[i];
      ++nbg;
    }
  init.bg = s.background_free ? std::max(nbg ? bg / nbg : 0.0, 0.1) : s.background_value;

  double t_hi = s.window_max;
  double slow = log_slope_rate(d, 0.35 * t_hi, 0.9 * t_hi, init.bg);
  if (!(slow > 1e-6) || !std::isfinite(slow)) slow = 2.0 / t_hi;
  slow = std::clamp(slow, 1e-6, 1e3);

  init.rates.resize(prob.ncomp);
  for (int j = 0; j < prob.ncomp; ++j) {
    if (!prob.rate_free[j]) {
      init.rates[j] = *prob.spec.fixed_rates[j];
    } else if (j < static_cast<int>(s.initial_rates.size()) && s.initial_rates[j] > 0) {
      init.rates[j] = s.initial_rates[j];
    } else {
      // descending lifetime ordering: later components are faster
      init.rates[j] = slow * std::pow(50.0, j);
    }
  }
  double total = 0;
  for (int i = prob.first_bin; i <= prob.last_bin; ++i) total += d.counts[i];
  double excess = std::max(total - init.bg * prob.n_bins(), 10.0);
  init.amps.assign(prob.ncomp, excess / prob.ncomp);
  return init;
}

FitResult finalize(const Problem& prob, const std::vector<double>& p, double value,
                   int iterations, bool converged, const std::string& message) {
  FitResult res;
  std::vector<double> rates, amps;
  double bg;
  prob.unpack(p, rates, amps, bg);

  std::vector<double> hess;
  prob.evaluate(p, nullptr, &hess);
  std::vector<double> cov;
  res.covariance_ok = invert_spd(hess, prob.n_params, cov);
  if (res.covariance_ok)
    for (auto& c : cov) c *= 2.0;  // deviance curvature -> parameter covariance

  res.param_names = prob.param_names();
  res.covariance = cov;
  res.chi2 = value;
  res.dof = prob.n_bins() - prob.n_params;
  res.iterations = iterations;
  res.converged = converged;
  res.message = message;
  res.background = bg;
  if (res.covariance_ok && prob.spec.background_free) {
    int k = prob.n_params - 1;
    res.background_err = bg * std::sqrt(std::max(cov[k * prob.n_params + k], 0.0));
  }
  double amp_sum = 0;
  for (double a : amps) amp_sum += a;
  int krate = 0;
  int kamp0 = 0;
  for (int j = 0; j < prob.ncomp; ++j) kamp0 += prob.rate_free[j] ? 1 : 0;
  for (int j = 0; j < prob.ncomp; ++j) {
    FitComponent c;
    c.rate = rates[j];
    c.amplitude = amps[j];
    c.intensity = amp_sum > 0 ? amps[j] / amp_sum : 0.0;
    if (res.covariance_ok) {
      if (prob.rate_free[j]) {
        c.rate_err = c.rate * std::sqrt(std::max(cov[krate * prob.n_params + krate], 0.0));
      }
      int ka = kamp0 + j;
      c.amplitude_err = c.amplitude * std::sqrt(std::max(cov[ka * prob.n_params + ka], 0.0));
    }
    if (prob.rate_free[j]) ++krate;
    res.components.push_back(c);
  }
  std::sort(res.components.begin(), res.components.end(),
            [](const FitComponent& a, const FitComponent& b) { return a.rate < b.rate; });
  return res;
}

}  // namespace

std::vector<double> pack_parameters(const FitModelSpec& spec,
                                    const std::vector<double>& rates,
                                    const std::vector<double>& amplitudes,
                                    double background) {
  TimeSpectrum dummy;
  dummy.t_min = spec.window_min;
  dummy.t_max = spec.window_max;
  dummy.counts.assign(16, 0.0);
  Problem prob(dummy, spec);
  return prob.pack(rates, amplitudes, background);
}

double objective_value(const TimeSpectrum& data, const FitModelSpec& spec,
                       const std::vector<double>& rates,
                       const std::vector<double>& amplitudes, double background) {
  Problem prob(data, spec);
  return prob.evaluate(prob.pack(rates, amplitudes, background), nullptr, nullptr);
}

void objective_with_gradient(const TimeSpectrum& data, const FitModelSpec& spec,
                             const std::vector<double>& packed, double* value,
                             std::vector<double>* gradient) {
  Problem prob(data, spec);
  double v = prob.evaluate(packed, gradient, nullptr);
  if (value) *value = v;
}

FitResult fit_lifetime(const TimeSpectrum& data, const FitModelSpec& spec) {
  Problem prob(data, spec);
  InitResult init = auto_initialize(prob);
  std::vector<double> p = prob.pack(init.rates, init.amps, init.bg);

  std::vector<double> grad, hess;
  double f = prob.evaluate(p, &grad, &hess);
  double damping = 1e-3;
  bool converged = false;
  int iter = 0;
  std::string message;
  const int np = prob.n_params;
  for (; iter < spec.max_iterations && !converged; ++iter) {
    // damped normal equations in the packed (log) parameters
    std::vector<double> a = hess;
    for (int k = 0; k < np; ++k)
      a[k * np + k] += damping * std::max(hess[k * np + k], 1e-12) + 1e-12;
    std::vector<double> rhs(np), step;
    for (int k = 0; k < np; ++k) rhs[k] = -grad[k];
    if (!cholesky_solve(a, rhs, np, step)) {
      damping *= 10.0;
      if (damping > 1e14) {
        message = "normal equations singular";
        break;
      }
      continue;
    }
    double max_step = 0;
    for (auto& s : step) {
      s = std::clamp(s, -2.0, 2.0);
      max_step = std::max(max_step, std::abs(s));
    }
    std::vector<double> p_new(np);
    for (int k = 0; k < np; ++k) p_new[k] = p[k] + step[k];
    double f_new = prob.evaluate(p_new, nullptr, nullptr);
    if (std::isfinite(f_new) && f_new <= f) {
      p = p_new;
      f = f_new;
      prob.evaluate(p, &grad, &hess);
      damping = std::max(damping / 3.0, 1e-12);
      double gnorm = 0;
      for (double g : grad) gnorm = std::max(gnorm, std::abs(g));
      if (gnorm < 1e-8 * std::max(1.0, std::abs(f)) || max_step < 1e-10) {
        converged = true;
        message = "converged";
      }
    } else {
      damping *= 4.0;
      if (damping > 1e14) {
        // flat direction (e.g. vanishing intensity); accept if gradient is small
        double gnorm = 0;
        for (double g : grad) gnorm = std::max(gnorm, std::abs(g));
        converged = gnorm < 1e-4 * std::max(1.0, std::abs(f));
        message = converged ? "converged (flat direction)" : "stalled at high damping";
        break;
      }
    }
  }
  if (!converged && message.empty()) message = "max iterations reached";
  return finalize(prob, p, f, iter, converged, message);
}

FitResult grid_oracle_fit(const TimeSpectrum& data, const FitModelSpec& spec,
                          double* refined_log_cell) {
  Problem prob(data, spec);
  if (prob.ncomp != 1 || prob.n_params != 2)
    throw FitError("grid oracle requires one component with exactly two free parameters");
  InitResult init = auto_initialize(prob);
  std::vector<double> center = prob.pack(init.rates, init.amps, init.bg);

  double half = 1.5, step = 0.05;
  std::vector<double> best = center;
  double best_f = prob.evaluate(center, nullptr, nullptr);
  for (int pass = 0; pass < 3; ++pass) {
    int n = static_cast<int>(std::round(2.0 * half / step));
    std::vector<double> p(2);
    for (int i = 0; i <= n; ++i) {
      p[0] = center[0] - half + i * step;
      for (int j = 0; j <= n; ++j) {
        p[1] = center[1] - half + j * step;
        double f = prob.evaluate(p, nullptr, nullptr);
        if (f < best_f) {
          best_f = f;
          best = p;
        }
      }
    }
    center = best;
    half = 2.0 * step;
    step = half / 20.0;  // 41 points per axis on refinement passes
  }
  if (refined_log_cell) *refined_log_cell = step * 10.0;  // last evaluated step
  return finalize(prob, best, best_f, 3, true, "grid oracle");
}

AnomalyEstimate extract_anomaly(const FitResult& fit, const PhysicalConstants& c) {
  if (!fit.converged) throw FitError("anomaly extraction requires a converged fit");
  // o-Ps = longest-lived component, required to lie in [50, 500] ns
  const FitComponent* ops = nullptr;
  for (const auto& comp : fit.components) {
    double tau = 1.0 / comp.rate;
    if (tau >= 50.0 && tau <= 500.0 && (!ops || comp.rate < ops->rate)) ops = &comp;
  }
  if (!ops)
    throw FitError("no fitted component with lifetime in [50, 500] ns; refusing to "
                   "identify o-Ps");
  AnomalyEstimate a;
  double lambda_theor = c.lambda_T_per_ns();
  a.lambda_obs = ops->rate / kPerUsToPerNs;
  a.lambda_obs_err = ops->rate_err / kPerUsToPerNs;
  a.fraction = (ops->rate - lambda_theor) / lambda_theor;
  double sig_theor = c.lambda_T_theor_err * kPerUsToPerNs;
  a.sigma = std::sqrt(ops->rate_err * ops->rate_err + sig_theor * sig_theor) / lambda_theor;
  // compatible iff the 1-sigma interval overlaps the quoted band extended by
  // its quoted errors
  double lo = a.band_lo - a.band_err_lo;
  double hi = a.band_hi + a.band_err_hi;
  a.compatible = (a.fraction + a.sigma >= lo) && (a.fraction - a.sigma <= hi);
  return a;
}

LineSearchResult energy_line_search(const std::vector<std::int64_t>& energy_counts,
                                    double e_min, double e_max, double line_kev,
                                    double sigma_e_kev) {
  LineSearchResult r;
  r.window_lo = line_kev - 2.0 * sigma_e_kev;
  r.window_hi = line_kev + 2.0 * sigma_e_kev;
  double sb_lo = line_kev - 4.0 * sigma_e_kev;
  double sb_hi = line_kev + 4.0 * sigma_e_kev;
  int n = static_cast<int>(energy_counts.size());
  if (n == 0) throw FitError("energy histogram is empty");
  double width = (e_max - e_min) / n;
  long long n_line = 0, n_sb = 0;
  int bins_line = 0, bins_sb = 0;
  for (int i = 0; i < n; ++i) {
    double c = e_min + (i + 0.5) * width;
    if (c >= r.window_lo && c < r.window_hi) {
      n_line += energy_counts[i];
      ++bins_line;
    } else if (c >= sb_lo && c < sb_hi) {
      n_sb += energy_counts[i];
      ++bins_sb;
    }
  }
  if (bins_line == 0 || bins_sb == 0)
    throw FitError("line window outside the energy histogram range");
  double scale = static_cast<double>(bins_line) / bins_sb;
  r.line_counts = static_cast<double>(n_line);
  r.continuum_estimate = n_sb * scale;
  r.excess = r.line_counts - r.continuum_estimate;
  double var = r.continuum_estimate + n_sb * scale * scale;  // Poisson + sideband error
  r.significance = r.excess / std::sqrt(std::max(var, 1.0));
  return r;
}

LineSearchResult energy_line_search(const TimeEnergyHistogram& h, const DetectorSpec& det,
                                    double line_kev) {
  return energy_line_search(h.energy_late, h.e_min, h.e_max, line_kev,
                            det.energy_sigma(line_kev));
}

std::string fit_result_json(const FitResult& fit, const AnomalyEstimate* anomaly) {
  nlohmann::json j;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["chi2"] = fit.chi2;
  j["dof"] = fit.dof;
  j["message"] = fit.message;
  j["background_counts_per_bin"] = fit.background;
  j["background_err"] = fit.background_err;
  j["covariance_ok"] = fit.covariance_ok;
  j["components"] = nlohmann::json::array();
  for (const auto& c : fit.components) {
    nlohmann::json cj;
    cj["rate_per_ns"] = c.rate;
    cj["rate_err_per_ns"] = c.rate_err;
    cj["lifetime_ns"] = 1.0 / c.rate;
    cj["amplitude_counts"] = c.amplitude;
    cj["amplitude_err"] = c.amplitude_err;
    cj["intensity"] = c.intensity;
    j["components"].push_back(cj);
  }
  if (fit.covariance_ok) {
    j["param_names"] = fit.param_names;
    j["covariance"] = fit.covariance;
  }
  if (anomaly) {
    nlohmann::json aj;
    aj["fraction"] = anomaly->fraction;
    aj["sigma"] = anomaly->sigma;
    aj["lambda_obs_per_us"] = anomaly->lambda_obs;
    aj["lambda_obs_err_per_us"] = anomaly->lambda_obs_err;
    aj["band"] = {anomaly->band_lo, anomaly->band_hi};
    aj["band_errors"] = {anomaly->band_err_lo, anomaly->band_err_hi};
    aj["compatible"] = anomaly->compatible;
    j["anomaly"] = aj;
  }
  return j.dump(2);
}

}  // namespace analysis
}  // namespace pals
