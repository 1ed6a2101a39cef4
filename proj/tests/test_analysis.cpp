#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "pals/analysis.hpp"
#include "pals/montecarlo.hpp"

using namespace pals;
using namespace pals::analysis;

namespace {

Config ortho_only_config(long long n_events, unsigned long long seed) {
  Config cfg;
  cfg.gas.mix.normalize();
  cfg.model.intensity_para = 0.0;
  cfg.model.intensity_ortho = 1.0;
  cfg.model.intensity_free = 0.0;
  cfg.simulation.n_events = n_events;
  cfg.simulation.seed = seed;
  cfg.simulation.workers = 4;
  return cfg;
}

FitModelSpec default_spec(const Config& cfg) {
  return FitModelSpec::from_config(cfg.fit, cfg.detector);
}

}  // namespace

TEST_SUITE_BEGIN("analysis");

TEST_CASE("EMG CDF: limits, monotonicity, and the sharp-response limit") {
  const double rate = 7.03830e-3, sigma = 0.127;
  CHECK(emg_cdf(-50.0, rate, sigma) == doctest::Approx(0.0).scale(1).epsilon(1e-12));
  CHECK(emg_cdf(5000.0, rate, sigma) == doctest::Approx(1.0).epsilon(1e-9));
  double prev = -1.0;
  for (double t = -5.0; t <= 900.0; t += 2.5) {
    double f = emg_cdf(t, rate, sigma);
    CHECK(f >= prev);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    prev = f;
  }
  // with a very narrow response the CDF reduces to the plain exponential
  for (double t : {1.0, 10.0, 100.0, 400.0}) {
    CHECK(emg_cdf(t, rate, 1e-6) ==
          doctest::Approx(1.0 - std::exp(-rate * t)).epsilon(1e-7));
  }
}

TEST_CASE("EMG CDF rate derivative matches finite differences") {
  const double sigma = 0.127;
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> ut(-2.0, 600.0), ur(-6.5, -2.0);
  for (int i = 0; i < 200; ++i) {
    double t = ut(gen), rate = std::exp(ur(gen));
    // step large enough that the difference is not lost to cancellation in
    // the CDF tails, small enough to keep truncation ~1e-5 relative
    double h = 1e-3 * rate;
    double fd = (emg_cdf(t, rate + h, sigma) - emg_cdf(t, rate - h, sigma)) / (2.0 * h);
    double an = emg_cdf_drate(t, rate, sigma);
    CHECK(an == doctest::Approx(fd).epsilon(1e-4).scale(1e-4));
  }
}

TEST_CASE("single-component self-closure on a simulated o-Ps spectrum") {
  Config cfg = ortho_only_config(1000000, 101);
  auto h = montecarlo::simulate_spectrum(cfg);
  auto fit = fit_lifetime(TimeSpectrum::from_histogram(h), default_spec(cfg));
  REQUIRE(fit.converged);
  REQUIRE(fit.covariance_ok);
  double lam_true = cfg.model.rate_ortho_observed_per_ns();
  const auto& comp = fit.components.at(0);
  CHECK(std::abs(comp.rate - lam_true) < 3.0 * comp.rate_err);
  CHECK(comp.rate_err / comp.rate < 2e-3);
  // flat background truth: n_random spread over the full window
  double bg_true = static_cast<double>(h.meta.n_random) / h.t_bins;
  CHECK(std::abs(fit.background - bg_true) < 4.0 * fit.background_err);
  // the objective at the optimum is a plausible chi2
  CHECK(fit.chi2 / fit.dof == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("two-component recovery with finer binning") {
  Config cfg;
  cfg.gas.mix.normalize();
  cfg.model.intensity_para = 0.25;
  cfg.model.intensity_ortho = 0.75;
  cfg.model.intensity_free = 0.0;
  cfg.model.anomaly_branching = 0.0;
  // the fit model is exponential x Gaussian only; suppress the 5.24 ps
  // start-reference shift, which would bias the 125 ps p-Ps rate by ~4%
  cfg.source.nuclear_lifetime = 1e-6;
  cfg.simulation.n_events = 2000000;
  cfg.simulation.seed = 103;
  cfg.simulation.time_bins = 20000;
  cfg.simulation.include_random_background = false;
  cfg.simulation.workers = 4;
  cfg.fit.n_components = 2;
  cfg.fit.initial_rates = {8.0, 7e-3};
  auto h = montecarlo::simulate_spectrum(cfg);
  auto fit = fit_lifetime(TimeSpectrum::from_histogram(h), default_spec(cfg));
  REQUIRE(fit.converged);
  REQUIRE(fit.components.size() == 2);
  // components come sorted by descending lifetime: o-Ps first, p-Ps second
  const auto& ops = fit.components[0];
  const auto& pps = fit.components[1];
  CHECK(std::abs(ops.rate - cfg.model.rate_ortho_per_ns()) < 4.0 * ops.rate_err);
  CHECK(std::abs(pps.rate - cfg.model.rate_para) < 4.0 * pps.rate_err);
  CHECK(ops.intensity == doctest::Approx(0.75).epsilon(0.02));
  CHECK(pps.intensity == doctest::Approx(0.25).epsilon(0.06));
}

TEST_CASE("pure flat background does not break the fitter") {
  TimeSpectrum s;
  s.t_min = -20.0;
  s.t_max = 1000.0;
  s.counts.resize(1200);
  Rng rng(41);
  for (auto& c : s.counts) {  // Poisson(5) via inversion
    double L = std::exp(-5.0), p = 1.0;
    int k = -1;
    do {
      ++k;
      p *= rng.uniform();
    } while (p > L);
    c = k;
  }
  FitModelSpec spec;
  // fix the rate: a free rate drifting to 0 would degenerate into a second
  // flat level and make the amplitude meaningless
  spec.fixed_rates = {7e-3};
  auto fit = fit_lifetime(s, spec);
  CHECK(fit.converged);
  CHECK(fit.background == doctest::Approx(5.0).epsilon(0.05));
  // whatever survives of the component must be statistically irrelevant
  CHECK(fit.components.at(0).amplitude < 0.05 * 5.0 * 1200);
}

TEST_CASE("LM fit agrees with the exhaustive grid oracle") {
  for (int k = 0; k < 6; ++k) {
    Config cfg;
    cfg.gas.mix.normalize();
    cfg.model.intensity_para = 0.0;
    cfg.model.intensity_ortho = 0.0;
    cfg.model.intensity_free = 1.0;
    cfg.model.rate_free = 0.02 * std::pow(2.0, k);  // 0.02 .. 0.64 ns^-1
    cfg.simulation.n_events = 200000;
    cfg.simulation.seed = 200 + k;
    cfg.simulation.include_random_background = false;
    auto h = montecarlo::simulate_spectrum(cfg);
    FitModelSpec spec;
    spec.background_free = false;
    spec.background_value = 0.0;
    spec.window_min = -10.0;
    spec.window_max = 400.0;
    // start both searches from a jittered guess so the oracle's first grid
    // pass (half-width 1.5 in log rate) brackets the optimum for every k
    spec.initial_rates = {cfg.model.rate_free * std::exp(0.2 * (k % 3 - 1))};
    auto lm = fit_lifetime(TimeSpectrum::from_histogram(h), spec);
    REQUIRE(lm.converged);
    double cell = 0.0;
    auto grid = grid_oracle_fit(TimeSpectrum::from_histogram(h), spec, &cell);
    CHECK(cell == doctest::Approx(5e-4));
    CHECK(std::abs(std::log(lm.components[0].rate / grid.components[0].rate)) <= cell);
    CHECK(lm.chi2 <= grid.chi2 + 1e-6 * std::abs(grid.chi2));
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  Config cfg = ortho_only_config(200000, 105);
  auto h = montecarlo::simulate_spectrum(cfg);
  TimeSpectrum data = TimeSpectrum::from_histogram(h);
  FitModelSpec spec;  // one free component + free background
  std::mt19937_64 gen(51);
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  for (int trial = 0; trial < 30; ++trial) {
    double rate = cfg.model.rate_ortho_observed_per_ns() * std::exp(jitter(gen));
    double amp = 2e5 * std::exp(jitter(gen));
    double bg = 2.0 * std::exp(jitter(gen));
    auto packed = pack_parameters(spec, {rate}, {amp}, bg);
    double value = 0.0;
    std::vector<double> grad;
    objective_with_gradient(data, spec, packed, &value, &grad);
    REQUIRE(grad.size() == packed.size());
    for (std::size_t p = 0; p < packed.size(); ++p) {
      auto lo = packed, hi = packed;
      double step = 1e-6 * std::max(1.0, std::abs(packed[p]));
      lo[p] -= step;
      hi[p] += step;
      double vlo, vhi;
      objective_with_gradient(data, spec, lo, &vlo, nullptr);
      objective_with_gradient(data, spec, hi, &vhi, nullptr);
      double fd = (vhi - vlo) / (2.0 * step);
      CHECK(grad[p] == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
    }
  }
}

TEST_CASE("gaussian-approx argmin is invariant under count scaling") {
  Config cfg = ortho_only_config(500000, 107);
  cfg.simulation.include_random_background = false;
  auto h = montecarlo::simulate_spectrum(cfg);
  TimeSpectrum s1 = TimeSpectrum::from_histogram(h);
  TimeSpectrum s4 = s1;
  for (auto& c : s4.counts) c *= 4.0;
  FitModelSpec spec;
  spec.variance_model = VarianceModel::gaussian_approx;
  spec.background_free = false;
  spec.background_value = 0.0;
  auto f1 = fit_lifetime(s1, spec);
  auto f4 = fit_lifetime(s4, spec);
  REQUIRE(f1.converged);
  REQUIRE(f4.converged);
  CHECK(f4.components[0].rate == doctest::Approx(f1.components[0].rate).epsilon(1e-4));
  CHECK(f4.components[0].amplitude ==
        doctest::Approx(4.0 * f1.components[0].amplitude).epsilon(1e-3));
}

TEST_CASE("fit precision tightens as 1/sqrt(N)") {
  double err[3];
  long long n[3] = {100000, 1000000, 10000000};
  for (int i = 0; i < 3; ++i) {
    Config cfg = ortho_only_config(n[i], 500 + i);
    auto h = montecarlo::simulate_spectrum(cfg);
    auto fit = fit_lifetime(TimeSpectrum::from_histogram(h), default_spec(cfg));
    REQUIRE(fit.converged);
    err[i] = fit.components[0].rate_err;
  }
  CHECK(err[0] / err[1] == doctest::Approx(std::sqrt(10.0)).epsilon(0.2));
  CHECK(err[1] / err[2] == doctest::Approx(std::sqrt(10.0)).epsilon(0.2));
}

TEST_CASE("anomaly extraction arithmetic and the published band") {
  auto c = PhysicalConstants::paper();
  FitResult fit;
  fit.converged = true;
  FitComponent comp;
  comp.rate = 7.05132e-3;  // the example observed rate, ns^-1
  comp.rate_err = 4e-6;
  fit.components = {comp};

  auto a = extract_anomaly(fit, c);
  CHECK(a.fraction == doctest::Approx(1.85e-3).epsilon(2e-3));
  CHECK(a.lambda_obs == doctest::Approx(7.05132).epsilon(1e-12));
  CHECK(a.band_lo == 0.0014);
  CHECK(a.band_hi == 0.0019);
  CHECK(a.band_err_lo == 0.00023);
  CHECK(a.band_err_hi == 0.0002);
  CHECK(a.compatible);
  // sigma combines the fit error and the QED rate uncertainty in quadrature
  double expect_sigma = std::sqrt(4e-6 * 4e-6 + 5e-8 * 5e-8) / c.lambda_T_per_ns();
  CHECK(a.sigma == doctest::Approx(expect_sigma).epsilon(1e-12));

  // lambda_obs = lambda_theor gives fraction 0, outside the band
  fit.components[0].rate = c.lambda_T_per_ns();
  auto null = extract_anomaly(fit, c);
  CHECK(null.fraction == doctest::Approx(0.0).scale(1).epsilon(1e-15));
  CHECK_FALSE(null.compatible);

  // refuse to identify o-Ps when no lifetime is in [50, 500] ns
  fit.components[0].rate = 8.0;
  CHECK_THROWS_AS(extract_anomaly(fit, c), FitError);
  fit.converged = false;
  CHECK_THROWS_AS(extract_anomaly(fit, c), FitError);
}

TEST_CASE("energy line search on a constructed histogram") {
  // 300 bins on [0, 1500): flat continuum of 100 counts/bin
  std::vector<std::int64_t> e(300, 100);
  double sigma_e = 30.0;
  auto flat = energy_line_search(e, 0.0, 1500.0, 1022.0, sigma_e);
  CHECK(flat.window_lo == doctest::Approx(1022.0 - 60.0));
  CHECK(flat.window_hi == doctest::Approx(1022.0 + 60.0));
  CHECK(flat.excess == doctest::Approx(0.0).scale(1).epsilon(1e-9));
  CHECK(std::abs(flat.significance) < 1e-9);

  // add a 1000-count line spread across the +-2 sigma window
  for (int i = 0; i < 300; ++i) {
    double c = (i + 0.5) * 5.0;
    if (c >= flat.window_lo && c < flat.window_hi) e[i] += 1000 / 24;
  }
  auto line = energy_line_search(e, 0.0, 1500.0, 1022.0, sigma_e);
  CHECK(line.excess == doctest::Approx(24 * (1000 / 24)).epsilon(1e-9));
  CHECK(line.significance > 5.0);

  // a window outside the histogram range is refused
  CHECK_THROWS_AS(energy_line_search(e, 0.0, 1500.0, 5000.0, sigma_e), FitError);
}

TEST_CASE("fit result JSON carries the anomaly block") {
  Config cfg = ortho_only_config(200000, 109);
  auto h = montecarlo::simulate_spectrum(cfg);
  auto fit = fit_lifetime(TimeSpectrum::from_histogram(h), default_spec(cfg));
  REQUIRE(fit.converged);
  auto anomaly = extract_anomaly(fit, PhysicalConstants::paper());
  auto j = nlohmann::json::parse(fit_result_json(fit, &anomaly));
  CHECK(j["converged"] == true);
  CHECK(j["components"].size() == 1);
  CHECK(j["components"][0]["rate_per_ns"].get<double>() ==
        doctest::Approx(fit.components[0].rate));
  CHECK(j["anomaly"]["fraction"].get<double>() == doctest::Approx(anomaly.fraction));
  CHECK(j["anomaly"]["band"][0].get<double>() == 0.0014);
}

TEST_SUITE_END();
