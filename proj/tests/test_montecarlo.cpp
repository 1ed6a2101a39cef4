#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pals/montecarlo.hpp"

using namespace pals;
using namespace pals::montecarlo;

namespace {

// Two-sided Kolmogorov-Smirnov statistic against a continuous CDF.
double ks_statistic(std::vector<double> s, const std::function<double(double)>& cdf) {
  std::sort(s.begin(), s.end());
  double d = 0.0;
  double n = static_cast<double>(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    double f = cdf(s[i]);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return d;
}

// 1% critical value (asymptotic, Stephens' small-sample correction).
double ks_critical_1pct(std::size_t n) {
  double rn = std::sqrt(static_cast<double>(n));
  return 1.628 / (rn + 0.12 + 0.11 / rn);
}

Config ortho_only_config() {
  Config cfg;
  cfg.gas.mix.normalize();
  cfg.model.intensity_para = 0.0;
  cfg.model.intensity_ortho = 1.0;
  cfg.model.intensity_free = 0.0;
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("montecarlo");

TEST_CASE("shoulder rate ramp") {
  AnnihilationModel m;  // shoulder disabled by default
  CHECK(shoulder_rate(0.0, m) == m.rate_free);
  CHECK(shoulder_rate(100.0, m) == m.rate_free);
  m.shoulder_enabled = true;
  CHECK(shoulder_rate(0.0, m) == 0.0);
  CHECK(shoulder_rate(m.shoulder_rise_time, m) ==
        doctest::Approx(m.rate_free * (1.0 - std::exp(-1.0))).epsilon(1e-14));
  CHECK(shoulder_rate(200.0, m) == doctest::Approx(m.rate_free).epsilon(1e-12));
  CHECK_THROWS_AS(shoulder_rate(-1.0, m), ValidationError);
}

TEST_CASE("o-Ps sample mean reproduces the lifetime") {
  Config cfg = ortho_only_config();
  cfg.model.anomaly_branching = 0.0;
  EventSampler sampler(cfg.model, cfg.detector, cfg.source, /*apply_response=*/false);
  Rng rng(314159);
  const int n = 1000000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += sampler.sample(rng).true_time;
  // tau_T = 1/lambda_T = 142.078 ns; sigma of the mean is ~0.14 ns
  CHECK(sum / n == doctest::Approx(142.078).epsilon(0.5 / 142.078));
}

TEST_CASE("p-Ps sample mean reproduces 1/lambda_S = 0.125 ns") {
  Config cfg;
  cfg.gas.mix.normalize();
  cfg.model.intensity_para = 1.0;
  cfg.model.intensity_ortho = 0.0;
  cfg.model.intensity_free = 0.0;
  EventSampler sampler(cfg.model, cfg.detector, cfg.source, false);
  Rng rng(271828);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    auto ev = sampler.sample(rng);
    CHECK(ev.component == Component::para);
    sum += ev.true_time;
  }
  CHECK(sum / n == doctest::Approx(0.125).epsilon(0.01));
}

TEST_CASE("o-Ps delay distribution passes a 1% KS test") {
  Config cfg = ortho_only_config();
  EventSampler sampler(cfg.model, cfg.detector, cfg.source, false);
  double lam = sampler.lambda_observed();
  Rng rng(5);
  std::vector<double> s(100000);
  for (auto& v : s) v = sampler.sample(rng).true_time;
  double d = ks_statistic(std::move(s), [=](double t) { return 1.0 - std::exp(-lam * t); });
  CHECK(d < ks_critical_1pct(100000));
}

TEST_CASE("anomaly channel: branching bookkeeping and energy signature") {
  Config cfg = ortho_only_config();
  cfg.model.anomaly_branching = 0.05;
  EventSampler sampler(cfg.model, cfg.detector, cfg.source, false);
  // the competing channel speeds up the observed decay
  CHECK(sampler.lambda_observed() ==
        doctest::Approx(cfg.model.rate_ortho_per_ns() / 0.95).epsilon(1e-12));
  Rng rng(77);
  const int n = 200000;
  int n_1g = 0;
  for (int i = 0; i < n; ++i) {
    auto ev = sampler.sample(rng);
    if (ev.component == Component::ortho_1g) {
      ++n_1g;
      CHECK(ev.deposited_energy == 1022.0);  // responses off: the full-energy line
    } else {
      CHECK(ev.component == Component::ortho_3g);
      CHECK(ev.deposited_energy <= 511.0);
    }
  }
  // binomial 3-sigma window around n * f
  double mu = n * 0.05, sig = std::sqrt(n * 0.05 * 0.95);
  CHECK(std::abs(n_1g - mu) < 3.0 * sig);
}

TEST_CASE("anomaly branching 1 sends every o-Ps event to 1022 keV") {
  Config cfg = ortho_only_config();
  cfg.model.anomaly_branching = 1.0 - 1e-15;
  EventSampler sampler(cfg.model, cfg.detector, cfg.source, false);
  Rng rng(9);
  for (int i = 0; i < 5000; ++i) {
    auto ev = sampler.sample(rng);
    CHECK(ev.component == Component::ortho_1g);
    CHECK(ev.deposited_energy == 1022.0);
  }
}

TEST_CASE("shoulder: rise -> 0 recovers the plain exponential (KS)") {
  Config cfg;
  cfg.gas.mix.normalize();
  cfg.model.intensity_para = 0.0;
  cfg.model.intensity_ortho = 0.0;
  cfg.model.intensity_free = 1.0;
  cfg.model.shoulder_enabled = true;
  cfg.model.shoulder_rise_time = 1e-9;
  EventSampler sampler(cfg.model, cfg.detector, cfg.source, false);
  double lam = cfg.model.rate_free;
  Rng rng(13);
  std::vector<double> s(100000);
  for (auto& v : s) v = sampler.sample(rng).true_time;
  double d = ks_statistic(std::move(s), [=](double t) { return 1.0 - std::exp(-lam * t); });
  CHECK(d < ks_critical_1pct(100000));
}

TEST_CASE("shoulder suppresses the earliest free annihilations") {
  Config cfg;
  cfg.gas.mix.normalize();
  cfg.model.intensity_para = 0.0;
  cfg.model.intensity_ortho = 0.0;
  cfg.model.intensity_free = 1.0;
  cfg.model.shoulder_enabled = true;  // rise = 5 ns
  EventSampler sampler(cfg.model, cfg.detector, cfg.source, false);
  Rng rng(17);
  const int n = 200000;
  int early = 0;
  for (int i = 0; i < n; ++i)
    if (sampler.sample(rng).true_time < 0.5) ++early;
  // plain exponential would put 1 - exp(-0.25/2) ~ 11.75% below 0.5 ns; the
  // ramp multiplies the early rate by ~t/(2*rise) ~ 5%
  double plain = n * (1.0 - std::exp(-cfg.model.rate_free * 0.5));
  CHECK(early < 0.25 * plain);
}

TEST_CASE("simulated spectra are deterministic in the seed") {
  Config cfg;
  cfg.gas.mix.normalize();
  cfg.simulation.n_events = 50000;
  cfg.simulation.seed = 42;
  auto a = simulate_spectrum(cfg);
  auto b = simulate_spectrum(cfg);
  CHECK(a.time_counts == b.time_counts);
  CHECK(a.energy_all == b.energy_all);
  CHECK(a.energy_prompt == b.energy_prompt);
  CHECK(a.energy_late == b.energy_late);
  cfg.simulation.seed = 43;
  auto c = simulate_spectrum(cfg);
  CHECK(a.time_counts != c.time_counts);
}

TEST_CASE("worker count does not change the result") {
  Config cfg;
  cfg.gas.mix.normalize();
  cfg.simulation.n_events = 300000;
  cfg.simulation.seed = 7;
  cfg.simulation.workers = 1;
  auto serial = simulate_spectrum(cfg);
  cfg.simulation.workers = 4;
  auto parallel = simulate_spectrum(cfg);
  CHECK(serial.time_counts == parallel.time_counts);
  CHECK(serial.energy_all == parallel.energy_all);
  CHECK(serial.energy_prompt == parallel.energy_prompt);
  CHECK(serial.energy_late == parallel.energy_late);
}

TEST_CASE("count conservation and the random-event budget") {
  Config cfg;
  cfg.gas.mix.normalize();
  cfg.simulation.n_events = 123457;
  auto h = simulate_spectrum(cfg);
  CHECK(h.meta.n_true == 123457);
  CHECK(h.meta.n_random == std::llround(2.5e-3 * 123457));
  CHECK(h.total_time_counts() == h.meta.n_true + h.meta.n_random);
  std::int64_t e_all = 0, e_split = 0;
  for (int i = 0; i < h.e_bins; ++i) {
    e_all += h.energy_all[i];
    e_split += h.energy_prompt[i] + h.energy_late[i];
  }
  CHECK(e_all == h.meta.n_true + h.meta.n_random);
  CHECK(e_split == e_all);
  CHECK(h.meta.rng_algorithm == kRngAlgorithm);
  CHECK(h.meta.config_hash == cfg.digest());

  cfg.simulation.include_random_background = false;
  auto h2 = simulate_spectrum(cfg);
  CHECK(h2.meta.n_random == 0);
  CHECK(h2.total_time_counts() == h2.meta.n_true);
}

TEST_CASE("late tail log-slope matches the injected observed rate") {
  Config cfg = ortho_only_config();
  cfg.simulation.n_events = 2000000;
  cfg.simulation.seed = 99;
  cfg.simulation.include_random_background = false;
  cfg.simulation.workers = 4;
  auto h = simulate_spectrum(cfg);
  // count-weighted least squares of log(counts) on bin centers in [250, 750];
  // bins below 20 counts are dropped to keep the log-count bias negligible
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < h.t_bins; ++i) {
    double t = h.t_center(i);
    if (t < 250.0 || t > 750.0 || h.time_counts[i] < 20) continue;
    double w = static_cast<double>(h.time_counts[i]);  // var(log n) ~ 1/n
    double y = std::log(w);
    sw += w;
    sx += w * t;
    sy += w * y;
    sxx += w * t * t;
    sxy += w * t * y;
  }
  double det = sw * sxx - sx * sx;
  double slope = (sw * sxy - sx * sy) / det;
  double slope_err = std::sqrt(sw / det);
  double lam_true = cfg.model.rate_ortho_observed_per_ns();
  CHECK(std::abs(-slope - lam_true) < 3.0 * slope_err);
}

TEST_CASE("short windows produce a truncation warning") {
  Config cfg;
  cfg.gas.mix.normalize();
  cfg.simulation.n_events = 1000;
  cfg.simulation.window_min = -0.1;
  cfg.simulation.window_max = 0.5;  // < 5/lambda_S = 0.625 ns
  cfg.simulation.late_window_start = 0.4;
  auto h = simulate_spectrum(cfg);
  CHECK(!h.meta.warning.empty());
  Config ok;
  ok.gas.mix.normalize();
  ok.simulation.n_events = 1000;
  CHECK(simulate_spectrum(ok).meta.warning.empty());
}

TEST_SUITE_END();
