#include "pals/montecarlo.hpp"

#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

#include "pals/detection.hpp"

namespace pals {
namespace montecarlo {

namespace {

// Three-photon single-quantum energy spectrum, x = E/511 in (0, 1).
double ore_powell_density(double x) {
  double om = 1.0 - x;
  double tm = 2.0 - x;
  return x * om / (tm * tm) - 2.0 * om * om / (tm * tm * tm) * std::log(om) +
         tm / x + 2.0 * om / (x * x) * std::log(om);
}

}  // namespace

double shoulder_rate(double t_ns, const AnnihilationModel& model) {
  if (t_ns < 0) throw ValidationError("shoulder_rate: t must be >= 0");
  if (!model.shoulder_enabled) return model.rate_free;
  return model.rate_free * (1.0 - std::exp(-t_ns / model.shoulder_rise_time));
}

EventSampler::EventSampler(const AnnihilationModel& model, const DetectorSpec& det,
                           const SourceSpec& source, bool apply_response)
    : model_(model),
      det_(det),
      apply_response_(apply_response),
      cum_para_(model.intensity_para),
      cum_ortho_(model.intensity_para + model.intensity_ortho),
      lambda_obs_(model.rate_ortho_observed_per_ns()),
      tau_star_ns_(source.nuclear_lifetime * 1e-3),
      sigma_t_(det.timing_sigma()) {
  double ratio = detection::bracket_ratio_term(det);
  p_random_nuclear_ = ratio / (2.0 + ratio);
  // envelope for rejection sampling; the density is maximal at x -> 1
  ore_powell_max_ = 0.0;
  for (int i = 1; i < 512; ++i) {
    double x = i / 512.0;
    ore_powell_max_ = std::max(ore_powell_max_, ore_powell_density(x));
  }
  ore_powell_max_ *= 1.05;
}

double EventSampler::sample_three_gamma_energy(Rng& rng) const {
  if (model_.three_gamma_spectrum == ThreeGammaSpectrum::uniform)
    return rng.uniform(0.0, 511.0);
  for (;;) {
    double x = rng.uniform();
    if (x <= 0.0 || x >= 1.0) continue;
    if (rng.uniform() * ore_powell_max_ <= ore_powell_density(x)) return 511.0 * x;
  }
}

AnnihilationEvent EventSampler::sample(Rng& rng) const {
  AnnihilationEvent ev;
  double u = rng.uniform();
  double energy;
  if (u < cum_para_) {
    ev.component = Component::para;
    ev.true_time = rng.exponential(model_.rate_para);
    energy = 511.0;
  } else if (u < cum_ortho_) {
    ev.true_time = rng.exponential(lambda_obs_);
    if (rng.uniform() < model_.anomaly_branching) {
      ev.component = Component::ortho_1g;
      energy = 1022.0;
    } else {
      ev.component = Component::ortho_3g;
      energy = sample_three_gamma_energy(rng);
    }
  } else {
    ev.component = Component::free_positron;
    // first arrival of the thinned inhomogeneous process, bounded by rate_free
    double t = 0.0;
    for (;;) {
      t += rng.exponential(model_.rate_free);
      if (rng.uniform() * model_.rate_free <= shoulder_rate(t, model_)) break;
    }
    ev.true_time = t;
    energy = 511.0;
  }
  if (apply_response_) {
    // the start reference is the nuclear quantum, emitted tau* after positron birth
    double start_delay = rng.exponential(1.0 / tau_star_ns_);
    ev.observed_time = ev.true_time - start_delay + sigma_t_ * rng.gaussian();
    ev.deposited_energy = std::max(0.0, energy + det_.energy_sigma(energy) * rng.gaussian());
  } else {
    ev.observed_time = ev.true_time;
    ev.deposited_energy = energy;
  }
  return ev;
}

AnnihilationEvent EventSampler::sample_random(Rng& rng, double t_min, double t_max) const {
  AnnihilationEvent ev;
  ev.component = Component::random;
  ev.true_time = rng.uniform(t_min, t_max);
  ev.observed_time = ev.true_time;
  double energy = rng.uniform() < p_random_nuclear_ ? 1270.0 : 511.0;
  if (apply_response_)
    energy = std::max(0.0, energy + det_.energy_sigma(energy) * rng.gaussian());
  ev.deposited_energy = energy;
  return ev;
}

TimeEnergyHistogram simulate_spectrum(const Config& cfg) {
  const SimulationConfig& sim = cfg.simulation;
  sim.validate();
  EventSampler sampler(cfg.model, cfg.detector, cfg.source, sim.apply_response);

  TimeEnergyHistogram hist = TimeEnergyHistogram::make(sim);
  double rc = sim.include_random_background
                  ? detection::random_to_true_ratio(cfg.source, cfg.detector)
                  : 0.0;
  const std::int64_t n_true = sim.n_events;
  const std::int64_t n_random = std::llround(rc * static_cast<double>(n_true));

  // fixed chunk plan: true-event chunks first, then random-event chunks;
  // stream ids depend only on the plan, never on the worker count
  struct Chunk {
    std::int64_t count;
    std::uint64_t stream;
    bool random;
  };
  std::vector<Chunk> chunks;
  std::uint64_t stream = 0;
  for (std::int64_t done = 0; done < n_true; done += sim.chunk_events)
    chunks.push_back({std::min<std::int64_t>(sim.chunk_events, n_true - done), stream++, false});
  for (std::int64_t done = 0; done < n_random; done += sim.chunk_events)
    chunks.push_back({std::min<std::int64_t>(sim.chunk_events, n_random - done), stream++, true});

  std::vector<TimeEnergyHistogram> parts(chunks.size());
  auto run_chunk = [&](std::size_t ci) {
    TimeEnergyHistogram local = TimeEnergyHistogram::make(sim);
    Rng rng = Rng::derive(sim.seed, chunks[ci].stream);
    for (std::int64_t k = 0; k < chunks[ci].count; ++k) {
      AnnihilationEvent ev = chunks[ci].random
                                 ? sampler.sample_random(rng, sim.window_min, sim.window_max)
                                 : sampler.sample(rng);
      local.fill(ev.observed_time, ev.deposited_energy);
    }
    parts[ci] = std::move(local);
  };

  int workers = std::max(1, sim.workers);
  if (workers == 1) {
    for (std::size_t ci = 0; ci < chunks.size(); ++ci) run_chunk(ci);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (;;) {
          std::size_t ci = next.fetch_add(1);
          if (ci >= chunks.size()) return;
          run_chunk(ci);
        }
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& part : parts) hist.merge(part);

  hist.meta.seed = sim.seed;
  hist.meta.n_true = n_true;
  hist.meta.n_random = n_random;
  hist.meta.random_to_true = rc;
  hist.meta.rng_algorithm = kRngAlgorithm;
  hist.meta.config_hash = cfg.digest();
  hist.meta.config_text = cfg.to_text();
  // a window shorter than 5/lambda_S truncates the para component visibly
  if (sim.window_max < 5.0 / cfg.model.rate_para)
    hist.meta.warning = "window shorter than 5/lambda_S; para component truncated";
  return hist;
}

}  // namespace montecarlo
}  // namespace pals
