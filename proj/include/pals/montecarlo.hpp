#pragma once

// Synthetic delayed-coincidence spectrum generation: annihilation events
// drawn from the component model (p-Ps, o-Ps with the optional single-quantum
// channel, free positrons with a phenomenological shoulder), detector
// response, and a flat random-coincidence background.

#include <cstdint>

#include "pals/config.hpp"
#include "pals/histogram.hpp"
#include "pals/rng.hpp"

namespace pals {
namespace montecarlo {

enum class Component { para, ortho_3g, ortho_1g, free_positron, random };

struct AnnihilationEvent {
  double true_time = 0;      // ns, decay delay after positron birth
  double observed_time = 0;  // ns, after start-reference shift and timing response
  Component component = Component::para;
  double deposited_energy = 0;  // keV, stop-detector deposit
};

// Instantaneous free-annihilation rate, ns^-1. With the shoulder enabled the
// rate ramps as lambda_f * (1 - exp(-t/rise)); otherwise it is constant.
double shoulder_rate(double t_ns, const AnnihilationModel& model);

class EventSampler {
 public:
  EventSampler(const AnnihilationModel& model, const DetectorSpec& det,
               const SourceSpec& source, bool apply_response);

  AnnihilationEvent sample(Rng& rng) const;
  // A random (accidental) coincidence on the delay window.
  AnnihilationEvent sample_random(Rng& rng, double t_min, double t_max) const;

  double lambda_observed() const { return lambda_obs_; }

 private:
  double sample_three_gamma_energy(Rng& rng) const;

  AnnihilationModel model_;
  DetectorSpec det_;
  bool apply_response_;
  double cum_para_, cum_ortho_;   // cumulative component intensities
  double lambda_obs_;             // ns^-1, o-Ps rate incl. anomaly channel
  double tau_star_ns_;
  double sigma_t_;
  double p_random_nuclear_;       // share of randoms that are the 1.27 MeV quantum
  double ore_powell_max_;
};

// Deterministic for fixed (config, seed) independent of worker count.
TimeEnergyHistogram simulate_spectrum(const Config& cfg);

}  // namespace montecarlo
}  // namespace pals
