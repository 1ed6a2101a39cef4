#pragma once

// Validated configuration for the whole pipeline. The on-disk format is a
// plain sectioned key-value text file:
//
//   [gas]
//   pressure_atm = 50
//   fraction.Ne-20 = 0.91
//
// Sections: gas, source, detector, model, simulation, fit. Unknown keys are
// rejected with the offending line. All numeric keys carry their unit in the
// key name.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pals/constants.hpp"

namespace pals {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Number fractions per isotope label; must sum to 1.
struct IsotopeMix {
  std::map<std::string, double> fractions;

  double fraction_of(const std::string& label) const {
    auto it = fractions.find(label);
    return it == fractions.end() ? 0.0 : it->second;
  }
  // Renormalizes if the sum is within `tol` of 1, otherwise throws.
  void normalize(double tol = 1e-6);
  void validate() const;

  static IsotopeMix natural_neon() {
    return IsotopeMix{{{"Ne-20", 0.91}, {"Ne-22", 0.09}}};
  }
};

struct GasState {
  double pressure_atm = 50.0;
  double chamber_radius_cm = 2.0;   // R_g
  IsotopeMix mix = IsotopeMix::natural_neon();

  void validate() const;
};

struct SourceSpec {
  double activity = 1e6;            // s^-1, positron source power Q
  double nuclear_gamma_energy = 1.27;  // MeV
  double nuclear_lifetime = 5.24;   // ps, tau*
  std::string label = "Na-22";

  void validate() const;
};

struct DetectorSpec {
  double eff_low = 0.40;               // epsilon for <= 0.5 MeV quanta
  double eff_high = 0.15;              // epsilon at 1.27 MeV
  double solid_angle_high = 0.20;      // Omega_2(1.27), fraction of 4pi
  double solid_angle_low_mean = 0.15;  // mean Omega_2(<=0.5), "bad" geometry
  double resolving_time = 1.0;         // ns, coincidence window (full width)
  double timing_fwhm = 0.3;            // ns, Gaussian instrument response
  double energy_fwhm_511 = 0.10;       // relative FWHM at 511 keV

  // Energy classification windows, keV
  double window_low_lo = 400.0, window_low_hi = 600.0;
  double window_full_lo = 900.0, window_full_hi = 1150.0;
  double window_nuclear_lo = 1150.0, window_nuclear_hi = 1400.0;

  double timing_sigma() const { return timing_fwhm / 2.3548200450309493; }
  // Gaussian sigma at energy E (keV); FWHM scales as sqrt(E) from 511 keV.
  double energy_sigma(double e_kev) const {
    return energy_fwhm_511 * std::sqrt(511.0 * std::max(e_kev, 0.0)) / 2.3548200450309493;
  }

  void validate() const;
};

enum class ThreeGammaSpectrum { uniform, ore_powell };

struct AnnihilationModel {
  double intensity_para = 0.2;      // I_S
  double intensity_ortho = 0.7;     // I_T
  double intensity_free = 0.1;      // I_f
  double rate_para = 8.0;           // ns^-1 (1/tau_S)
  double rate_ortho_3gamma = 7.03830;  // us^-1, lambda_T
  double anomaly_branching = 1.8473e-3;   // f_1g, o-Ps single-quantum share
  double rate_free = 0.25;          // ns^-1
  bool shoulder_enabled = false;
  double shoulder_rise_time = 5.0;  // ns
  ThreeGammaSpectrum three_gamma_spectrum = ThreeGammaSpectrum::uniform;

  // MCNRS inputs
  double n_bar = 5.2780e4;          // collective unit count
  double msd = 2.5e-13 * 2.5e-13;   // cm^2, mean-square nuclear displacement
  double spin_ground = 0.0;         // I0 of 22Ne
  double spin_excited = 2.0;        // I1 of 22Ne*

  double rate_ortho_per_ns() const { return rate_ortho_3gamma * kPerUsToPerNs; }
  // Effective o-Ps decay rate with the competing single-quantum channel.
  double rate_ortho_observed_per_ns() const {
    return rate_ortho_per_ns() / (1.0 - anomaly_branching);
  }

  void validate() const;
};

struct SimulationConfig {
  long long n_events = 1000000;
  double window_min = -20.0;        // ns
  double window_max = 1000.0;       // ns
  int time_bins = 1200;
  int energy_bins = 300;
  double energy_max = 1500.0;       // keV
  unsigned long long seed = 1;
  double late_window_start = 50.0;  // ns, delay cut for the late energy window
  bool include_random_background = true;
  bool apply_response = true;
  int workers = 1;
  long long chunk_events = 65536;

  void validate() const;
};

struct FitConfig {
  int n_components = 1;
  std::vector<double> fixed_rates;     // ns^-1; empty = all free
  std::vector<double> initial_rates;   // ns^-1; empty = auto-init
  bool background_free = true;
  double background_value = 0.0;       // counts/bin when fixed
  double response_fwhm = -1.0;         // ns; <0 means take detector.timing_fwhm
  double window_min = -10.0;           // ns
  double window_max = 990.0;           // ns
  std::string variance_model = "poisson";  // poisson | gaussian-approx
  int max_iterations = 200;

  void validate() const;
};

struct Config {
  GasState gas;
  SourceSpec source;
  DetectorSpec detector;
  AnnihilationModel model;
  SimulationConfig simulation;
  FitConfig fit;

  void validate() const;

  // Canonical text form (the "effective config" echo). Loading the result
  // reproduces an identical Config.
  std::string to_text() const;
  // FNV-1a 64 digest of the canonical text, hex.
  std::string digest() const;
};

// Parses config text; starts from defaults, applies file values, validates.
Config parse_config(const std::string& text, const std::string& origin = "<string>");
Config load_config(const std::string& path);
// Applies "section.key=value" overrides in order, then revalidates.
void apply_overrides(Config& cfg, const std::vector<std::string>& sets);

std::string fnv1a_hex(const std::string& data);

}  // namespace pals
