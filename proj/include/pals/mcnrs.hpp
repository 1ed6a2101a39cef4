#pragma once

// Closed-form estimates for the macroscopic collective nuclear resonance
// state picture: collective size, lattice constants, MCNS radius, resonant
// cross section, mean free path and the amplified single-quantum branching.

#include <stdexcept>
#include <string>

#include "pals/config.hpp"
#include "pals/constants.hpp"

namespace pals {
namespace mcnrs {

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct CollectiveState {
  double n_bar;   // total MCNS unit count
  double eta;     // Ne-22 number fraction
  double n;       // n_bar * eta

  static CollectiveState make(double n_bar, double eta);
};

struct ResonanceParameters {
  double gamma_energy;       // MeV
  double wavelength;         // cm, 2*pi*hbar*c/E
  double spin_ground;        // I0
  double spin_excited;       // I1
  double mean_square_displacement;  // cm^2
  double mossbauer;          // f_M

  static ResonanceParameters make(double gamma_energy_mev, double msd_cm2,
                                  double spin_ground, double spin_excited,
                                  const PhysicalConstants& c);
};

// Both algebraic forms of the virtual fundamental length.
struct LatticeConstantTheory {
  double from_hyperfine;   // cm, hbar*c / ((3/7) dW)
  double from_alpha;       // cm, (4/alpha^4) * hbar/(m_e c)  -- primary value
  double relative_difference;
  double value() const { return from_alpha; }
};

struct PackingComparison {
  double packing;    // 1/12
  double two_delta;  // cm
  double ratio;      // l_gamma_n / (2*Delta)
};

// Aggregate report over Eqs. (1)-(7) plus the consistency checks around them.
struct McnrsReport {
  double n_bar;
  double eta;
  double n;
  double gas_volume;          // cm^3
  double delta_exp;           // cm
  double delta_theory;        // cm (primary closed form)
  double delta_theory_alt;    // cm (hyperfine form)
  double delta_form_rel_diff;
  double virtual_photon_time; // ps
  double r_c;                 // cm
  double wavelength;          // cm
  double mossbauer_factor;
  double sigma_r;             // cm^2
  double sigma_macroscopic;   // cm^2, n * sigma_r
  double mean_free_path;      // cm
  double branching_unit;      // B, Eq. (6) at x -> 0
  double branching_amplified; // n_bar * B
  double branching_amplified_n; // n * B, the alternative unit count
  double packing_parameter;   // 1/12
  double two_delta;           // cm
  double run_to_spacing_ratio;  // l / (2*Delta)
  double prior_single_photon_limit;  // 4e-6 (quoted <= 4e-4 %)
  double limit_excess_ratio;  // branching_amplified / prior limit
  std::string profile;
};

double number_density(const GasState& state, const PhysicalConstants& c);  // cm^-3
double gas_volume(const GasState& state);                                  // cm^3

double collective_size(double n_bar, double eta);
double lattice_constant_exp(double gas_volume_cm3, double n_bar);
LatticeConstantTheory lattice_constant_theory(const PhysicalConstants& c);
double virtual_photon_time(const PhysicalConstants& c);  // ps
double mcns_radius(double n_bar, double delta_cm);
double gamma_wavelength(double energy_mev, const PhysicalConstants& c);
double mossbauer_factor(double msd_cm2, double wavelength_cm);
double resonant_cross_section(const ResonanceParameters& p);
double resonant_mean_free_path(double eta, double nu_per_cm3, double sigma_r_cm2);
double macroscopic_cross_section(double n, double sigma_r_cm2);
PackingComparison packing_comparison(double eta, double delta_cm, double mean_free_path_cm);
double branching_single_gamma(double mass_ratio);
double amplified_branching(double branching_unit, double n_bar);

McnrsReport full_report(const GasState& state, const AnnihilationModel& model,
                        const SourceSpec& source, const PhysicalConstants& c,
                        ConstantProfile profile);

// Aligned text table with provenance labels; both profiles side by side.
std::string report_table(const McnrsReport& paper, const McnrsReport& codata,
                         double random_to_true);
// JSON with fields named exactly as McnrsReport plus a parallel units object.
std::string report_json(const McnrsReport& r, double random_to_true);

}  // namespace mcnrs
}  // namespace pals
