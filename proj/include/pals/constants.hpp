#pragma once

// Physical constants used throughout pals. Two profiles are provided:
//  - "paper": values rounded the way the source phenomenology rounds them
//    (Loschmidt 2.7e19, alpha^-1 = 137.036, hbar*c = 197.327 MeV fm).
//    Regression of printed two-digit results needs this profile.
//  - "codata": full-precision CODATA values.
// Internal canonical units: time ns, energy keV (MeV at boundaries),
// length cm, pressure atm.

#include <cmath>
#include <stdexcept>
#include <string>

namespace pals {

enum class ConstantProfile { paper, codata };

inline std::string to_string(ConstantProfile p) {
  return p == ConstantProfile::paper ? "paper" : "codata";
}

inline ConstantProfile profile_from_string(const std::string& s) {
  if (s == "paper") return ConstantProfile::paper;
  if (s == "codata") return ConstantProfile::codata;
  throw std::invalid_argument("unknown constant profile '" + s + "' (expected paper|codata)");
}

// Unit conversions
inline constexpr double kFmToCm = 1e-13;
inline constexpr double kMeVToEv = 1e6;
inline constexpr double kMeVToKeV = 1e3;
inline constexpr double kNsToS = 1e-9;
inline constexpr double kPerUsToPerNs = 1e-3;

struct PhysicalConstants {
  double alpha;                     // fine-structure constant, dimensionless
  double hbar_c;                    // MeV fm
  double electron_mass_energy;      // MeV (m_e c^2)
  double hbar;                      // eV s
  double loschmidt_density;         // cm^-3 atm^-1
  double lambda_T_theor;            // us^-1, QED o-Ps 3-gamma rate
  double lambda_T_theor_err;        // us^-1
  double tau_T;                     // ns
  double tau_S;                     // ps
  double tau_star;                  // ps, 22Ne* de-excitation lifetime
  double hyperfine_energy_3_7;      // eV, (3/7) of the Ps hyperfine splitting

  // hbar/(m_e c) in cm
  double reduced_compton_cm() const { return hbar_c / electron_mass_energy * kFmToCm; }
  // hbar*c in eV cm
  double hbar_c_ev_cm() const { return hbar_c * kMeVToEv * kFmToCm; }
  // lambda_T in ns^-1
  double lambda_T_per_ns() const { return lambda_T_theor * kPerUsToPerNs; }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0)) throw std::invalid_argument(std::string("constants.") + name + " must be > 0");
    };
    positive(alpha, "alpha");
    positive(hbar_c, "hbar_c");
    positive(electron_mass_energy, "electron_mass_energy");
    positive(hbar, "hbar");
    positive(loschmidt_density, "loschmidt_density");
    positive(lambda_T_theor, "lambda_T_theor");
    positive(tau_T, "tau_T");
    positive(tau_S, "tau_S");
    positive(tau_star, "tau_star");
    positive(hyperfine_energy_3_7, "hyperfine_energy_3_7");
    // quoted rate and lifetime must agree: lambda_T * tau_T ~ 1 within 2%
    double prod = lambda_T_theor * 1e-3 * tau_T;
    if (std::abs(prod - 1.0) > 0.02)
      throw std::invalid_argument("constants: lambda_T_theor and tau_T inconsistent (product " +
                                  std::to_string(prod) + ")");
  }

  static PhysicalConstants paper() {
    PhysicalConstants c;
    c.alpha = 1.0 / 137.036;
    c.hbar_c = 197.327;
    c.electron_mass_energy = 0.511;
    c.hbar = 6.582e-16;
    c.loschmidt_density = 2.7e19;
    c.lambda_T_theor = 7.03830;
    c.lambda_T_theor_err = 0.00005;
    c.tau_T = 140.0;
    c.tau_S = 125.0;
    c.tau_star = 5.24;
    c.hyperfine_energy_3_7 = 3.6e-4;
    return c;
  }

  static PhysicalConstants codata() {
    PhysicalConstants c;
    c.alpha = 7.2973525693e-3;
    c.hbar_c = 197.3269804;
    c.electron_mass_energy = 0.51099895;
    c.hbar = 6.582119569e-16;
    c.loschmidt_density = 2.6867811e19;
    c.lambda_T_theor = 7.03830;   // quoted QED value, kept across profiles
    c.lambda_T_theor_err = 0.00005;
    c.tau_T = 142.0;
    c.tau_S = 125.0;
    c.tau_star = 5.24;
    c.hyperfine_energy_3_7 = 3.6e-4;
    return c;
  }

  static PhysicalConstants for_profile(ConstantProfile p) {
    return p == ConstantProfile::paper ? paper() : codata();
  }
};

}  // namespace pals
