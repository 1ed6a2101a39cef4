#pragma once

// Delayed gamma_n - gamma_a coincidence bookkeeping: the random-to-true
// coincidence ratio, the flat background level it implies, and the stop
// energy classification windows.

#include <string>

#include "pals/config.hpp"

namespace pals {
namespace detection {

// R/C = Q * dtau * [2 + (eff_high*Omega_high)/(eff_low*Omega_low_mean)],
// with the resolving time taken as the full coincidence window, in seconds.
double random_to_true_ratio(const SourceSpec& source, const DetectorSpec& det);

// Ratio term of the bracket above (second summand).
double bracket_ratio_term(const DetectorSpec& det);

// Expected random coincidences per ns of delay axis such that
// level * window = (R/C) * n_true.
double random_rate_density(const SourceSpec& source, const DetectorSpec& det,
                           double n_true, double window_ns);

enum class EnergyWindow { annihilation_low, full_energy, nuclear, other };

std::string to_string(EnergyWindow w);

// Deterministic label from the configured window bounds; total on [0, inf).
EnergyWindow classify_energy(double deposited_kev, const DetectorSpec& det);

}  // namespace detection
}  // namespace pals
