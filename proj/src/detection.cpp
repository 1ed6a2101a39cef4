#include "pals/detection.hpp"

namespace pals {
namespace detection {

double bracket_ratio_term(const DetectorSpec& det) {
  return (det.eff_high * det.solid_angle_high) /
         (det.eff_low * det.solid_angle_low_mean);
}

double random_to_true_ratio(const SourceSpec& source, const DetectorSpec& det) {
  double dtau_s = det.resolving_time * kNsToS;
  return source.activity * dtau_s * (2.0 + bracket_ratio_term(det));
}

double random_rate_density(const SourceSpec& source, const DetectorSpec& det,
                           double n_true, double window_ns) {
  if (n_true < 0) throw ValidationError("random_rate_density: n_true must be >= 0");
  if (!(window_ns > 0)) throw ValidationError("random_rate_density: window must be > 0");
  return random_to_true_ratio(source, det) * n_true / window_ns;
}

std::string to_string(EnergyWindow w) {
  switch (w) {
    case EnergyWindow::annihilation_low: return "annihilation_low";
    case EnergyWindow::full_energy: return "full_energy";
    case EnergyWindow::nuclear: return "nuclear";
    default: return "other";
  }
}

EnergyWindow classify_energy(double deposited_kev, const DetectorSpec& det) {
  if (deposited_kev < 0) return EnergyWindow::other;
  if (deposited_kev >= det.window_low_lo && deposited_kev < det.window_low_hi)
    return EnergyWindow::annihilation_low;
  if (deposited_kev >= det.window_full_lo && deposited_kev < det.window_full_hi)
    return EnergyWindow::full_energy;
  if (deposited_kev >= det.window_nuclear_lo && deposited_kev < det.window_nuclear_hi)
    return EnergyWindow::nuclear;
  return EnergyWindow::other;
}

}  // namespace detection
}  // namespace pals
