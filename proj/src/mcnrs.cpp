#include "pals/mcnrs.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

namespace pals {
namespace mcnrs {

using std::numbers::pi;

namespace {
void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw DomainError(std::string(what) + " must be > 0");
}
}  // namespace

CollectiveState CollectiveState::make(double n_bar, double eta) {
  require_positive(n_bar, "n_bar");
  if (!(eta > 0.0 && eta <= 1.0)) throw DomainError("eta must be in (0, 1]");
  return {n_bar, eta, n_bar * eta};
}

ResonanceParameters ResonanceParameters::make(double gamma_energy_mev, double msd_cm2,
                                              double spin_ground, double spin_excited,
                                              const PhysicalConstants& c) {
  double lam = gamma_wavelength(gamma_energy_mev, c);
  return {gamma_energy_mev, lam, spin_ground, spin_excited, msd_cm2,
          mossbauer_factor(msd_cm2, lam)};
}

double number_density(const GasState& state, const PhysicalConstants& c) {
  return c.loschmidt_density * state.pressure_atm;
}

double gas_volume(const GasState& state) {
  double r = state.chamber_radius_cm;
  return 4.0 / 3.0 * pi * r * r * r;
}

double collective_size(double n_bar, double eta) {
  return CollectiveState::make(n_bar, eta).n;
}

double lattice_constant_exp(double gas_volume_cm3, double n_bar) {
  require_positive(gas_volume_cm3, "gas volume");
  require_positive(n_bar, "n_bar");
  return std::cbrt(gas_volume_cm3 / n_bar);
}

LatticeConstantTheory lattice_constant_theory(const PhysicalConstants& c) {
  LatticeConstantTheory t;
  t.from_hyperfine = c.hbar_c_ev_cm() / c.hyperfine_energy_3_7;
  double a2 = c.alpha * c.alpha;
  t.from_alpha = 4.0 / (a2 * a2) * c.reduced_compton_cm();
  t.relative_difference = std::abs(t.from_hyperfine - t.from_alpha) / t.from_alpha;
  return t;
}

double virtual_photon_time(const PhysicalConstants& c) {
  return c.hbar / c.hyperfine_energy_3_7 * 1e12;  // s -> ps
}

double mcns_radius(double n_bar, double delta_cm) {
  require_positive(n_bar, "n_bar");
  require_positive(delta_cm, "delta");
  return std::cbrt(3.0 * n_bar * delta_cm * delta_cm * delta_cm / (4.0 * pi));
}

double gamma_wavelength(double energy_mev, const PhysicalConstants& c) {
  require_positive(energy_mev, "gamma energy");
  return 2.0 * pi * c.hbar_c / energy_mev * kFmToCm;
}

double mossbauer_factor(double msd_cm2, double wavelength_cm) {
  if (msd_cm2 < 0.0) throw DomainError("mean-square displacement must be >= 0");
  require_positive(wavelength_cm, "wavelength");
  return std::exp(-4.0 * pi * pi * msd_cm2 / (wavelength_cm * wavelength_cm));
}

double resonant_cross_section(const ResonanceParameters& p) {
  double lam2 = p.wavelength * p.wavelength;
  return p.mossbauer * lam2 * (2.0 * p.spin_excited + 1.0) /
         (2.0 * pi * (2.0 * p.spin_ground + 1.0));
}

double resonant_mean_free_path(double eta, double nu_per_cm3, double sigma_r_cm2) {
  require_positive(eta, "eta");
  require_positive(nu_per_cm3, "number density");
  require_positive(sigma_r_cm2, "sigma_r");
  return 1.0 / (eta * nu_per_cm3 * sigma_r_cm2);
}

double macroscopic_cross_section(double n, double sigma_r_cm2) {
  require_positive(n, "n");
  return n * sigma_r_cm2;
}

PackingComparison packing_comparison(double eta, double delta_cm, double mean_free_path_cm) {
  require_positive(eta, "eta");
  require_positive(delta_cm, "delta");
  require_positive(mean_free_path_cm, "mean free path");
  PackingComparison p;
  p.packing = 1.0 / 12.0;
  p.two_delta = 2.0 * delta_cm;
  p.ratio = mean_free_path_cm / p.two_delta;
  return p;
}

double branching_single_gamma(double mass_ratio) {
  if (!(mass_ratio >= 0.0 && mass_ratio <= 1.0))
    throw DomainError("mass ratio must be in [0, 1]");
  double x4 = mass_ratio * mass_ratio * mass_ratio * mass_ratio;
  return 3.5e-8 * (1.0 - x4);
}

double amplified_branching(double branching_unit, double n_bar) {
  require_positive(branching_unit, "unit branching");
  require_positive(n_bar, "n_bar");
  double b = branching_unit * n_bar;
  if (b > 1.0) throw DomainError("amplified branching exceeds 1 (probability bound)");
  return b;
}

McnrsReport full_report(const GasState& state, const AnnihilationModel& model,
                        const SourceSpec& source, const PhysicalConstants& c,
                        ConstantProfile profile) {
  McnrsReport r;
  r.profile = to_string(profile);
  r.n_bar = model.n_bar;
  r.eta = state.mix.fraction_of("Ne-22");
  if (!(r.eta > 0.0))
    throw DomainError("gas mix contains no Ne-22; MCNRS estimates need eta > 0");
  r.n = collective_size(r.n_bar, r.eta);
  r.gas_volume = gas_volume(state);
  r.delta_exp = lattice_constant_exp(r.gas_volume, r.n_bar);
  auto lt = lattice_constant_theory(c);
  r.delta_theory = lt.value();
  r.delta_theory_alt = lt.from_hyperfine;
  r.delta_form_rel_diff = lt.relative_difference;
  r.virtual_photon_time = virtual_photon_time(c);
  r.r_c = mcns_radius(r.n_bar, r.delta_theory);
  auto rp = ResonanceParameters::make(source.nuclear_gamma_energy, model.msd,
                                      model.spin_ground, model.spin_excited, c);
  r.wavelength = rp.wavelength;
  r.mossbauer_factor = rp.mossbauer;
  r.sigma_r = resonant_cross_section(rp);
  r.sigma_macroscopic = macroscopic_cross_section(r.n, r.sigma_r);
  double nu = number_density(state, c);
  r.mean_free_path = resonant_mean_free_path(r.eta, nu, r.sigma_r);
  r.branching_unit = branching_single_gamma(0.0);
  r.branching_amplified = amplified_branching(r.branching_unit, r.n_bar);
  r.branching_amplified_n = amplified_branching(r.branching_unit, r.n);
  auto pc = packing_comparison(r.eta, r.delta_theory, r.mean_free_path);
  r.packing_parameter = pc.packing;
  r.two_delta = pc.two_delta;
  r.run_to_spacing_ratio = pc.ratio;
  r.prior_single_photon_limit = 4e-6;
  r.limit_excess_ratio = r.branching_amplified / r.prior_single_photon_limit;
  return r;
}

namespace {
std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}
}  // namespace

std::string report_table(const McnrsReport& p, const McnrsReport& cd,
                         double random_to_true) {
  struct Row {
    const char* name;
    const char* unit;
    double a, b;
    const char* prov;
  };
  const Row rows[] = {
      {"n_bar", "", p.n_bar, cd.n_bar, "input"},
      {"eta (Ne-22)", "", p.eta, cd.eta, "input"},
      {"n = n_bar*eta", "", p.n, cd.n, "Eq. (1)"},
      {"gas volume V_g", "cm^3", p.gas_volume, cd.gas_volume, "(4/3) pi R_g^3"},
      {"Delta_exp", "cm", p.delta_exp, cd.delta_exp, "Eq. (2)"},
      {"Delta (closed form)", "cm", p.delta_theory, cd.delta_theory, "Eq. (3)"},
      {"Delta (hyperfine form)", "cm", p.delta_theory_alt, cd.delta_theory_alt, "Eq. (3)"},
      {"form rel. difference", "", p.delta_form_rel_diff, cd.delta_form_rel_diff, "Eq. (3) check"},
      {"virtual photon time", "ps", p.virtual_photon_time, cd.virtual_photon_time, "after Eq. (3)"},
      {"r_c", "cm", p.r_c, cd.r_c, "Eq. (4)"},
      {"wavelength (1.27 MeV)", "cm", p.wavelength, cd.wavelength, "sigma_r input"},
      {"Mossbauer factor f_M", "", p.mossbauer_factor, cd.mossbauer_factor, "sigma_r input"},
      {"sigma_r", "cm^2", p.sigma_r, cd.sigma_r, "resonant cross section"},
      {"Sigma_r = n*sigma_r", "cm^2", p.sigma_macroscopic, cd.sigma_macroscopic, "macroscopic"},
      {"l_gamma_n", "cm", p.mean_free_path, cd.mean_free_path, "Eq. (5)"},
      {"packing parameter", "", p.packing_parameter, cd.packing_parameter, "1/12"},
      {"2*Delta", "cm", p.two_delta, cd.two_delta, "spacing"},
      {"l / (2*Delta)", "", p.run_to_spacing_ratio, cd.run_to_spacing_ratio, "spacing check"},
      {"B (unit)", "", p.branching_unit, cd.branching_unit, "Eq. (6)"},
      {"B_amp = n_bar*B", "", p.branching_amplified, cd.branching_amplified, "Eq. (7)"},
      {"B_amp (n variant)", "", p.branching_amplified_n, cd.branching_amplified_n, "Eq. (7) alt"},
      {"prior 1-gamma limit", "", p.prior_single_photon_limit, cd.prior_single_photon_limit,
       "experiment"},
      {"B_amp / limit", "", p.limit_excess_ratio, cd.limit_excess_ratio, "check"},
  };
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %-6s %12s %12s   %s\n", "quantity", "unit",
                "paper", "codata", "provenance");
  os << line;
  os << std::string(76, '-') << "\n";
  for (const auto& row : rows) {
    std::snprintf(line, sizeof line, "%-24s %-6s %12s %12s   %s\n", row.name, row.unit,
                  sci(row.a).c_str(), sci(row.b).c_str(), row.prov);
    os << line;
  }
  std::snprintf(line, sizeof line, "%-24s %-6s %12s %12s   %s\n", "R/C", "",
                sci(random_to_true).c_str(), sci(random_to_true).c_str(),
                "random/true coincidences");
  os << line;
  return os.str();
}

std::string report_json(const McnrsReport& r, double random_to_true) {
  nlohmann::json j;
  j["profile"] = r.profile;
  j["n_bar"] = r.n_bar;
  j["eta"] = r.eta;
  j["n"] = r.n;
  j["gas_volume"] = r.gas_volume;
  j["delta_exp"] = r.delta_exp;
  j["delta_theory"] = r.delta_theory;
  j["delta_theory_alt"] = r.delta_theory_alt;
  j["delta_form_rel_diff"] = r.delta_form_rel_diff;
  j["virtual_photon_time"] = r.virtual_photon_time;
  j["r_c"] = r.r_c;
  j["wavelength"] = r.wavelength;
  j["mossbauer_factor"] = r.mossbauer_factor;
  j["sigma_r"] = r.sigma_r;
  j["sigma_macroscopic"] = r.sigma_macroscopic;
  j["mean_free_path"] = r.mean_free_path;
  j["branching_unit"] = r.branching_unit;
  j["branching_amplified"] = r.branching_amplified;
  j["branching_amplified_n"] = r.branching_amplified_n;
  j["packing_parameter"] = r.packing_parameter;
  j["two_delta"] = r.two_delta;
  j["run_to_spacing_ratio"] = r.run_to_spacing_ratio;
  j["prior_single_photon_limit"] = r.prior_single_photon_limit;
  j["limit_excess_ratio"] = r.limit_excess_ratio;
  j["random_to_true"] = random_to_true;
  j["units"] = {
      {"n_bar", ""}, {"eta", ""}, {"n", ""},
      {"gas_volume", "cm^3"}, {"delta_exp", "cm"}, {"delta_theory", "cm"},
      {"delta_theory_alt", "cm"}, {"delta_form_rel_diff", ""},
      {"virtual_photon_time", "ps"}, {"r_c", "cm"}, {"wavelength", "cm"},
      {"mossbauer_factor", ""}, {"sigma_r", "cm^2"}, {"sigma_macroscopic", "cm^2"},
      {"mean_free_path", "cm"}, {"branching_unit", ""}, {"branching_amplified", ""},
      {"branching_amplified_n", ""}, {"packing_parameter", ""}, {"two_delta", "cm"},
      {"run_to_spacing_ratio", ""}, {"prior_single_photon_limit", ""},
      {"limit_excess_ratio", ""}, {"random_to_true", ""},
  };
  return j.dump(2);
}

}  // namespace mcnrs
}  // namespace pals
