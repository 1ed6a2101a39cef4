#include "pals/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>

namespace pals {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(where + ": cannot parse '" + v + "' as a number");
  }
}

long long parse_int(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(where + ": cannot parse '" + v + "' as an integer");
  }
}

bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(where + ": cannot parse '" + v + "' as a boolean");
}

void require_positive(double v, const char* field) {
  if (!(v > 0.0)) throw ValidationError(std::string(field) + " must be > 0");
}

void require_unit_interval(double v, const char* field, bool open_low = true) {
  bool ok = open_low ? (v > 0.0 && v <= 1.0) : (v >= 0.0 && v <= 1.0);
  if (!ok)
    throw ValidationError(std::string(field) + " must be in " +
                          (open_low ? "(0, 1]" : "[0, 1]"));
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void IsotopeMix::normalize(double tol) {
  double sum = 0;
  for (auto& [label, f] : fractions) {
    if (f < 0.0 || f > 1.0)
      throw ValidationError("gas.fraction." + label + " must be in [0, 1]");
    sum += f;
  }
  if (fractions.empty()) throw ValidationError("gas: isotope mix is empty");
  if (std::abs(sum - 1.0) > tol)
    throw ValidationError("gas: isotope fractions sum to " + std::to_string(sum) +
                          ", expected 1 within " + std::to_string(tol));
  for (auto& [label, f] : fractions) f /= sum;
}

void IsotopeMix::validate() const {
  double sum = 0;
  for (auto& [label, f] : fractions) {
    if (f < 0.0 || f > 1.0)
      throw ValidationError("gas.fraction." + label + " must be in [0, 1]");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("gas: isotope fractions sum to " + std::to_string(sum) +
                          ", expected 1 within 1e-9");
}

void GasState::validate() const {
  require_positive(pressure_atm, "gas.pressure_atm");
  require_positive(chamber_radius_cm, "gas.chamber_radius_cm");
  mix.validate();
}

void SourceSpec::validate() const {
  require_positive(activity, "source.activity_per_s");
  require_positive(nuclear_gamma_energy, "source.nuclear_gamma_energy_mev");
  require_positive(nuclear_lifetime, "source.nuclear_lifetime_ps");
}

void DetectorSpec::validate() const {
  require_unit_interval(eff_low, "detector.eff_low");
  require_unit_interval(eff_high, "detector.eff_high");
  require_unit_interval(solid_angle_high, "detector.solid_angle_high");
  require_unit_interval(solid_angle_low_mean, "detector.solid_angle_low_mean");
  require_positive(resolving_time, "detector.resolving_time_ns");
  require_positive(timing_fwhm, "detector.timing_fwhm_ns");
  require_positive(energy_fwhm_511, "detector.energy_fwhm_511");
  // windows must be ordered and non-overlapping
  const double b[] = {window_low_lo, window_low_hi, window_full_lo,
                      window_full_hi, window_nuclear_lo, window_nuclear_hi};
  if (!(b[0] >= 0)) throw ValidationError("detector.window_low_lo_kev must be >= 0");
  for (int i = 1; i < 6; ++i)
    if (b[i] < b[i - 1])
      throw ValidationError("detector: energy windows must be ordered, non-overlapping");
}

void AnnihilationModel::validate() const {
  if (intensity_para < 0 || intensity_ortho < 0 || intensity_free < 0)
    throw ValidationError("model: intensities must be nonnegative");
  double sum = intensity_para + intensity_ortho + intensity_free;
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("model: intensities sum to " + std::to_string(sum) +
                          ", expected 1 within 1e-9");
  require_positive(rate_para, "model.rate_para_per_ns");
  require_positive(rate_ortho_3gamma, "model.rate_ortho_per_us");
  require_positive(rate_free, "model.rate_free_per_ns");
  if (anomaly_branching < 0 || anomaly_branching >= 1.0)
    throw ValidationError("model.anomaly_branching must be in [0, 1)");
  if (shoulder_enabled) require_positive(shoulder_rise_time, "model.shoulder_rise_ns");
  require_positive(n_bar, "model.n_bar");
  if (msd < 0) throw ValidationError("model.msd_cm2 must be >= 0");
  if (spin_ground < 0 || spin_excited < 0)
    throw ValidationError("model: spins must be >= 0");
}

void SimulationConfig::validate() const {
  if (n_events <= 0) throw ValidationError("simulation.events must be > 0");
  if (!(window_max > window_min))
    throw ValidationError("simulation: window_max_ns must exceed window_min_ns");
  if (time_bins <= 0) throw ValidationError("simulation.time_bins must be > 0");
  if (energy_bins <= 0) throw ValidationError("simulation.energy_bins must be > 0");
  require_positive(energy_max, "simulation.energy_max_kev");
  if (workers <= 0) throw ValidationError("simulation.workers must be > 0");
  if (chunk_events <= 0) throw ValidationError("simulation.chunk_events must be > 0");
}

void FitConfig::validate() const {
  if (n_components < 1) throw ValidationError("fit.components must be >= 1");
  if (!(window_max > window_min))
    throw ValidationError("fit: window_max_ns must exceed window_min_ns");
  if (variance_model != "poisson" && variance_model != "gaussian-approx")
    throw ValidationError("fit.variance_model must be poisson or gaussian-approx");
  if (max_iterations < 1) throw ValidationError("fit.max_iterations must be >= 1");
  for (double r : fixed_rates) require_positive(r, "fit.fixed_rates");
  for (double r : initial_rates) require_positive(r, "fit.initial_rates");
}

void Config::validate() const {
  gas.validate();
  source.validate();
  detector.validate();
  model.validate();
  simulation.validate();
  fit.validate();
}

namespace {

std::string join_rates(const std::vector<double>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += fmt(v[i]);
  }
  return s;
}

std::vector<double> split_rates(const std::string& v, const std::string& where) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(item, where));
  }
  return out;
}

// One assignment; returns false if the key is unknown.
bool assign(Config& c, const std::string& sec, const std::string& key,
            const std::string& val, const std::string& where) {
  auto d = [&] { return parse_double(val, where); };
  auto i = [&] { return parse_int(val, where); };
  auto b = [&] { return parse_bool(val, where); };
  if (sec == "gas") {
    if (key == "pressure_atm") c.gas.pressure_atm = d();
    else if (key == "chamber_radius_cm") c.gas.chamber_radius_cm = d();
    else if (key.rfind("fraction.", 0) == 0) c.gas.mix.fractions[key.substr(9)] = d();
    else return false;
    return true;
  }
  if (sec == "source") {
    if (key == "activity_per_s") c.source.activity = d();
    else if (key == "nuclear_gamma_energy_mev") c.source.nuclear_gamma_energy = d();
    else if (key == "nuclear_lifetime_ps") c.source.nuclear_lifetime = d();
    else if (key == "label") c.source.label = val;
    else return false;
    return true;
  }
  if (sec == "detector") {
    if (key == "eff_low") c.detector.eff_low = d();
    else if (key == "eff_high") c.detector.eff_high = d();
    else if (key == "solid_angle_high") c.detector.solid_angle_high = d();
    else if (key == "solid_angle_low_mean") c.detector.solid_angle_low_mean = d();
    else if (key == "resolving_time_ns") c.detector.resolving_time = d();
    else if (key == "timing_fwhm_ns") c.detector.timing_fwhm = d();
    else if (key == "energy_fwhm_511") c.detector.energy_fwhm_511 = d();
    else if (key == "window_low_lo_kev") c.detector.window_low_lo = d();
    else if (key == "window_low_hi_kev") c.detector.window_low_hi = d();
    else if (key == "window_full_lo_kev") c.detector.window_full_lo = d();
    else if (key == "window_full_hi_kev") c.detector.window_full_hi = d();
    else if (key == "window_nuclear_lo_kev") c.detector.window_nuclear_lo = d();
    else if (key == "window_nuclear_hi_kev") c.detector.window_nuclear_hi = d();
    else return false;
    return true;
  }
  if (sec == "model") {
    if (key == "intensity_para") c.model.intensity_para = d();
    else if (key == "intensity_ortho") c.model.intensity_ortho = d();
    else if (key == "intensity_free") c.model.intensity_free = d();
    else if (key == "rate_para_per_ns") c.model.rate_para = d();
    else if (key == "rate_ortho_per_us") c.model.rate_ortho_3gamma = d();
    else if (key == "anomaly_branching") c.model.anomaly_branching = d();
    else if (key == "rate_free_per_ns") c.model.rate_free = d();
    else if (key == "shoulder_enabled") c.model.shoulder_enabled = b();
    else if (key == "shoulder_rise_ns") c.model.shoulder_rise_time = d();
    else if (key == "three_gamma_spectrum") {
      if (val == "uniform") c.model.three_gamma_spectrum = ThreeGammaSpectrum::uniform;
      else if (val == "ore-powell") c.model.three_gamma_spectrum = ThreeGammaSpectrum::ore_powell;
      else throw ConfigError(where + ": three_gamma_spectrum must be uniform or ore-powell");
    }
    else if (key == "n_bar") c.model.n_bar = d();
    else if (key == "msd_cm2") c.model.msd = d();
    else if (key == "spin_ground") c.model.spin_ground = d();
    else if (key == "spin_excited") c.model.spin_excited = d();
    else return false;
    return true;
  }
  if (sec == "simulation") {
    if (key == "events") c.simulation.n_events = i();
    else if (key == "window_min_ns") c.simulation.window_min = d();
    else if (key == "window_max_ns") c.simulation.window_max = d();
    else if (key == "time_bins") c.simulation.time_bins = static_cast<int>(i());
    else if (key == "energy_bins") c.simulation.energy_bins = static_cast<int>(i());
    else if (key == "energy_max_kev") c.simulation.energy_max = d();
    else if (key == "seed") c.simulation.seed = static_cast<unsigned long long>(i());
    else if (key == "late_window_start_ns") c.simulation.late_window_start = d();
    else if (key == "include_random_background") c.simulation.include_random_background = b();
    else if (key == "apply_response") c.simulation.apply_response = b();
    else if (key == "workers") c.simulation.workers = static_cast<int>(i());
    else if (key == "chunk_events") c.simulation.chunk_events = i();
    else return false;
    return true;
  }
  if (sec == "fit") {
    if (key == "components") c.fit.n_components = static_cast<int>(i());
    else if (key == "fixed_rates_per_ns") c.fit.fixed_rates = split_rates(val, where);
    else if (key == "initial_rates_per_ns") c.fit.initial_rates = split_rates(val, where);
    else if (key == "background_free") c.fit.background_free = b();
    else if (key == "background_value") c.fit.background_value = d();
    else if (key == "response_fwhm_ns") c.fit.response_fwhm = d();
    else if (key == "window_min_ns") c.fit.window_min = d();
    else if (key == "window_max_ns") c.fit.window_max = d();
    else if (key == "variance_model") c.fit.variance_model = val;
    else if (key == "max_iterations") c.fit.max_iterations = static_cast<int>(i());
    else return false;
    return true;
  }
  throw ConfigError(where + ": unknown section [" + sec + "]");
}

}  // namespace

Config parse_config(const std::string& text, const std::string& origin) {
  Config cfg;
  bool mix_cleared = false;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string where = origin + ":" + std::to_string(lineno);
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    size_t eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    std::string key = trim(s.substr(0, eq));
    std::string val = trim(s.substr(eq + 1));
    if (section.empty()) throw ConfigError(where + ": key outside any section");
    // the first explicit fraction replaces the default mix wholesale
    if (section == "gas" && key.rfind("fraction.", 0) == 0 && !mix_cleared) {
      cfg.gas.mix.fractions.clear();
      mix_cleared = true;
    }
    if (!assign(cfg, section, key, val, where))
      throw ConfigError(where + ": unknown key '" + key + "' in section [" + section + "]");
  }
  cfg.gas.mix.normalize();
  cfg.validate();
  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

void apply_overrides(Config& cfg, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    size_t eq = s.find('=');
    size_t dot = s.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw ConfigError("--set expects section.key=value, got '" + s + "'");
    std::string sec = trim(s.substr(0, dot));
    std::string key = trim(s.substr(dot + 1, eq - dot - 1));
    std::string val = trim(s.substr(eq + 1));
    if (!assign(cfg, sec, key, val, "--set " + s))
      throw ConfigError("--set " + s + ": unknown key '" + key + "' in section [" + sec + "]");
  }
  cfg.gas.mix.normalize();
  cfg.validate();
}

std::string Config::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "# pals effective configuration (units in key names)\n";
  os << "[gas]\n";
  os << "pressure_atm = " << gas.pressure_atm << "\n";
  os << "chamber_radius_cm = " << gas.chamber_radius_cm << "\n";
  for (auto& [label, f] : gas.mix.fractions)
    os << "fraction." << label << " = " << f << "\n";
  os << "\n[source]\n";
  os << "activity_per_s = " << source.activity << "\n";
  os << "nuclear_gamma_energy_mev = " << source.nuclear_gamma_energy << "\n";
  os << "nuclear_lifetime_ps = " << source.nuclear_lifetime << "\n";
  os << "label = " << source.label << "\n";
  os << "\n[detector]\n";
  os << "eff_low = " << detector.eff_low << "\n";
  os << "eff_high = " << detector.eff_high << "\n";
  os << "solid_angle_high = " << detector.solid_angle_high << "\n";
  os << "solid_angle_low_mean = " << detector.solid_angle_low_mean << "\n";
  os << "resolving_time_ns = " << detector.resolving_time << "\n";
  os << "timing_fwhm_ns = " << detector.timing_fwhm << "\n";
  os << "energy_fwhm_511 = " << detector.energy_fwhm_511 << "\n";
  os << "window_low_lo_kev = " << detector.window_low_lo << "\n";
  os << "window_low_hi_kev = " << detector.window_low_hi << "\n";
  os << "window_full_lo_kev = " << detector.window_full_lo << "\n";
  os << "window_full_hi_kev = " << detector.window_full_hi << "\n";
  os << "window_nuclear_lo_kev = " << detector.window_nuclear_lo << "\n";
  os << "window_nuclear_hi_kev = " << detector.window_nuclear_hi << "\n";
  os << "\n[model]\n";
  os << "intensity_para = " << model.intensity_para << "\n";
  os << "intensity_ortho = " << model.intensity_ortho << "\n";
  os << "intensity_free = " << model.intensity_free << "\n";
  os << "rate_para_per_ns = " << model.rate_para << "\n";
  os << "rate_ortho_per_us = " << model.rate_ortho_3gamma << "\n";
  os << "anomaly_branching = " << model.anomaly_branching << "\n";
  os << "rate_free_per_ns = " << model.rate_free << "\n";
  os << "shoulder_enabled = " << (model.shoulder_enabled ? "true" : "false") << "\n";
  os << "shoulder_rise_ns = " << model.shoulder_rise_time << "\n";
  os << "three_gamma_spectrum = "
     << (model.three_gamma_spectrum == ThreeGammaSpectrum::uniform ? "uniform" : "ore-powell")
     << "\n";
  os << "n_bar = " << model.n_bar << "\n";
  os << "msd_cm2 = " << model.msd << "\n";
  os << "spin_ground = " << model.spin_ground << "\n";
  os << "spin_excited = " << model.spin_excited << "\n";
  os << "\n[simulation]\n";
  os << "events = " << simulation.n_events << "\n";
  os << "window_min_ns = " << simulation.window_min << "\n";
  os << "window_max_ns = " << simulation.window_max << "\n";
  os << "time_bins = " << simulation.time_bins << "\n";
  os << "energy_bins = " << simulation.energy_bins << "\n";
  os << "energy_max_kev = " << simulation.energy_max << "\n";
  os << "seed = " << simulation.seed << "\n";
  os << "late_window_start_ns = " << simulation.late_window_start << "\n";
  os << "include_random_background = "
     << (simulation.include_random_background ? "true" : "false") << "\n";
  os << "apply_response = " << (simulation.apply_response ? "true" : "false") << "\n";
  os << "workers = " << simulation.workers << "\n";
  os << "chunk_events = " << simulation.chunk_events << "\n";
  os << "\n[fit]\n";
  os << "components = " << fit.n_components << "\n";
  if (!fit.fixed_rates.empty())
    os << "fixed_rates_per_ns = " << join_rates(fit.fixed_rates) << "\n";
  if (!fit.initial_rates.empty())
    os << "initial_rates_per_ns = " << join_rates(fit.initial_rates) << "\n";
  os << "background_free = " << (fit.background_free ? "true" : "false") << "\n";
  os << "background_value = " << fit.background_value << "\n";
  os << "response_fwhm_ns = " << fit.response_fwhm << "\n";
  os << "window_min_ns = " << fit.window_min << "\n";
  os << "window_max_ns = " << fit.window_max << "\n";
  os << "variance_model = " << fit.variance_model << "\n";
  os << "max_iterations = " << fit.max_iterations << "\n";
  return os.str();
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string Config::digest() const { return fnv1a_hex(to_text()); }

}  // namespace pals
