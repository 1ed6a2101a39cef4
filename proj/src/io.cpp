#include "pals/io.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace pals {
namespace io {

void atomic_write(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + tmp + "' for writing");
    f << content;
    if (!f) throw IoError("write failed for '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("cannot rename '" + tmp + "' to '" + path + "'");
}

RunManifest RunManifest::make(const std::string& command, const std::string& config_hash,
                              std::vector<unsigned long long> seeds) {
  RunManifest m;
  m.command = command;
  m.config_hash = config_hash;
  m.seeds = std::move(seeds);
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  m.timestamp = buf;
  return m;
}

std::string RunManifest::digest() const {
  std::string core = command + "|" + config_hash + "|" + tool_version + "|" + timestamp;
  for (auto s : seeds) core += "|" + std::to_string(s);
  return fnv1a_hex(core);
}

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["config_hash"] = config_hash;
  j["seeds"] = seeds;
  j["tool_version"] = tool_version;
  j["timestamp"] = timestamp;
  j["outputs"] = outputs;
  j["digest"] = digest();
  return j.dump(2);
}

namespace {
std::string meta_header(const TimeEnergyHistogram& h, const std::string& manifest_digest) {
  std::ostringstream os;
  os << "# tool: " << kToolVersion << "\n";
  os << "# manifest: " << manifest_digest << "\n";
  os << "# rng: " << h.meta.rng_algorithm << "\n";
  os << "# seed: " << h.meta.seed << "\n";
  os << "# n_true: " << h.meta.n_true << "\n";
  os << "# n_random: " << h.meta.n_random << "\n";
  os.precision(17);
  os << "# random_to_true: " << h.meta.random_to_true << "\n";
  os << "# config_hash: " << h.meta.config_hash << "\n";
  os << "# t_min_ns: " << h.t_min << "\n";
  os << "# t_max_ns: " << h.t_max << "\n";
  os << "# late_window_start_ns: " << h.late_start << "\n";
  if (!h.meta.warning.empty()) os << "# warning: " << h.meta.warning << "\n";
  return os.str();
}
}  // namespace

std::string spectrum_csv(const TimeEnergyHistogram& h, const std::string& manifest_digest) {
  std::ostringstream os;
  os << "# pals lifetime spectrum v1 (units: ns, counts)\n";
  os << meta_header(h, manifest_digest);
  os << "t_bin_center_ns,counts\n";
  os.precision(12);
  for (int i = 0; i < h.t_bins; ++i)
    os << h.t_center(i) << "," << h.time_counts[i] << "\n";
  return os.str();
}

std::string energy_csv(const TimeEnergyHistogram& h, const std::string& manifest_digest) {
  std::ostringstream os;
  os << "# pals energy spectrum v1 (units: keV, counts; late window starts at "
     << h.late_start << " ns)\n";
  os << meta_header(h, manifest_digest);
  os << "e_bin_center_kev,counts_all,counts_prompt,counts_late\n";
  os.precision(12);
  for (int i = 0; i < h.e_bins; ++i)
    os << h.e_center(i) << "," << h.energy_all[i] << "," << h.energy_prompt[i] << ","
       << h.energy_late[i] << "\n";
  return os.str();
}

std::string metadata_json(const TimeEnergyHistogram& h, const std::string& manifest_digest) {
  nlohmann::json j;
  j["tool"] = kToolVersion;
  j["manifest"] = manifest_digest;
  j["rng"] = h.meta.rng_algorithm;
  j["seed"] = h.meta.seed;
  j["n_true"] = h.meta.n_true;
  j["n_random"] = h.meta.n_random;
  j["random_to_true"] = h.meta.random_to_true;
  j["config_hash"] = h.meta.config_hash;
  j["config"] = h.meta.config_text;
  j["t_min_ns"] = h.t_min;
  j["t_max_ns"] = h.t_max;
  j["t_bins"] = h.t_bins;
  j["e_max_kev"] = h.e_max;
  j["e_bins"] = h.e_bins;
  j["late_window_start_ns"] = h.late_start;
  if (!h.meta.warning.empty()) j["warning"] = h.meta.warning;
  return j.dump(2);
}

LoadedSpectrum read_spectrum_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open spectrum file '" + path + "'");
  LoadedSpectrum out;
  std::string line;
  std::vector<double> centers;
  bool header_seen = false;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto grab = [&](const char* key) -> std::string {
        std::string tag = std::string("# ") + key + ": ";
        if (line.rfind(tag, 0) == 0) return line.substr(tag.size());
        return "";
      };
      if (auto v = grab("seed"); !v.empty()) out.meta.seed = std::stoull(v);
      if (auto v = grab("n_true"); !v.empty()) out.meta.n_true = std::stoll(v);
      if (auto v = grab("n_random"); !v.empty()) out.meta.n_random = std::stoll(v);
      if (auto v = grab("random_to_true"); !v.empty()) out.meta.random_to_true = std::stod(v);
      if (auto v = grab("config_hash"); !v.empty()) out.meta.config_hash = v;
      if (auto v = grab("rng"); !v.empty()) out.meta.rng_algorithm = v;
      if (auto v = grab("t_min_ns"); !v.empty()) out.time.t_min = std::stod(v);
      if (auto v = grab("t_max_ns"); !v.empty()) out.time.t_max = std::stod(v);
      continue;
    }
    if (!header_seen) {  // column header row
      header_seen = true;
      continue;
    }
    size_t comma = line.find(',');
    if (comma == std::string::npos) throw IoError(path + ": malformed row '" + line + "'");
    centers.push_back(std::stod(line.substr(0, comma)));
    out.time.counts.push_back(std::stod(line.substr(comma + 1)));
  }
  if (centers.size() < 2) throw IoError(path + ": no spectrum rows");
  if (out.time.t_max <= out.time.t_min) {
    // reconstruct the uniform axis from the centers
    double w = centers[1] - centers[0];
    out.time.t_min = centers.front() - 0.5 * w;
    out.time.t_max = centers.back() + 0.5 * w;
  }
  return out;
}

std::string fit_curve_csv(const analysis::TimeSpectrum& data,
                          const analysis::FitModelSpec& spec,
                          const analysis::FitResult& fit,
                          const std::string& manifest_digest) {
  double sigma = spec.response_fwhm / 2.3548200450309493;
  std::ostringstream os;
  os << "# pals fit curve v1 (units: ns, counts)\n";
  os << "# manifest: " << manifest_digest << "\n";
  os << "t_bin_center_ns,counts,model,residual_pull\n";
  os.precision(12);
  for (int i = 0; i < data.bins(); ++i) {
    double a = data.edge(i), b = data.edge(i + 1);
    double mu = fit.background;
    for (const auto& c : fit.components)
      mu += c.amplitude * (analysis::emg_cdf(b, c.rate, sigma) -
                           analysis::emg_cdf(a, c.rate, sigma));
    double n = data.counts[i];
    double pull = (n - mu) / std::sqrt(std::max(mu, 1.0));
    os << data.center(i) << "," << n << "," << mu << "," << pull << "\n";
  }
  return os.str();
}

}  // namespace io
}  // namespace pals
