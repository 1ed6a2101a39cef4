#pragma once

// Artifact serialization: spectrum CSVs with metadata header comments, the
// JSON metadata sidecar, run manifests, and atomic file writes.

#include <string>
#include <vector>

#include "pals/analysis.hpp"
#include "pals/histogram.hpp"

namespace pals {
namespace io {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kToolVersion = "pals 1.0.0";

// temp file + rename, so readers never observe a partial artifact
void atomic_write(const std::string& path, const std::string& content);

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::vector<unsigned long long> seeds;
  std::string tool_version = kToolVersion;
  std::string timestamp;
  std::vector<std::string> outputs;

  std::string to_json() const;
  std::string digest() const;  // over everything except the output list
  static RunManifest make(const std::string& command, const std::string& config_hash,
                          std::vector<unsigned long long> seeds);
};

std::string spectrum_csv(const TimeEnergyHistogram& h, const std::string& manifest_digest);
std::string energy_csv(const TimeEnergyHistogram& h, const std::string& manifest_digest);
std::string metadata_json(const TimeEnergyHistogram& h, const std::string& manifest_digest);

struct LoadedSpectrum {
  analysis::TimeSpectrum time;
  TimeEnergyHistogram::Meta meta;
};

LoadedSpectrum read_spectrum_csv(const std::string& path);

// data + fitted curve + residuals, plot-ready
std::string fit_curve_csv(const analysis::TimeSpectrum& data,
                          const analysis::FitModelSpec& spec,
                          const analysis::FitResult& fit,
                          const std::string& manifest_digest);

}  // namespace io
}  // namespace pals
