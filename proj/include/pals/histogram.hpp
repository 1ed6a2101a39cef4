#pragma once

// Binned delayed-coincidence spectrum: a uniform time axis plus energy
// histograms partitioned by delay window (all / prompt / late).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pals/config.hpp"

namespace pals {

struct TimeEnergyHistogram {
  double t_min = 0, t_max = 0;
  int t_bins = 0;
  std::vector<std::int64_t> time_counts;

  double e_min = 0, e_max = 0;
  int e_bins = 0;
  double late_start = 0;  // ns
  std::vector<std::int64_t> energy_all;
  std::vector<std::int64_t> energy_prompt;
  std::vector<std::int64_t> energy_late;

  struct Meta {
    std::uint64_t seed = 0;
    std::int64_t n_true = 0;
    std::int64_t n_random = 0;
    double random_to_true = 0;
    std::string rng_algorithm;
    std::string config_hash;
    std::string config_text;
    std::string warning;
  } meta;

  static TimeEnergyHistogram make(const SimulationConfig& sim) {
    TimeEnergyHistogram h;
    h.t_min = sim.window_min;
    h.t_max = sim.window_max;
    h.t_bins = sim.time_bins;
    h.time_counts.assign(sim.time_bins, 0);
    h.e_min = 0.0;
    h.e_max = sim.energy_max;
    h.e_bins = sim.energy_bins;
    h.late_start = sim.late_window_start;
    h.energy_all.assign(sim.energy_bins, 0);
    h.energy_prompt.assign(sim.energy_bins, 0);
    h.energy_late.assign(sim.energy_bins, 0);
    return h;
  }

  double t_bin_width() const { return (t_max - t_min) / t_bins; }
  double e_bin_width() const { return (e_max - e_min) / e_bins; }
  double t_center(int i) const { return t_min + (i + 0.5) * t_bin_width(); }
  double e_center(int i) const { return e_min + (i + 0.5) * e_bin_width(); }

  // Out-of-range entries land in the edge bins so that counts are conserved.
  void fill(double t_ns, double e_kev) {
    int ti = static_cast<int>(std::floor((t_ns - t_min) / t_bin_width()));
    ti = std::clamp(ti, 0, t_bins - 1);
    ++time_counts[ti];
    int ei = static_cast<int>(std::floor((e_kev - e_min) / e_bin_width()));
    ei = std::clamp(ei, 0, e_bins - 1);
    ++energy_all[ei];
    if (t_ns >= late_start)
      ++energy_late[ei];
    else
      ++energy_prompt[ei];
  }

  void merge(const TimeEnergyHistogram& o) {
    for (int i = 0; i < t_bins; ++i) time_counts[i] += o.time_counts[i];
    for (int i = 0; i < e_bins; ++i) {
      energy_all[i] += o.energy_all[i];
      energy_prompt[i] += o.energy_prompt[i];
      energy_late[i] += o.energy_late[i];
    }
  }

  std::int64_t total_time_counts() const {
    std::int64_t s = 0;
    for (auto c : time_counts) s += c;
    return s;
  }
};

}  // namespace pals
