// pals: phenomenology estimates, lifetime-spectrum simulation, fitting and
// replica studies for the o-Ps decay-rate anomaly measurement model.
//
// Exit codes: 0 success, 1 configuration/validation error, 2 runtime or fit
// failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pals/analysis.hpp"
#include "pals/detection.hpp"
#include "pals/io.hpp"
#include "pals/mcnrs.hpp"
#include "pals/montecarlo.hpp"

namespace fs = std::filesystem;
using namespace pals;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir = ".";
  std::string profile = "paper";
  std::string format = "text";
  long long seed = -1;
};

Config load(const GlobalOpts& g) {
  Config cfg = g.config_path.empty() ? Config{} : load_config(g.config_path);
  if (g.config_path.empty()) cfg.gas.mix.normalize();
  apply_overrides(cfg, g.sets);
  if (g.seed >= 0) cfg.simulation.seed = static_cast<unsigned long long>(g.seed);
  return cfg;
}

void write_manifest(io::RunManifest& manifest, const GlobalOpts& g) {
  fs::create_directories(g.out_dir);
  io::atomic_write((fs::path(g.out_dir) / "manifest.json").string(), manifest.to_json());
}

int cmd_estimate(const GlobalOpts& g) {
  Config cfg = load(g);
  auto paper = mcnrs::full_report(cfg.gas, cfg.model, cfg.source,
                                  PhysicalConstants::paper(), ConstantProfile::paper);
  auto codata = mcnrs::full_report(cfg.gas, cfg.model, cfg.source,
                                   PhysicalConstants::codata(), ConstantProfile::codata);
  double rc = detection::random_to_true_ratio(cfg.source, cfg.detector);
  const auto& chosen = g.profile == "codata" ? codata : paper;
  if (g.format == "json")
    std::cout << mcnrs::report_json(chosen, rc) << "\n";
  else
    std::cout << mcnrs::report_table(paper, codata, rc);
  if (g.out_dir != ".") {
    auto manifest = io::RunManifest::make("estimate", cfg.digest(), {});
    std::string digest = manifest.digest();
    fs::create_directories(g.out_dir);
    std::string path = (fs::path(g.out_dir) / "estimate.json").string();
    nlohmann::json j = nlohmann::json::parse(mcnrs::report_json(chosen, rc));
    j["manifest"] = digest;
    io::atomic_write(path, j.dump(2));
    manifest.outputs.push_back(path);
    write_manifest(manifest, g);
  }
  return 0;
}

int cmd_simulate(const GlobalOpts& g, long long events, const std::string& out_name) {
  Config cfg = load(g);
  if (events > 0) cfg.simulation.n_events = events;
  cfg.simulation.validate();
  if (cfg.simulation.workers == 1)
    cfg.simulation.workers = std::max(1u, std::thread::hardware_concurrency());
  auto hist = montecarlo::simulate_spectrum(cfg);
  auto manifest =
      io::RunManifest::make("simulate", cfg.digest(), {cfg.simulation.seed});
  std::string digest = manifest.digest();
  fs::create_directories(g.out_dir);
  fs::path base = fs::path(g.out_dir) / out_name;
  fs::path energy = base;
  energy.replace_extension("");
  energy += "_energy.csv";
  fs::path meta = base;
  meta.replace_extension("");
  meta += ".meta.json";
  io::atomic_write(base.string(), io::spectrum_csv(hist, digest));
  io::atomic_write(energy.string(), io::energy_csv(hist, digest));
  io::atomic_write(meta.string(), io::metadata_json(hist, digest));
  manifest.outputs = {base.string(), energy.string(), meta.string()};
  write_manifest(manifest, g);
  std::cerr << "wrote " << base.string() << " (" << hist.meta.n_true << " true + "
            << hist.meta.n_random << " random events)\n";
  if (!hist.meta.warning.empty()) std::cerr << "warning: " << hist.meta.warning << "\n";
  return 0;
}

int cmd_fit(const GlobalOpts& g, const std::string& in_path, const std::string& model_path,
            const std::string& out_path) {
  Config cfg = g.config_path.empty() && !model_path.empty()
                   ? Config{}
                   : load(g);
  if (!model_path.empty()) {
    Config mc = load_config(model_path);
    cfg.fit = mc.fit;
    apply_overrides(cfg, g.sets);
  } else if (g.config_path.empty()) {
    cfg.gas.mix.normalize();
    apply_overrides(cfg, g.sets);
  }
  auto loaded = io::read_spectrum_csv(in_path);
  auto spec = analysis::FitModelSpec::from_config(cfg.fit, cfg.detector);
  auto fit = analysis::fit_lifetime(loaded.time, spec);
  std::string json;
  try {
    auto anomaly =
        analysis::extract_anomaly(fit, PhysicalConstants::for_profile(
                                           profile_from_string(g.profile)));
    json = analysis::fit_result_json(fit, &anomaly);
  } catch (const analysis::FitError&) {
    json = analysis::fit_result_json(fit, nullptr);
  }
  auto manifest = io::RunManifest::make("fit", cfg.digest(), {loaded.meta.seed});
  nlohmann::json j = nlohmann::json::parse(json);
  j["manifest"] = manifest.digest();
  j["input"] = in_path;
  fs::create_directories(fs::path(out_path).parent_path().empty()
                             ? "."
                             : fs::path(out_path).parent_path().string());
  io::atomic_write(out_path, j.dump(2));
  manifest.outputs = {out_path};
  write_manifest(manifest, g);
  std::cout << j.dump(2) << "\n";
  return fit.converged ? 0 : 2;
}

int cmd_replicas(const GlobalOpts& g, int n_replicas, long long events) {
  Config cfg = load(g);
  if (events > 0) cfg.simulation.n_events = events;
  auto spec = analysis::FitModelSpec::from_config(cfg.fit, cfg.detector);
  double truth = cfg.model.rate_ortho_observed_per_ns();

  std::vector<double> pulls;
  std::ostringstream csv;
  csv << "replica,seed,rate_per_ns,rate_err_per_ns,pull,converged\n";
  csv.precision(12);
  int failures = 0;
  for (int r = 0; r < n_replicas; ++r) {
    Config rc = cfg;
    rc.simulation.seed = cfg.simulation.seed + static_cast<unsigned long long>(r);
    auto hist = montecarlo::simulate_spectrum(rc);
    auto data = analysis::TimeSpectrum::from_histogram(hist);
    auto fit = analysis::fit_lifetime(data, spec);
    const auto* slow = fit.components.empty() ? nullptr : &fit.components.front();
    double pull = 0;
    bool ok = fit.converged && slow && slow->rate_err > 0;
    if (ok) {
      pull = (slow->rate - truth) / slow->rate_err;
      pulls.push_back(pull);
    } else {
      ++failures;
    }
    csv << r << "," << rc.simulation.seed << "," << (slow ? slow->rate : 0.0) << ","
        << (slow ? slow->rate_err : 0.0) << "," << pull << "," << (ok ? 1 : 0) << "\n";
  }
  double mean = 0, sd = 0;
  for (double p : pulls) mean += p;
  if (!pulls.empty()) mean /= pulls.size();
  for (double p : pulls) sd += (p - mean) * (p - mean);
  sd = pulls.size() > 1 ? std::sqrt(sd / (pulls.size() - 1)) : 0.0;

  auto manifest = io::RunManifest::make("replicas", cfg.digest(), {cfg.simulation.seed});
  fs::create_directories(g.out_dir);
  std::string pulls_path = (fs::path(g.out_dir) / "pulls.csv").string();
  std::string summary_path = (fs::path(g.out_dir) / "replica_summary.json").string();
  io::atomic_write(pulls_path, csv.str());
  nlohmann::json j;
  j["manifest"] = manifest.digest();
  j["replicas"] = n_replicas;
  j["failures"] = failures;
  j["events_per_replica"] = cfg.simulation.n_events;
  j["truth_rate_per_ns"] = truth;
  j["pull_mean"] = mean;
  j["pull_width"] = sd;
  io::atomic_write(summary_path, j.dump(2));
  manifest.outputs = {pulls_path, summary_path};
  write_manifest(manifest, g);
  std::cout << "pull mean = " << mean << ", width = " << sd << " (" << pulls.size()
            << " converged replicas)\n";
  return failures == 0 ? 0 : 2;
}

int cmd_report(const GlobalOpts& g, const std::string& spectrum_path,
               const std::string& fit_path) {
  Config cfg = load(g);
  auto loaded = io::read_spectrum_csv(spectrum_path);
  auto spec = analysis::FitModelSpec::from_config(cfg.fit, cfg.detector);

  analysis::FitResult fit;
  if (!fit_path.empty()) {
    std::ifstream f(fit_path);
    if (!f) throw io::IoError("cannot open fit file '" + fit_path + "'");
    nlohmann::json j = nlohmann::json::parse(f);
    fit.converged = j.value("converged", false);
    fit.background = j.value("background_counts_per_bin", 0.0);
    fit.chi2 = j.value("chi2", 0.0);
    fit.dof = j.value("dof", 0);
    for (const auto& cj : j["components"]) {
      analysis::FitComponent c;
      c.rate = cj.value("rate_per_ns", 0.0);
      c.rate_err = cj.value("rate_err_per_ns", 0.0);
      c.amplitude = cj.value("amplitude_counts", 0.0);
      c.intensity = cj.value("intensity", 0.0);
      fit.components.push_back(c);
    }
  } else {
    fit = analysis::fit_lifetime(loaded.time, spec);
  }

  auto manifest = io::RunManifest::make("report", cfg.digest(), {loaded.meta.seed});
  std::string digest = manifest.digest();
  fs::create_directories(g.out_dir);
  std::string curve_path = (fs::path(g.out_dir) / "fit_curve.csv").string();
  io::atomic_write(curve_path, io::fit_curve_csv(loaded.time, spec, fit, digest));

  std::ostringstream rep;
  rep << "pals report\n===========\n";
  rep << "spectrum: " << spectrum_path << " (seed " << loaded.meta.seed << ", "
      << loaded.meta.n_true << " true + " << loaded.meta.n_random << " random)\n";
  rep << "fit: converged=" << (fit.converged ? "yes" : "no") << " chi2/dof=" << fit.chi2
      << "/" << fit.dof << " background=" << fit.background << " counts/bin\n";
  for (const auto& c : fit.components)
    rep << "  component: rate " << c.rate << " /ns (tau " << 1.0 / c.rate << " ns) +- "
        << c.rate_err << ", intensity " << c.intensity << "\n";
  try {
    auto anomaly = analysis::extract_anomaly(
        fit, PhysicalConstants::for_profile(profile_from_string(g.profile)));
    rep << "anomaly fraction: " << anomaly.fraction << " +- " << anomaly.sigma
        << (anomaly.compatible ? " (compatible with the quoted band)"
                               : " (outside the quoted band)")
        << "\n";
  } catch (const analysis::FitError& e) {
    rep << "anomaly: not extracted (" << e.what() << ")\n";
  }
  auto estimate = mcnrs::full_report(cfg.gas, cfg.model, cfg.source,
                                     PhysicalConstants::paper(), ConstantProfile::paper);
  rep << "phenomenology: n=" << estimate.n << " r_c=" << estimate.r_c
      << " cm l=" << estimate.mean_free_path << " cm B_amp=" << estimate.branching_amplified
      << "\n";
  std::string report_path = (fs::path(g.out_dir) / "report.txt").string();
  io::atomic_write(report_path, rep.str());
  manifest.outputs = {curve_path, report_path};
  write_manifest(manifest, g);
  std::cout << rep.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"orthopositronium anomaly phenomenology, simulation and fitting"};
  app.require_subcommand(1);
  GlobalOpts g;
  app.add_option("--config", g.config_path, "configuration file path");
  app.add_option("--set", g.sets, "override: section.key=value")->take_all();
  app.add_option("--out-dir", g.out_dir, "output directory for artifacts");
  app.add_option("--seed", g.seed, "simulation seed (overrides config)");
  app.add_option("--profile", g.profile, "constant profile: paper|codata")
      ->check(CLI::IsMember({"paper", "codata"}));
  app.add_option("--format", g.format, "output format: text|json|csv")
      ->check(CLI::IsMember({"text", "json", "csv"}));

  auto* est = app.add_subcommand("estimate", "closed-form phenomenology report");
  est->fallthrough();

  auto* sim = app.add_subcommand("simulate", "generate a synthetic lifetime spectrum");
  sim->fallthrough();
  long long events = 0;
  std::string out_name = "spectrum.csv";
  sim->add_option("--events", events, "number of true coincidence events");
  sim->add_option("--out", out_name, "spectrum CSV file name (within --out-dir)");

  auto* fit = app.add_subcommand("fit", "fit a spectrum CSV");
  fit->fallthrough();
  std::string in_path, model_path, fit_out = "fit.json";
  fit->add_option("--in", in_path, "input spectrum CSV")->required();
  fit->add_option("--model", model_path, "config file supplying the [fit] section");
  fit->add_option("--out", fit_out, "output JSON path");

  auto* rep = app.add_subcommand("replicas", "pull study over simulated replicas");
  rep->fallthrough();
  int n_replicas = 50;
  long long rep_events = 0;
  rep->add_option("--replicas", n_replicas, "number of replicas");
  rep->add_option("--events", rep_events, "events per replica");

  auto* report = app.add_subcommand("report", "combined text report and plot CSVs");
  report->fallthrough();
  std::string rep_spectrum, rep_fit;
  report->add_option("--spectrum", rep_spectrum, "spectrum CSV")->required();
  report->add_option("--fit", rep_fit, "fit JSON (refit when omitted)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (est->parsed()) return cmd_estimate(g);
    if (sim->parsed()) return cmd_simulate(g, events, out_name);
    if (fit->parsed()) return cmd_fit(g, in_path, model_path, fit_out);
    if (rep->parsed()) return cmd_replicas(g, n_replicas, rep_events);
    if (report->parsed()) return cmd_report(g, rep_spectrum, rep_fit);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
