// Command-line front end: experiment recipes emitting CSV.

#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "wvfreq/errors.hpp"
#include "wvfreq/experiment.hpp"

namespace {

struct Common {
  std::string config_file;
  std::string output;
  unsigned threads = 1;
  std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("-c,--config", common.config_file, "key = value configuration file");
  sub->add_option("-o,--output", common.output, "output CSV (default: stdout)");
  sub->add_option("-j,--threads", common.threads, "worker threads (0 = all cores); results do not depend on it");
  for (const auto& key : wvfreq::config_keys()) {
    const std::string name(key.name);
    std::string help(key.help);
    if (!key.default_value.empty()) help += " [" + std::string(key.default_value) + "]";
    sub->add_option_function<std::string>(
        "--" + name, [&common, name](const std::string& v) { common.overrides[name] = v; }, help);
  }
}

wvfreq::ExperimentConfig build_config(const Common& common) {
  wvfreq::ExperimentConfig config;
  if (!common.config_file.empty()) config.load_file(common.config_file);
  for (const auto& [k, v] : common.overrides) config.set(k, v);
  config.set_threads(common.threads);
  return config;
}

template <class Fn>
int with_output(const Common& common, Fn&& fn) {
  if (common.output.empty()) return fn(std::cout);
  std::ofstream out(common.output);
  if (!out) throw wvfreq::ValidationError("cannot write " + common.output);
  return fn(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weak-value interferometric frequency measurement simulator"};
  app.require_subcommand(1);

  Common common;
  std::string positions_file, references_file;

  auto* slope = app.add_subcommand("slope", "deflection vs detuning sweep and slope fit");
  auto* spectrum = app.add_subcommand("spectrum", "driven and undriven detector noise spectra");
  auto* sensitivity = app.add_subcommand("sensitivity", "ideal and simulated frequency sensitivity");
  auto* range = app.add_subcommand("range", "usable tuning range under the weak value condition");
  auto* simulate = app.add_subcommand("simulate", "raw detector time series");
  auto* calibrate = app.add_subcommand("calibrate", "scan-to-frequency calibration from reference lines");
  for (auto* sub : {slope, spectrum, sensitivity, range, simulate, calibrate}) add_common(sub, common);
  calibrate->add_option("positions", positions_file, "observed line positions, one per line")->required();
  calibrate->add_option("references", references_file, "reference-line table")
      ->default_str((wvfreq::default_data_dir() / "rb_d2_lines.txt").string());

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(wvfreq::ExitCode::kValidation);
  }

  try {
    const auto config = build_config(common);
    return with_output(common, [&](std::ostream& out) {
      if (*slope) return wvfreq::cmd_slope(config, out, std::cerr);
      if (*spectrum) return wvfreq::cmd_spectrum(config, out, std::cerr);
      if (*sensitivity) return wvfreq::cmd_sensitivity(config, out, std::cerr);
      if (*range) return wvfreq::cmd_range(config, out, std::cerr);
      if (*simulate) return wvfreq::cmd_simulate(config, out, std::cerr);
      const std::filesystem::path refs =
          references_file.empty() ? wvfreq::default_data_dir() / "rb_d2_lines.txt" : std::filesystem::path(references_file);
      return wvfreq::cmd_calibrate(config, positions_file, refs, out, std::cerr);
    });
  } catch (const wvfreq::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(wvfreq::ExitCode::kNumerical);
  }
}
