#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wvfreq/calibration.hpp"
#include "wvfreq/dispersion.hpp"
#include "wvfreq/interferometer.hpp"
#include "wvfreq/noise.hpp"
#include "wvfreq/signal_chain.hpp"

namespace wvfreq {

enum class Dimension { kLength, kFrequency, kTime, kPower, kAngle, kSlope, kRatio, kCount, kText, kFrequencyList };

/// Parses "388um", "2mW", "9.1pm/MHz", "44.8deg" ... into SI. A bare number
/// is accepted only for dimensionless, count and zero values.
double parse_quantity(std::string_view text, Dimension dim);
std::vector<double> parse_frequency_list(std::string_view text);

struct ConfigKey {
  std::string_view name;
  Dimension dim;
  std::string_view default_value;  // empty: unset unless given
  std::string_view help;
};

/// Every recognised configuration key, in canonical (alphabetical) order.
std::span<const ConfigKey> config_keys();

/// Flat key = value configuration. Later sources override earlier ones;
/// values keep their textual form until resolve().
class ExperimentConfig {
 public:
  ExperimentConfig();

  /// Reads `key = value` lines ('#' comments).
  void load(std::istream& in);
  void load_file(const std::filesystem::path& path);
  void set(std::string_view key, std::string_view value);
  bool is_set(std::string_view key) const;

  const std::string& text(std::string_view key) const;
  double number(std::string_view key) const;
  std::int64_t count(std::string_view key) const;
  std::vector<double> frequency_list(std::string_view key) const;

  /// Canonical `key=value` lines with SI values, used for hashing and output.
  std::vector<std::pair<std::string, std::string>> canonical() const;
  std::string hash() const;

  /// Worker threads for independent sweep points; never affects results.
  unsigned threads() const { return threads_; }
  void set_threads(unsigned n) { threads_ = n; }

 private:
  unsigned threads_ = 1;
  std::map<std::string, std::string, std::less<>> values_;
  std::map<std::string, bool, std::less<>> explicit_;
};

/// Physics objects derived from a configuration.
struct ResolvedExperiment {
  SellmeierModel material;
  OpticalCarrier carrier;
  double power;
  double phase;
  double apex_angle;
  DispersionChain chain;
  InterferometerState state;
  Apparatus apparatus;
  double photons_per_sample;
  double sample_rate;
  ModulationConfig modulation;
  FilterSpec filter;
  std::uint64_t seed;
  unsigned threads;
  Metadata metadata;  // config entries, derived values and the hash
};

ResolvedExperiment resolve(const ExperimentConfig& config);

/// Directory holding the shipped material and reference-line tables.
std::filesystem::path default_data_dir();

// --- Recipes --------------------------------------------------------------

struct SweepPoint {
  double delta_nu = 0.0;   // Hz
  double deflection = 0.0; // m, mean per-cycle peak divided by the chain gain
  double error = 0.0;      // m, standard deviation of the mean
};

struct SlopeResult {
  std::vector<SweepPoint> points;
  LineFit fit;
  double amplification = 0.0;
  double unamplified_slope = 0.0;  // m/Hz, lever arm l·dδ/dν
  double model_slope = 0.0;        // m/Hz, 2σ²cot(φ/2) k₀ dδ/dν
  double chain_gain = 0.0;
};

SlopeResult run_slope(const ResolvedExperiment& ex, const std::vector<double>& sweep, std::size_t cycles,
                      double settle_time);

struct SpectrumResult {
  Spectrum driven;
  Spectrum undriven;
  double fundamental_to_floor_db = 0.0;
  double undriven_max_excess_db = 0.0;  // max bin 5–50 Hz above the undriven floor
  double second_harmonic_db = 0.0;      // relative to the fundamental
  double third_harmonic_db = 0.0;
  double driven_floor_db = 0.0;
  double undriven_floor_db = 0.0;
};

SpectrumResult run_spectrum(const ResolvedExperiment& ex, double drive, double duration, double segment,
                            Window window);

struct SensitivityResult {
  double ideal = 0.0;  // Hz/√Hz
  bool unreachable = false;
  SensitivityReport shot_noise;  // 1 s shot-noise report
  SensitivityReport simulated;   // from the simulated slope and noise floor
  double filtered_noise = 0.0;   // m rms at the detector, after filtering
  double noise_bandwidth = 0.0;  // Hz
  double fitted_slope = 0.0;     // m/Hz
  double ratio = 0.0;            // simulated / ideal
  RangeResult range;
};

SensitivityResult run_sensitivity(const ResolvedExperiment& ex, const std::vector<double>& sweep, std::size_t cycles,
                                  double settle_time, double noise_duration, double range_threshold);

// --- Command entry points (write CSV/text to `out`) ------------------------

int cmd_slope(const ExperimentConfig& config, std::ostream& out, std::ostream& log);
int cmd_spectrum(const ExperimentConfig& config, std::ostream& out, std::ostream& log);
int cmd_sensitivity(const ExperimentConfig& config, std::ostream& out, std::ostream& log);
int cmd_range(const ExperimentConfig& config, std::ostream& out, std::ostream& log);
int cmd_simulate(const ExperimentConfig& config, std::ostream& out, std::ostream& log);
int cmd_calibrate(const ExperimentConfig& config, const std::filesystem::path& positions_file,
                  const std::filesystem::path& references_file, std::ostream& out, std::ostream& log);

}  // namespace wvfreq
