#include <array>
#include <cstdio>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "text_util.hpp"
#include "wvfreq/constants.hpp"
#include "wvfreq/errors.hpp"
#include "wvfreq/experiment.hpp"
#include "wvfreq/parallel.hpp"

namespace wvfreq {

namespace {

using detail::format_double;

void write_header(std::ostream& out, std::string_view kind, const Metadata& config_meta, const Metadata& results) {
  out << "# wvfreq " << kind << " v1\n";
  for (const auto& [k, v] : config_meta) out << "# " << k << '=' << v << '\n';
  for (const auto& [k, v] : results) out << "# " << k << '=' << v << '\n';
}

Error annotate(const Error& e, std::size_t index, double delta_nu) {
  return Error(e.code(), "sweep point " + std::to_string(index) + " (delta_nu " + format_double(delta_nu) +
                             " Hz): " + e.what());
}

TimeSeries filtered_noise_run(const ResolvedExperiment& ex, const BandpassCascade& filter, double settle,
                              double duration, std::uint64_t seed) {
  ModulationConfig m = ex.modulation;
  m.amplitude = 0.0;
  const auto raw = synthesize_run(ex.apparatus, m, settle + duration, ex.sample_rate, ex.photons_per_sample, seed);
  return filter.apply(raw).tail_from(settle);
}

double rms_about_mean(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Seed offsets keep the independent recipes on disjoint generator streams.
constexpr std::uint64_t kDrivenSeedOffset = 1000;
constexpr std::uint64_t kUndrivenSeedOffset = 2000;
constexpr std::uint64_t kNoiseFloorSeedOffset = 3000;

}  // namespace

SlopeResult run_slope(const ResolvedExperiment& ex, const std::vector<double>& sweep, std::size_t cycles,
                      double settle_time) {
  if (sweep.empty()) throw DegenerateFitError("slope sweep is empty");
  const BandpassCascade filter(ex.filter, ex.sample_rate);
  SlopeResult r;
  r.chain_gain = filter.chain_gain();
  r.points.resize(sweep.size());
  parallel_for(sweep.size(), ex.threads, [&](std::size_t i) {
    try {
      ModulationConfig m = ex.modulation;
      m.amplitude = sweep[i];
      const double duration = settle_time + static_cast<double>(cycles) / m.frequency;
      const auto raw = synthesize_run(ex.apparatus, m, duration, ex.sample_rate, ex.photons_per_sample, ex.seed + i);
      const auto filtered = filter.apply(raw).tail_from(settle_time);
      const auto peaks = extract_peaks(filtered, 1.0 / m.frequency, cycles);
      r.points[i] = {sweep[i], peaks.mean / r.chain_gain, peaks.std_of_mean / r.chain_gain};
    } catch (const Error& e) {
      throw annotate(e, i, sweep[i]);
    }
  });
  std::vector<SlopePoint> pts;
  for (const auto& p : r.points) pts.push_back({p.delta_nu, p.deflection, p.error});
  r.fit = slope_fit(std::move(pts));
  r.amplification = amplification_factor(ex.state);
  r.unamplified_slope = ex.state.path_length * ex.chain.deflection_slope();
  r.model_slope = r.amplification * r.unamplified_slope;
  return r;
}

SpectrumResult run_spectrum(const ResolvedExperiment& ex, double drive, double duration, double segment,
                            Window window) {
  std::array<TimeSeries, 2> raw;
  parallel_for(2, ex.threads, [&](std::size_t i) {
    ModulationConfig m = ex.modulation;
    m.amplitude = i == 0 ? drive : 0.0;
    raw[i] = synthesize_run(ex.apparatus, m, duration, ex.sample_rate, ex.photons_per_sample,
                            ex.seed + (i == 0 ? kDrivenSeedOffset : kUndrivenSeedOffset));
  });
  SpectrumOptions opts;
  opts.segment_length = static_cast<std::size_t>(std::llround(segment * ex.sample_rate));
  const double fmod = ex.modulation.frequency;
  const auto unreferenced = power_spectrum(raw[0], window, opts);
  opts.reference_power = unreferenced.power(unreferenced.nearest_bin(fmod));

  SpectrumResult r;
  r.driven = power_spectrum(raw[0], window, opts);
  r.undriven = power_spectrum(raw[1], window, opts);

  const double f_hi = std::min(100.0, 0.5 * ex.sample_rate);
  const double df = r.driven.frequencies[1] - r.driven.frequencies[0];
  const double half_width = std::max(0.5, 3.0 * df);
  std::vector<double> harmonics;
  for (int h = 1; h * fmod <= f_hi + half_width; ++h) harmonics.push_back(h * fmod);

  const double fundamental = line_power_db(r.driven, fmod);
  r.driven_floor_db = noise_floor_db(r.driven, 5.0, f_hi, harmonics, half_width);
  r.fundamental_to_floor_db = fundamental - r.driven_floor_db;
  r.second_harmonic_db = line_power_db(r.driven, 2.0 * fmod) - fundamental;
  r.third_harmonic_db = line_power_db(r.driven, 3.0 * fmod) - fundamental;

  r.undriven_floor_db = noise_floor_db(r.undriven, 5.0, f_hi);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < r.undriven.frequencies.size(); ++k) {
    const double f = r.undriven.frequencies[k];
    if (f >= 5.0 && f <= 50.0) peak = std::max(peak, r.undriven.power_db[k]);
  }
  r.undriven_max_excess_db = peak - r.undriven_floor_db;
  return r;
}

SensitivityResult run_sensitivity(const ResolvedExperiment& ex, const std::vector<double>& sweep, std::size_t cycles,
                                  double settle_time, double noise_duration, double range_threshold) {
  SensitivityResult r;
  const double sigma = ex.state.beam.sigma;
  r.range = usable_range(sigma, ex.chain, range_threshold);
  r.ideal = ideal_sensitivity(ex.power, sigma, ex.chain);
  if (!std::isfinite(r.ideal)) {
    r.unreachable = true;
    return r;
  }
  r.shot_noise = shot_noise_report(ex.power, sigma, ex.chain, 1.0, *std::min_element(sweep.begin(), sweep.end()),
                                   range_threshold);

  const auto slope = run_slope(ex, sweep, cycles, settle_time);
  r.fitted_slope = slope.fit.slope;
  const BandpassCascade filter(ex.filter, ex.sample_rate);
  const auto noise = filtered_noise_run(ex, filter, settle_time, noise_duration, ex.seed + kNoiseFloorSeedOffset);
  r.filtered_noise = rms_about_mean(noise.samples) / filter.chain_gain();
  r.noise_bandwidth = filter.noise_bandwidth();

  auto& s = r.simulated;
  s.integration_time = 1.0 / (2.0 * r.noise_bandwidth);
  s.min_frequency_shift = r.filtered_noise / r.fitted_slope;
  s.min_deflection = s.min_frequency_shift * ex.chain.deflection_slope();
  s.sensitivity_per_rt_hz = measured_sensitivity(s.min_frequency_shift, s.integration_time);
  s.snr = r.fitted_slope * *std::min_element(sweep.begin(), sweep.end()) / r.filtered_noise;
  s.usable_range = r.range.range;
  r.ratio = s.sensitivity_per_rt_hz / r.ideal;
  return r;
}

// ---------------------------------------------------------------------------

int cmd_slope(const ExperimentConfig& config, std::ostream& out, std::ostream& log) {
  const auto ex = resolve(config);
  const auto r = run_slope(ex, config.frequency_list("sweep"), static_cast<std::size_t>(config.count("cycles")),
                           config.number("settle_time"));
  write_header(out, "slope", ex.metadata,
               {{"fit.slope", format_double(r.fit.slope)},
                {"fit.slope_error", format_double(r.fit.slope_error)},
                {"fit.intercept", format_double(r.fit.intercept)},
                {"fit.intercept_error", format_double(r.fit.intercept_error)},
                {"fit.chi2", format_double(r.fit.chi2)},
                {"amplification", format_double(r.amplification)},
                {"unamplified_slope", format_double(r.unamplified_slope)},
                {"model_slope", format_double(r.model_slope)},
                {"chain_gain", format_double(r.chain_gain)}});
  out << "delta_nu_hz,deflection_m,std_of_mean_m,fit_m\n";
  for (const auto& p : r.points) {
    out << format_double(p.delta_nu) << ',' << format_double(p.deflection) << ',' << format_double(p.error) << ','
        << format_double(r.fit.intercept + r.fit.slope * p.delta_nu) << '\n';
  }
  log << "slope " << r.fit.slope * 1e18 << " +/- " << r.fit.slope_error * 1e18 << " pm/MHz (model "
      << r.model_slope * 1e18 << " pm/MHz), amplification " << r.amplification << '\n';
  return 0;
}

int cmd_spectrum(const ExperimentConfig& config, std::ostream& out, std::ostream& log) {
  const auto ex = resolve(config);
  if (!(ex.photons_per_sample > 0.0)) throw ValidationError("configuration delivers no photons");
  const auto r = run_spectrum(ex, config.number("drive"), config.number("spectrum_duration"),
                              config.number("spectrum_segment"), parse_window(config.text("window")));
  write_header(out, "spectrum-pair", ex.metadata,
               {{"resolution_bw", format_double(r.driven.resolution_bw)},
                {"reference_power", format_double(r.driven.reference_power)},
                {"segments", std::to_string(r.driven.segments)},
                {"fundamental_to_floor_db", format_double(r.fundamental_to_floor_db)},
                {"second_harmonic_db", format_double(r.second_harmonic_db)},
                {"third_harmonic_db", format_double(r.third_harmonic_db)},
                {"undriven_floor_db", format_double(r.undriven_floor_db)},
                {"undriven_max_excess_db", format_double(r.undriven_max_excess_db)}});
  out << "frequency_hz,driven_db,undriven_db\n";
  for (std::size_t k = 0; k < r.driven.frequencies.size(); ++k) {
    out << format_double(r.driven.frequencies[k]) << ',' << format_double(r.driven.power_db[k]) << ','
        << format_double(r.undriven.power_db[k]) << '\n';
  }
  log << "fundamental " << r.fundamental_to_floor_db << " dB above floor; harmonics 2f " << r.second_harmonic_db
      << " dB, 3f " << r.third_harmonic_db << " dB; undriven max excess " << r.undriven_max_excess_db << " dB\n";
  return 0;
}

int cmd_sensitivity(const ExperimentConfig& config, std::ostream& out, std::ostream& log) {
  const auto ex = resolve(config);
  const auto r = run_sensitivity(ex, config.frequency_list("sweep"), static_cast<std::size_t>(config.count("cycles")),
                                 config.number("settle_time"), config.number("noise_duration"),
                                 config.number("range_threshold"));
  Metadata results{{"unreachable", r.unreachable ? "true" : "false"}};
  write_header(out, "sensitivity", ex.metadata, results);
  out << "quantity,value,unit\n";
  auto row = [&](std::string_view name, double v, std::string_view unit) {
    out << name << ',' << format_double(v) << ',' << unit << '\n';
  };
  row("ideal_sensitivity", r.ideal, "Hz/rtHz");
  row("usable_range", r.range.range, "Hz");
  row("usable_range_clamped", r.range.clamped ? 1.0 : 0.0, "flag");
  if (r.unreachable) {
    log << "no photons reach the interferometer: sensitivity unreachable\n";
    return 0;
  }
  row("shot_noise_min_deflection", r.shot_noise.min_deflection, "rad");
  row("shot_noise_snr_at_min_sweep_1s", r.shot_noise.snr, "1");
  row("simulated_slope", r.fitted_slope, "m/Hz");
  row("simulated_filtered_noise", r.filtered_noise, "m");
  row("simulated_noise_bandwidth", r.noise_bandwidth, "Hz");
  row("simulated_integration_time", r.simulated.integration_time, "s");
  row("simulated_snr_at_min_sweep", r.simulated.snr, "1");
  row("simulated_min_frequency_shift", r.simulated.min_frequency_shift, "Hz");
  row("simulated_min_deflection", r.simulated.min_deflection, "rad");
  row("simulated_sensitivity", r.simulated.sensitivity_per_rt_hz, "Hz/rtHz");
  row("simulated_to_ideal_ratio", r.ratio, "1");
  log << "ideal " << r.ideal * 1e-3 << " kHz/rtHz, simulated " << r.simulated.sensitivity_per_rt_hz * 1e-3
      << " kHz/rtHz (ratio " << r.ratio << "), usable range " << r.range.range * 1e-12 << " THz\n";
  return 0;
}

int cmd_range(const ExperimentConfig& config, std::ostream& out, std::ostream& log) {
  const auto ex = resolve(config);
  const double threshold = config.number("range_threshold");
  const auto r = usable_range(ex.state.beam.sigma, ex.chain, threshold);
  const double lambda = ex.carrier.wavelength();
  const double span_m = lambda - kSpeedOfLight / (ex.carrier.frequency() + r.range);
  const double k_sigma = r.range > 0.0 ? std::abs(ex.chain.kick(r.range)) * ex.state.beam.sigma : 0.0;
  write_header(out, "range", ex.metadata, {});
  out << "threshold,range_hz,range_m,clamped,k_sigma\n";
  out << format_double(threshold) << ',' << format_double(r.range) << ',' << format_double(span_m) << ','
      << (r.clamped ? 1 : 0) << ',' << format_double(k_sigma) << '\n';
  log << "usable range " << r.range * 1e-12 << " THz (" << span_m * 1e9 << " nm)" << (r.clamped ? " [clamped]" : "")
      << '\n';
  return 0;
}

int cmd_simulate(const ExperimentConfig& config, std::ostream& out, std::ostream& log) {
  const auto ex = resolve(config);
  ModulationConfig m = ex.modulation;
  m.amplitude = config.number("drive");
  auto series =
      synthesize_run(ex.apparatus, m, config.number("duration"), ex.sample_rate, ex.photons_per_sample, ex.seed);
  const std::string& filtered = config.text("filtered");
  if (filtered == "true") {
    series = bandpass(series, ex.filter);
  } else if (filtered != "false") {
    throw ValidationError("filtered must be true or false");
  }
  Metadata meta = ex.metadata;
  meta.emplace_back("seed", std::to_string(ex.seed));
  write_csv(out, series, meta);
  log << "wrote " << series.size() << " samples\n";
  return 0;
}

int cmd_calibrate(const ExperimentConfig& config, const std::filesystem::path& positions_file,
                  const std::filesystem::path& references_file, std::ostream& out, std::ostream& log) {
  const auto positions = load_scan_positions(positions_file);
  const auto lines = load_reference_lines(references_file);
  const auto cal = fit_scan_calibration(positions, lines);
  const double value = config.number("calibration_value");
  const double err = propagate_calibration_error(cal, value);
  Metadata cfg;
  for (const auto& [k, v] : config.canonical()) cfg.emplace_back("config." + k, v);
  cfg.emplace_back("config_hash", config.hash());
  write_header(out, "calibration", cfg,
               {{"slope", format_double(cal.slope)},
                {"slope_error", format_double(cal.slope_error)},
                {"fractional_slope_error", format_double(cal.fractional_slope_error())},
                {"intercept", format_double(cal.intercept)},
                {"residual_rms", format_double(cal.residual_rms)},
                {"propagated_value", format_double(value)},
                {"propagated_error", format_double(err)}});
  out << "label,reference_hz,position,residual_hz\n";
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out << lines[i].label << ',' << format_double(lines[i].relative_frequency) << ',' << format_double(positions[i])
        << ',' << format_double(cal.residuals[i]) << '\n';
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.0f +/- %.1f kHz/rtHz (%.2f%% calibration slope error)", value * 1e-3, err * 1e-3,
                100.0 * cal.fractional_slope_error());
  log << "slope " << cal.slope << " Hz/unit, residual rms " << cal.residual_rms << " Hz\n" << buf << '\n';
  return 0;
}

}  // namespace wvfreq
