#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wvfreq/dispersion.hpp"
#include "wvfreq/interferometer.hpp"
#include "wvfreq/noise.hpp"

namespace wvfreq {

struct TimeSeries {
  double sample_rate = 1.0;  // Hz
  double t0 = 0.0;           // s
  std::vector<double> samples;

  std::size_t size() const { return samples.size(); }
  double time(std::size_t i) const { return t0 + static_cast<double>(i) / sample_rate; }
  /// Samples from `start` (s, relative to t0) onwards.
  TimeSeries tail_from(double start) const;
};

struct ModulationConfig {
  double frequency = 10.0;  // Hz
  double amplitude = 0.0;   // Hz, peak optical detuning
};

struct FilterSpec {
  double center = 10.0;  // Hz
  int stages = 2;        // 6 dB/octave skirts each
  double q = 1.0;        // asymptotes of each stage cross at unity gain at the centre
  double gain = 1.0e4;
};

/// Everything upstream of the detector output.
struct Apparatus {
  DispersionChain chain;
  InterferometerState state;
  NoiseExtensions noise{};
  std::size_t grid_points = 4096;
  DetectionMethod method = DetectionMethod::kAuto;
};

/// Noisy split-detector position (m) sampled at `sample_rate` while the
/// carrier is swept as ν₀ + A sin(2π f t). `photons_per_sample` counts photons
/// entering the interferometer during one sample period.
TimeSeries synthesize_run(const Apparatus& apparatus, const ModulationConfig& modulation, double duration,
                          double sample_rate, double photons_per_sample, std::uint64_t seed);

/// Cascade of second-order band-pass sections (one zero at DC, 6 dB/octave
/// skirts), each the bilinear image of ω₀s/Q / (s² + ω₀s/Q + ω₀²) pre-warped so
/// the digital peak is exactly unity at the centre. Direct form I, zero state.
class BandpassCascade {
 public:
  BandpassCascade(const FilterSpec& spec, double sample_rate);

  TimeSeries apply(const TimeSeries& in) const;
  /// Designed digital response H(e^{jωT}) including the output gain.
  std::complex<double> response(double frequency) const;
  /// Continuous-time prototype response including the output gain.
  std::complex<double> prototype_response(double frequency) const;
  /// One-sided equivalent noise bandwidth (Hz) normalised to the peak gain.
  double noise_bandwidth() const;
  /// Peak gain of the whole chain at the centre frequency.
  double chain_gain() const;

 private:
  struct Biquad {
    double b0, b1, b2, a1, a2;
  };
  FilterSpec spec_;
  double sample_rate_;
  Biquad section_;
};

TimeSeries bandpass(const TimeSeries& series, const FilterSpec& spec);

struct PeakStats {
  std::vector<double> peaks;
  double mean = 0.0;
  double stddev = 0.0;
  double std_of_mean = 0.0;
};

/// Maximum of each `cycle_period`-long window, for the first n_cycles windows.
PeakStats extract_peaks(const TimeSeries& series, double cycle_period, std::size_t n_cycles);

struct SlopePoint {
  double x = 0.0;
  double y = 0.0;
  double error = 0.0;  // ≤ 0 for every point means unweighted
};

struct LineFit {
  double slope = 0.0;
  double slope_error = 0.0;
  double intercept = 0.0;
  double intercept_error = 0.0;
  double chi2 = 0.0;
  std::vector<double> residuals;
};

/// Straight-line least squares. With `sigma` empty the fit is unweighted and
/// the parameter errors are scaled by the residual variance (zero for n = 2);
/// otherwise weights are 1/σ² and errors come from the weighted normal matrix.
/// Sums run in index order.
LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> sigma = {});

/// Weighted line through (Δν, deflection ± error). Points are put in a
/// canonical order first, so the result does not depend on input order.
LineFit slope_fit(std::vector<SlopePoint> points);

enum class Window { kRectangular, kHann };

Window parse_window(const std::string& name);
std::string window_name(Window w);

struct SpectrumOptions {
  std::size_t segment_length = 0;  // samples per averaged segment; 0 = whole series
  double reference_power = 1.0;    // power mapped to 0 dB
};

struct Spectrum {
  std::vector<double> frequencies;  // Hz, 0 .. fs/2
  std::vector<double> power_db;
  double resolution_bw = 0.0;       // Hz, equivalent noise bandwidth of one bin
  double reference_power = 1.0;
  std::size_t segments = 1;

  double power(std::size_t i) const;
  std::size_t nearest_bin(double frequency) const;
};

/// Averaged windowed periodogram, scaled so that a sinusoid of amplitude A
/// centred on a bin reads A²/2 before referencing.
Spectrum power_spectrum(const TimeSeries& series, Window window, const SpectrumOptions& options = {});

/// Median bin power (dB) in [f_lo, f_hi], skipping bins within `half_width` of
/// any frequency in `exclude`.
double noise_floor_db(const Spectrum& spectrum, double f_lo, double f_hi, std::span<const double> exclude = {},
                      double half_width = 0.0);

/// Largest bin power (dB) within `half_width` of `frequency`.
double line_power_db(const Spectrum& spectrum, double frequency, double half_width = 0.0);

using Metadata = std::vector<std::pair<std::string, std::string>>;

/// CSV: '#'-prefixed `key=value` metadata, a column header, then one record
/// per sample/bin with 17 significant digits.
void write_csv(std::ostream& out, const TimeSeries& series, const Metadata& meta = {});
void write_csv(std::ostream& out, const Spectrum& spectrum, const Metadata& meta = {});
TimeSeries read_time_series_csv(std::istream& in, Metadata* meta = nullptr);
Spectrum read_spectrum_csv(std::istream& in, Metadata* meta = nullptr);

}  // namespace wvfreq
