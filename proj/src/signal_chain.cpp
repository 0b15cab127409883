#include "wvfreq/signal_chain.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <tuple>

#include <fftw3.h>

#include "text_util.hpp"
#include "wvfreq/constants.hpp"
#include "wvfreq/errors.hpp"

namespace wvfreq {

TimeSeries TimeSeries::tail_from(double start) const {
  const auto skip = static_cast<std::size_t>(std::llround(start * sample_rate));
  if (skip > samples.size()) throw ValidationError("tail start lies beyond the end of the series");
  TimeSeries out;
  out.sample_rate = sample_rate;
  out.t0 = time(skip);
  out.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(skip), samples.end());
  return out;
}

// ---------------------------------------------------------------------------
// Synthesis

TimeSeries synthesize_run(const Apparatus& apparatus, const ModulationConfig& modulation, double duration,
                          double sample_rate, double photons_per_sample, std::uint64_t seed) {
  if (!(sample_rate > 0.0)) throw ValidationError("sample rate must be positive");
  if (!(duration > 0.0)) throw ValidationError("run duration must be positive");
  if (!(modulation.frequency > 0.0) || !(modulation.amplitude >= 0.0)) {
    throw ValidationError("modulation needs frequency > 0 and amplitude >= 0");
  }
  const double cycles = duration * modulation.frequency;
  if (std::abs(cycles - std::round(cycles)) > 1e-9 * std::max(1.0, cycles)) {
    throw ValidationError("run duration must hold a whole number of modulation cycles");
  }
  const auto& state = apparatus.state;
  const double sigma = state.beam.sigma;
  if (!(photons_per_sample * postselection_probability(state.phase) >= 10.0)) {
    throw ValidationError("fewer than 10 postselected photons per sample");
  }
  for (double extreme : {modulation.amplitude, -modulation.amplitude}) {
    if (classify_weak_value(apparatus.chain.kick(extreme), sigma) == WeakValueRegime::kInvalid) {
      throw WeakValueValidityError("modulation extreme " + detail::format_double(extreme) +
                                   " Hz violates the weak value condition k sigma <= 0.5");
    }
  }

  const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
  const auto grid = detector_grid(sigma, apparatus.grid_points);
  const DarkPortTable table(state, grid);
  const double dark_per_sample = apparatus.noise.dark_count_rate / sample_rate;

  TimeSeries out;
  out.sample_rate = sample_rate;
  out.samples.resize(n);
  Rng rng(seed);
  std::normal_distribution<double> electronic(0.0, 1.0);
  const double omega = 2.0 * kPi * modulation.frequency;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double dnu = modulation.amplitude * std::sin(omega * t);
    const double kick = dnu == 0.0 ? 0.0 : apparatus.chain.kick(dnu);
    const auto tab = table.tabulate(kick);
    const ProfileSampler sampler(tab.profile);
    const auto n_detected =
        static_cast<std::int64_t>(std::llround(photons_per_sample * (tab.transmission + state.background)));
    auto e = detect_split(sampler, std::max<std::int64_t>(n_detected, 1), rng, apparatus.method);
    double value = e.position;
    if (dark_per_sample > 0.0) {
      std::poisson_distribution<std::int64_t> dark(dark_per_sample);
      const std::int64_t n_dark = dark(rng);
      std::binomial_distribution<std::int64_t> right(n_dark, 0.5);
      const std::int64_t r = e.right + right(rng);
      const std::int64_t total = e.left + e.right + n_dark;
      value = static_cast<double>(2 * r - total) / static_cast<double>(total) * sampler.split_scale();
    }
    if (apparatus.noise.electronic_noise > 0.0) value += apparatus.noise.electronic_noise * electronic(rng);
    out.samples[i] = value;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Filtering

BandpassCascade::BandpassCascade(const FilterSpec& spec, double sample_rate) : spec_(spec), sample_rate_(sample_rate) {
  if (!(spec.center > 0.0) || spec.stages < 1 || !(spec.q > 0.0)) {
    throw ValidationError("filter needs centre > 0, stages >= 1 and Q > 0");
  }
  if (!(sample_rate >= 20.0 * spec.center)) {
    throw AliasingError("sample rate " + detail::format_double(sample_rate) + " Hz is below 20x the filter centre " +
                        detail::format_double(spec.center) + " Hz");
  }
  const double w0 = 2.0 * kPi * spec.center / sample_rate;
  const double alpha = std::sin(w0) / (2.0 * spec.q);
  const double a0 = 1.0 + alpha;
  section_ = {alpha / a0, 0.0, -alpha / a0, -2.0 * std::cos(w0) / a0, (1.0 - alpha) / a0};
}

TimeSeries BandpassCascade::apply(const TimeSeries& in) const {
  if (in.sample_rate != sample_rate_) throw ValidationError("filter designed for a different sample rate");
  TimeSeries out = in;
  const auto& s = section_;
  for (int stage = 0; stage < spec_.stages; ++stage) {
    double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
    for (double& v : out.samples) {
      const double y = s.b0 * v + s.b1 * x1 + s.b2 * x2 - s.a1 * y1 - s.a2 * y2;
      x2 = x1;
      x1 = v;
      y2 = y1;
      y1 = y;
      v = y;
    }
  }
  for (double& v : out.samples) v *= spec_.gain;
  return out;
}

std::complex<double> BandpassCascade::response(double frequency) const {
  const std::complex<double> zi = std::polar(1.0, -2.0 * kPi * frequency / sample_rate_);
  const auto& s = section_;
  const std::complex<double> h = (s.b0 + s.b1 * zi + s.b2 * zi * zi) / (1.0 + s.a1 * zi + s.a2 * zi * zi);
  return spec_.gain * std::pow(h, spec_.stages);
}

std::complex<double> BandpassCascade::prototype_response(double frequency) const {
  const double w0 = 2.0 * kPi * spec_.center;
  const std::complex<double> s(0.0, 2.0 * kPi * frequency);
  const std::complex<double> h = (w0 / spec_.q) * s / (s * s + (w0 / spec_.q) * s + w0 * w0);
  return spec_.gain * std::pow(h, spec_.stages);
}

double BandpassCascade::chain_gain() const { return std::abs(response(spec_.center)); }

double BandpassCascade::noise_bandwidth() const {
  // Σh² of the impulse response equals 2B/fs for unit peak gain.
  TimeSeries impulse;
  impulse.sample_rate = sample_rate_;
  const auto n = static_cast<std::size_t>(std::ceil(200.0 * spec_.q * sample_rate_ / spec_.center));
  impulse.samples.assign(std::max<std::size_t>(n, 1024), 0.0);
  impulse.samples[0] = 1.0;
  const auto h = apply(impulse);
  double energy = 0.0;
  for (double v : h.samples) energy += v * v;
  const double g = chain_gain();
  return 0.5 * sample_rate_ * energy / (g * g);
}

TimeSeries bandpass(const TimeSeries& series, const FilterSpec& spec) {
  return BandpassCascade(spec, series.sample_rate).apply(series);
}

// ---------------------------------------------------------------------------
// Peak extraction and fitting

PeakStats extract_peaks(const TimeSeries& series, double cycle_period, std::size_t n_cycles) {
  if (n_cycles < 1) throw ValidationError("need at least one cycle");
  const double per_cycle = cycle_period * series.sample_rate;
  const auto spc = static_cast<std::size_t>(std::llround(per_cycle));
  if (spc < 2 || std::abs(per_cycle - static_cast<double>(spc)) > 1e-9 * per_cycle) {
    throw ValidationError("cycle period must span a whole number (>= 2) of samples");
  }
  if (series.size() < n_cycles * spc) {
    throw ValidationError("series holds " + std::to_string(series.size() / spc) + " complete cycles, " +
                          std::to_string(n_cycles) + " requested");
  }
  PeakStats s;
  s.peaks.resize(n_cycles);
  for (std::size_t c = 0; c < n_cycles; ++c) {
    const auto begin = series.samples.begin() + static_cast<std::ptrdiff_t>(c * spc);
    s.peaks[c] = *std::max_element(begin, begin + static_cast<std::ptrdiff_t>(spc));
  }
  double sum = 0.0;
  for (double p : s.peaks) sum += p;
  s.mean = sum / static_cast<double>(n_cycles);
  if (n_cycles > 1) {
    double ss = 0.0;
    for (double p : s.peaks) ss += (p - s.mean) * (p - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(n_cycles - 1));
    s.std_of_mean = s.stddev / std::sqrt(static_cast<double>(n_cycles));
  }
  return s;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> sigma) {
  const std::size_t n = x.size();
  if (y.size() != n || (!sigma.empty() && sigma.size() != n)) throw ValidationError("fit inputs differ in length");
  if (n < 2) throw DegenerateFitError("line fit needs at least two points");
  const bool weighted = !sigma.empty();
  std::vector<double> w(n, 1.0);
  if (weighted) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!(sigma[i] > 0.0)) throw ValidationError("fit errors must be positive");
      w[i] = 1.0 / (sigma[i] * sigma[i]);
    }
  }
  double sw = 0.0, swx = 0.0, swy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    swx += w[i] * x[i];
    swy += w[i] * y[i];
  }
  const double xbar = swx / sw;
  const double ybar = swy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - xbar;
    sxx += w[i] * dx * dx;
    sxy += w[i] * dx * (y[i] - ybar);
  }
  if (!(sxx > 0.0)) throw DegenerateFitError("abscissae are all identical");

  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = ybar - f.slope * xbar;
  f.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    f.residuals[i] = y[i] - (f.intercept + f.slope * x[i]);
    f.chi2 += w[i] * f.residuals[i] * f.residuals[i];
  }
  double var_slope = 1.0 / sxx;
  double var_intercept = 1.0 / sw + xbar * xbar / sxx;
  if (!weighted) {
    const double s2 = n > 2 ? f.chi2 / static_cast<double>(n - 2) : 0.0;
    var_slope *= s2;
    var_intercept *= s2;
  }
  f.slope_error = std::sqrt(var_slope);
  f.intercept_error = std::sqrt(var_intercept);
  return f;
}

LineFit slope_fit(std::vector<SlopePoint> points) {
  std::sort(points.begin(), points.end(), [](const SlopePoint& a, const SlopePoint& b) {
    return std::tie(a.x, a.y, a.error) < std::tie(b.x, b.y, b.error);
  });
  std::vector<double> x, y, e;
  std::size_t with_errors = 0;
  for (const auto& p : points) {
    x.push_back(p.x);
    y.push_back(p.y);
    e.push_back(p.error);
    if (p.error > 0.0) ++with_errors;
  }
  if (with_errors != 0 && with_errors != points.size()) {
    throw ValidationError("either every point or no point must carry an error");
  }
  return with_errors ? fit_line(x, y, e) : fit_line(x, y);
}

// ---------------------------------------------------------------------------
// Spectra

Window parse_window(const std::string& name) {
  if (name == "rect" || name == "rectangular") return Window::kRectangular;
  if (name == "hann") return Window::kHann;
  throw ValidationError("unknown window '" + name + "' (expected rect or hann)");
}

std::string window_name(Window w) { return w == Window::kHann ? "hann" : "rect"; }

double Spectrum::power(std::size_t i) const { return reference_power * std::pow(10.0, power_db[i] / 10.0); }

std::size_t Spectrum::nearest_bin(double frequency) const {
  if (frequencies.size() < 2) return 0;
  const double df = frequencies[1] - frequencies[0];
  const auto i = static_cast<std::ptrdiff_t>(std::llround(frequency / df));
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(frequencies.size()) - 1));
}

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffers {
  double* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan = nullptr;

  explicit FftwBuffers(std::size_t n) {
    in = fftw_alloc_real(n);
    out = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }
  ~FftwBuffers() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
  }
  FftwBuffers(const FftwBuffers&) = delete;
  FftwBuffers& operator=(const FftwBuffers&) = delete;
};

}  // namespace

Spectrum power_spectrum(const TimeSeries& series, Window window, const SpectrumOptions& options) {
  if (series.samples.empty()) throw ValidationError("cannot take the spectrum of an empty series");
  if (!(options.reference_power > 0.0)) throw ValidationError("reference power must be positive");
  const std::size_t len = options.segment_length == 0 ? series.size() : options.segment_length;
  if (len < 2 || len > series.size()) throw ValidationError("segment length must lie in [2, series length]");
  const std::size_t segments = series.size() / len;

  std::vector<double> w(len, 1.0);
  if (window == Window::kHann) {
    for (std::size_t i = 0; i < len; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / len);
  }
  double sum_w = 0.0, sum_w2 = 0.0;
  for (double v : w) {
    sum_w += v;
    sum_w2 += v * v;
  }

  const std::size_t bins = len / 2 + 1;
  std::vector<double> acc(bins, 0.0);
  FftwBuffers fft(len);
  for (std::size_t s = 0; s < segments; ++s) {
    for (std::size_t i = 0; i < len; ++i) fft.in[i] = series.samples[s * len + i] * w[i];
    fftw_execute(fft.plan);
    for (std::size_t k = 0; k < bins; ++k) {
      const double re = fft.out[k][0];
      const double im = fft.out[k][1];
      const bool edge = k == 0 || (len % 2 == 0 && k == len / 2);
      acc[k] += (edge ? 1.0 : 2.0) * (re * re + im * im) / (sum_w * sum_w);
    }
  }

  Spectrum sp;
  sp.reference_power = options.reference_power;
  sp.segments = segments;
  sp.resolution_bw = series.sample_rate * sum_w2 / (sum_w * sum_w);
  sp.frequencies.resize(bins);
  sp.power_db.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    sp.frequencies[k] = static_cast<double>(k) * series.sample_rate / static_cast<double>(len);
    const double p = acc[k] / static_cast<double>(segments);
    sp.power_db[k] = p > 0.0 ? 10.0 * std::log10(p / options.reference_power) : -400.0;
  }
  return sp;
}

double noise_floor_db(const Spectrum& spectrum, double f_lo, double f_hi, std::span<const double> exclude,
                      double half_width) {
  std::vector<double> band;
  for (std::size_t k = 0; k < spectrum.frequencies.size(); ++k) {
    const double f = spectrum.frequencies[k];
    if (f < f_lo || f > f_hi) continue;
    bool skip = false;
    for (double c : exclude) skip = skip || std::abs(f - c) <= half_width;
    if (!skip) band.push_back(spectrum.power_db[k]);
  }
  if (band.empty()) throw ValidationError("no spectrum bins in the requested noise band");
  const auto mid = band.begin() + static_cast<std::ptrdiff_t>(band.size() / 2);
  std::nth_element(band.begin(), mid, band.end());
  if (band.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(band.begin(), mid);
  return 10.0 * std::log10(0.5 * (std::pow(10.0, lower / 10.0) + std::pow(10.0, upper / 10.0)));
}

double line_power_db(const Spectrum& spectrum, double frequency, double half_width) {
  double best = -std::numeric_limits<double>::infinity();
  const std::size_t centre = spectrum.nearest_bin(frequency);
  best = spectrum.power_db[centre];
  for (std::size_t k = 0; k < spectrum.frequencies.size(); ++k) {
    if (std::abs(spectrum.frequencies[k] - frequency) <= half_width) best = std::max(best, spectrum.power_db[k]);
  }
  return best;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

void write_meta(std::ostream& out, const char* kind, const Metadata& base, const Metadata& meta) {
  out << "# wvfreq " << kind << " v1\n";
  for (const auto& [k, v] : base) out << "# " << k << '=' << v << '\n';
  for (const auto& [k, v] : meta) out << "# " << k << '=' << v << '\n';
}

// Reads metadata and the column header; leaves the stream at the first record.
Metadata read_meta(std::istream& in, const char* kind, std::string& header) {
  Metadata meta;
  std::string line;
  bool seen_kind = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] != '#') {
      header = line;
      break;
    }
    const auto body = detail::trim(std::string_view(line).substr(1));
    if (body.starts_with("wvfreq ")) {
      seen_kind = body.find(kind) != std::string_view::npos;
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) continue;
    meta.emplace_back(std::string(body.substr(0, eq)), std::string(body.substr(eq + 1)));
  }
  if (!seen_kind) throw ValidationError(std::string("CSV is not a wvfreq ") + kind + " file");
  return meta;
}

double meta_number(const Metadata& meta, const std::string& key) {
  for (const auto& [k, v] : meta) {
    if (k == key) return detail::parse_double(v, key);
  }
  throw ValidationError("CSV metadata lacks '" + key + "'");
}

}  // namespace

void write_csv(std::ostream& out, const TimeSeries& series, const Metadata& meta) {
  write_meta(out, "timeseries",
             {{"sample_rate", detail::format_double(series.sample_rate)},
              {"t0", detail::format_double(series.t0)},
              {"samples", std::to_string(series.size())}},
             meta);
  out << "time_s,value\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << detail::format_double(series.time(i)) << ',' << detail::format_double(series.samples[i]) << '\n';
  }
}

void write_csv(std::ostream& out, const Spectrum& spectrum, const Metadata& meta) {
  write_meta(out, "spectrum",
             {{"resolution_bw", detail::format_double(spectrum.resolution_bw)},
              {"reference_power", detail::format_double(spectrum.reference_power)},
              {"segments", std::to_string(spectrum.segments)}},
             meta);
  out << "frequency_hz,power_db\n";
  for (std::size_t k = 0; k < spectrum.frequencies.size(); ++k) {
    out << detail::format_double(spectrum.frequencies[k]) << ',' << detail::format_double(spectrum.power_db[k])
        << '\n';
  }
}

TimeSeries read_time_series_csv(std::istream& in, Metadata* meta_out) {
  std::string header;
  auto meta = read_meta(in, "timeseries", header);
  TimeSeries ts;
  ts.sample_rate = meta_number(meta, "sample_rate");
  ts.t0 = meta_number(meta, "t0");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != 2) throw ValidationError("time-series record needs two fields");
    ts.samples.push_back(detail::parse_double(fields[1], "time-series value"));
  }
  if (meta_out) *meta_out = std::move(meta);
  return ts;
}

Spectrum read_spectrum_csv(std::istream& in, Metadata* meta_out) {
  std::string header;
  auto meta = read_meta(in, "spectrum", header);
  Spectrum sp;
  sp.resolution_bw = meta_number(meta, "resolution_bw");
  sp.reference_power = meta_number(meta, "reference_power");
  sp.segments = static_cast<std::size_t>(meta_number(meta, "segments"));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != 2) throw ValidationError("spectrum record needs two fields");
    sp.frequencies.push_back(detail::parse_double(fields[0], "frequency"));
    sp.power_db.push_back(detail::parse_double(fields[1], "power"));
  }
  if (meta_out) *meta_out = std::move(meta);
  return sp;
}

}  // namespace wvfreq
