#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "wvfreq/constants.hpp"
#include "wvfreq/errors.hpp"
#include "wvfreq/parallel.hpp"
#include "wvfreq/signal_chain.hpp"

using namespace wvfreq;

namespace {

constexpr double kSigma = 388e-6;
constexpr double kGamma = 0.78222307;
constexpr double kPhiPaper = 0.228532;
constexpr double kFs = 1000.0;
const OpticalCarrier kCarrier = OpticalCarrier::from_wavelength(780e-9);

Apparatus paper_apparatus() {
  const auto m = load_material(WVFREQ_TEST_DATA_DIR "/sellmeier_materials.txt", "fused_silica");
  return {DispersionChain{Prism(kGamma, m), kCarrier},
          InterferometerState(kPhiPaper, 0.27, BeamProfile(kSigma, kCarrier))};
}

double photons_per_sample() { return photon_number(2e-3, kCarrier, 1.0 / kFs); }

TimeSeries sine(double f, double amplitude, double duration, double fs = kFs, double phase = 0.0) {
  TimeSeries s;
  s.sample_rate = fs;
  const auto n = static_cast<std::size_t>(std::llround(duration * fs));
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.samples[i] = amplitude * std::sin(2 * kPi * f * i / fs + phase);
  return s;
}

// Amplitude of the f component by projection over a whole number of cycles.
double lockin_amplitude(const TimeSeries& s, double f) {
  double c = 0.0, q = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double w = 2 * kPi * f * i / s.sample_rate;
    c += s.samples[i] * std::cos(w);
    q += s.samples[i] * std::sin(w);
  }
  return 2.0 * std::hypot(c, q) / static_cast<double>(s.size());
}

double db(double r) { return 20.0 * std::log10(r); }

double mean(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  return m / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST_SUITE("signal_chain") {
  TEST_CASE("undriven run is zero-mean shot noise") {
    const auto app = paper_apparatus();
    const auto s = synthesize_run(app, {10.0, 0.0}, 10.0, kFs, photons_per_sample(), 1);
    REQUIRE(s.size() == 10000);
    const double sd = stddev(s.samples);
    CHECK(std::abs(mean(s.samples)) < 4.0 * sd / 100.0);
    const double n_det = photons_per_sample() * postselection_probability(kPhiPaper);
    const double expected = kSigma * std::sqrt(kPi / 2) / std::sqrt(n_det);
    CHECK(sd == doctest::Approx(expected).epsilon(0.05));
  }

  TEST_CASE("synthesis is deterministic under a seed") {
    const auto app = paper_apparatus();
    const auto a = synthesize_run(app, {10.0, 7.4e6}, 1.0, kFs, photons_per_sample(), 42);
    const auto b = synthesize_run(app, {10.0, 7.4e6}, 1.0, kFs, photons_per_sample(), 42);
    const auto c = synthesize_run(app, {10.0, 7.4e6}, 1.0, kFs, photons_per_sample(), 43);
    CHECK(a.samples == b.samples);
    CHECK(a.samples != c.samples);
  }

  TEST_CASE("synthesis preconditions") {
    const auto app = paper_apparatus();
    CHECK_THROWS_AS(synthesize_run(app, {10.0, 1e6}, 1.05, kFs, photons_per_sample(), 1), ValidationError);
    CHECK_THROWS_AS(synthesize_run(app, {10.0, 1e6}, 1.0, kFs, 100.0, 1), ValidationError);
    try {
      synthesize_run(app, {10.0, 1e13}, 1.0, kFs, photons_per_sample(), 1);
      FAIL("expected a weak-value violation");
    } catch (const WeakValueValidityError& e) {
      CHECK(std::string(e.what()).find("10000000000000") != std::string::npos);
    }
  }

  TEST_CASE("driven run: fundamental dominates and scales linearly") {
    const auto app = paper_apparatus();
    const auto a = synthesize_run(app, {10.0, 7.4e6}, 10.0, kFs, photons_per_sample(), 2);
    const auto sp = power_spectrum(a, Window::kHann);
    std::size_t best = 0;
    for (std::size_t i = 0; i < sp.frequencies.size(); ++i) {
      if (sp.frequencies[i] < 1.0 || sp.frequencies[i] > 100.0) continue;
      if (best == 0 || sp.power_db[i] > sp.power_db[best]) best = i;
    }
    CHECK(sp.frequencies[best] == doctest::Approx(10.0));

    const auto b1 = synthesize_run(app, {10.0, 74e6}, 10.0, kFs, photons_per_sample(), 3);
    const auto b2 = synthesize_run(app, {10.0, 148e6}, 10.0, kFs, photons_per_sample(), 4);
    CHECK(lockin_amplitude(b2, 10.0) / lockin_amplitude(b1, 10.0) == doctest::Approx(2.0).epsilon(0.01));
  }

  TEST_CASE("end-to-end linearity below k sigma cot(phi/2) = 0.05") {
    const auto app = paper_apparatus();
    const double per_hz = std::abs(app.chain.kick(1e9)) * kSigma * weak_value_magnitude(kPhiPaper) / 1e9;
    const double top = 0.05 / per_hz;
    std::vector<double> ratios;
    for (double frac : {0.02, 0.1, 0.25, 0.5, 0.99}) {
      const double dnu = frac * top;
      const auto s = synthesize_run(app, {10.0, dnu}, 2.0, kFs, photons_per_sample(), 5);
      ratios.push_back(lockin_amplitude(s, 10.0) / dnu);
    }
    for (double r : ratios) CHECK(r == doctest::Approx(ratios.front()).epsilon(0.01));
  }

  TEST_CASE("harmonics appear in the nonlinear regime") {
    const auto app = paper_apparatus();
    const double per_hz = std::abs(app.chain.kick(1e9)) * kSigma * weak_value_magnitude(kPhiPaper) / 1e9;
    const double dnu = 0.3 / per_hz;
    const auto s = synthesize_run(app, {10.0, dnu}, 20.0, kFs, photons_per_sample(), 6);
    const auto sp = power_spectrum(s, Window::kHann, {2000, 1.0});
    const std::vector<double> lines = {10.0, 20.0, 30.0, 40.0, 50.0};
    const double floor = noise_floor_db(sp, 5.0, 100.0, lines, 1.0);
    CHECK(line_power_db(sp, 30.0) > floor + 10.0);
    CHECK(line_power_db(sp, 20.0) > floor + 10.0);
  }

  TEST_CASE("band-pass filter response") {
    const FilterSpec spec;
    const BandpassCascade f(spec, kFs);
    CHECK(f.chain_gain() == doctest::Approx(1e4).epsilon(1e-12));
    CHECK(std::abs(f.response(0.0)) < 1e-12);

    // DC: ≥ 60 dB rejection once transients have died
    TimeSeries dc;
    dc.sample_rate = kFs;
    dc.samples.assign(20000, 1.0);
    const auto y = f.apply(dc).tail_from(10.0);
    double worst = 0.0;
    for (double v : y.samples) worst = std::max(worst, std::abs(v));
    CHECK(worst <= 1e-3 * spec.gain);

    const auto centre = f.apply(sine(10.0, 1.0, 20.0)).tail_from(10.0);
    CHECK(lockin_amplitude(centre, 10.0) == doctest::Approx(spec.gain).epsilon(0.01));

    const double att = db(std::abs(f.response(10.0)) / std::abs(f.response(40.0)));
    CHECK(att == doctest::Approx(24.0).epsilon(2.0 / 24.0));
    const auto forty = f.apply(sine(40.0, 1.0, 20.0)).tail_from(10.0);
    CHECK(db(lockin_amplitude(centre, 10.0) / lockin_amplitude(forty, 40.0)) ==
          doctest::Approx(24.0).epsilon(2.0 / 24.0));
  }

  TEST_CASE("filter matches its analytic response at 20 frequencies") {
    const BandpassCascade f(FilterSpec{}, kFs);
    for (int i = 0; i < 20; ++i) {
      const double freq = 1.0 + 2.0 * i;  // 1 .. 39 Hz, each a whole number of cycles in 20 s
      const double designed = std::abs(f.response(freq));
      const double analytic = std::abs(f.prototype_response(freq));
      CHECK(std::abs(db(designed / analytic)) <= 0.1);
      const auto out = f.apply(sine(freq, 1.0, 30.0)).tail_from(10.0);
      CHECK(std::abs(db(lockin_amplitude(out, freq) / designed)) <= 0.1);
    }
  }

  TEST_CASE("noise bandwidth equals the integrated power response") {
    const BandpassCascade f(FilterSpec{}, kFs);
    const double peak = f.chain_gain();
    const int n = 200000;
    double integral = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double freq = 0.5 * kFs * i / n;
      const double w = (i == 0 || i == n) ? 0.5 : 1.0;
      integral += w * std::norm(f.response(freq)) / (peak * peak);
    }
    integral *= 0.5 * kFs / n;
    CHECK(f.noise_bandwidth() == doctest::Approx(integral).epsilon(1e-6));
    CHECK(f.noise_bandwidth() == doctest::Approx(7.84).epsilon(0.01));
  }

  TEST_CASE("filter design limits") {
    CHECK_THROWS_AS(BandpassCascade(FilterSpec{}, 150.0), AliasingError);
    FilterSpec bad;
    bad.stages = 0;
    CHECK_THROWS_AS(BandpassCascade(bad, kFs), ValidationError);
  }

  TEST_CASE("peak extraction") {
    const double a = 3.0;
    const auto s = sine(10.0, a, 2.5, kFs, 0.3);
    const auto p = extract_peaks(s, 0.1, 25);
    CHECK(p.peaks.size() == 25);
    CHECK(p.mean <= a);
    CHECK(p.mean >= a * std::cos(kPi * 10.0 / kFs));
    CHECK(p.std_of_mean <= 1e-12 * a);
    CHECK_THROWS_AS(extract_peaks(s, 0.1, 26), ValidationError);
    CHECK_THROWS_AS(extract_peaks(s, 0.10005, 5), ValidationError);
  }

  TEST_CASE("std of mean scales as one over root cycles") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> scaled;
    for (std::size_t n : {25u, 100u, 400u}) {
      double acc = 0.0;
      const int reps = 40;
      for (int r = 0; r < reps; ++r) {
        TimeSeries s;
        s.sample_rate = kFs;
        s.samples.resize(n * 100);
        for (double& v : s.samples) v = g(rng);
        acc += extract_peaks(s, 0.1, n).std_of_mean;
      }
      scaled.push_back(acc / reps * std::sqrt(static_cast<double>(n)));
    }
    CHECK(scaled[1] == doctest::Approx(scaled[0]).epsilon(0.1));
    CHECK(scaled[2] == doctest::Approx(scaled[0]).epsilon(0.1));
  }

  TEST_CASE("peak means scatter as their std of mean predicts") {
    auto app = paper_apparatus();
    const BandpassCascade f(FilterSpec{}, kFs);
    const int seeds = 100;
    std::vector<double> means(seeds), predicted(seeds);
    parallel_for(seeds, 4, [&](std::size_t i) {
      const auto raw = synthesize_run(app, {10.0, 2e6}, 2.0, kFs, photons_per_sample(), 1000 + i);
      const auto p = extract_peaks(f.apply(raw).tail_from(0.5), 0.1, 15);
      means[i] = p.mean;
      predicted[i] = p.std_of_mean;
    });
    CHECK(stddev(means) == doctest::Approx(mean(predicted)).epsilon(0.25));
  }

  TEST_CASE("line fits") {
    std::vector<SlopePoint> pts;
    for (int i = 0; i < 6; ++i) pts.push_back({1.0 * i, 3.0 * i, 0.0});
    const auto f = slope_fit(pts);
    CHECK(f.slope == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(f.slope_error == doctest::Approx(0.0).scale(1.0));
    CHECK(std::abs(f.intercept) < 1e-12);

    CHECK_THROWS_AS(slope_fit({{1.0, 2.0, 0.1}}), DegenerateFitError);
    CHECK_THROWS_AS(slope_fit({{1.0, 2.0, 0.1}, {1.0, 3.0, 0.1}}), DegenerateFitError);
    CHECK_THROWS_AS(slope_fit({{1.0, 2.0, 0.1}, {2.0, 3.0, 0.0}}), ValidationError);
  }

  TEST_CASE("weighted fit against the normal equations") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    std::vector<double> x, y, e;
    for (int i = 0; i < 12; ++i) {
      x.push_back(0.7 * i + 0.1);
      y.push_back(2.5 * x.back() - 1.0 + 0.3 * (u(rng) - 1.25));
      e.push_back(0.1 * u(rng));
    }
    double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < 12; ++i) {
      const double w = 1.0 / (e[i] * e[i]);
      s += w, sx += w * x[i], sy += w * y[i], sxx += w * x[i] * x[i], sxy += w * x[i] * y[i];
    }
    const double det = s * sxx - sx * sx;
    const auto f = fit_line(x, y, e);
    CHECK(f.slope == doctest::Approx((s * sxy - sx * sy) / det).epsilon(1e-12));
    CHECK(f.intercept == doctest::Approx((sxx * sy - sx * sxy) / det).epsilon(1e-12));
    CHECK(f.slope_error == doctest::Approx(std::sqrt(s / det)).epsilon(1e-12));
    CHECK(f.intercept_error == doctest::Approx(std::sqrt(sxx / det)).epsilon(1e-12));
  }

  TEST_CASE("slope fit is bit-identical under permutation") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<SlopePoint> pts;
    for (int i = 0; i < 9; ++i) pts.push_back({1e6 * (i + u(rng)), 7e-4 * i + 1e-10 * u(rng), 1e-10 * (1 + u(rng))});
    const auto ref = slope_fit(pts);
    for (int r = 0; r < 20; ++r) {
      std::shuffle(pts.begin(), pts.end(), rng);
      const auto f = slope_fit(pts);
      CHECK(f.slope == ref.slope);
      CHECK(f.slope_error == ref.slope_error);
    }
  }

  TEST_CASE("window names") {
    CHECK(parse_window("hann") == Window::kHann);
    CHECK(parse_window("rect") == Window::kRectangular);
    CHECK(window_name(Window::kHann) == "hann");
    CHECK_THROWS_AS(parse_window("kaiser"), ValidationError);
  }

  TEST_CASE("spectrum of a pure tone") {
    const double a = 2.0;
    const auto s = sine(10.0, a, 10.0);
    for (Window w : {Window::kRectangular, Window::kHann}) {
      const auto sp = power_spectrum(s, w, {0, a * a / 2});
      const auto k = sp.nearest_bin(10.0);
      CHECK(sp.frequencies[k] == doctest::Approx(10.0));
      CHECK(sp.power_db[k] == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
      CHECK(sp.frequencies.back() == doctest::Approx(kFs / 2));
      // rectangular: on-bin tone leaks nowhere; Hann: -6 dB neighbours, nothing beyond
      const std::size_t reach = w == Window::kHann ? 2 : 1;
      for (std::size_t i = 0; i < sp.power_db.size(); ++i) {
        if (i + reach <= k || i >= k + reach) CHECK(sp.power_db[i] <= -40.0);
      }
      if (w == Window::kHann) CHECK(sp.power_db[k + 1] == doctest::Approx(-6.0206).epsilon(1e-3));
    }
    CHECK(power_spectrum(s, Window::kHann).resolution_bw == doctest::Approx(0.15).epsilon(1e-9));
    CHECK(power_spectrum(s, Window::kRectangular).resolution_bw == doctest::Approx(0.1).epsilon(1e-9));
    CHECK_THROWS_AS(power_spectrum(TimeSeries{}, Window::kHann), ValidationError);
  }

  TEST_CASE("white noise reads its density") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g(0.0, 1.0);
    TimeSeries s;
    s.sample_rate = kFs;
    s.samples.resize(100000);
    for (double& v : s.samples) v = g(rng);
    const auto sp = power_spectrum(s, Window::kHann, {1000, 1.0});
    CHECK(sp.segments == 100);
    double acc = 0.0;
    int n = 0;
    for (std::size_t i = 10; i + 10 < sp.power_db.size(); ++i, ++n) acc += sp.power(i);
    // one-sided density 2/fs per Hz times the bin bandwidth
    CHECK(acc / n == doctest::Approx(2.0 / kFs * sp.resolution_bw).epsilon(0.03));
  }

  TEST_CASE("undriven detector spectrum is flat from 10 to 100 Hz") {
    const auto app = paper_apparatus();
    const auto s = synthesize_run(app, {10.0, 0.0}, 100.0, kFs, photons_per_sample(), 77);
    const auto sp = power_spectrum(s, Window::kHann, {10000, 1.0});
    std::vector<double> f, p;
    // every other bin: Hann correlates neighbours
    for (std::size_t i = sp.nearest_bin(10.0); i <= sp.nearest_bin(100.0); i += 2) {
      f.push_back(sp.frequencies[i]);
      p.push_back(sp.power_db[i]);
    }
    const auto fit = fit_line(f, p);
    CHECK(std::abs(fit.slope / fit.slope_error) < 1.96);
  }

  TEST_CASE("floor and line helpers") {
    Spectrum sp;
    for (int i = 0; i < 11; ++i) {
      sp.frequencies.push_back(i);
      sp.power_db.push_back(i == 5 ? 30.0 : static_cast<double>(i % 3));
    }
    const double ex[] = {5.0};
    CHECK(noise_floor_db(sp, 1.0, 10.0, ex, 0.5) == doctest::Approx(1.0));
    CHECK(line_power_db(sp, 5.0) == 30.0);
    CHECK(line_power_db(sp, 4.0, 1.0) == 30.0);
  }

  TEST_CASE("csv round trip is bit-exact") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g(0.0, 1e-9);
    for (int trial = 0; trial < 20; ++trial) {
      TimeSeries s;
      s.sample_rate = 1000.0 + trial;
      s.t0 = 0.001 * trial;
      s.samples.resize(50 + trial);
      for (double& v : s.samples) v = g(rng) * std::pow(10.0, trial % 7 - 3);
      const Metadata meta = {{"seed", std::to_string(trial)}, {"note", "a=b"}};
      std::stringstream io;
      write_csv(io, s, meta);
      Metadata back;
      const auto r = read_time_series_csv(io, &back);
      CHECK(r.samples == s.samples);
      CHECK(r.sample_rate == s.sample_rate);
      CHECK(r.t0 == s.t0);
      REQUIRE(back.size() >= 2);
      CHECK(Metadata(back.end() - 2, back.end()) == meta);
    }
    const auto sp = power_spectrum(sine(10.0, 1.0, 2.0), Window::kHann);
    std::stringstream io;
    write_csv(io, sp);
    const auto r = read_spectrum_csv(io);
    CHECK(r.frequencies == sp.frequencies);
    CHECK(r.power_db == sp.power_db);
    CHECK(r.resolution_bw == sp.resolution_bw);
    CHECK(r.reference_power == sp.reference_power);

    std::stringstream junk("not,a,csv\n");
    CHECK_THROWS_AS(read_time_series_csv(junk), ValidationError);
  }
}
