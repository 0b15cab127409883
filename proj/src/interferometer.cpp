#include "wvfreq/interferometer.hpp"

#include <cmath>

#include "text_util.hpp"
#include "wvfreq/constants.hpp"
#include "wvfreq/errors.hpp"

namespace wvfreq {

BeamProfile::BeamProfile(double width, OpticalCarrier c) : sigma(width), carrier(c) {
  if (!(width > 0.0) || !std::isfinite(width)) throw ValidationError("beam width sigma must be positive");
}

InterferometerState::InterferometerState(double phi, double length, BeamProfile b, double beta)
    : phase(phi), path_length(length), beam(b), background(beta) {
  if (!(phi >= 0.0 && phi <= kPi)) throw ValidationError("interferometer phase must lie in [0, pi]");
  if (!(length > 0.0)) throw ValidationError("interferometer path length must be positive");
  if (!(beta >= 0.0)) throw ValidationError("background fraction must be non-negative");
}

double InterferometerState::phase_for_postselection(double probability) {
  if (!(probability > 0.0 && probability <= 1.0)) {
    throw ValidationError("postselection probability must lie in (0, 1]");
  }
  return 2.0 * std::asin(std::sqrt(probability));
}

double weak_value_magnitude(double phase) {
  if (!(phase > 0.0 && phase < kPi)) {
    throw DomainError("weak value needs 0 < phi < pi, got " + detail::format_double(phase));
  }
  return 1.0 / std::tan(0.5 * phase);
}

double postselection_probability(double phase) {
  if (!(phase >= 0.0 && phase <= kPi)) throw DomainError("phase outside [0, pi]");
  const double s = std::sin(0.5 * phase);
  return s * s;
}

WeakValueRegime classify_weak_value(double kick, double sigma) {
  const double ks = std::abs(kick) * sigma;
  if (ks <= 0.1) return WeakValueRegime::kLinear;
  if (ks <= 0.5) return WeakValueRegime::kMarginal;
  return WeakValueRegime::kInvalid;
}

double amplified_deflection(double kick, const InterferometerState& state) {
  const double sigma = state.beam.sigma;
  if (classify_weak_value(kick, sigma) == WeakValueRegime::kInvalid) {
    throw WeakValueValidityError("weak value condition k(omega) sigma << 1 violated: k sigma = " +
                                 detail::format_double(std::abs(kick) * sigma));
  }
  return 2.0 * kick * sigma * sigma * weak_value_magnitude(state.phase);
}

double amplified_deflection_closed_form(double delta_index, double apex_angle, double index, double phase,
                                        double sigma, double wavenumber) {
  const double s = std::sin(0.5 * apex_angle);
  const double radicand = 1.0 / (s * s) - index * index;
  if (!(radicand > 0.0)) throw GrazingIncidenceError("grazing incidence: sin(gamma/2)^-2 <= n^2");
  return 8.0 * wavenumber * sigma * sigma * (delta_index / phase) / std::sqrt(radicand);
}

double unamplified_deflection(double kick, double path_length, double wavenumber) {
  return path_length * kick / wavenumber;
}

double amplification_factor(const InterferometerState& state) {
  const double sigma = state.beam.sigma;
  return 2.0 * state.beam.carrier.wavenumber() * sigma * sigma * weak_value_magnitude(state.phase) /
         state.path_length;
}

std::vector<double> uniform_grid(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw ValidationError("grid needs at least two points and hi > lo");
  std::vector<double> x(n);
  const double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) x[i] = lo + h * static_cast<double>(i);
  x.back() = hi;
  return x;
}

std::vector<double> detector_grid(double sigma, std::size_t n) { return uniform_grid(-8.0 * sigma, 8.0 * sigma, n); }

namespace {

// sin²(kx + φ/2) exp(−x²/2σ²) / (σ√2π)
inline double dark_port_intensity(double x, double kick, double phase, double sigma) {
  const double s = std::sin(kick * x + 0.5 * phase);
  const double g = std::exp(-0.5 * x * x / (sigma * sigma)) / (sigma * std::sqrt(2.0 * kPi));
  return s * s * g;
}

struct Moments {
  double zeroth = 0.0;
  double first = 0.0;
};

Moments dark_port_moments(double kick, const InterferometerState& state, const QuadratureOptions& opts) {
  if (opts.points < 4096) throw ValidationError("dark-port quadrature needs at least 4096 points");
  const double sigma = state.beam.sigma;
  const double half = opts.half_width_sigmas * sigma;
  const double h = 2.0 * half / static_cast<double>(opts.points - 1);
  Moments m;
  for (std::size_t i = 0; i < opts.points; ++i) {
    const double x = -half + h * static_cast<double>(i);
    const double w = (i == 0 || i + 1 == opts.points) ? 0.5 : 1.0;
    const double v = w * dark_port_intensity(x, kick, state.phase, sigma);
    m.zeroth += v;
    m.first += v * x;
  }
  m.zeroth *= h;
  m.first *= h;
  return m;
}

}  // namespace

double dark_port_transmission(double kick, const InterferometerState& state, const QuadratureOptions& opts) {
  return dark_port_moments(kick, state, opts).zeroth;
}

double exact_dark_port_mean(double kick, const InterferometerState& state, const QuadratureOptions& opts) {
  const auto m = dark_port_moments(kick, state, opts);
  if (!(m.zeroth > opts.transmission_floor)) {
    throw DarkPortEmptyError("dark port carries no light (transmission " + detail::format_double(m.zeroth) + ")");
  }
  return m.first / m.zeroth;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  double sum = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) sum += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return sum;
}

double first_moment(const SampledProfile& p) {
  // Exact for the piecewise-linear interpolant of the samples.
  double sum = 0.0;
  for (std::size_t i = 1; i < p.x.size(); ++i) {
    const double h = p.x[i] - p.x[i - 1];
    sum += h / 6.0 * (p.density[i - 1] * (2.0 * p.x[i - 1] + p.x[i]) + p.density[i] * (p.x[i - 1] + 2.0 * p.x[i]));
  }
  return sum;
}

SampledProfile dark_port_profile(double kick, const InterferometerState& state, std::span<const double> x_grid,
                                 double transmission_floor) {
  if (x_grid.size() < 2) throw ValidationError("profile grid needs at least two points");
  for (std::size_t i = 1; i < x_grid.size(); ++i) {
    if (!(x_grid[i] > x_grid[i - 1])) throw ValidationError("profile grid must be strictly increasing");
  }
  SampledProfile p;
  p.x.assign(x_grid.begin(), x_grid.end());
  p.density.resize(x_grid.size());
  const double extent = x_grid.back() - x_grid.front();
  const double flat = state.background / extent;
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    p.density[i] = dark_port_intensity(x_grid[i], kick, state.phase, state.beam.sigma) + flat;
  }
  const double area = trapezoid(p.x, p.density);
  if (!(area > transmission_floor)) {
    throw DarkPortEmptyError("dark port carries no light (transmission " + detail::format_double(area) + ")");
  }
  for (auto& d : p.density) d /= area;
  return p;
}

}  // namespace wvfreq

namespace wvfreq {

DarkPortTable::DarkPortTable(const InterferometerState& state, std::span<const double> uniform_x)
    : phase_(state.phase), x_(uniform_x.begin(), uniform_x.end()) {
  if (x_.size() < 2) throw ValidationError("profile grid needs at least two points");
  const double h = (x_.back() - x_.front()) / static_cast<double>(x_.size() - 1);
  for (std::size_t i = 0; i < x_.size(); ++i) {
    const double expected = x_.front() + h * static_cast<double>(i);
    if (std::abs(x_[i] - expected) > 1e-9 * h) throw ValidationError("DarkPortTable needs a uniform grid");
  }
  const double sigma = state.beam.sigma;
  envelope_.resize(x_.size());
  for (std::size_t i = 0; i < x_.size(); ++i) {
    envelope_[i] = std::exp(-0.5 * x_[i] * x_[i] / (sigma * sigma)) / (sigma * std::sqrt(2.0 * kPi));
  }
  background_density_ = state.background / (x_.back() - x_.front());
}

void DarkPortTable::fill(double kick, std::vector<double>& out) const {
  // sin²(kx + φ/2) = (1 − cos θ)/2 with θ = 2kx + φ advancing by 2kh per node.
  const std::size_t n = x_.size();
  const double h = (x_.back() - x_.front()) / static_cast<double>(n - 1);
  const double step = 2.0 * kick * h;
  const double alpha = 2.0 * std::sin(0.5 * step) * std::sin(0.5 * step);
  const double beta = std::sin(step);
  const double theta0 = 2.0 * kick * x_.front() + phase_;
  double c = std::cos(theta0);
  double s = std::sin(theta0);
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 256 == 0) {  // re-anchor to bound recurrence drift
      const double theta = theta0 + step * static_cast<double>(i);
      c = std::cos(theta);
      s = std::sin(theta);
    }
    out[i] = 0.5 * (1.0 - c) * envelope_[i];
    const double cn = c - (alpha * c + beta * s);
    const double sn = s - (alpha * s - beta * c);
    c = cn;
    s = sn;
  }
}

DarkPortTable::Tabulation DarkPortTable::tabulate(double kick) const {
  Tabulation t;
  SampledProfile& p = t.profile;
  p.x = x_;
  fill(kick, p.density);
  t.transmission = trapezoid(p.x, p.density);
  for (auto& d : p.density) d += background_density_;
  const double area = trapezoid(p.x, p.density);
  if (!(area > floor_)) {
    throw DarkPortEmptyError("dark port carries no light (transmission " + detail::format_double(area) + ")");
  }
  for (auto& d : p.density) d /= area;
  return t;
}

}  // namespace wvfreq
