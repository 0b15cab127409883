#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wvfreq/dispersion.hpp"

namespace wvfreq {

/// Gaussian meter state. Field ψ(x) ∝ exp(−x²/(4σ²)), so the transverse
/// intensity has variance σ².
struct BeamProfile {
  double sigma;
  OpticalCarrier carrier;

  BeamProfile(double width, OpticalCarrier c);
};

/// Sagnac interferometer tuned near the dark port. The two counter-propagating
/// paths enter only through the phase φ; the prism gives them opposite kicks ±k.
struct InterferometerState {
  double phase;
  double path_length;
  BeamProfile beam;
  /// Uniform background light in the dark port, as a fraction of the input
  /// (imperfect phase fronts). Only dark_port_profile uses it.
  double background = 0.0;

  InterferometerState(double phi, double length, BeamProfile b, double beta = 0.0);

  /// φ such that sin²(φ/2) = p.
  static double phase_for_postselection(double probability);
};

/// |A_w| = cot(φ/2). A_w itself is purely imaginary, so the pointer shift
/// appears in position, not momentum.
double weak_value_magnitude(double phase);

double postselection_probability(double phase);

enum class WeakValueRegime { kLinear, kMarginal, kInvalid };

/// |k|σ ≤ 0.1 linear, ≤ 0.5 marginal (usable, flagged), above that invalid.
WeakValueRegime classify_weak_value(double kick, double sigma);

/// ⟨x⟩_W = 2kσ² cot(φ/2). Throws WeakValueValidityError when |k|σ > 0.5.
double amplified_deflection(double kick, const InterferometerState& state);

/// 8 k₀ σ² (Δn/φ) / √(sin⁻²(γ/2) − n²): the small-φ closed form.
double amplified_deflection_closed_form(double delta_index, double apex_angle, double index, double phase,
                                        double sigma, double wavenumber);

/// Lever-arm deflection l k / k₀ = l δ.
double unamplified_deflection(double kick, double path_length, double wavenumber);

/// ⟨x⟩_W / ⟨x⟩ = 2 k₀ σ² cot(φ/2) / l.
double amplification_factor(const InterferometerState& state);

struct QuadratureOptions {
  std::size_t points = 4097;
  double half_width_sigmas = 8.0;
  /// Smallest dark-port transmission accepted before the mean is undefined.
  double transmission_floor = 1e-14;
};

/// Fraction of the input light leaving the dark port, ∫ sin²(kx + φ/2) G(x) dx
/// with G the unit-area intensity Gaussian. Background is not included.
double dark_port_transmission(double kick, const InterferometerState& state, const QuadratureOptions& opts = {});

/// Centroid of the unapproximated dark-port intensity sin²(kx + φ/2) G(x),
/// integrated by the trapezoid rule on a uniform grid.
double exact_dark_port_mean(double kick, const InterferometerState& state, const QuadratureOptions& opts = {});

/// Intensity sampled on a grid, normalised to unit trapezoid area.
struct SampledProfile {
  std::vector<double> x;
  std::vector<double> density;
};

std::vector<double> uniform_grid(double lo, double hi, std::size_t n);

/// 4096-point grid spanning [−8σ, 8σ].
std::vector<double> detector_grid(double sigma, std::size_t n = 4096);

/// Dark-port intensity on `x_grid` plus the uniform background of
/// `state.background`, normalised to unit area.
SampledProfile dark_port_profile(double kick, const InterferometerState& state, std::span<const double> x_grid,
                                 double transmission_floor = 1e-14);

/// Repeated evaluation of dark_port_profile on one fixed uniform grid. The
/// Gaussian envelope is tabulated once and the fringe term is advanced by a
/// trigonometric recurrence, so each call costs a few flops per grid point.
class DarkPortTable {
 public:
  DarkPortTable(const InterferometerState& state, std::span<const double> uniform_x);

  struct Tabulation {
    SampledProfile profile;  // normalised, background included
    double transmission;     // dark-port fraction of the input, background excluded
  };

  Tabulation tabulate(double kick) const;
  SampledProfile profile(double kick) const { return tabulate(kick).profile; }

 private:
  void fill(double kick, std::vector<double>& out) const;

  double phase_;
  double background_density_;
  double floor_ = 1e-14;
  std::vector<double> x_;
  std::vector<double> envelope_;
};

/// Trapezoid area and first moment of tabulated samples.
double trapezoid(std::span<const double> x, std::span<const double> y);
double first_moment(const SampledProfile& profile);

}  // namespace wvfreq
