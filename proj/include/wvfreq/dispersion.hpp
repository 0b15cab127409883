#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

namespace wvfreq {

/// Three-term Sellmeier fit n²(λ) = 1 + Σ bᵢλ²/(λ² − cᵢ).
/// All lengths in metres: c in m², the validity window in m.
struct SellmeierModel {
  std::string name;
  std::array<double, 3> b{};
  std::array<double, 3> c{};
  double valid_min = 0.0;
  double valid_max = 0.0;
};

/// Parses the plain-text material table: one record per line,
/// `name, b1 b2 b3, c1 c2 c3, min max` with c in µm² and the range in µm.
/// Blank lines and lines starting with '#' are skipped.
std::map<std::string, SellmeierModel> parse_materials(std::istream& in);
std::map<std::string, SellmeierModel> load_materials(const std::filesystem::path& path);
SellmeierModel load_material(const std::filesystem::path& path, const std::string& name);

/// Monochromatic carrier. Wavelength, frequency and wavenumber are kept
/// mutually consistent (λν = c, k₀ = 2π/λ).
class OpticalCarrier {
 public:
  static OpticalCarrier from_wavelength(double wavelength);
  static OpticalCarrier from_frequency(double frequency);

  double wavelength() const { return wavelength_; }
  double frequency() const { return frequency_; }
  double wavenumber() const { return wavenumber_; }

  /// Carrier detuned by `delta_nu` Hz.
  OpticalCarrier shifted(double delta_nu) const { return from_frequency(frequency_ + delta_nu); }

 private:
  OpticalCarrier(double wavelength, double frequency);

  double wavelength_;
  double frequency_;
  double wavenumber_;
};

/// Prism used at minimum deviation.
struct Prism {
  double apex_angle;  // rad, 0 < γ < π
  SellmeierModel material;

  Prism(double apex, SellmeierModel model);
};

double sellmeier_index(const SellmeierModel& model, double wavelength);

/// θ = 2 asin(n sin(γ/2)) − γ for a given index.
double min_deviation_angle_for_index(double index, double apex_angle);
double min_deviation_angle(const Prism& prism, double wavelength);

/// Closed-form small deflection δ = 2Δn / √(sin⁻²(γ/2) − n²).
double deflection_from_index_change(double delta_index, double index, double apex_angle);

/// Angular deflection produced by detuning the carrier at `wavelength` by
/// `delta_nu`. Δn is the two-point index difference, so the result is
/// positive for positive Δν in a normally dispersive material.
double dispersive_deflection(const Prism& prism, double wavelength, double delta_nu);

/// Transverse momentum kick k = δ k₀.
double momentum_kick(double deflection, const OpticalCarrier& carrier);

/// Frequency step used to define per-hertz slopes of the dispersion chain.
inline constexpr double kSlopeProbeStep = 1.0e6;

/// Finds the apex angle whose unamplified lever-arm slope l·δ(1 MHz)/1 MHz
/// equals `target_slope` (m/Hz). Throws UnreachableTargetError when no
/// γ ∈ (0, γ_critical) brackets the target.
double calibrate_apex_angle(double target_slope, double path_length, const OpticalCarrier& carrier,
                            const SellmeierModel& material, double relative_tolerance = 1e-6);

/// A prism driven by a carrier: maps optical detuning to deflection and kick.
struct DispersionChain {
  Prism prism;
  OpticalCarrier carrier;

  double deflection(double delta_nu) const {
    return dispersive_deflection(prism, carrier.wavelength(), delta_nu);
  }
  double kick(double delta_nu) const { return momentum_kick(deflection(delta_nu), carrier); }
  /// dδ/dν from the 1 MHz two-point difference (rad/Hz).
  double deflection_slope() const { return deflection(kSlopeProbeStep) / kSlopeProbeStep; }
};

}  // namespace wvfreq
