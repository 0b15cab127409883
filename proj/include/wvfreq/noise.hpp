#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "wvfreq/dispersion.hpp"
#include "wvfreq/interferometer.hpp"

namespace wvfreq {

using Rng = std::mt19937_64;

/// Photons entering the interferometer (not those reaching the detector).
class PhotonBudget {
 public:
  PhotonBudget(double power, OpticalCarrier carrier, double integration_time);

  double power() const { return power_; }
  double integration_time() const { return integration_time_; }
  const OpticalCarrier& carrier() const { return carrier_; }
  double photons() const { return photons_; }

  void set_power(double power);
  void set_integration_time(double tau);
  void set_carrier(const OpticalCarrier& carrier);

 private:
  void update();

  double power_;
  OpticalCarrier carrier_;
  double integration_time_;
  double photons_ = 0.0;
};

/// N = P τ λ / (h c).
double photon_number(double power, const OpticalCarrier& carrier, double integration_time);

/// Shot-noise-limited SNR, R = √(8N/π) k₀ σ δ. Independent of φ.
double shot_noise_snr(double photons, double wavenumber, double sigma, double deflection);

/// Frequency shift giving R = 1 after 1 s at `power` (Hz/√Hz).
double ideal_sensitivity(double power, double sigma, const DispersionChain& chain);

/// min_shift·√τ (Hz/√Hz).
double measured_sensitivity(double min_shift, double integration_time);

struct RangeResult {
  double range = 0.0;     // Hz, blue detuning
  bool clamped = false;   // true when the Sellmeier validity edge was hit first
};

/// Largest positive detuning with k(Δν)σ ≤ threshold.
RangeResult usable_range(double sigma, const DispersionChain& chain, double threshold);

struct SensitivityReport {
  double snr = 0.0;                    // at the evaluated shift
  double min_deflection = 0.0;         // rad, δ at unit SNR
  double min_frequency_shift = 0.0;    // Hz, at unit SNR over integration_time
  double sensitivity_per_rt_hz = 0.0;  // Hz/√Hz
  double usable_range = 0.0;           // Hz
  double integration_time = 0.0;       // s
};

/// Shot-noise report for a given integration time; `snr` is evaluated at `probe_shift`.
SensitivityReport shot_noise_report(double power, double sigma, const DispersionChain& chain,
                                    double integration_time, double probe_shift, double range_threshold);

/// Inverse-CDF sampler over a tabulated profile, treating the density as
/// piecewise linear between grid nodes (matching its trapezoid normalisation).
class ProfileSampler {
 public:
  explicit ProfileSampler(const SampledProfile& profile);

  double sample(Rng& rng) const;
  /// Probability mass at x > 0.
  double right_fraction() const { return right_fraction_; }
  /// Interpolated density at the split line x = 0.
  double center_density() const { return center_density_; }
  /// Converts a difference-over-sum reading to metres: 1/(2 p(0)).
  double split_scale() const { return 0.5 / center_density_; }

 private:
  double cdf_at(double x) const;

  std::vector<double> x_;
  std::vector<double> p_;
  std::vector<double> cumulative_;
  double right_fraction_ = 0.5;
  double center_density_ = 0.0;
};

enum class DetectionMethod {
  kAuto,     // photons up to kPhotonDrawLimit, counts above
  kPhotons,  // draw each photon position by inverse CDF
  kCounts,   // draw the right-half count from Binomial(N, p_right)
};

inline constexpr std::int64_t kPhotonDrawLimit = std::int64_t{1} << 20;

struct SplitEstimate {
  double position = 0.0;        // m
  double standard_error = 0.0;  // m
  std::int64_t left = 0;
  std::int64_t right = 0;
};

SplitEstimate detect_split(const ProfileSampler& sampler, std::int64_t n_detected, Rng& rng,
                           DetectionMethod method = DetectionMethod::kAuto);

/// Split-detector measurement of `n_detected` photons drawn from `profile`.
SplitEstimate simulate_split_detection(const SampledProfile& profile, std::int64_t n_detected, std::uint64_t seed,
                                       DetectionMethod method = DetectionMethod::kAuto);

struct TrialSummary {
  std::vector<double> estimates;
  double mean = 0.0;
  double stddev = 0.0;
  double mean_standard_error = 0.0;  // average of the per-trial standard errors
  double snr() const { return stddev > 0.0 ? mean / stddev : 0.0; }
};

/// Repeats simulate_split_detection with seed base_seed + i for trial i.
TrialSummary run_split_trials(const SampledProfile& profile, std::int64_t n_detected, std::size_t trials,
                              std::uint64_t base_seed, unsigned threads = 1,
                              DetectionMethod method = DetectionMethod::kAuto);

/// Optional detector imperfections; all default to off.
struct NoiseExtensions {
  double dark_count_rate = 0.0;    // counts/s over the whole detector
  double electronic_noise = 0.0;   // m-equivalent rms added per sample
};

}  // namespace wvfreq
