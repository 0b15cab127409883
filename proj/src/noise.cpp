#include "wvfreq/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/roots.hpp>

#include "text_util.hpp"
#include "wvfreq/constants.hpp"
#include "wvfreq/errors.hpp"
#include "wvfreq/parallel.hpp"

namespace wvfreq {

PhotonBudget::PhotonBudget(double power, OpticalCarrier carrier, double integration_time)
    : power_(power), carrier_(carrier), integration_time_(integration_time) {
  update();
}

void PhotonBudget::set_power(double power) {
  power_ = power;
  update();
}

void PhotonBudget::set_integration_time(double tau) {
  integration_time_ = tau;
  update();
}

void PhotonBudget::set_carrier(const OpticalCarrier& carrier) {
  carrier_ = carrier;
  update();
}

void PhotonBudget::update() { photons_ = photon_number(power_, carrier_, integration_time_); }

double photon_number(double power, const OpticalCarrier& carrier, double integration_time) {
  if (!(power >= 0.0)) throw ValidationError("optical power must be non-negative");
  if (!(integration_time > 0.0)) throw ValidationError("integration time must be positive");
  return power * integration_time * carrier.wavelength() / (kPlanck * kSpeedOfLight);
}

double shot_noise_snr(double photons, double wavenumber, double sigma, double deflection) {
  if (!(photons >= 0.0)) throw ValidationError("photon number must be non-negative");
  return std::sqrt(8.0 * photons / kPi) * wavenumber * sigma * deflection;
}

double ideal_sensitivity(double power, double sigma, const DispersionChain& chain) {
  const double n = photon_number(power, chain.carrier, 1.0);
  const double per_radian = shot_noise_snr(n, chain.carrier.wavenumber(), sigma, 1.0);
  if (per_radian == 0.0) return std::numeric_limits<double>::infinity();
  return (1.0 / per_radian) / chain.deflection_slope();
}

double measured_sensitivity(double min_shift, double integration_time) {
  if (!(min_shift > 0.0)) throw ValidationError("minimum detectable shift must be positive");
  if (!(integration_time > 0.0)) throw ValidationError("integration time must be positive");
  return min_shift * std::sqrt(integration_time);
}

RangeResult usable_range(double sigma, const DispersionChain& chain, double threshold) {
  if (threshold <= 0.0) return {};
  if (threshold > 1.0) throw ValidationError("range threshold must lie in (0, 1]");
  const double nu_max = kSpeedOfLight / chain.prism.material.valid_min;
  // Stay a hair inside the validity window so the shifted wavelength never rounds past it.
  const double max_shift = (nu_max - chain.carrier.frequency()) * (1.0 - 1e-9);
  if (!(max_shift > 0.0)) throw DomainError("carrier lies at the short-wavelength validity edge");
  auto excess = [&](double dnu) { return std::abs(chain.kick(dnu)) * sigma - threshold; };
  if (excess(max_shift) < 0.0) return {max_shift, true};
  std::uintmax_t max_iter = 200;
  const auto [a, b] =
      boost::math::tools::toms748_solve(excess, 0.0, max_shift, boost::math::tools::eps_tolerance<double>(48), max_iter);
  return {0.5 * (a + b), false};
}

SensitivityReport shot_noise_report(double power, double sigma, const DispersionChain& chain,
                                    double integration_time, double probe_shift, double range_threshold) {
  SensitivityReport r;
  const double n = photon_number(power, chain.carrier, integration_time);
  const double per_radian = shot_noise_snr(n, chain.carrier.wavenumber(), sigma, 1.0);
  r.integration_time = integration_time;
  r.snr = per_radian * std::abs(chain.deflection(probe_shift));
  if (per_radian > 0.0) {
    r.min_deflection = 1.0 / per_radian;
    r.min_frequency_shift = r.min_deflection / chain.deflection_slope();
  } else {
    r.min_deflection = std::numeric_limits<double>::infinity();
    r.min_frequency_shift = std::numeric_limits<double>::infinity();
  }
  r.sensitivity_per_rt_hz = r.min_frequency_shift * std::sqrt(integration_time);
  r.usable_range = usable_range(sigma, chain, range_threshold).range;
  return r;
}

ProfileSampler::ProfileSampler(const SampledProfile& profile) : x_(profile.x), p_(profile.density) {
  if (x_.size() < 2 || x_.size() != p_.size()) throw ValidationError("profile must have matching x and density");
  for (std::size_t i = 0; i < p_.size(); ++i) {
    if (!(p_[i] >= 0.0)) throw ValidationError("profile density must be non-negative");
    if (i > 0 && !(x_[i] > x_[i - 1])) throw ValidationError("profile grid must be strictly increasing");
  }
  cumulative_.resize(x_.size());
  cumulative_[0] = 0.0;
  for (std::size_t i = 1; i < x_.size(); ++i) {
    cumulative_[i] = cumulative_[i - 1] + 0.5 * (x_[i] - x_[i - 1]) * (p_[i] + p_[i - 1]);
  }
  const double total = cumulative_.back();
  if (std::abs(total - 1.0) > 1e-6) {
    throw ValidationError("profile is not normalised (area " + detail::format_double(total) + ")");
  }
  if (0.0 <= x_.front() || 0.0 >= x_.back()) {
    throw ValidationError("profile grid must straddle the split line x = 0");
  }
  right_fraction_ = std::clamp(1.0 - cdf_at(0.0) / total, 0.0, 1.0);
  const auto it = std::upper_bound(x_.begin(), x_.end(), 0.0);
  const std::size_t j = static_cast<std::size_t>(it - x_.begin());
  const double t = (0.0 - x_[j - 1]) / (x_[j] - x_[j - 1]);
  center_density_ = p_[j - 1] + t * (p_[j] - p_[j - 1]);
  if (!(center_density_ > 0.0)) throw ValidationError("profile has no intensity at the split line");
}

double ProfileSampler::cdf_at(double x) const {
  if (x <= x_.front()) return 0.0;
  if (x >= x_.back()) return cumulative_.back();
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  const std::size_t j = static_cast<std::size_t>(it - x_.begin());
  const double h = x_[j] - x_[j - 1];
  const double t = x - x_[j - 1];
  const double slope = (p_[j] - p_[j - 1]) / h;
  return cumulative_[j - 1] + p_[j - 1] * t + 0.5 * slope * t * t;
}

double ProfileSampler::sample(Rng& rng) const {
  const double u = std::generate_canonical<double, 53>(rng) * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) return x_.back();
  const std::size_t j = static_cast<std::size_t>(it - cumulative_.begin());
  const double r = u - cumulative_[j - 1];
  const double h = x_[j] - x_[j - 1];
  const double b = p_[j - 1];
  const double a = 0.5 * (p_[j] - p_[j - 1]) / h;
  // Solve a t² + b t = r with the cancellation-free root.
  const double disc = std::max(0.0, b * b + 4.0 * a * r);
  const double denom = b + std::sqrt(disc);
  const double t = denom > 0.0 ? 2.0 * r / denom : 0.0;
  return x_[j - 1] + std::clamp(t, 0.0, h);
}

SplitEstimate detect_split(const ProfileSampler& sampler, std::int64_t n_detected, Rng& rng, DetectionMethod method) {
  if (n_detected < 1) throw ValidationError("split detection needs at least one detected photon");
  if (method == DetectionMethod::kAuto) {
    method = n_detected <= kPhotonDrawLimit ? DetectionMethod::kPhotons : DetectionMethod::kCounts;
  }
  SplitEstimate e;
  if (method == DetectionMethod::kPhotons) {
    for (std::int64_t i = 0; i < n_detected; ++i) {
      if (sampler.sample(rng) > 0.0) ++e.right;
    }
  } else {
    std::binomial_distribution<std::int64_t> right(n_detected, sampler.right_fraction());
    e.right = right(rng);
  }
  e.left = n_detected - e.right;
  const double n = static_cast<double>(n_detected);
  const double d = static_cast<double>(e.right - e.left) / n;
  e.position = d * sampler.split_scale();
  e.standard_error = sampler.split_scale() * std::sqrt(std::max(0.0, 1.0 - d * d) / n);
  return e;
}

SplitEstimate simulate_split_detection(const SampledProfile& profile, std::int64_t n_detected, std::uint64_t seed,
                                       DetectionMethod method) {
  const ProfileSampler sampler(profile);
  Rng rng(seed);
  return detect_split(sampler, n_detected, rng, method);
}

TrialSummary run_split_trials(const SampledProfile& profile, std::int64_t n_detected, std::size_t trials,
                              std::uint64_t base_seed, unsigned threads, DetectionMethod method) {
  if (trials < 2) throw ValidationError("need at least two Monte Carlo trials");
  const ProfileSampler sampler(profile);
  TrialSummary s;
  s.estimates.resize(trials);
  std::vector<double> errors(trials);
  parallel_for(trials, threads, [&](std::size_t i) {
    Rng rng(base_seed + i);
    const auto e = detect_split(sampler, n_detected, rng, method);
    s.estimates[i] = e.position;
    errors[i] = e.standard_error;
  });
  double sum = 0.0;
  double err_sum = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    sum += s.estimates[i];
    err_sum += errors[i];
  }
  s.mean = sum / static_cast<double>(trials);
  s.mean_standard_error = err_sum / static_cast<double>(trials);
  double ss = 0.0;
  for (double v : s.estimates) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(trials - 1));
  return s;
}

}  // namespace wvfreq
