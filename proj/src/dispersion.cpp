#include "wvfreq/dispersion.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "text_util.hpp"
#include "wvfreq/constants.hpp"
#include "wvfreq/errors.hpp"

namespace wvfreq {

namespace {

constexpr double kMicron = 1e-6;

std::array<double, 3> parse_triplet(std::string_view field, std::string_view what) {
  const auto tokens = detail::split_ws(field);
  if (tokens.size() != 3) {
    throw ValidationError("material table: expected three " + std::string(what) + " coefficients, got '" +
                          std::string(field) + "'");
  }
  return {detail::parse_double(tokens[0], what), detail::parse_double(tokens[1], what),
          detail::parse_double(tokens[2], what)};
}

}  // namespace

std::map<std::string, SellmeierModel> parse_materials(std::istream& in) {
  std::map<std::string, SellmeierModel> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto fields = detail::split(body, ',');
    if (fields.size() != 4) {
      throw ValidationError("material table line " + std::to_string(line_no) + ": expected 4 fields");
    }
    SellmeierModel m;
    m.name = std::string(fields[0]);
    m.b = parse_triplet(fields[1], "b");
    m.c = parse_triplet(fields[2], "c");
    for (auto& c : m.c) c *= kMicron * kMicron;
    const auto range = detail::split_ws(fields[3]);
    if (range.size() != 2) {
      throw ValidationError("material table line " + std::to_string(line_no) + ": expected min max range");
    }
    m.valid_min = detail::parse_double(range[0], "valid range") * kMicron;
    m.valid_max = detail::parse_double(range[1], "valid range") * kMicron;
    if (!(m.valid_min > 0.0 && m.valid_max > m.valid_min)) {
      throw ValidationError("material '" + m.name + "': invalid wavelength range");
    }
    out.insert_or_assign(m.name, std::move(m));
  }
  return out;
}

std::map<std::string, SellmeierModel> load_materials(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open material table " + path.string());
  return parse_materials(in);
}

SellmeierModel load_material(const std::filesystem::path& path, const std::string& name) {
  auto table = load_materials(path);
  auto it = table.find(name);
  if (it == table.end()) {
    throw ValidationError("material '" + name + "' not found in " + path.string());
  }
  return it->second;
}

OpticalCarrier::OpticalCarrier(double wavelength, double frequency)
    : wavelength_(wavelength), frequency_(frequency), wavenumber_(2.0 * kPi / wavelength) {}

OpticalCarrier OpticalCarrier::from_wavelength(double wavelength) {
  if (!(wavelength > 0.0) || !std::isfinite(wavelength)) {
    throw ValidationError("carrier wavelength must be positive");
  }
  return OpticalCarrier(wavelength, kSpeedOfLight / wavelength);
}

OpticalCarrier OpticalCarrier::from_frequency(double frequency) {
  if (!(frequency > 0.0) || !std::isfinite(frequency)) {
    throw ValidationError("carrier frequency must be positive");
  }
  return OpticalCarrier(kSpeedOfLight / frequency, frequency);
}

Prism::Prism(double apex, SellmeierModel model) : apex_angle(apex), material(std::move(model)) {
  if (!(apex > 0.0 && apex < kPi)) throw ValidationError("prism apex angle must lie in (0, pi)");
}

double sellmeier_index(const SellmeierModel& model, double wavelength) {
  if (wavelength < model.valid_min) {
    throw DomainError("wavelength " + detail::format_double(wavelength) + " m below the lower validity bound " +
                      detail::format_double(model.valid_min) + " m of '" + model.name + "'");
  }
  if (wavelength > model.valid_max) {
    throw DomainError("wavelength " + detail::format_double(wavelength) + " m above the upper validity bound " +
                      detail::format_double(model.valid_max) + " m of '" + model.name + "'");
  }
  const double l2 = wavelength * wavelength;
  double n2 = 1.0;
  for (std::size_t i = 0; i < 3; ++i) n2 += model.b[i] * l2 / (l2 - model.c[i]);
  if (!(n2 >= 0.0)) {
    throw InternalConsistencyError("negative Sellmeier radicand for '" + model.name + "'");
  }
  return std::sqrt(n2);
}

double min_deviation_angle_for_index(double index, double apex_angle) {
  const double s = index * std::sin(0.5 * apex_angle);
  if (s > 1.0) {
    throw TotalInternalReflectionError("n sin(gamma/2) = " + detail::format_double(s) +
                                       " exceeds 1: no minimum-deviation ray");
  }
  return 2.0 * std::asin(s) - apex_angle;
}

double min_deviation_angle(const Prism& prism, double wavelength) {
  return min_deviation_angle_for_index(sellmeier_index(prism.material, wavelength), prism.apex_angle);
}

double deflection_from_index_change(double delta_index, double index, double apex_angle) {
  const double s = std::sin(0.5 * apex_angle);
  const double radicand = 1.0 / (s * s) - index * index;
  if (!(radicand > 0.0)) {
    throw GrazingIncidenceError("sin(gamma/2)^-2 - n^2 = " + detail::format_double(radicand) +
                                " is not positive: grazing incidence");
  }
  return 2.0 * delta_index / std::sqrt(radicand);
}

double dispersive_deflection(const Prism& prism, double wavelength, double delta_nu) {
  const double n0 = sellmeier_index(prism.material, wavelength);
  if (delta_nu == 0.0) return deflection_from_index_change(0.0, n0, prism.apex_angle);
  const double shifted = kSpeedOfLight / (kSpeedOfLight / wavelength + delta_nu);
  const double n1 = sellmeier_index(prism.material, shifted);
  return deflection_from_index_change(n1 - n0, n0, prism.apex_angle);
}

double momentum_kick(double deflection, const OpticalCarrier& carrier) {
  return deflection * carrier.wavenumber();
}

double calibrate_apex_angle(double target_slope, double path_length, const OpticalCarrier& carrier,
                            const SellmeierModel& material, double relative_tolerance) {
  if (!(path_length > 0.0)) throw ValidationError("path length must be positive");
  const double lambda = carrier.wavelength();
  const double n0 = sellmeier_index(material, lambda);
  const double n1 = sellmeier_index(material, kSpeedOfLight / (carrier.frequency() + kSlopeProbeStep));
  const double dn = n1 - n0;

  auto slope_at = [&](double apex) {
    return path_length * deflection_from_index_change(dn, n0, apex) / kSlopeProbeStep;
  };

  // δ grows monotonically from 0 (γ → 0) to ∞ (n sin(γ/2) → 1).
  const double critical = 2.0 * std::asin(1.0 / n0);
  const double lo = 1e-9;
  const double hi = critical * (1.0 - 1e-12);
  const double slope_lo = slope_at(lo);
  const double slope_hi = slope_at(hi);
  if (!(target_slope > slope_lo && target_slope < slope_hi)) {
    throw UnreachableTargetError("unamplified slope " + detail::format_double(target_slope) +
                                 " m/Hz not reachable; achievable range is (" + detail::format_double(slope_lo) +
                                 ", " + detail::format_double(slope_hi) + ") m/Hz");
  }

  auto f = [&](double apex) { return slope_at(apex) / target_slope - 1.0; };
  std::uintmax_t max_iter = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52),
                                                       max_iter);
  const double apex = 0.5 * (a + b);
  if (std::abs(f(apex)) > relative_tolerance) {
    throw NumericalError("apex-angle calibration did not converge to the requested tolerance");
  }
  return apex;
}

}  // namespace wvfreq
