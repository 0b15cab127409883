#include "wvfreq/experiment.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "text_util.hpp"
#include "wvfreq/constants.hpp"
#include "wvfreq/errors.hpp"

#ifndef WVFREQ_DATA_DIR
#define WVFREQ_DATA_DIR "data"
#endif

namespace wvfreq {

namespace {

struct Unit {
  std::string_view suffix;
  Dimension dim;
  double scale;
};

constexpr std::array kUnits = {
    Unit{"m", Dimension::kLength, 1.0},          Unit{"cm", Dimension::kLength, 1e-2},
    Unit{"mm", Dimension::kLength, 1e-3},        Unit{"um", Dimension::kLength, 1e-6},
    Unit{"µm", Dimension::kLength, 1e-6},        Unit{"nm", Dimension::kLength, 1e-9},
    Unit{"pm", Dimension::kLength, 1e-12},       Unit{"Hz", Dimension::kFrequency, 1.0},
    Unit{"kHz", Dimension::kFrequency, 1e3},     Unit{"MHz", Dimension::kFrequency, 1e6},
    Unit{"GHz", Dimension::kFrequency, 1e9},     Unit{"THz", Dimension::kFrequency, 1e12},
    Unit{"s", Dimension::kTime, 1.0},            Unit{"ms", Dimension::kTime, 1e-3},
    Unit{"us", Dimension::kTime, 1e-6},          Unit{"ns", Dimension::kTime, 1e-9},
    Unit{"W", Dimension::kPower, 1.0},           Unit{"mW", Dimension::kPower, 1e-3},
    Unit{"uW", Dimension::kPower, 1e-6},         Unit{"nW", Dimension::kPower, 1e-9},
    Unit{"rad", Dimension::kAngle, 1.0},         Unit{"mrad", Dimension::kAngle, 1e-3},
    Unit{"deg", Dimension::kAngle, kPi / 180.0}, Unit{"m/Hz", Dimension::kSlope, 1.0},
    Unit{"pm/MHz", Dimension::kSlope, 1e-18},    Unit{"nm/MHz", Dimension::kSlope, 1e-15},
    Unit{"%", Dimension::kRatio, 1e-2},
};

// Alphabetical; `canonical()` relies on this order.
constexpr std::array kKeys = {
    ConfigKey{"apex_angle", Dimension::kAngle, "", "prism apex angle (overrides unamplified_slope)"},
    ConfigKey{"background", Dimension::kRatio, "0", "uniform dark-port background, fraction of input"},
    ConfigKey{"calibration_value", Dimension::kFrequency, "129kHz", "value the calibration error is propagated to"},
    ConfigKey{"cycles", Dimension::kCount, "25", "modulation cycles averaged per sweep point"},
    ConfigKey{"dark_count_rate", Dimension::kFrequency, "0Hz", "detector dark counts per second"},
    ConfigKey{"drive", Dimension::kFrequency, "7.4MHz", "peak detuning for the simulate command"},
    ConfigKey{"duration", Dimension::kTime, "2.5s", "run length for the simulate command"},
    ConfigKey{"electronic_noise", Dimension::kLength, "0m", "additive rms noise per sample"},
    ConfigKey{"filter_center", Dimension::kFrequency, "10Hz", "band-pass centre frequency"},
    ConfigKey{"filter_q", Dimension::kRatio, "1", "quality factor of each band-pass stage"},
    ConfigKey{"filter_stages", Dimension::kCount, "2", "number of 6 dB/octave band-pass stages"},
    ConfigKey{"filtered", Dimension::kText, "false", "simulate: apply the band-pass chain"},
    ConfigKey{"gain", Dimension::kRatio, "1e4", "amplifier gain after the filters"},
    ConfigKey{"grid_points", Dimension::kCount, "4096", "detector profile grid points"},
    ConfigKey{"material", Dimension::kText, "fused_silica", "prism material name"},
    ConfigKey{"materials_file", Dimension::kText, "", "Sellmeier table (default: shipped data)"},
    ConfigKey{"mod_frequency", Dimension::kFrequency, "10Hz", "frequency-modulation rate"},
    ConfigKey{"noise_duration", Dimension::kTime, "100s", "undriven run length for the noise floor"},
    ConfigKey{"path_length", Dimension::kLength, "27cm", "interferometer length l"},
    ConfigKey{"phase", Dimension::kAngle, "", "dark-port phase (overrides postselection)"},
    ConfigKey{"postselection", Dimension::kRatio, "0.013", "target postselection probability"},
    ConfigKey{"power", Dimension::kPower, "2mW", "optical power into the interferometer"},
    ConfigKey{"range_threshold", Dimension::kRatio, "0.5", "k sigma bound defining the usable range"},
    ConfigKey{"sample_rate", Dimension::kFrequency, "1kHz", "detector sample rate"},
    ConfigKey{"seed", Dimension::kCount, "20101", "base random seed"},
    ConfigKey{"settle_time", Dimension::kTime, "1s", "filter settling time discarded before analysis"},
    ConfigKey{"sigma", Dimension::kLength, "388um", "Gaussian beam width"},
    ConfigKey{"spectrum_duration", Dimension::kTime, "100s", "record length for spectra"},
    ConfigKey{"spectrum_segment", Dimension::kTime, "10s", "averaging segment for spectra"},
    ConfigKey{"sweep", Dimension::kFrequencyList, "0.743MHz,2.0744MHz,3.4058MHz,4.7372MHz,6.0686MHz,7.4MHz",
              "peak detunings of the slope sweep"},
    ConfigKey{"unamplified_slope", Dimension::kSlope, "9.1pm/MHz", "lever-arm slope used to calibrate the apex"},
    ConfigKey{"wavelength", Dimension::kLength, "780nm", "carrier wavelength"},
    ConfigKey{"window", Dimension::kText, "hann", "spectrum window (hann, rect)"},
};

const ConfigKey& find_key(std::string_view name) {
  for (const auto& k : kKeys) {
    if (k.name == name) return k;
  }
  throw ValidationError("unknown configuration key '" + std::string(name) + "'");
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string dimension_name(Dimension d) {
  switch (d) {
    case Dimension::kLength: return "length";
    case Dimension::kFrequency: return "frequency";
    case Dimension::kTime: return "time";
    case Dimension::kPower: return "power";
    case Dimension::kAngle: return "angle";
    case Dimension::kSlope: return "slope";
    default: return "dimensionless";
  }
}

}  // namespace

double parse_quantity(std::string_view text, Dimension dim) {
  const auto body = detail::trim(text);
  std::string_view num = body;
  if (!num.empty() && num.front() == '+') num.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), value);
  if (ec != std::errc{}) throw ValidationError("cannot parse quantity '" + std::string(body) + "'");
  const auto suffix = detail::trim(std::string_view(ptr, static_cast<std::size_t>(num.data() + num.size() - ptr)));
  if (suffix.empty()) {
    if (dim == Dimension::kRatio || dim == Dimension::kCount || value == 0.0) return value;
    throw ValidationError("quantity '" + std::string(body) + "' needs a " + dimension_name(dim) + " unit");
  }
  for (const auto& u : kUnits) {
    if (u.suffix == suffix) {
      if (u.dim != dim) {
        throw ValidationError("unit '" + std::string(suffix) + "' is not a " + dimension_name(dim) + " unit");
      }
      return value * u.scale;
    }
  }
  throw ValidationError("unknown unit '" + std::string(suffix) + "'");
}

std::vector<double> parse_frequency_list(std::string_view text) {
  std::vector<double> out;
  for (const auto item : detail::split(text, ',')) {
    if (!item.empty()) out.push_back(parse_quantity(item, Dimension::kFrequency));
  }
  return out;
}

std::span<const ConfigKey> config_keys() { return kKeys; }

ExperimentConfig::ExperimentConfig() {
  for (const auto& k : kKeys) {
    if (!k.default_value.empty()) values_.emplace(std::string(k.name), std::string(k.default_value));
  }
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  const auto& k = find_key(key);
  const std::string v(detail::trim(value));
  // Validate eagerly so errors name the offending key.
  try {
    switch (k.dim) {
      case Dimension::kText: break;
      case Dimension::kFrequencyList: parse_frequency_list(v); break;
      default: parse_quantity(v, k.dim); break;
    }
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(key) + ": " + e.what());
  }
  values_.insert_or_assign(std::string(key), v);
  explicit_.insert_or_assign(std::string(key), true);
}

bool ExperimentConfig::is_set(std::string_view key) const { return explicit_.contains(key); }

void ExperimentConfig::load(std::istream& in) {
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto body = detail::trim(raw);
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = detail::trim(body.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    set(detail::trim(body.substr(0, eq)), detail::trim(body.substr(eq + 1)));
  }
}

void ExperimentConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  load(in);
}

const std::string& ExperimentConfig::text(std::string_view key) const {
  find_key(key);
  static const std::string empty;
  const auto it = values_.find(key);
  return it == values_.end() ? empty : it->second;
}

double ExperimentConfig::number(std::string_view key) const {
  const auto& k = find_key(key);
  const auto& v = text(key);
  if (v.empty()) throw ValidationError("configuration key '" + std::string(key) + "' is unset");
  return parse_quantity(v, k.dim);
}

std::int64_t ExperimentConfig::count(std::string_view key) const {
  const double v = number(key);
  if (v < 0.0 || v != std::floor(v) || v > 9.0e18) {
    throw ValidationError("configuration key '" + std::string(key) + "' must be a non-negative integer");
  }
  return static_cast<std::int64_t>(v);
}

std::vector<double> ExperimentConfig::frequency_list(std::string_view key) const {
  return parse_frequency_list(text(key));
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::canonical() const {
  std::vector<std::pair<std::string, std::string>> out;
  const bool phase_given = is_set("phase");
  const bool apex_given = is_set("apex_angle");
  for (const auto& k : kKeys) {
    if (k.name == "postselection" && phase_given) continue;
    if (k.name == "unamplified_slope" && apex_given) continue;
    const auto& v = text(k.name);
    if (v.empty() && k.dim != Dimension::kText) continue;
    std::string c;
    switch (k.dim) {
      case Dimension::kText: c = v; break;
      case Dimension::kCount: c = std::to_string(count(k.name)); break;
      case Dimension::kFrequencyList: {
        for (double f : parse_frequency_list(v)) c += (c.empty() ? "" : ",") + detail::format_double(f);
        break;
      }
      default: c = detail::format_double(parse_quantity(v, k.dim)); break;
    }
    out.emplace_back(std::string(k.name), c);
  }
  return out;
}

std::string ExperimentConfig::hash() const {
  std::string text;
  for (const auto& [k, v] : canonical()) text += k + "=" + v + "\n";
  return fnv1a_hex(text);
}

std::filesystem::path default_data_dir() { return WVFREQ_DATA_DIR; }

ResolvedExperiment resolve(const ExperimentConfig& config) {
  if (config.is_set("phase") && config.is_set("postselection")) {
    throw ValidationError("give either phase or postselection, not both");
  }
  if (config.is_set("apex_angle") && config.is_set("unamplified_slope")) {
    throw ValidationError("give either apex_angle or unamplified_slope, not both");
  }
  const std::filesystem::path materials = config.text("materials_file").empty()
                                              ? default_data_dir() / "sellmeier_materials.txt"
                                              : std::filesystem::path(config.text("materials_file"));
  auto material = load_material(materials, config.text("material"));
  const auto carrier = OpticalCarrier::from_wavelength(config.number("wavelength"));
  const double path_length = config.number("path_length");

  const double phase = config.is_set("phase") ? config.number("phase")
                                              : InterferometerState::phase_for_postselection(config.number("postselection"));
  const double apex = config.is_set("apex_angle")
                          ? config.number("apex_angle")
                          : calibrate_apex_angle(config.number("unamplified_slope"), path_length, carrier, material);

  const double sigma = config.number("sigma");
  const double beta = config.number("background");
  DispersionChain chain{Prism(apex, material), carrier};
  InterferometerState state(phase, path_length, BeamProfile(sigma, carrier), beta);

  NoiseExtensions noise;
  noise.dark_count_rate = config.number("dark_count_rate");
  noise.electronic_noise = config.number("electronic_noise");
  if (noise.dark_count_rate < 0.0 || noise.electronic_noise < 0.0) {
    throw ValidationError("noise extensions must be non-negative");
  }

  const double sample_rate = config.number("sample_rate");
  if (!(sample_rate > 0.0)) throw ValidationError("sample_rate must be positive");
  const double photons_per_sample = photon_number(config.number("power"), carrier, 1.0 / sample_rate);

  FilterSpec filter;
  filter.center = config.number("filter_center");
  filter.stages = static_cast<int>(config.count("filter_stages"));
  filter.q = config.number("filter_q");
  filter.gain = config.number("gain");

  ModulationConfig modulation;
  modulation.frequency = config.number("mod_frequency");

  Apparatus apparatus{chain, state, noise, static_cast<std::size_t>(config.count("grid_points"))};

  Metadata meta;
  for (const auto& [k, v] : config.canonical()) meta.emplace_back("config." + k, v);
  meta.emplace_back("config_hash", config.hash());
  meta.emplace_back("derived.phase", detail::format_double(phase));
  meta.emplace_back("derived.postselection", detail::format_double(postselection_probability(phase)));
  meta.emplace_back("derived.apex_angle", detail::format_double(apex));
  meta.emplace_back("derived.amplification", detail::format_double(amplification_factor(state)));
  meta.emplace_back("derived.photons_per_sample", detail::format_double(photons_per_sample));

  return ResolvedExperiment{std::move(material),
                            carrier,
                            config.number("power"),
                            phase,
                            apex,
                            chain,
                            state,
                            apparatus,
                            photons_per_sample,
                            sample_rate,
                            modulation,
                            filter,
                            static_cast<std::uint64_t>(config.count("seed")),
                            config.threads(),
                            std::move(meta)};
}

}  // namespace wvfreq
