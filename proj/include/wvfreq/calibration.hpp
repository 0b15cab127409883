#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace wvfreq {

/// Saturation-spectroscopy feature used as a frequency ruler.
struct ReferenceLine {
  std::string label;
  double relative_frequency = 0.0;  // Hz, offset from the anchor feature
  std::string source;
};

/// Records `label, offset_MHz, source`; '#' starts a comment line. Offsets must
/// be strictly increasing.
std::vector<ReferenceLine> parse_reference_lines(std::istream& in);
std::vector<ReferenceLine> load_reference_lines(const std::filesystem::path& path);

/// One scan position per line (arbitrary control units), '#' comments allowed.
std::vector<double> parse_scan_positions(std::istream& in);
std::vector<double> load_scan_positions(const std::filesystem::path& path);

/// Linear map frequency = intercept + slope·position.
struct ScanCalibration {
  double slope = 0.0;            // Hz per scan unit
  double intercept = 0.0;        // Hz
  double residual_rms = 0.0;     // Hz, √(Σr²/(n−2)); 0 for two lines
  double slope_error = 0.0;      // Hz per scan unit
  double intercept_error = 0.0;  // Hz
  std::vector<double> residuals; // Hz, in input order

  double fractional_slope_error() const;
};

/// Ordinary least squares of reference offsets against observed positions.
/// Lines correspond to positions by index.
ScanCalibration fit_scan_calibration(std::span<const double> observed_positions,
                                     std::span<const ReferenceLine> references);

/// value × (slope_error / |slope|).
double propagate_calibration_error(const ScanCalibration& cal, double value);

}  // namespace wvfreq
