#include "wvfreq/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "text_util.hpp"
#include "wvfreq/errors.hpp"
#include "wvfreq/signal_chain.hpp"

namespace wvfreq {

std::vector<ReferenceLine> parse_reference_lines(std::istream& in) {
  std::vector<ReferenceLine> lines;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto body = detail::trim(raw);
    if (body.empty() || body.front() == '#') continue;
    const auto fields = detail::split(body, ',');
    if (fields.size() < 2) {
      throw ValidationError("reference line " + std::to_string(line_no) + ": expected label, MHz[, source]");
    }
    ReferenceLine r;
    r.label = std::string(fields[0]);
    r.relative_frequency = detail::parse_double(fields[1], "reference frequency") * 1e6;
    if (fields.size() > 2) {
      // The source note may itself contain commas.
      const auto pos = body.find(',', body.find(',') + 1);
      r.source = std::string(detail::trim(body.substr(pos + 1)));
    }
    if (!lines.empty() && !(r.relative_frequency > lines.back().relative_frequency)) {
      throw ValidationError("reference lines must be listed in strictly increasing frequency");
    }
    lines.push_back(std::move(r));
  }
  return lines;
}

std::vector<ReferenceLine> load_reference_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open reference-line file " + path.string());
  return parse_reference_lines(in);
}

std::vector<double> parse_scan_positions(std::istream& in) {
  std::vector<double> out;
  std::string raw;
  while (std::getline(in, raw)) {
    const auto body = detail::trim(raw);
    if (body.empty() || body.front() == '#') continue;
    out.push_back(detail::parse_double(body, "scan position"));
  }
  return out;
}

std::vector<double> load_scan_positions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scan-position file " + path.string());
  return parse_scan_positions(in);
}

double ScanCalibration::fractional_slope_error() const { return slope_error / std::abs(slope); }

ScanCalibration fit_scan_calibration(std::span<const double> observed_positions,
                                     std::span<const ReferenceLine> references) {
  if (observed_positions.size() != references.size()) {
    throw ValidationError("got " + std::to_string(observed_positions.size()) + " positions for " +
                          std::to_string(references.size()) + " reference lines");
  }
  if (references.size() < 2) throw DegenerateFitError("calibration needs at least two reference lines");
  std::vector<double> sorted(observed_positions.begin(), observed_positions.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw DegenerateFitError("duplicate scan positions");
  }
  std::vector<double> freq;
  freq.reserve(references.size());
  for (const auto& r : references) freq.push_back(r.relative_frequency);

  const auto fit = fit_line(observed_positions, freq);
  ScanCalibration cal;
  cal.slope = fit.slope;
  cal.intercept = fit.intercept;
  cal.slope_error = fit.slope_error;
  cal.intercept_error = fit.intercept_error;
  cal.residuals = fit.residuals;
  const std::size_t n = references.size();
  cal.residual_rms = n > 2 ? std::sqrt(fit.chi2 / static_cast<double>(n - 2)) : 0.0;
  if (cal.slope == 0.0) throw DegenerateFitError("calibration slope is zero");
  return cal;
}

double propagate_calibration_error(const ScanCalibration& cal, double value) {
  return value * cal.fractional_slope_error();
}

}  // namespace wvfreq
