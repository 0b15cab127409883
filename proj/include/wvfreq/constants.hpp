#pragma once

#include <numbers>

namespace wvfreq {

// CODATA 2018 exact values.
inline constexpr double kSpeedOfLight = 299792458.0;    // m/s
inline constexpr double kPlanck = 6.62607015e-34;       // J s
inline constexpr double kPi = std::numbers::pi;

}  // namespace wvfreq
