#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "wvfreq/constants.hpp"
#include "wvfreq/errors.hpp"
#include "wvfreq/interferometer.hpp"

using namespace wvfreq;

namespace {

const OpticalCarrier kCarrier = OpticalCarrier::from_wavelength(780e-9);
constexpr double kSigma = 388e-6;
constexpr double kPhiPaper = 0.228532;  // sin²(φ/2) = 1.3%

InterferometerState state(double phi, double beta = 0.0) {
  return InterferometerState(phi, 0.27, BeamProfile(kSigma, kCarrier), beta);
}

// Centroid of sin²(kx + φ/2)G(x) done analytically with Gaussian moments.
double oracle_mean(double k, double phi, double sigma) {
  const double e = std::exp(-2.0 * k * k * sigma * sigma);
  return 2.0 * k * sigma * sigma * std::sin(phi) * e / (1.0 - std::cos(phi) * e);
}

}  // namespace

TEST_SUITE("interferometer") {
  TEST_CASE("weak value magnitude") {
    CHECK(weak_value_magnitude(kPi / 2) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(weak_value_magnitude(0.01) == doctest::Approx(199.998333).epsilon(1e-8));
    CHECK(std::abs(weak_value_magnitude(0.01) - 200.0) / 200.0 < 1e-4);
    CHECK(weak_value_magnitude(0.2284) == doctest::Approx(8.7185).epsilon(1e-4));
    CHECK_THROWS_AS(weak_value_magnitude(0.0), DomainError);
    CHECK_THROWS_AS(weak_value_magnitude(kPi), DomainError);
    CHECK_THROWS_AS(weak_value_magnitude(-0.1), DomainError);
  }

  TEST_CASE("small-angle weak value within phi^2/10 of 2/phi") {
    for (int i = 1; i <= 30; ++i) {
      const double phi = 0.01 * i;
      const double aw = weak_value_magnitude(phi);
      CHECK(std::abs(aw - 2.0 / phi) / aw <= phi * phi / 10.0);
    }
  }

  TEST_CASE("postselection probability") {
    CHECK(postselection_probability(0.0) == 0.0);
    CHECK(postselection_probability(kPi) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(postselection_probability(0.2284) - 0.013) < 1e-4);
    CHECK(InterferometerState::phase_for_postselection(0.013) == doctest::Approx(kPhiPaper).epsilon(1e-6));
    CHECK_THROWS_AS(postselection_probability(-1.0), DomainError);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, kPi);
    for (int i = 0; i < 100; ++i) {
      const double phi = u(rng);
      const double c = std::cos(phi / 2);
      CHECK(postselection_probability(phi) + c * c == doctest::Approx(1.0).epsilon(1e-14));
    }
  }

  TEST_CASE("weak value regime classification") {
    CHECK(classify_weak_value(0.05 / kSigma, kSigma) == WeakValueRegime::kLinear);
    CHECK(classify_weak_value(-0.3 / kSigma, kSigma) == WeakValueRegime::kMarginal);
    CHECK(classify_weak_value(0.6 / kSigma, kSigma) == WeakValueRegime::kInvalid);
  }

  TEST_CASE("amplified deflection") {
    const auto s = state(kPhiPaper);
    CHECK(amplified_deflection(0.0, s) == 0.0);
    CHECK(amplified_deflection(-10.0, s) == -amplified_deflection(10.0, s));
    CHECK(amplified_deflection(10.0, s) == doctest::Approx(2.0 * 10.0 * kSigma * kSigma / std::tan(kPhiPaper / 2)));
    CHECK_THROWS_AS(amplified_deflection(0.6 / kSigma, s), WeakValueValidityError);
  }

  TEST_CASE("closed form is the small-phase substitution of the cot form") {
    const double g = 0.78222307;
    const double n = 1.4536712;
    for (double phi : {0.05, 0.1, kPhiPaper, 0.4}) {
      for (double dn : {1e-9, 1e-8, 1e-7}) {
        const double delta = deflection_from_index_change(dn, n, g);
        const double k = delta * kCarrier.wavenumber();
        const auto s = state(phi);
        const double exact = amplified_deflection(k, s);
        const double closed = amplified_deflection_closed_form(dn, g, n, phi, kSigma, kCarrier.wavenumber());
        const double sub = (2.0 / phi) / weak_value_magnitude(phi);
        CHECK(exact * sub == doctest::Approx(closed).epsilon(1e-12));
        CHECK(std::abs(closed - exact) / exact == doctest::Approx(std::abs(1.0 - sub)).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("unamplified deflection and amplification factor") {
    CHECK(unamplified_deflection(0.0, 0.27, kCarrier.wavenumber()) == 0.0);
    const double k = 11.7;
    CHECK(unamplified_deflection(k, 0.54, kCarrier.wavenumber()) ==
          doctest::Approx(2.0 * unamplified_deflection(k, 0.27, kCarrier.wavenumber())).epsilon(1e-15));

    const auto s = state(kPhiPaper);
    const double a = amplification_factor(s);
    CHECK(a == doctest::Approx(78.2712).epsilon(1e-5));
    CHECK(std::abs(a - 79.0) <= 1.2);
    CHECK(amplification_factor(state(kPi / 2)) ==
          doctest::Approx(2.0 * kCarrier.wavenumber() * kSigma * kSigma / 0.27).epsilon(1e-14));
    for (double kk : {0.1, 1.0, 20.0}) {
      CHECK(a * unamplified_deflection(kk, 0.27, kCarrier.wavenumber()) ==
            doctest::Approx(amplified_deflection(kk, s)).epsilon(1e-12));
    }
  }

  TEST_CASE("exact dark-port mean against the analytic centroid") {
    const auto paper = state(kPhiPaper);
    CHECK(std::abs(exact_dark_port_mean(0.0, paper)) < 1e-20);
    for (double phi : {0.05, kPhiPaper, 0.5, 1.0, 2.0}) {
      for (double ks : {1e-4, 1e-3, 0.01, 0.1, 0.3, 0.5}) {
        const double k = ks / kSigma;
        const double m = exact_dark_port_mean(k, state(phi));
        CHECK(m == doctest::Approx(oracle_mean(k, phi, kSigma)).epsilon(1e-9));
        CHECK(exact_dark_port_mean(-k, state(phi)) == doctest::Approx(-m).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("bright port limit shows no amplification") {
    const auto s = state(kPi);
    const double k = 0.1 / kSigma;
    CHECK(std::abs(exact_dark_port_mean(k, s)) <= 0.01 * kSigma);
  }

  TEST_CASE("operating point: exact mean within 5% of the linear prediction") {
    const auto s = state(kPhiPaper);
    const double k = 1.456e-6 * kCarrier.wavenumber();
    const double lin = amplified_deflection(k, s);
    CHECK(std::abs(exact_dark_port_mean(k, s) - lin) <= 0.05 * std::abs(lin));
  }

  TEST_CASE("linear-regime sweep agrees with the weak-value prediction") {
    int n = 0;
    for (int i = 0; i < 10; ++i) {
      const double phi = 0.05 + (1.5 - 0.05) * i / 9.0;
      const double aw = weak_value_magnitude(phi);
      for (int j = 1; j <= 10; ++j) {
        const double u = 0.0099 * j;  // kσ cot(φ/2)
        const double k = u / (kSigma * aw);
        const double lin = amplified_deflection(k, state(phi));
        CHECK(std::abs(exact_dark_port_mean(k, state(phi)) - lin) <= 0.05 * std::abs(lin));
        ++n;
      }
    }
    CHECK(n == 100);
  }

  TEST_CASE("empty dark port") {
    CHECK_THROWS_AS(exact_dark_port_mean(0.0, state(0.0)), DarkPortEmptyError);
    const auto grid = detector_grid(kSigma);
    CHECK_THROWS_AS(dark_port_profile(0.0, state(0.0), grid), DarkPortEmptyError);
  }

  TEST_CASE("sampled profile") {
    const auto grid = detector_grid(kSigma);
    CHECK(grid.size() == 4096);
    CHECK(grid.front() == doctest::Approx(-8 * kSigma));
    CHECK(grid.back() == doctest::Approx(8 * kSigma));

    // k = 0: the meter Gaussian, whatever φ
    const auto p0 = dark_port_profile(0.0, state(kPhiPaper), grid);
    CHECK(trapezoid(p0.x, p0.density) == doctest::Approx(1.0).epsilon(1e-12));
    std::size_t peak = 0;
    for (std::size_t i = 0; i < p0.density.size(); ++i) {
      if (p0.density[i] > p0.density[peak]) peak = i;
      const double g = std::exp(-0.5 * std::pow(grid[i] / kSigma, 2)) / (kSigma * std::sqrt(2 * kPi));
      CHECK(p0.density[i] == doctest::Approx(g).epsilon(1e-9));
    }
    CHECK(std::abs(grid[peak]) < 2 * (grid[1] - grid[0]));

    const double k = 0.05 / kSigma;
    const auto p = dark_port_profile(k, state(kPhiPaper), grid);
    CHECK(trapezoid(p.x, p.density) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(first_moment(p) == doctest::Approx(exact_dark_port_mean(k, state(kPhiPaper))).epsilon(1e-6));

    std::vector<double> bad = {0.0, 1.0, 1.0};
    CHECK_THROWS_AS(dark_port_profile(k, state(kPhiPaper), bad), ValidationError);
  }

  TEST_CASE("background adds a flat pedestal") {
    const auto grid = detector_grid(kSigma);
    const double beta = 0.01;
    const auto s = state(kPhiPaper, beta);
    const auto p = dark_port_profile(0.0, s, grid);
    const double flat = beta / (grid.back() - grid.front());
    const double area = postselection_probability(kPhiPaper) + beta;
    CHECK(p.density.front() == doctest::Approx(flat / area).epsilon(1e-6));
  }

  TEST_CASE("tabulated profile matches direct evaluation") {
    const auto grid = detector_grid(kSigma);
    for (double beta : {0.0, 0.02}) {
      const auto s = state(kPhiPaper, beta);
      const DarkPortTable table(s, grid);
      for (double ks : {-0.3, 0.0, 1e-6, 0.01, 0.4}) {
        const double k = ks / kSigma;
        const auto a = dark_port_profile(k, s, grid);
        const auto t = table.tabulate(k);
        const double peak = *std::max_element(a.density.begin(), a.density.end());
        for (std::size_t i = 0; i < grid.size(); ++i) {
          CHECK(std::abs(t.profile.density[i] - a.density[i]) <= 1e-12 * peak);
        }
        if (beta == 0.0) CHECK(t.transmission == doctest::Approx(dark_port_transmission(k, s)).epsilon(1e-6));
      }
    }
    std::vector<double> uneven = {0.0, 1.0, 3.0};
    CHECK_THROWS_AS(DarkPortTable(state(kPhiPaper), uneven), ValidationError);
  }
}
