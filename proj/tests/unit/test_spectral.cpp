#include <doctest.h>

#include <cmath>

#include "quskit/core.hpp"
#include "quskit/spectral.hpp"
#include "support.hpp"

using namespace quskit;

namespace {

constexpr double kFs = 40.0;

Spectrum grid_spectrum(double (*shape)(double)) {
  Spectrum s;
  for (std::size_t k = 0; k <= 1024; ++k) {
    const double f = kFs * static_cast<double>(k) / 2048.0;
    s.frequencies_mhz.push_back(f);
    s.power.push_back(shape(f));
  }
  return s;
}

double gaussian_bump(double f) { return std::exp(-(f - 8.0) * (f - 8.0) / (2.0 * 4.0)); }

double comb(double f) {
  double p = 1e-3;
  for (int k = 0; k < 12; ++k) {
    const double c = 2.0 + 1.0267 * k;
    p += std::exp(-(f - c) * (f - c) / (2.0 * 0.05 * 0.05));
  }
  return p;
}

double sparse_peaks(double f) {
  double p = 1e-3;
  for (double c : {2.0, 3.0, 4.0, 6.0}) p += std::exp(-(f - c) * (f - c) / (2.0 * 0.04 * 0.04));
  return p;
}

std::vector<double> ar2(std::size_t n, double f_mhz, double r, std::uint64_t seed) {
  const double th = 2.0 * M_PI * f_mhz / kFs;
  const auto e = test::gaussian_noise(n + 200, seed);
  std::vector<double> x(n + 200, 0.0);
  for (std::size_t i = 2; i < x.size(); ++i)
    x[i] = 2.0 * r * std::cos(th) * x[i - 1] - r * r * x[i - 2] + e[i];
  return {x.begin() + 200, x.end()};
}

std::size_t argmax(const Spectrum& s) {
  std::size_t best = 0;
  for (std::size_t k = 0; k < s.size(); ++k)
    if (s.power[k] > s.power[best]) best = k;
  return best;
}

}  // namespace

TEST_SUITE("spectral") {
  TEST_CASE("Welch satisfies Parseval on white noise") {
    const std::vector<std::vector<double>> lines = {test::gaussian_noise(20000, 1),
                                                    test::gaussian_noise(20000, 2)};
    const auto s = welch_psd(lines, kFs);
    double integral = 0.0;
    for (double p : s.power) integral += p * s.resolution_mhz();
    CHECK(integral == doctest::Approx(1.0).epsilon(0.05));
  }

  TEST_CASE("Welch peak of a tone") {
    const std::vector<std::vector<double>> lines = {test::tone(1000, 5.0, kFs)};
    const auto s = welch_psd(lines, kFs);
    CHECK(std::abs(s.frequencies_mhz[argmax(s)] - 5.0) <= s.resolution_mhz());
  }

  TEST_CASE("Welch edge cases") {
    const std::vector<std::vector<double>> zero = {std::vector<double>(256, 0.0)};
    for (double p : welch_psd(zero, kFs).power) CHECK(p == 0.0);
    const std::vector<std::vector<double>> short_line = {std::vector<double>(40, 1.0)};
    CHECK_THROWS_AS(welch_psd(short_line, kFs), InvalidArgument);
    WelchOptions o;
    o.segment_len = 16;
    CHECK_THROWS_AS(welch_psd(zero, kFs, o), InvalidArgument);
    CHECK_THROWS_AS(welch_psd({}, kFs), InvalidArgument);
  }

  TEST_CASE("Welch is scale-equivariant") {
    std::vector<std::vector<double>> lines = {test::gaussian_noise(500, 3)};
    const auto a = welch_psd(lines, kFs);
    for (auto& v : lines[0]) v *= 3.0;
    const auto b = welch_psd(lines, kFs);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(b.power[k] == doctest::Approx(9.0 * a.power[k]));
  }

  TEST_CASE("usable band of a Gaussian spectrum") {
    const auto s = grid_spectrum(gaussian_bump);
    const auto band = usable_band(s, 6.0);
    // 8 +/- sigma sqrt(2 ln 10^0.6) with sigma = 2
    CHECK(std::abs(band.lo_mhz - (8.0 - 2.0 * 1.66225813626911)) <= s.resolution_mhz());
    CHECK(std::abs(band.hi_mhz - (8.0 + 2.0 * 1.66225813626911)) <= s.resolution_mhz());
    CHECK(band.contains(8.0));
  }

  TEST_CASE("usable band degenerate shapes") {
    const auto flat = grid_spectrum([](double) { return 1.0; });
    const auto b = usable_band(flat);
    CHECK(b.lo_mhz == 0.0);
    CHECK(b.hi_mhz == doctest::Approx(20.0));

    auto single = grid_spectrum([](double) { return 0.0; });
    CHECK_THROWS_AS(usable_band(single), NumericalError);
    single.power[100] = 1.0;
    const auto one = usable_band(single);
    CHECK(one.lo_mhz == single.frequencies_mhz[100]);
    CHECK(one.hi_mhz == single.frequencies_mhz[100]);
  }

  TEST_CASE("AR spectrum locates a resonance") {
    const auto x = ar2(4000, 3.0, 0.98, 7);
    const auto s = ar_spectrum(x, 4, kFs);
    CHECK(s.kind == SpectrumKind::ar);
    CHECK(std::abs(s.frequencies_mhz[argmax(s)] - 3.0) < 0.1);
  }

  TEST_CASE("AR spectrum of white noise is flat") {
    const auto s = ar_spectrum(test::gaussian_noise(4000, 8), 4, kFs);
    double lo = 1e300, hi = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (s.frequencies_mhz[k] < 2.0 || s.frequencies_mhz[k] > 13.0) continue;
      lo = std::min(lo, s.power[k]);
      hi = std::max(hi, s.power[k]);
    }
    CHECK(hi / lo < 3.0);
  }

  TEST_CASE("AR order contract") {
    const auto x = test::gaussian_noise(100, 1);
    CHECK_THROWS_AS(ar_spectrum(x, 100, kFs), InvalidArgument);
    CHECK_THROWS_AS(ar_spectrum(x, 50, kFs), InvalidArgument);
    CHECK_THROWS_AS(ar_spectrum(x, 3, kFs), InvalidArgument);
    CHECK_NOTHROW(ar_spectrum(x, 49, kFs));
  }

  TEST_CASE("peak spacing of a comb") {
    const auto s = grid_spectrum(comb);
    CHECK(std::abs(spectral_peak_spacing(s, {1.5, 13.5}) - 1.0267) <= s.resolution_mhz());
    Spectrum scaled = s;
    for (auto& p : scaled.power) p *= 1e6;
    CHECK(spectral_peak_spacing(scaled, {1.5, 13.5}) == spectral_peak_spacing(s, {1.5, 13.5}));
  }

  TEST_CASE("peak spacing guard skips a missing peak") {
    const auto s = grid_spectrum(sparse_peaks);
    CHECK(spectral_peak_spacing(s, {1.5, 6.5}) == doctest::Approx(1.0).epsilon(0.02));
  }

  TEST_CASE("single bump has no periodicity") {
    CHECK_THROWS_AS(spectral_peak_spacing(grid_spectrum(gaussian_bump), {2.0, 13.0}), NoPeriodicityError);
  }
}
