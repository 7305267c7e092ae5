#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "quskit/spectral.hpp"
#include "quskit/synthrf.hpp"
#include "support.hpp"

using namespace quskit;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

PhantomSpec quiet(PhantomSpec p) {
  p.noise_snr_db = kInf;
  p.diffraction_ripple_db = 0.0;
  return p;
}

double centroid(const Spectrum& s, double lo, double hi) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s.frequencies_mhz[k] < lo || s.frequencies_mhz[k] > hi) continue;
    num += s.frequencies_mhz[k] * s.power[k];
    den += s.power[k];
  }
  return num / den;
}

std::vector<std::vector<double>> block_lines(const RFFrame& f, std::size_t i0, std::size_t len) {
  std::vector<std::vector<double>> lines;
  for (std::size_t j = 0; j < f.lateral_count(); ++j) {
    auto l = f.line(j);
    lines.emplace_back(l.begin() + static_cast<long>(i0), l.begin() + static_cast<long>(i0 + len));
  }
  return lines;
}

}  // namespace

TEST_SUITE("synthrf") {
  TEST_CASE("theoretical scattering") {
    AcquisitionParams acq;
    CHECK(theoretical_scattering(5.0, 0.0, 1.0, acq) == 0.0);
    const double one = theoretical_scattering(7.0, 0.06, 1.0, acq);
    CHECK(theoretical_scattering(7.0, 0.06, 10.0, acq) == doctest::Approx(10.0 * one).epsilon(1e-14));
    CHECK_THROWS_AS(theoretical_scattering(0.0, 0.05, 1.0, acq), InvalidArgument);
  }

  TEST_CASE("sample/reference ratio matches the simplified Gaussian form") {
    AcquisitionParams acq;
    const double q = acq.aperture_ratio_q;
    std::size_t compared = 0;
    for (double ds = 0.02; ds <= 0.150001; ds += 0.01) {
      for (double dr = 0.02; dr <= 0.150001; dr += 0.01) {
        for (double f = 2.0; f <= 13.0; f += 0.5) {
          const double as = ds / 2, ar = dr / 2;
          if (2.66 * f * q * as * as >= 0.01 || 2.66 * f * q * ar * ar >= 0.01) continue;
          const double exact = theoretical_scattering(f, ds, 2.0, acq) / theoretical_scattering(f, dr, 1.0, acq);
          const double simple =
              std::pow(ds / dr, 6) * 2.0 * std::exp(-12.159 * f * f * (as * as - ar * ar));
          CHECK(std::abs(exact / simple - 1.0) < 0.01);
          ++compared;
        }
      }
    }
    CHECK(compared > 100);
  }

  TEST_CASE("field generation is deterministic") {
    const auto p = test::homogeneous_phantom(45, 10, 10);
    const auto a = generate_scatterer_field(p, 42);
    const auto b = generate_scatterer_field(p, 42);
    REQUIRE(a.scatterers.size() == b.scatterers.size());
    for (std::size_t i = 0; i < a.scatterers.size(); ++i) {
      CHECK(a.scatterers[i].axial_mm == b.scatterers[i].axial_mm);
      CHECK(a.scatterers[i].amplitude == b.scatterers[i].amplitude);
    }
    CHECK(test::simulate(p, 3) == test::simulate(p, 3));
    CHECK_FALSE(test::simulate(p, 3) == test::simulate(p, 4));
  }

  TEST_CASE("diffuse count follows density times resolution cells") {
    AcquisitionParams acq;
    // 100 cells of 0.4 mm x 2.2 mm.
    const auto p = test::homogeneous_phantom(45, 8.8, 10.0);
    const auto field = generate_scatterer_field(p, 5, acq);
    const double n = static_cast<double>(field.scatterers.size());
    CHECK(std::abs(n - 1200.0) < 4.0 * std::sqrt(1200.0));
    for (const auto& s : field.scatterers) {
      CHECK(s.axial_mm >= 0.0);
      CHECK(s.axial_mm < 8.8);
    }
  }

  TEST_CASE("coherent lattice gaps average to the spacing") {
    auto p = test::homogeneous_phantom(45, 30.0, 12.0);
    p.regions[0].coherent_spacing_mm = 0.75;
    p.regions[0].coherent_jitter = 0.05;
    const auto field = generate_scatterer_field(p, 11);
    std::map<double, std::vector<double>> lines;
    for (const auto& s : field.scatterers)
      if (s.kind == ScattererKind::coherent) lines[s.lateral_mm].push_back(s.axial_mm);
    double sum = 0.0;
    std::size_t gaps = 0;
    for (auto& [x, zs] : lines) {
      std::sort(zs.begin(), zs.end());
      for (std::size_t k = 1; k < zs.size(); ++k, ++gaps) sum += zs[k] - zs[k - 1];
    }
    REQUIRE(gaps >= 1000);
    CHECK(sum / static_cast<double>(gaps) == doctest::Approx(0.75).epsilon(0.01 / 0.75));
  }

  TEST_CASE("empty field renders an all-zero frame") {
    ScattererField field;
    field.source_spec = quiet(test::homogeneous_phantom(45, 5, 3));
    const auto f = synthesize_rf(field, AcquisitionParams{});
    CHECK(f.axial_count() > 0);
    for (double v : f.samples()) CHECK(v == 0.0);
  }

  TEST_CASE("single scatterer echo lands at the round-trip delay") {
    AcquisitionParams acq;
    ScattererField field;
    field.source_spec = quiet(test::homogeneous_phantom(45, 20, 3));
    field.scatterers.push_back({15.4, 0.0, 1.0, ScattererKind::diffuse, 0});
    const auto f = synthesize_rf(field, acq);
    const auto line = f.line(0);
    std::size_t peak = 0;
    for (std::size_t i = 0; i < line.size(); ++i)
      if (std::abs(line[i]) > std::abs(line[peak])) peak = i;
    // t = 2 z / c = 20 us, sample 800 at 40 MHz
    CHECK(peak >= 799);
    CHECK(peak <= 801);
  }

  TEST_CASE("superposition") {
    AcquisitionParams acq;
    auto p = quiet(test::homogeneous_phantom(60, 6, 4, 0.3));
    p.regions[0].coherent_spacing_mm = 0.8;
    const auto all = generate_scatterer_field(p, 8, acq);
    ScattererField a = all, b = all;
    a.scatterers.clear();
    b.scatterers.clear();
    for (std::size_t i = 0; i < all.scatterers.size(); ++i)
      (i % 2 ? a : b).scatterers.push_back(all.scatterers[i]);
    const auto fa = synthesize_rf(a, acq), fb = synthesize_rf(b, acq), fab = synthesize_rf(all, acq);
    double peak = 0.0, worst = 0.0;
    for (std::size_t k = 0; k < fab.samples().size(); ++k) {
      peak = std::max(peak, std::abs(fab.samples()[k]));
      worst = std::max(worst, std::abs(fa.samples()[k] + fb.samples()[k] - fab.samples()[k]));
    }
    CHECK(worst <= 1e-9 * peak);
  }

  TEST_CASE("attenuation lowers the spectral centroid with depth") {
    AcquisitionParams acq;
    const auto f = test::simulate(quiet(test::homogeneous_phantom(45, 30, 12, 0.5)), 21, acq);
    const std::size_t len = 256;
    double previous = 1e9;
    for (std::size_t i0 = 0; i0 + len <= f.axial_count(); i0 += f.axial_count() / 4) {
      const auto lines = block_lines(f, i0, len);
      const double c = centroid(welch_psd(lines, acq.sampling_rate_mhz), 1.0, 19.0);
      CHECK(c < previous);
      previous = c;
    }
  }

  TEST_CASE("averaged block spectra follow the scattering model") {
    AcquisitionParams acq;
    const auto f = test::simulate(quiet(test::homogeneous_phantom(45, 20, 30)), 4, acq);
    const std::size_t len = 128;
    std::vector<std::vector<double>> lines;
    std::size_t blocks = 0;
    for (std::size_t i0 = 0; i0 + len <= f.axial_count(); i0 += len) {
      auto b = block_lines(f, i0, len);
      lines.insert(lines.end(), b.begin(), b.end());
      ++blocks;
    }
    REQUIRE(blocks * (f.lateral_count() / 7) >= 25);
    const auto s = welch_psd(lines, acq.sampling_rate_mhz);
    const auto band = usable_band(s);
    std::vector<double> x, y;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double fr = s.frequencies_mhz[k];
      if (!band.contains(fr) || fr <= 0.0) continue;
      const double p = pulse_spectrum(fr, acq);
      x.push_back(10 * std::log10(theoretical_scattering(fr, 0.045, 1.0, acq)));
      y.push_back(10 * std::log10(s.power[k] / (p * p)));
    }
    REQUIRE(x.size() >= 8);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= x.size();
    my /= y.size();
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= mx, y[i] -= my;
    const double rc = test::correlation(x, y);
    CHECK(rc * rc > 0.95);
  }

  TEST_CASE("spec validation") {
    auto p = test::homogeneous_phantom(45, 10, 10);
    p.regions[0].coherent_jitter = 0.5;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    p = test::homogeneous_phantom(45, 10, 10);
    p.regions[0].diffuse_density = 0.0;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    p.regions[0].cyst = true;
    CHECK_NOTHROW(p.validate());
  }
}
