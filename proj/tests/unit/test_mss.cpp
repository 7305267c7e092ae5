#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "quskit/mss.hpp"
#include "support.hpp"

using namespace quskit;

namespace {

PhantomSpec lattice(std::optional<double> spacing_mm, double jitter) {
  auto p = test::homogeneous_phantom(45.0, 30.0, 30.0, 0.058);
  p.depth_offset_mm = 5.0;
  p.regions[0].coherent_spacing_mm = spacing_mm;
  p.regions[0].coherent_jitter = jitter;
  return p;
}

const RoiSpec kRoi{5.0, 10.0, 5.0, 8.8};

}  // namespace

TEST_SUITE("mss") {
  TEST_CASE("0.75 mm lattice") {
    const auto f = test::simulate(lattice(0.75, 0.05), 1);
    const auto e = estimate_mss(f, kRoi, PipelineConfig{});
    CHECK(e.reliable);
    CHECK(e.mss_mm == doctest::Approx(0.75).epsilon(0.05 / 0.75));
    CHECK(e.delta_f_mhz == doctest::Approx(1540.0 / (2.0 * e.mss_mm * 1e3)));
    CHECK(e.lines == e.per_line_mm.size() + e.failed_lines);

    SUBCASE("invariant to amplitude scaling") {
      RFFrame scaled = f;
      for (auto& v : scaled.samples()) v *= 40.0;
      CHECK(estimate_mss(scaled, kRoi, PipelineConfig{}).mss_mm == doctest::Approx(e.mss_mm).epsilon(1e-9));
    }
  }

  TEST_CASE("1.00 mm lattice") {
    // c / (2 d) = 1540 / 2e-3 Hz = 0.770 MHz
    const auto f = test::simulate(lattice(1.0, 0.03), 1);
    const auto e = estimate_mss(f, {5.0, 15.0, 5.0, 8.8}, PipelineConfig{});
    CHECK(e.reliable);
    CHECK(e.mss_mm == doctest::Approx(1.0).epsilon(0.05));
    CHECK(e.delta_f_mhz == doctest::Approx(0.770).epsilon(0.05));
  }

  TEST_CASE("diffuse-only phantom is unreliable") {
    const auto e = estimate_mss(test::simulate(lattice(std::nullopt, 0.0), 2), kRoi, PipelineConfig{});
    CHECK_FALSE(e.reliable);
    CHECK_FALSE(e.reason.empty());
  }

  TEST_CASE("shuffling destroys the periodicity") {
    const auto f = test::simulate(lattice(0.75, 0.05), 3);
    const auto prepared = prepare_frame_for_mss(f, PipelineConfig{}).frame;
    int unreliable = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      std::mt19937_64 rng(seed);
      RFFrame shuffled = prepared;
      for (std::size_t j = 0; j < shuffled.lateral_count(); ++j) {
        auto line = shuffled.line(j);
        std::shuffle(line.begin(), line.end(), rng);
        shuffled.set_line(j, line);
      }
      unreliable += !estimate_mss_prepared(shuffled, kRoi, PipelineConfig{}).reliable;
    }
    CHECK(unreliable >= 9);
  }
}
