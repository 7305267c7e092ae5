#pragma once

// Small helpers shared by the unit tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "quskit/core.hpp"
#include "quskit/synthrf.hpp"

namespace quskit::test {

inline std::vector<double> gaussian_noise(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

inline std::vector<double> tone(std::size_t n, double f_mhz, double fs_mhz, double amp = 1.0,
                                double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = amp * std::sin(2.0 * M_PI * f_mhz * static_cast<double>(i) / fs_mhz + phase);
  return x;
}

inline double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

inline double correlation(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

inline double nrmse(std::span<const double> x, std::span<const double> ref) {
  double num = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) num += (x[i] - ref[i]) * (x[i] - ref[i]);
  return std::sqrt(num / energy(ref));
}

inline PhantomRegion homogeneous_region(double esd_um) {
  PhantomRegion r;
  r.axial_min_mm = 0.0;
  r.axial_max_mm = 100.0;
  r.lateral_min_mm = -10.0;
  r.lateral_max_mm = 100.0;
  r.esd_um = esd_um;
  return r;
}

inline PhantomSpec homogeneous_phantom(double esd_um, double axial_mm, double lateral_mm,
                                       double beta = 0.0) {
  PhantomSpec p;
  p.regions = {homogeneous_region(esd_um)};
  p.attenuation_beta = beta;
  p.axial_extent_mm = axial_mm;
  p.lateral_extent_mm = lateral_mm;
  return p;
}

inline RFFrame simulate(const PhantomSpec& spec, std::uint64_t seed, const AcquisitionParams& acq = {}) {
  return synthesize_rf(generate_scatterer_field(spec, seed, acq), acq);
}

/// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("quskit_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace quskit::test
