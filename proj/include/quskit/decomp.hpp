#pragma once

// Empirical mode decomposition, its noise-assisted ensemble variant, and
// Kolmogorov-Smirnov based separation of diffuse (Gaussian) from coherent IMFs.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace quskit {

struct ImfSet {
  std::vector<std::vector<double>> imfs;  // finest first
  std::vector<double> residue;
  // Divisors applied by select_imfs; imfs themselves stay raw.
  std::vector<double> scales;
  bool normalized = false;
  bool selected = false;
  std::vector<std::size_t> diffuse_indices;  // 0-based
  std::vector<std::size_t> coherent_indices;
  std::size_t ensemble_size = 1;
  double noise_snr_db = std::numeric_limits<double>::infinity();

  std::size_t size() const noexcept { return imfs.size(); }
  std::size_t length() const noexcept { return residue.size(); }
};

struct EmdOptions {
  double sd_threshold = 0.2;
  std::size_t max_sift_iterations = 10;
  std::size_t max_imfs = 16;
};

/// Throws InvalidArgument for fewer than 16 samples or non-finite input.
ImfSet emd(std::span<const double> signal, const EmdOptions& opts = {});

struct EemdOptions {
  std::size_t ensemble_size = 50;
  double noise_snr_db = 30.0;  // +infinity disables the added noise
  std::uint64_t seed = 0;
  EmdOptions emd;
};

/// Member m uses derive_seed(seed, "eemd", m); results do not depend on thread count.
/// The residue is signal minus the averaged IMFs, so reconstruction is exact.
ImfSet eemd(std::span<const double> signal, const EemdOptions& opts = {});

struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
  bool gaussian = false;
};

/// Kolmogorov distribution survival function P(K > lambda).
double kolmogorov_sf(double lambda);

/// One-sample two-sided test against N(sample mean, sample variance).
/// Needs at least 50 samples. Constant input is reported as non-Gaussian.
KsResult ks_gaussianity(std::span<const double> samples, double alpha = 0.05);

/// Tests each raw IMF and partitions indices. With `normalize`, sums use IMFs scaled to unit peak.
ImfSet select_imfs(ImfSet set, double alpha = 0.05, bool normalize = true);

/// Sums of the (scaled) IMFs in each partition. Throw EmptyComponentError on an empty set.
std::vector<double> diffuse_signal(const ImfSet& set);
std::vector<double> coherent_signal(const ImfSet& set);

/// Extremum and zero-crossing counts, used for the IMF property check.
struct OscillationCounts {
  std::size_t extrema = 0;
  std::size_t zero_crossings = 0;
};
OscillationCounts count_oscillations(std::span<const double> x);

}  // namespace quskit
