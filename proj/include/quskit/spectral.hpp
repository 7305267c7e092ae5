#pragma once

// Power-spectrum estimators and spectral feature extraction.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace quskit {

enum class SpectrumKind { welch, ar };

struct Spectrum {
  std::vector<double> frequencies_mhz;  // uniform, strictly increasing
  std::vector<double> power;            // one-sided density, linear units
  SpectrumKind kind = SpectrumKind::welch;

  std::size_t size() const noexcept { return power.size(); }
  double resolution_mhz() const {
    return frequencies_mhz.size() > 1 ? frequencies_mhz[1] - frequencies_mhz[0] : 0.0;
  }
};

struct FrequencyBand {
  double lo_mhz = 0.0;
  double hi_mhz = 0.0;

  bool contains(double f) const { return f >= lo_mhz && f <= hi_mhz; }
  double width() const { return hi_mhz - lo_mhz; }
};

struct WelchOptions {
  std::size_t segment_len = 64;
  double overlap = 0.5;
  std::size_t nfft = 2048;  // zero-padded transform length (frequency grid)
};

/// Hamming-windowed Welch periodogram averaged over every segment of every line.
/// Throws InvalidArgument for an empty block, segment_len < 32, or a line shorter than a segment.
Spectrum welch_psd(std::span<const std::vector<double>> lines, double fs_mhz,
                   const WelchOptions& opts = {});

/// Widest contiguous interval around the spectral peak with power >= peak - drop_db.
FrequencyBand usable_band(const Spectrum& spectrum, double drop_db = 6.0);

/// Burg-method autoregressive model.
struct ArModel {
  std::vector<double> coefficients;  // a_1..a_p of A(z) = 1 + sum a_k z^-k
  std::vector<double> reflection;    // k_1..k_p
  double noise_variance = 0.0;
};

ArModel burg(std::span<const double> signal, std::size_t order);

/// sigma^2 / |A(e^{j 2 pi f / fs})|^2 sampled on nfft/2+1 bins over [0, fs/2].
Spectrum ar_spectrum(std::span<const double> signal, std::size_t order, double fs_mhz,
                     std::size_t nfft = 2048);

struct PeakOptions {
  double prominence_db = 3.0;      // above the local median
  double median_halfwidth_mhz = 1.5;
  double harmonic_guard = 1.5;     // spacings >= guard * median spacing are skipped peaks
};

/// Local maxima inside `band` that clear the prominence threshold, by frequency.
std::vector<double> find_spectral_peaks(const Spectrum& spectrum, FrequencyBand band,
                                        const PeakOptions& opts = {});

/// Mean spacing of successive qualifying peaks, in MHz. Throws NoPeriodicityError.
double spectral_peak_spacing(const Spectrum& spectrum, FrequencyBand band,
                             const PeakOptions& opts = {});

}  // namespace quskit
