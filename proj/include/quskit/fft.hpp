#pragma once

// Thin wrapper over FFTW's real-to-complex transforms with a shared plan cache.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace quskit::fft {

using cvec = std::vector<std::complex<double>>;

/// Forward real FFT of length n (input zero-padded or truncated to n). Returns n/2+1 bins.
cvec rfft(std::span<const double> x, std::size_t n);
inline cvec rfft(std::span<const double> x) { return rfft(x, x.size()); }

/// Inverse of rfft, normalized by 1/n.
std::vector<double> irfft(std::span<const std::complex<double>> spectrum, std::size_t n);

/// Frequency in MHz of bin k for an n-point transform at fs MHz.
inline double bin_frequency(std::size_t k, std::size_t n, double fs_mhz) {
  return static_cast<double>(k) * fs_mhz / static_cast<double>(n);
}

std::size_t next_pow2(std::size_t n);

}  // namespace quskit::fft
