#pragma once

// System-effect reduction applied to whole frames before block analysis:
// Wiener deconvolution, the 2-13 MHz brick-wall bandpass, and depth-dependent
// attenuation compensation on short-time spectra.

#include <cstddef>
#include <vector>

#include "quskit/core.hpp"

namespace quskit {

enum class DeconvMode { known_psf, cepstral_estimate };

struct DeconvConfig {
  DeconvMode mode = DeconvMode::known_psf;
  std::vector<double> psf;       // required for known_psf
  std::size_t psf_origin = 0;    // index of the zero-lag sample in psf
  double epsilon = 1e-3;         // noise floor relative to max |P|^2
  std::size_t cepstral_segment = 128;
  std::size_t cepstral_lifter = 12;  // quefrency cutoff in samples
};

/// Per-line X conj(P) / (|P|^2 + eps max|P|^2). Throws InvalidArgument for eps <= 0,
/// a missing or all-zero PSF.
RFFrame deconvolve(const RFFrame& frame, const DeconvConfig& cfg);

/// Minimum-phase pulse estimate from the liftered cepstrum of the frame's averaged
/// short-time log spectrum. Origin is index 0; peak magnitude is 1.
std::vector<double> estimate_psf_cepstral(const RFFrame& frame, std::size_t segment_len = 128,
                                          std::size_t lifter = 12);

/// Zero-phase brick-wall mask on each full line's spectrum.
RFFrame bandpass(const RFFrame& frame, double lo_mhz, double hi_mhz);
RFFrame bandpass_2_13(const RFFrame& frame);

struct AttenuationOptions {
  std::size_t segment_len = 64;
  double max_gain_db = 60.0;
};

struct CompensationResult {
  RFFrame frame;
  bool gain_capped = false;
};

/// Multiplies each short-time spectrum by exp(2 beta f z), z at the segment centre
/// (beta in Np/cm/MHz, f in MHz, z in cm). Gains above max_gain_db are clamped.
CompensationResult compensate_attenuation(const RFFrame& frame, double beta,
                                          const AttenuationOptions& opts = {});

/// Forward operator, gain exp(-2 beta f z). Used to build round-trip tests.
RFFrame apply_attenuation(const RFFrame& frame, double beta, const AttenuationOptions& opts = {});

}  // namespace quskit
