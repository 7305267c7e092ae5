#pragma once

// Mean scatterer spacing from the coherent (non-Gaussian) IMFs of each ROI line,
// via peak spacing in a Burg autoregressive spectrum.

#include <cstddef>
#include <string>
#include <vector>

#include "quskit/core.hpp"
#include "quskit/pipeline.hpp"

namespace quskit {

struct MssEstimate {
  double mss_mm = 0.0;     // median over successful lines
  double dispersion = 0.0; // median |line - mss| / mss
  double sd_mm = 0.0;
  double delta_f_mhz = 0.0;  // sound_speed / (2 mss)
  std::size_t n_peaks = 0;   // median peak count over successful lines
  std::vector<double> per_line_mm;  // successful lines only
  std::size_t lines = 0;
  std::size_t failed_lines = 0;
  bool reliable = false;
  std::string reason;  // empty when reliable
};

/// Preprocesses (deconvolution, bandpass) then decomposes each ROI line. Unreliable when most
/// lines fail, the median leaves the plausibility window, or the lines disagree.
MssEstimate estimate_mss(const RFFrame& frame, const RoiSpec& roi, const PipelineConfig& cfg);

/// Same, on a frame that is already preprocessed.
MssEstimate estimate_mss_prepared(const RFFrame& prepared, const RoiSpec& roi,
                                  const PipelineConfig& cfg);

}  // namespace quskit
