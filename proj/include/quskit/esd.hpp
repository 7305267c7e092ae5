#pragma once

// Effective scatterer diameter estimation: reference-normalized log spectra,
// straight-line fits against f^2, neighbourhood-weighted averaging of the fitted
// lines, and inversion of the averaged slope to a diameter.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quskit/core.hpp"
#include "quskit/pipeline.hpp"
#include "quskit/spectral.hpp"

namespace quskit {

/// Slope of the normalized log spectrum per mm^2 of squared-diameter difference (dB/MHz^2).
inline constexpr double kGaussianSlopeDb = 13.20;

struct LogSpectrum {
  std::vector<double> frequencies_mhz;
  std::vector<double> y_db;
  FrequencyBand band;
};

/// 10 log10(sample / reference) over a fixed band. Bins where either spectrum is zero are
/// dropped; more than 20% dropped is an error.
LogSpectrum log_spectral_ratio(const Spectrum& sample, const Spectrum& reference, FrequencyBand band);

/// 10 log10(sample / reference) over the intersection of both usable bands and `limit`.
LogSpectrum normalized_log_spectrum(const Spectrum& sample, const Spectrum& reference,
                                    std::optional<FrequencyBand> limit = FrequencyBand{2.0, 13.0},
                                    double drop_db = 6.0);

struct BlockRegression {
  double slope = 0.0;      // m, dB/MHz^2
  double intercept = 0.0;  // c, dB
  double r2 = 0.0;
  double rms_residual_db = 0.0;
  std::size_t points = 0;
  BlockIndex index;
  FrequencyBand band;
  bool reliable = true;
  std::string failure;  // stage that failed, empty when the fit exists
};

/// Ordinary least squares of y against x = f^2. Needs at least 8 points spanning two
/// distinct frequencies.
BlockRegression fit_block_regression(std::span<const double> frequencies_mhz,
                                     std::span<const double> y_db);
BlockRegression fit_block_regression(const LogSpectrum& y);

struct NnarlfResult {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> slope;      // M, row-major; NaN where no reliable neighbour exists
  std::vector<double> intercept;  // C
};

/// Exponentially weighted mean of reliable neighbours' (m, c) over a clipped window.
NnarlfResult nnarlf(std::span<const BlockRegression> blocks, std::size_t rows, std::size_t cols,
                    const NnarlfConfig& cfg);

/// sqrt(-M / 13.20 + D_ref^2) in mm. Throws UnphysicalSlopeError when the radicand is <= 0.
double esd_from_slope(double slope_db_per_mhz2, double d_ref_mm);

/// n_S = n_R (D_R / D_S)^6 10^(C/10).
double eac_from_intercept(double intercept_db, double d_sample_mm, double d_ref_mm, double n_ref);

struct EsdSummary {
  double mean_esd_um = 0.0;
  double sd_esd_um = 0.0;
  double median_esd_um = 0.0;
  double reliable_fraction = 0.0;
  std::size_t reliable_blocks = 0;
  bool erratic = false;
};

struct EsdMap {
  BlockGrid grid;
  RoiSpec roi;
  std::vector<BlockRegression> regressions;  // row-major
  std::vector<double> weighted_slope;        // M
  std::vector<double> weighted_intercept;    // C
  std::vector<double> esd_um;                // NaN where unreliable
  std::vector<double> eac_log_ratio_db;      // 10 log10(n_S / n_R), NaN where unreliable
  std::vector<bool> reliable;
  EsdSummary summary;
  bool gain_capped = false;

  std::size_t rows() const { return grid.rows(); }
  std::size_t cols() const { return grid.cols(); }
};

EsdSummary summarize(const EsdMap& map, double erratic_fraction = 0.5);

/// Full chain on one ROI. Sample and reference must share acquisition parameters.
EsdMap estimate_esd_map(const RFFrame& sample, const RFFrame& reference, const RoiSpec& roi,
                        const PipelineConfig& cfg);

/// Preprocesses each frame once and evaluates every ROI.
std::vector<EsdMap> estimate_esd_maps(const RFFrame& sample, const RFFrame& reference,
                                      std::span<const RoiSpec> rois, const PipelineConfig& cfg);

struct AblationCase {
  RFFrame sample;
  RFFrame reference;
  std::vector<RoiSpec> rois;
  double truth_esd_um = 0.0;
  double beta = 0.0;  // sample attenuation
  std::optional<double> reference_beta;
};

struct AblationRow {
  std::string name;  // "full" or an ablation name
  // Per case |mean over reliable blocks of all ROIs - truth| / truth, averaged over cases.
  // A case with no reliable block counts as 100%.
  double mean_abs_error_pct = 0.0;
  double mean_abs_error_um = 0.0;  // same, in um, over cases that produced an estimate
  double mean_sd_um = 0.0;         // within-map SD of ESD, averaged over maps with an estimate
  double reliable_fraction = 0.0;
  std::size_t failed_cases = 0;
};

/// Full pipeline first, then every single-stage ablation in kAllStages order. The base
/// config's beta and reference_beta are replaced per case.
std::vector<AblationRow> run_ablation(std::span<const AblationCase> cases, const PipelineConfig& base);

/// Binary PPM (P6), one pixel per block scaled by `scale`; blue deepens with ESD over
/// [lo_um, hi_um]; unreliable blocks are black.
std::vector<std::uint8_t> esd_map_ppm(const EsdMap& map, double lo_um, double hi_um,
                                      std::size_t scale = 8);

}  // namespace quskit
