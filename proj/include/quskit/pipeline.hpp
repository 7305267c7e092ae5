#pragma once

// Configuration shared by the ESD and MSS estimators, and the frame-level
// preprocessing chain (deconvolve -> bandpass -> attenuation compensation).

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "quskit/core.hpp"
#include "quskit/preprocess.hpp"
#include "quskit/spectral.hpp"

namespace quskit {

enum class Stage { deconvolution, bandpass, attenuation, eemd, neighborhood };

inline constexpr std::array<Stage, 5> kAllStages = {Stage::deconvolution, Stage::bandpass,
                                                    Stage::attenuation, Stage::eemd,
                                                    Stage::neighborhood};

/// Ablation names: no-deconv, no-filter, no-attenuation-normalization, no-eemd, no-neighborhood.
std::string_view ablation_name(Stage stage);
Stage stage_from_ablation(std::string_view name);  // throws InvalidArgument

struct EemdSettings {
  std::size_t ensemble_size = 50;
  double snr_db = 30.0;
  std::uint64_t seed = 0;
};

struct NnarlfConfig {
  std::size_t half_axial = 5;   // L_a, in blocks
  std::size_t half_lateral = 5; // L_l
  double lambda_axial = 0.5;    // decay per block
  double lambda_lateral = 0.5;

  void validate() const;
};

struct PipelineConfig {
  DeconvConfig deconv;  // known_psf with an empty psf uses the simulator's point echo
  double beta = 0.0;            // sample attenuation, Np/cm/MHz
  std::optional<double> reference_beta;  // defaults to beta
  EemdSettings eemd;
  double ks_alpha = 0.05;
  // A block line whose diffuse IMFs keep less than this share of its energy is dropped.
  double min_diffuse_energy = 0.5;
  bool normalize_imfs = false;  // unit-peak IMFs before summing; distorts block spectra
  WelchOptions welch;
  std::optional<BlockSpec> blocks;  // defaults to default_block_spec
  NnarlfConfig nnarlf;
  double reference_esd_um = 45.0;
  double reference_concentration = 1.0;
  double band_lo_mhz = 2.0;
  double band_hi_mhz = 13.0;
  double usable_drop_db = 6.0;
  double min_band_mhz = 3.0;  // narrower fit bands leave the block unreliable
  bool roi_usable_band = true;  // fit band from ROI-averaged spectra rather than per block
  // A block is unreliable when its fit is both poor (R^2 below r2_min) and noisy
  // (RMS residual above max_residual_db).
  double r2_min = 0.3;
  double max_residual_db = 4.0;
  double erratic_fraction = 0.5;
  std::size_t ar_order = 50;
  // MSS keeps more of the low band, where a jittered lattice comb survives longest.
  double mss_deconv_epsilon = 1e-4;
  double mss_min_mm = 0.2;
  double mss_max_mm = 2.0;
  // Lines must agree: relative median absolute deviation of per-line MSS at most this.
  double mss_max_dispersion = 0.25;
  std::set<Stage> ablation;

  bool enabled(Stage s) const { return !ablation.contains(s); }
  void validate() const;
};

struct PreparedFrame {
  RFFrame frame;
  bool gain_capped = false;
};

/// Runs the enabled preprocessing stages in fixed order on a full frame.
PreparedFrame prepare_frame(const RFFrame& frame, const PipelineConfig& cfg, double beta,
                            bool with_attenuation = true);

/// MSS preparation: deconvolution at mss_deconv_epsilon and bandpass, no attenuation stage.
PreparedFrame prepare_frame_for_mss(const RFFrame& frame, const PipelineConfig& cfg);

}  // namespace quskit
