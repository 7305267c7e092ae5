#include "quskit/pipeline.hpp"

#include <cmath>

#include "quskit/synthrf.hpp"

namespace quskit {

std::string_view ablation_name(Stage stage) {
  switch (stage) {
    case Stage::deconvolution: return "no-deconv";
    case Stage::bandpass: return "no-filter";
    case Stage::attenuation: return "no-attenuation-normalization";
    case Stage::eemd: return "no-eemd";
    case Stage::neighborhood: return "no-neighborhood";
  }
  return "";
}

Stage stage_from_ablation(std::string_view name) {
  for (Stage s : kAllStages)
    if (ablation_name(s) == name) return s;
  throw InvalidArgument("unknown ablation stage: " + std::string(name));
}

void NnarlfConfig::validate() const {
  if (!(lambda_axial > 0.0) || !(lambda_lateral > 0.0))
    throw InvalidArgument("nnarlf: decay rates must be positive");
}

void PipelineConfig::validate() const {
  if (!(deconv.epsilon > 0.0)) throw InvalidArgument("config: deconv epsilon must be positive");
  if (!(beta >= 0.0)) throw InvalidArgument("config: beta must be >= 0");
  if (reference_beta && !(*reference_beta >= 0.0))
    throw InvalidArgument("config: reference_beta must be >= 0");
  if (eemd.ensemble_size == 0) throw InvalidArgument("config: eemd ensemble_size must be >= 1");
  if (std::isnan(eemd.snr_db)) throw InvalidArgument("config: eemd snr_db is NaN");
  if (!(ks_alpha >= 0.0 && ks_alpha <= 1.0)) throw InvalidArgument("config: ks_alpha must lie in [0, 1]");
  if (!(min_diffuse_energy >= 0.0 && min_diffuse_energy <= 1.0))
    throw InvalidArgument("config: min_diffuse_energy must lie in [0, 1]");
  if (welch.segment_len < 32) throw InvalidArgument("config: welch segment_len must be >= 32");
  if (!(welch.overlap >= 0.0 && welch.overlap < 1.0))
    throw InvalidArgument("config: welch overlap must lie in [0, 1)");
  if (welch.nfft < welch.segment_len) throw InvalidArgument("config: welch nfft below segment_len");
  if (blocks) {
    const auto& b = *blocks;
    if (b.axial_len == 0 || b.lateral_len == 0 || b.axial_step == 0 || b.lateral_step == 0)
      throw InvalidArgument("config: block dimensions and steps must be positive");
    if (b.axial_step > b.axial_len || b.lateral_step > b.lateral_len)
      throw InvalidArgument("config: block steps must not exceed block lengths");
    if (b.axial_len < welch.segment_len)
      throw InvalidArgument("config: block shorter than a Welch segment");
  }
  nnarlf.validate();
  if (!(reference_esd_um > 0.0)) throw InvalidArgument("config: reference_esd_um must be positive");
  if (!(reference_concentration > 0.0))
    throw InvalidArgument("config: reference_concentration must be positive");
  if (!(band_lo_mhz >= 0.0 && band_hi_mhz > band_lo_mhz))
    throw InvalidArgument("config: invalid analysis band");
  if (!(usable_drop_db > 0.0)) throw InvalidArgument("config: usable_drop_db must be positive");
  if (!(min_band_mhz >= 0.0)) throw InvalidArgument("config: min_band_mhz must be >= 0");
  if (!(erratic_fraction >= 0.0 && erratic_fraction <= 1.0))
    throw InvalidArgument("config: erratic_fraction must lie in [0, 1]");
  if (ar_order < 4) throw InvalidArgument("config: ar_order must be >= 4");
  if (!(mss_min_mm > 0.0 && mss_max_mm > mss_min_mm))
    throw InvalidArgument("config: invalid MSS plausibility window");
  if (!(mss_deconv_epsilon > 0.0))
    throw InvalidArgument("config: mss_deconv_epsilon must be positive");
  if (!(mss_max_dispersion > 0.0)) throw InvalidArgument("config: mss_max_dispersion must be positive");
}

PreparedFrame prepare_frame(const RFFrame& frame, const PipelineConfig& cfg, double beta,
                            bool with_attenuation) {
  PreparedFrame out{frame, false};
  if (cfg.enabled(Stage::deconvolution)) {
    DeconvConfig dc = cfg.deconv;
    if (dc.mode == DeconvMode::known_psf && dc.psf.empty()) {
      const Psf psf = point_echo_psf(frame.acquisition());
      dc.psf = psf.taps;
      dc.psf_origin = psf.origin;
    }
    out.frame = deconvolve(out.frame, dc);
  }
  if (cfg.enabled(Stage::bandpass)) out.frame = bandpass(out.frame, cfg.band_lo_mhz, cfg.band_hi_mhz);
  if (with_attenuation && cfg.enabled(Stage::attenuation)) {
    auto comp = compensate_attenuation(out.frame, beta);
    out.frame = std::move(comp.frame);
    out.gain_capped = comp.gain_capped;
  }
  return out;
}

PreparedFrame prepare_frame_for_mss(const RFFrame& frame, const PipelineConfig& cfg) {
  PipelineConfig c = cfg;
  c.deconv.epsilon = cfg.mss_deconv_epsilon;
  return prepare_frame(frame, c, 0.0, false);
}

}  // namespace quskit
