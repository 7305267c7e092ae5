#include "quskit/mss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "quskit/decomp.hpp"
#include "quskit/parallel.hpp"
#include "quskit/spectral.hpp"

namespace quskit {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double relative_mad(const std::vector<double>& v, double med) {
  std::vector<double> dev;
  dev.reserve(v.size());
  for (double x : v) dev.push_back(std::fabs(x - med));
  return median(std::move(dev)) / med;
}

struct LineResult {
  double spacing_mm = 0.0;
  std::size_t peaks = 0;
};

}  // namespace

MssEstimate estimate_mss_prepared(const RFFrame& prepared, const RoiSpec& roi,
                                  const PipelineConfig& cfg) {
  cfg.validate();
  const RFFrame r = extract_roi(prepared, roi);
  const auto& acq = r.acquisition();
  const FrequencyBand band{cfg.band_lo_mhz, cfg.band_hi_mhz};

  std::vector<std::optional<LineResult>> results(r.lateral_count());
  parallel_for(r.lateral_count(), [&](std::size_t j) {
    try {
      const auto line = r.line(j);
      std::vector<double> coherent;
      if (cfg.enabled(Stage::eemd)) {
        EemdOptions eo;
        eo.ensemble_size = cfg.eemd.ensemble_size;
        eo.noise_snr_db = cfg.eemd.snr_db;
        eo.seed = derive_seed(cfg.eemd.seed, "eemd/mss", j);
        coherent = coherent_signal(select_imfs(eemd(line, eo), cfg.ks_alpha, cfg.normalize_imfs));
      } else {
        coherent = line;
      }
      const Spectrum spec = ar_spectrum(coherent, cfg.ar_order, acq.sampling_rate_mhz);
      const auto peaks = find_spectral_peaks(spec, band);
      const double df = spectral_peak_spacing(spec, band);
      results[j] = LineResult{acq.sound_speed / (2.0 * df * 1e6) * 1e3, peaks.size()};
    } catch (const NumericalError&) {
      // Covers missing coherent IMFs, no periodicity and unstable AR fits.
    }
  });

  MssEstimate est;
  est.lines = results.size();
  std::vector<double> peak_counts;
  for (const auto& res : results) {
    if (!res) {
      ++est.failed_lines;
      continue;
    }
    est.per_line_mm.push_back(res->spacing_mm);
    peak_counts.push_back(static_cast<double>(res->peaks));
  }
  if (est.per_line_mm.empty() || 2 * est.failed_lines > est.lines) {
    est.reason = "no coherent periodicity on most lines";
    if (!est.per_line_mm.empty()) est.mss_mm = median(est.per_line_mm);
  } else {
    est.mss_mm = median(est.per_line_mm);
    est.reliable = true;
    if (est.mss_mm < cfg.mss_min_mm || est.mss_mm > cfg.mss_max_mm) {
      est.reliable = false;
      est.reason = "spacing outside plausibility window";
    } else if (relative_mad(est.per_line_mm, est.mss_mm) > cfg.mss_max_dispersion) {
      // Diffuse speckle yields spurious peaks whose spacing varies from line to line.
      est.reliable = false;
      est.reason = "per-line spacings disagree";
    }
  }
  if (!est.per_line_mm.empty()) {
    const double mean = std::accumulate(est.per_line_mm.begin(), est.per_line_mm.end(), 0.0) /
                        static_cast<double>(est.per_line_mm.size());
    double ss = 0.0;
    for (double v : est.per_line_mm) ss += (v - mean) * (v - mean);
    est.sd_mm = est.per_line_mm.size() > 1
                    ? std::sqrt(ss / static_cast<double>(est.per_line_mm.size() - 1))
                    : 0.0;
    est.n_peaks = static_cast<std::size_t>(std::lround(median(peak_counts)));
    if (est.mss_mm > 0.0) est.dispersion = relative_mad(est.per_line_mm, est.mss_mm);
  }
  if (est.mss_mm > 0.0) est.delta_f_mhz = acq.sound_speed / (2.0 * est.mss_mm * 1e-3) * 1e-6;
  return est;
}

MssEstimate estimate_mss(const RFFrame& frame, const RoiSpec& roi, const PipelineConfig& cfg) {
  cfg.validate();
  const PreparedFrame p = prepare_frame_for_mss(frame, cfg);
  return estimate_mss_prepared(p.frame, roi, cfg);
}

}  // namespace quskit
