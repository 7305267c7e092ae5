#include "quskit/esd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "quskit/decomp.hpp"
#include "quskit/parallel.hpp"

namespace quskit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

FrequencyBand intersect(FrequencyBand a, FrequencyBand b) {
  return {std::max(a.lo_mhz, b.lo_mhz), std::min(a.hi_mhz, b.hi_mhz)};
}

double median_of(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

LogSpectrum log_spectral_ratio(const Spectrum& sample, const Spectrum& reference, FrequencyBand band) {
  if (sample.size() != reference.size() || sample.frequencies_mhz != reference.frequencies_mhz)
    throw InvalidArgument("normalized spectrum: sample and reference grids differ");
  if (!(band.hi_mhz > band.lo_mhz)) throw NumericalError("normalized spectrum: empty band intersection");
  LogSpectrum out;
  out.band = band;
  std::size_t in_band = 0;
  std::size_t dropped = 0;
  for (std::size_t k = 0; k < sample.size(); ++k) {
    const double f = sample.frequencies_mhz[k];
    if (!band.contains(f)) continue;
    ++in_band;
    if (!(reference.power[k] > 0.0) || !(sample.power[k] > 0.0)) {
      ++dropped;
      continue;
    }
    out.frequencies_mhz.push_back(f);
    out.y_db.push_back(10.0 * std::log10(sample.power[k] / reference.power[k]));
  }
  if (in_band == 0) throw NumericalError("normalized spectrum: no bins in band");
  if (static_cast<double>(dropped) > 0.2 * static_cast<double>(in_band))
    throw NumericalError("normalized spectrum: spectra vanish on more than 20% of the band");
  return out;
}

LogSpectrum normalized_log_spectrum(const Spectrum& sample, const Spectrum& reference,
                                    std::optional<FrequencyBand> limit, double drop_db) {
  if (sample.size() != reference.size() || sample.frequencies_mhz != reference.frequencies_mhz)
    throw InvalidArgument("normalized spectrum: sample and reference grids differ");
  FrequencyBand band = intersect(usable_band(sample, drop_db), usable_band(reference, drop_db));
  if (limit) band = intersect(band, *limit);
  return log_spectral_ratio(sample, reference, band);
}

BlockRegression fit_block_regression(std::span<const double> frequencies_mhz,
                                     std::span<const double> y_db) {
  if (frequencies_mhz.size() != y_db.size())
    throw InvalidArgument("regression: frequency and value counts differ");
  const std::size_t n = y_db.size();
  if (n < 8) throw NumericalError("regression: fewer than 8 points in band");

  double sx = 0.0;
  double sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += frequencies_mhz[i] * frequencies_mhz[i];
    sy += y_db[i];
  }
  const double mx = sx / static_cast<double>(n);
  const double my = sy / static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = frequencies_mhz[i] * frequencies_mhz[i] - mx;
    const double dy = y_db[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 1e-12 * std::max(1.0, mx * mx)))
    throw NumericalError("regression: rank-deficient design (single frequency)");

  BlockRegression r;
  r.points = n;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  const double sse = std::max(0.0, syy - r.slope * sxy);
  r.r2 = syy > 0.0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
  r.rms_residual_db = std::sqrt(sse / static_cast<double>(n));
  r.band = {frequencies_mhz.front(), frequencies_mhz.back()};
  return r;
}

BlockRegression fit_block_regression(const LogSpectrum& y) {
  BlockRegression r = fit_block_regression(y.frequencies_mhz, y.y_db);
  r.band = y.band;
  return r;
}

NnarlfResult nnarlf(std::span<const BlockRegression> blocks, std::size_t rows, std::size_t cols,
                    const NnarlfConfig& cfg) {
  cfg.validate();
  if (blocks.size() != rows * cols) throw InvalidArgument("nnarlf: grid size mismatch");
  NnarlfResult out{rows, cols, std::vector<double>(blocks.size(), kNaN),
                   std::vector<double>(blocks.size(), kNaN)};
  const auto la = static_cast<std::ptrdiff_t>(cfg.half_axial);
  const auto ll = static_cast<std::ptrdiff_t>(cfg.half_lateral);
  const auto nr = static_cast<std::ptrdiff_t>(rows);
  const auto nc = static_cast<std::ptrdiff_t>(cols);
  for (std::ptrdiff_t i = 0; i < nr; ++i) {
    for (std::ptrdiff_t j = 0; j < nc; ++j) {
      double wsum = 0.0;
      double msum = 0.0;
      double csum = 0.0;
      for (std::ptrdiff_t a = std::max<std::ptrdiff_t>(0, i - la); a <= std::min(nr - 1, i + la); ++a) {
        for (std::ptrdiff_t b = std::max<std::ptrdiff_t>(0, j - ll); b <= std::min(nc - 1, j + ll); ++b) {
          const auto& blk = blocks[static_cast<std::size_t>(a * nc + b)];
          if (!blk.reliable) continue;
          const double w = std::exp(-std::abs(cfg.lambda_axial * static_cast<double>(a - i)) -
                                    std::abs(cfg.lambda_lateral * static_cast<double>(b - j)));
          wsum += w;
          msum += w * blk.slope;
          csum += w * blk.intercept;
        }
      }
      if (wsum > 0.0) {
        out.slope[static_cast<std::size_t>(i * nc + j)] = msum / wsum;
        out.intercept[static_cast<std::size_t>(i * nc + j)] = csum / wsum;
      }
    }
  }
  return out;
}

double esd_from_slope(double slope_db_per_mhz2, double d_ref_mm) {
  if (!(d_ref_mm > 0.0)) throw InvalidArgument("esd_from_slope: reference diameter must be positive");
  const double radicand = -slope_db_per_mhz2 / kGaussianSlopeDb + d_ref_mm * d_ref_mm;
  if (!(radicand > 0.0)) throw UnphysicalSlopeError("unphysical slope: negative squared diameter");
  return std::sqrt(radicand);
}

double eac_from_intercept(double intercept_db, double d_sample_mm, double d_ref_mm, double n_ref) {
  if (!(d_sample_mm > 0.0) || !(d_ref_mm > 0.0) || !(n_ref > 0.0))
    throw InvalidArgument("eac_from_intercept: diameters and reference concentration must be positive");
  return n_ref * std::pow(d_ref_mm / d_sample_mm, 6) * std::pow(10.0, intercept_db / 10.0);
}

EsdSummary summarize(const EsdMap& map, double erratic_fraction) {
  EsdSummary s;
  std::vector<double> values;
  for (std::size_t k = 0; k < map.esd_um.size(); ++k)
    if (map.reliable[k]) values.push_back(map.esd_um[k]);
  s.reliable_blocks = values.size();
  s.reliable_fraction =
      map.esd_um.empty() ? 0.0 : static_cast<double>(values.size()) / static_cast<double>(map.esd_um.size());
  s.erratic = 1.0 - s.reliable_fraction > erratic_fraction;
  if (values.empty()) {
    s.mean_esd_um = s.sd_esd_um = s.median_esd_um = kNaN;
    return s;
  }
  s.mean_esd_um = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean_esd_um) * (v - s.mean_esd_um);
  s.sd_esd_um = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
  s.median_esd_um = median_of(values);
  return s;
}

namespace {

// Diffuse component of every (block row, ROI line) segment, or nullopt when none exists.
using SegmentSignals = std::vector<std::optional<std::vector<double>>>;

SegmentSignals diffuse_segments(const RFFrame& roi, const BlockGrid& grid, std::size_t lines,
                                const PipelineConfig& cfg, std::string_view stream) {
  const std::size_t rows = grid.rows();
  const std::size_t len = grid.spec().axial_len;
  SegmentSignals out(rows * lines);
  parallel_for(rows * lines, [&](std::size_t k) {
    const std::size_t row = k / lines;
    const std::size_t line = k % lines;
    const std::size_t start = grid.axial_begin(row);
    std::vector<double> seg(len);
    for (std::size_t i = 0; i < len; ++i) seg[i] = roi.at(start + i, line);
    if (!cfg.enabled(Stage::eemd)) {
      out[k] = std::move(seg);
      return;
    }
    EemdOptions eo;
    eo.ensemble_size = cfg.eemd.ensemble_size;
    eo.noise_snr_db = cfg.eemd.snr_db;
    eo.seed = derive_seed(cfg.eemd.seed, stream, row, line);
    const ImfSet set = select_imfs(eemd(seg, eo), cfg.ks_alpha, cfg.normalize_imfs);
    if (set.diffuse_indices.empty()) return;
    auto diffuse = diffuse_signal(set);
    // The first IMF carries most of the band, so rejecting it leaves a remnant whose
    // spectrum says nothing about scatterer size: treat the segment as coherent.
    const double kept = std::inner_product(diffuse.begin(), diffuse.end(), diffuse.begin(), 0.0);
    const double total = std::inner_product(seg.begin(), seg.end(), seg.begin(), 0.0);
    if (!(kept >= cfg.min_diffuse_energy * total)) return;
    out[k] = std::move(diffuse);
  });
  return out;
}

std::optional<Spectrum> block_spectrum(const SegmentSignals& segs, const BlockGrid& grid,
                                       std::size_t lines, BlockIndex b, double fs,
                                       const WelchOptions& welch) {
  std::vector<std::vector<double>> block;
  const std::size_t first = grid.lateral_begin(b.col);
  for (std::size_t l = first; l < first + grid.spec().lateral_len; ++l)
    if (const auto& s = segs[b.row * lines + l]) block.push_back(*s);
  if (block.empty()) return std::nullopt;
  return welch_psd(block, fs, welch);
}

std::optional<Spectrum> mean_spectrum(std::span<const std::optional<Spectrum>> spectra) {
  std::optional<Spectrum> out;
  std::size_t count = 0;
  for (const auto& sp : spectra) {
    if (!sp) continue;
    if (!out) {
      out = *sp;
    } else {
      for (std::size_t k = 0; k < sp->power.size(); ++k) out->power[k] += sp->power[k];
    }
    ++count;
  }
  if (out)
    for (double& p : out->power) p /= static_cast<double>(count);
  return out;
}

// Reference spectra for one axial window, averaged over the whole reference width. The
// reference is homogeneous, so every line at the ROI's depth cuts its variance.
struct ReferenceRows {
  std::vector<std::optional<Spectrum>> rows;  // per block row
  std::optional<Spectrum> mean;
};

ReferenceRows reference_rows(const RFFrame& reference, const RoiSpec& roi, const BlockSpec& spec,
                             const PipelineConfig& cfg) {
  RoiSpec ref_roi = roi;
  ref_roi.lateral_start_mm = 0.0;
  ref_roi.lateral_extent_mm =
      static_cast<double>(reference.lateral_count()) * reference.acquisition().lateral_pitch_mm;
  const RFFrame r = extract_roi(reference, ref_roi);
  const BlockGrid grid = partition_blocks(r, spec);
  const std::size_t rows = grid.rows();
  const std::size_t cols = grid.cols();
  const std::size_t lines = grid.lateral_begin(cols - 1) + spec.lateral_len;
  const auto segs = diffuse_segments(r, grid, lines, cfg, "eemd/reference");
  std::vector<std::optional<Spectrum>> blocks(rows * cols);
  parallel_for(rows * cols, [&](std::size_t k) {
    blocks[k] = block_spectrum(segs, grid, lines, grid.index(k), r.acquisition().sampling_rate_mhz,
                               cfg.welch);
  });
  ReferenceRows out;
  out.rows.resize(rows);
  for (std::size_t row = 0; row < rows; ++row)
    out.rows[row] = mean_spectrum(std::span(blocks).subspan(row * cols, cols));
  out.mean = mean_spectrum(blocks);
  return out;
}

EsdMap analyze_roi(const RFFrame& sample, const ReferenceRows& ref, const RoiSpec& roi,
                   const BlockSpec& spec, const PipelineConfig& cfg) {
  const RFFrame s = extract_roi(sample, roi);
  EsdMap map;
  map.roi = roi;
  map.grid = partition_blocks(s, spec);
  const std::size_t rows = map.grid.rows();
  const std::size_t cols = map.grid.cols();
  const std::size_t lines = map.grid.lateral_begin(cols - 1) + spec.lateral_len;
  const double fs = s.acquisition().sampling_rate_mhz;

  const auto s_segs = diffuse_segments(s, map.grid, lines, cfg, "eemd/sample");
  std::vector<std::optional<Spectrum>> s_blocks(rows * cols);
  parallel_for(rows * cols, [&](std::size_t k) {
    s_blocks[k] = block_spectrum(s_segs, map.grid, lines, map.grid.index(k), fs, cfg.welch);
  });
  const auto& ref_rows = ref.rows;

  std::optional<FrequencyBand> band =
      cfg.enabled(Stage::bandpass) ? std::optional<FrequencyBand>({cfg.band_lo_mhz, cfg.band_hi_mhz})
                                   : std::nullopt;
  // Fit band from ROI-averaged spectra, so speckle dips in a single block do not truncate it.
  const auto s_mean = mean_spectrum(s_blocks);
  const auto& r_mean = ref.mean;
  std::optional<FrequencyBand> roi_band;
  if (cfg.roi_usable_band && s_mean && r_mean) {
    try {
      FrequencyBand fb = intersect(usable_band(*s_mean, cfg.usable_drop_db),
                                   usable_band(*r_mean, cfg.usable_drop_db));
      if (band) fb = intersect(fb, *band);
      // Deep blocks can peak on compensated noise at the band edge, leaving a sliver.
      if (fb.hi_mhz - fb.lo_mhz >= cfg.min_band_mhz) roi_band = fb;
    } catch (const NumericalError&) {
    }
  }

  map.regressions.resize(rows * cols);
  for (std::size_t k = 0; k < rows * cols; ++k) {
    const BlockIndex b = map.grid.index(k);
    BlockRegression reg;
    try {
      const auto& sb = s_blocks[k];
      if (!sb || !ref_rows[b.row]) throw EmptyComponentError("no diffuse component found");
      const LogSpectrum y =
          cfg.roi_usable_band
              ? (roi_band ? log_spectral_ratio(*sb, *ref_rows[b.row], *roi_band)
                          : throw NumericalError("no usable band"))
              : normalized_log_spectrum(*sb, *ref_rows[b.row], band, cfg.usable_drop_db);
      if (y.band.hi_mhz - y.band.lo_mhz < cfg.min_band_mhz)
        throw NumericalError("usable band too narrow");
      reg = fit_block_regression(y);
      if (reg.r2 < cfg.r2_min && reg.rms_residual_db > cfg.max_residual_db) {
        reg.reliable = false;
        reg.failure = "fit";
      }
    } catch (const EmptyComponentError&) {
      reg.reliable = false;
      reg.failure = "eemd";
    } catch (const NumericalError&) {
      reg.reliable = false;
      reg.failure = "spectrum";
    }
    reg.index = b;
    map.regressions[k] = std::move(reg);
  }

  NnarlfConfig nn = cfg.nnarlf;
  if (!cfg.enabled(Stage::neighborhood)) nn.half_axial = nn.half_lateral = 0;
  const NnarlfResult avg = nnarlf(map.regressions, rows, cols, nn);
  map.weighted_slope = avg.slope;
  map.weighted_intercept = avg.intercept;

  const double d_ref = cfg.reference_esd_um * 1e-3;
  map.esd_um.assign(rows * cols, kNaN);
  map.eac_log_ratio_db.assign(rows * cols, kNaN);
  map.reliable.assign(rows * cols, false);
  for (std::size_t k = 0; k < rows * cols; ++k) {
    auto& reg = map.regressions[k];
    if (!reg.reliable || std::isnan(avg.slope[k])) continue;
    try {
      const double d = esd_from_slope(avg.slope[k], d_ref);
      map.esd_um[k] = d * 1e3;
      const double n_s = eac_from_intercept(avg.intercept[k], d, d_ref, cfg.reference_concentration);
      map.eac_log_ratio_db[k] = 10.0 * std::log10(n_s / cfg.reference_concentration);
      map.reliable[k] = true;
    } catch (const UnphysicalSlopeError&) {
      reg.failure = "radicand";
    }
  }
  map.summary = summarize(map, cfg.erratic_fraction);
  return map;
}

}  // namespace

std::vector<EsdMap> estimate_esd_maps(const RFFrame& sample, const RFFrame& reference,
                                      std::span<const RoiSpec> rois, const PipelineConfig& cfg) {
  cfg.validate();
  if (!(sample.acquisition() == reference.acquisition()))
    throw InvalidArgument("sample and reference acquisition parameters differ");
  const PreparedFrame s = prepare_frame(sample, cfg, cfg.beta);
  const PreparedFrame r = prepare_frame(reference, cfg, cfg.reference_beta.value_or(cfg.beta));
  const BlockSpec spec = cfg.blocks.value_or(default_block_spec(sample.acquisition()));
  std::map<std::pair<std::size_t, std::size_t>, ReferenceRows> cache;  // by axial window
  std::vector<EsdMap> maps;
  maps.reserve(rois.size());
  for (const auto& roi : rois) {
    const RoiWindow w = roi_window(s.frame, roi);
    const auto key = std::make_pair(w.axial_begin, w.axial_count);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, reference_rows(r.frame, roi, spec, cfg)).first;
    maps.push_back(analyze_roi(s.frame, it->second, roi, spec, cfg));
    maps.back().gain_capped = s.gain_capped || r.gain_capped;
  }
  return maps;
}

EsdMap estimate_esd_map(const RFFrame& sample, const RFFrame& reference, const RoiSpec& roi,
                        const PipelineConfig& cfg) {
  return std::move(estimate_esd_maps(sample, reference, std::span(&roi, 1), cfg).front());
}

std::vector<AblationRow> run_ablation(std::span<const AblationCase> cases,
                                      const PipelineConfig& base) {
  if (cases.empty()) throw InvalidArgument("ablation: empty manifest");
  std::vector<std::optional<Stage>> variants{std::nullopt};
  for (Stage s : kAllStages) variants.emplace_back(s);

  std::vector<AblationRow> rows;
  for (const auto& variant : variants) {
    AblationRow row;
    row.name = variant ? std::string(ablation_name(*variant)) : "full";
    std::size_t estimated = 0, maps_with_sd = 0, blocks = 0, reliable = 0;
    double err_pct = 0.0, err_um = 0.0, sd = 0.0;
    for (const auto& c : cases) {
      if (!(c.truth_esd_um > 0.0)) throw InvalidArgument("ablation: truth ESD must be positive");
      PipelineConfig cfg = base;
      cfg.beta = c.beta;
      cfg.reference_beta = c.reference_beta;
      if (variant) cfg.ablation.insert(*variant);
      const auto maps = estimate_esd_maps(c.sample, c.reference, c.rois, cfg);
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& m : maps) {
        for (std::size_t k = 0; k < m.esd_um.size(); ++k)
          if (m.reliable[k]) {
            sum += m.esd_um[k];
            ++n;
          }
        blocks += m.esd_um.size();
        if (m.summary.reliable_blocks > 1) {
          sd += m.summary.sd_esd_um;
          ++maps_with_sd;
        }
      }
      reliable += n;
      if (n == 0) {
        ++row.failed_cases;
        err_pct += 100.0;
        continue;
      }
      const double e = std::fabs(sum / static_cast<double>(n) - c.truth_esd_um);
      err_pct += 100.0 * e / c.truth_esd_um;
      err_um += e;
      ++estimated;
    }
    row.mean_abs_error_pct = err_pct / static_cast<double>(cases.size());
    row.mean_abs_error_um = estimated ? err_um / static_cast<double>(estimated) : kNaN;
    row.mean_sd_um = maps_with_sd ? sd / static_cast<double>(maps_with_sd) : kNaN;
    row.reliable_fraction = blocks ? static_cast<double>(reliable) / static_cast<double>(blocks) : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::uint8_t> esd_map_ppm(const EsdMap& map, double lo_um, double hi_um, std::size_t scale) {
  if (!(hi_um > lo_um)) throw InvalidArgument("ppm: empty colour range");
  if (scale == 0) throw InvalidArgument("ppm: scale must be positive");
  const std::size_t w = map.cols() * scale;
  const std::size_t h = map.rows() * scale;
  const std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + 3 * w * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t k = (y / scale) * map.cols() + x / scale;
      if (!map.reliable[k]) {
        out.insert(out.end(), {0, 0, 0});
        continue;
      }
      const double t = std::clamp((map.esd_um[k] - lo_um) / (hi_um - lo_um), 0.0, 1.0);
      const auto rg = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - t)));
      const auto b = static_cast<std::uint8_t>(std::lround(255.0 - 127.0 * t));
      out.insert(out.end(), {rg, rg, b});
    }
  }
  return out;
}

}  // namespace quskit
