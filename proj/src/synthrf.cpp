#include "quskit/synthrf.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <random>

#include "quskit/fft.hpp"
#include "quskit/parallel.hpp"

namespace quskit {

namespace {

constexpr double kReferenceEsdMm = 0.045;  // filters are scaled to unit gain for 45 um at fc
constexpr std::size_t kOversample = 4;
constexpr double kSlabMm = 2.0;
constexpr double kFwhmToSigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)

double pulse_sigma_mhz(const AcquisitionParams& acq) {
  // -6 dB amplitude half-width = fc * fbw / 2.
  const double half = 0.5 * acq.center_frequency_mhz * acq.fractional_bandwidth;
  return half / std::sqrt(2.0 * std::numbers::ln2);
}

double cell_area_mm2(const AcquisitionParams& acq) { return acq.pulse_length_mm * acq.beam_width_mm; }

std::size_t line_count(const PhantomSpec& spec, const AcquisitionParams& acq) {
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(spec.lateral_extent_mm / acq.lateral_pitch_mm + 1e-9)));
}

std::size_t sample_count(const PhantomSpec& spec, const AcquisitionParams& acq) {
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(spec.axial_extent_mm / acq.axial_spacing_mm() + 1e-9)));
}

// Expected RMS of diffuse amplitudes summed over one resolution cell along a line.
double diffuse_cell_rms(const PhantomRegion& r) {
  const double per_line = r.diffuse_density * std::sqrt(std::numbers::pi) / kFwhmToSigma;
  return std::sqrt(r.concentration * per_line);
}

double ripple_gain(double f_mhz, double z_mm, double ripple_db) {
  if (ripple_db == 0.0 || f_mhz >= 2.0) return 1.0;
  const double db = ripple_db * (1.0 - f_mhz / 2.0) * std::cos(2.0 * std::numbers::pi * z_mm / 4.0);
  return std::pow(10.0, db / 20.0);
}

}  // namespace

bool PhantomRegion::contains(double axial_mm, double lateral_mm) const {
  if (shape == RegionShape::rectangle)
    return axial_mm >= axial_min_mm && axial_mm <= axial_max_mm && lateral_mm >= lateral_min_mm &&
           lateral_mm <= lateral_max_mm;
  const double da = axial_mm - center_axial_mm;
  const double dl = lateral_mm - center_lateral_mm;
  return da * da + dl * dl <= radius_mm * radius_mm;
}

void PhantomSpec::validate() const {
  if (regions.empty()) throw InvalidArgument("phantom: at least one region is required");
  if (!(axial_extent_mm > 0.0) || !(lateral_extent_mm > 0.0))
    throw InvalidArgument("phantom: extents must be positive");
  if (!(attenuation_beta >= 0.0)) throw InvalidArgument("phantom: attenuation_beta must be >= 0");
  if (!(depth_offset_mm >= 0.0)) throw InvalidArgument("phantom: depth_offset must be >= 0");
  if (!(diffraction_ripple_db >= 0.0)) throw InvalidArgument("phantom: ripple must be >= 0");
  if (std::isnan(noise_snr_db)) throw InvalidArgument("phantom: noise_snr_db is NaN");
  for (const auto& r : regions) {
    if (r.shape == RegionShape::rectangle && !(r.axial_max_mm > r.axial_min_mm &&
                                               r.lateral_max_mm > r.lateral_min_mm))
      throw InvalidArgument("phantom: rectangle region with empty extent");
    if (r.shape == RegionShape::circle && !(r.radius_mm > 0.0))
      throw InvalidArgument("phantom: circle region needs a positive radius");
    if (!(r.esd_um >= 0.0)) throw InvalidArgument("phantom: esd must be >= 0");
    if (!(r.concentration > 0.0)) throw InvalidArgument("phantom: concentration must be positive");
    if (r.cyst ? !(r.diffuse_density >= 0.0) : !(r.diffuse_density > 0.0))
      throw InvalidArgument("phantom: diffuse_density must be positive outside cysts");
    if (!(r.coherent_jitter >= 0.0 && r.coherent_jitter < 0.5))
      throw InvalidArgument("phantom: coherent_jitter must lie in [0, 0.5)");
    if (r.coherent_spacing_mm && !(*r.coherent_spacing_mm > 0.0))
      throw InvalidArgument("phantom: coherent_spacing must be positive");
    if (!(r.coherent_amplitude_ratio >= 0.0))
      throw InvalidArgument("phantom: coherent_amplitude_ratio must be >= 0");
  }
}

std::optional<std::size_t> region_at(const PhantomSpec& spec, double axial_mm, double lateral_mm) {
  for (std::size_t r = spec.regions.size(); r-- > 0;)
    if (spec.regions[r].contains(axial_mm, lateral_mm)) return r;
  return std::nullopt;
}

ScattererField generate_scatterer_field(const PhantomSpec& spec, std::uint64_t seed,
                                        const AcquisitionParams& acq) {
  spec.validate();
  acq.validate();
  ScattererField field;
  field.source_spec = spec;
  field.acquisition = acq;
  field.seed = seed;

  const double z0 = spec.depth_offset_mm;
  const double z1 = z0 + spec.axial_extent_mm;
  const double area = spec.axial_extent_mm * spec.lateral_extent_mm;

  for (std::size_t r = 0; r < spec.regions.size(); ++r) {
    const auto& region = spec.regions[r];
    const double per_mm2 = region.diffuse_density / cell_area_mm2(acq);
    if (per_mm2 <= 0.0) continue;
    std::mt19937_64 rng(derive_seed(seed, "diffuse", r));
    std::poisson_distribution<long long> count_dist(per_mm2 * area);
    std::uniform_real_distribution<double> ua(z0, z1);
    std::uniform_real_distribution<double> ul(0.0, spec.lateral_extent_mm);
    std::normal_distribution<double> amp(0.0, std::sqrt(region.concentration));
    const long long count = count_dist(rng);
    for (long long i = 0; i < count; ++i) {
      const double z = ua(rng);
      const double x = ul(rng);
      const double a = amp(rng);
      if (region_at(spec, z, x) != r) continue;
      field.scatterers.push_back({z, x, a, ScattererKind::diffuse, static_cast<std::uint32_t>(r)});
    }
  }

  const std::size_t lines = line_count(spec, acq);
  for (std::size_t r = 0; r < spec.regions.size(); ++r) {
    const auto& region = spec.regions[r];
    if (!region.coherent_spacing_mm || region.coherent_amplitude_ratio == 0.0) continue;
    const double d = *region.coherent_spacing_mm;
    const double amplitude = region.coherent_amplitude_ratio * diffuse_cell_rms(region);
    for (std::size_t j = 0; j < lines; ++j) {
      const double x = static_cast<double>(j) * acq.lateral_pitch_mm;
      std::mt19937_64 rng(derive_seed(seed, "coherent", r, j));
      std::uniform_real_distribution<double> phase(0.0, d);
      std::normal_distribution<double> jitter(0.0, region.coherent_jitter * d);
      const double start = z0 + phase(rng);
      for (std::size_t k = 0;; ++k) {
        const double nominal = start + static_cast<double>(k) * d;
        if (nominal >= z1) break;
        const double z = nominal + (region.coherent_jitter > 0.0 ? jitter(rng) : 0.0);
        if (z < z0 || z >= z1 || region_at(spec, z, x) != r) continue;
        field.scatterers.push_back({z, x, amplitude, ScattererKind::coherent, static_cast<std::uint32_t>(r)});
      }
    }
  }
  return field;
}

double theoretical_scattering(double f_mhz, double d_eff_mm, double n_z, const AcquisitionParams& acq) {
  if (!(f_mhz > 0.0)) throw InvalidArgument("theoretical_scattering: f must be positive");
  if (!(d_eff_mm >= 0.0)) throw InvalidArgument("theoretical_scattering: D must be >= 0");
  const double a = 0.5 * d_eff_mm;
  const double a2 = a * a;
  const double q = acq.aperture_ratio_q;
  return 185.0 * acq.gate_length_mm * q * q * a2 * a2 * a2 * n_z * std::pow(f_mhz, 4) /
         (1.0 + 2.66 * f_mhz * q * a2) * std::exp(-12.159 * f_mhz * f_mhz * a2);
}

double pulse_spectrum(double f_mhz, const AcquisitionParams& acq) {
  const double s = pulse_sigma_mhz(acq);
  const double d = f_mhz - acq.center_frequency_mhz;
  return std::exp(-d * d / (2.0 * s * s));
}

double pulse_length_mm(const AcquisitionParams& acq) {
  const double sigma_t_us = 1.0 / (2.0 * std::numbers::pi * pulse_sigma_mhz(acq));
  return 2.0 * sigma_t_us * std::sqrt(2.0 * std::numbers::ln10) * acq.sound_speed * 1e-3;
}

Psf point_echo_psf(const AcquisitionParams& acq, std::size_t length) {
  if (length < 3) throw InvalidArgument("point_echo_psf: length must be >= 3");
  const std::size_t nfft = fft::next_pow2(4 * length);
  const double fc = acq.center_frequency_mhz;
  std::vector<std::complex<double>> spec(nfft / 2 + 1);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = fft::bin_frequency(k, nfft, acq.sampling_rate_mhz);
    spec[k] = pulse_spectrum(f, acq) * (f / fc) * (f / fc);
  }
  const auto h = fft::irfft(spec, nfft);
  Psf psf;
  psf.origin = length / 2;
  psf.taps.resize(length);
  for (std::size_t i = 0; i < length; ++i) {
    const auto lag = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(psf.origin);
    psf.taps[i] = h[static_cast<std::size_t>((lag + static_cast<std::ptrdiff_t>(nfft)) %
                                             static_cast<std::ptrdiff_t>(nfft))];
  }
  double peak = 0.0;
  for (double v : psf.taps) peak = std::max(peak, std::abs(v));
  for (double& v : psf.taps) v /= peak;
  return psf;
}

RFFrame synthesize_rf(const ScattererField& field, const AcquisitionParams& acq) {
  acq.validate();
  const PhantomSpec& spec = field.source_spec;
  const std::size_t n = sample_count(spec, acq);
  const std::size_t lines = line_count(spec, acq);
  const double dz = acq.axial_spacing_mm();
  const double fs = acq.sampling_rate_mhz;
  const std::size_t nfft = fft::next_pow2(n + 128);
  const std::size_t nover = kOversample * nfft;
  const std::size_t bins = nfft / 2 + 1;

  std::vector<double> freq(bins);
  for (std::size_t k = 0; k < bins; ++k) freq[k] = fft::bin_frequency(k, nfft, fs);

  // Amplitude filters per (region, kind), unit gain at fc for the 45 um reference size.
  const double norm = std::sqrt(theoretical_scattering(acq.center_frequency_mhz, kReferenceEsdMm, 1.0, acq));
  const std::size_t regions = spec.regions.size();
  std::vector<std::vector<double>> filters(2 * regions, std::vector<double>(bins, 0.0));
  for (std::size_t r = 0; r < regions; ++r) {
    const double d_mm = spec.regions[r].esd_um * 1e-3;
    const double coherent_level =
        std::sqrt(theoretical_scattering(acq.center_frequency_mhz, d_mm, 1.0, acq)) / norm;
    for (std::size_t k = 0; k < bins; ++k) {
      const double p = pulse_spectrum(freq[k], acq);
      filters[2 * r][k] =
          freq[k] > 0.0 ? p * std::sqrt(theoretical_scattering(freq[k], d_mm, 1.0, acq)) / norm : 0.0;
      // Coherent reflectors are specular: no Rayleigh or form-factor shaping.
      filters[2 * r + 1][k] = p * coherent_level;
    }
  }

  const double z0 = spec.depth_offset_mm;
  const bool depth_dependent = spec.attenuation_beta > 0.0 || spec.diffraction_ripple_db > 0.0;
  const std::size_t nodes =
      depth_dependent ? static_cast<std::size_t>(std::ceil(spec.axial_extent_mm / kSlabMm)) + 1 : 1;

  // Bucket scatterers by the lines they reach.
  const double sigma_b = acq.beam_width_mm / kFwhmToSigma;
  const double reach = 2.0 * acq.beam_width_mm;
  std::vector<std::vector<std::size_t>> by_line(lines);
  for (std::size_t s = 0; s < field.scatterers.size(); ++s) {
    const auto& sc = field.scatterers[s];
    if (sc.region >= regions) throw InvalidArgument("synthesize_rf: scatterer region out of range");
    if (sc.kind == ScattererKind::coherent) {
      const auto j = static_cast<long long>(std::llround(sc.lateral_mm / acq.lateral_pitch_mm));
      if (j >= 0 && j < static_cast<long long>(lines)) by_line[static_cast<std::size_t>(j)].push_back(s);
      continue;
    }
    const auto lo = static_cast<long long>(std::ceil((sc.lateral_mm - reach) / acq.lateral_pitch_mm));
    const auto hi = static_cast<long long>(std::floor((sc.lateral_mm + reach) / acq.lateral_pitch_mm));
    for (long long j = std::max(0LL, lo); j <= std::min<long long>(hi, static_cast<long long>(lines) - 1); ++j)
      by_line[static_cast<std::size_t>(j)].push_back(s);
  }

  std::vector<std::vector<double>> out(lines);
  parallel_for(lines, [&](std::size_t j) {
    const double xj = static_cast<double>(j) * acq.lateral_pitch_mm;
    // trains[group][node] on the oversampled grid, allocated on first use.
    std::map<std::size_t, std::vector<std::vector<double>>> trains;
    for (std::size_t s : by_line[j]) {
      const auto& sc = field.scatterers[s];
      double a = sc.amplitude;
      if (sc.kind == ScattererKind::diffuse) {
        const double dx = sc.lateral_mm - xj;
        a *= std::exp(-dx * dx / (2.0 * sigma_b * sigma_b));
      }
      const double t = (sc.axial_mm - z0) / dz * static_cast<double>(kOversample);
      const auto idx = static_cast<long long>(std::llround(t));
      if (idx < 0 || idx >= static_cast<long long>(nover)) continue;
      const std::size_t group = 2 * sc.region + (sc.kind == ScattererKind::coherent ? 1 : 0);
      auto& slots = trains[group];
      if (slots.empty()) slots.resize(nodes);
      double u = 0.0;
      std::size_t node = 0;
      if (nodes > 1) {
        const double pos = std::clamp((sc.axial_mm - z0) / kSlabMm, 0.0, static_cast<double>(nodes - 1));
        node = std::min(static_cast<std::size_t>(pos), nodes - 2);
        u = pos - static_cast<double>(node);
      }
      for (std::size_t m = 0; m < (nodes > 1 ? 2u : 1u); ++m) {
        const double w = nodes > 1 ? (m == 0 ? 1.0 - u : u) : 1.0;
        if (w == 0.0) continue;
        auto& train = slots[node + m];
        if (train.empty()) train.assign(nover, 0.0);
        train[static_cast<std::size_t>(idx)] += a * w;
      }
    }

    std::vector<std::complex<double>> total(bins, 0.0);
    for (const auto& [group, slots] : trains) {
      const auto& filter = filters[group];
      for (std::size_t node = 0; node < slots.size(); ++node) {
        if (slots[node].empty()) continue;
        const double z_mm = nodes > 1 ? z0 + static_cast<double>(node) * kSlabMm : 0.0;
        const auto spec_train = fft::rfft(slots[node], nover);
        for (std::size_t k = 0; k < bins; ++k) {
          double g = filter[k];
          if (nodes > 1) {
            g *= std::exp(-2.0 * spec.attenuation_beta * freq[k] * z_mm / 10.0);
            g *= ripple_gain(freq[k], z_mm, spec.diffraction_ripple_db);
          }
          total[k] += spec_train[k] * g;
        }
      }
    }
    auto line = fft::irfft(total, nfft);
    line.resize(n);
    out[j] = std::move(line);
  });

  RFFrame frame(n, lines, acq, z0);
  for (std::size_t j = 0; j < lines; ++j) frame.set_line(j, out[j]);

  if (std::isfinite(spec.noise_snr_db)) {
    double power = 0.0;
    for (double v : frame.samples()) power += v * v;
    power /= static_cast<double>(frame.samples().size());
    if (power > 0.0) {
      std::mt19937_64 rng(derive_seed(field.seed, "noise"));
      std::normal_distribution<double> noise(0.0, std::sqrt(power) * std::pow(10.0, -spec.noise_snr_db / 20.0));
      for (double& v : frame.samples()) v += noise(rng);
    }
  }
  return frame;
}

}  // namespace quskit
