#include "quskit/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "quskit/fft.hpp"
#include "quskit/parallel.hpp"

namespace quskit {

namespace {

using cd = std::complex<double>;

// Applies `op` to every line and reassembles the frame.
template <typename Op>
RFFrame map_lines(const RFFrame& frame, Op op) {
  const std::size_t lines = frame.lateral_count();
  std::vector<std::vector<double>> out(lines);
  parallel_for(lines, [&](std::size_t j) { out[j] = op(frame.line(j)); });
  RFFrame result = frame.with_samples(std::vector<double>(frame.samples().size()));
  for (std::size_t j = 0; j < lines; ++j) result.set_line(j, out[j]);
  return result;
}

std::vector<double> periodic_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  return w;
}

// Short-time filtering with a depth-dependent real gain g(f, z_cm). Periodic Hann at 50%
// overlap sums to one, so unit gain reproduces the input exactly.
template <typename Gain>
std::vector<double> short_time_filter(const std::vector<double>& x, const RFFrame& frame,
                                      std::size_t seg, Gain gain) {
  const std::size_t hop = seg / 2;
  const std::size_t nfft = 2 * seg;
  const std::size_t pad = seg / 2;  // places the segment mid-buffer so filter tails fit
  const auto window = periodic_hann(seg);
  const double fs = frame.acquisition().sampling_rate_mhz;
  const auto n = static_cast<std::ptrdiff_t>(x.size());

  std::vector<double> acc(x.size() + 2 * nfft, 0.0);
  const std::ptrdiff_t origin = static_cast<std::ptrdiff_t>(nfft);  // acc index of x[0]
  std::vector<double> buf(nfft);
  std::vector<double> f(nfft / 2 + 1);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = fft::bin_frequency(k, nfft, fs);

  for (std::ptrdiff_t start = -static_cast<std::ptrdiff_t>(hop); start < n;
       start += static_cast<std::ptrdiff_t>(hop)) {
    std::fill(buf.begin(), buf.end(), 0.0);
    bool any = false;
    for (std::size_t i = 0; i < seg; ++i) {
      const std::ptrdiff_t t = start + static_cast<std::ptrdiff_t>(i);
      if (t < 0 || t >= n) continue;
      buf[pad + i] = x[static_cast<std::size_t>(t)] * window[i];
      any = any || buf[pad + i] != 0.0;
    }
    if (!any) continue;
    const double centre = static_cast<double>(start) + 0.5 * static_cast<double>(seg - 1);
    const double z_cm = frame.depth_mm(centre) / 10.0;
    auto spec = fft::rfft(buf, nfft);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= gain(f[k], z_cm);
    const auto y = fft::irfft(spec, nfft);
    const std::ptrdiff_t base = origin + start - static_cast<std::ptrdiff_t>(pad);
    for (std::size_t i = 0; i < nfft; ++i) acc[static_cast<std::size_t>(base) + i] += y[i];
  }
  return {acc.begin() + origin, acc.begin() + origin + n};
}

}  // namespace

RFFrame deconvolve(const RFFrame& frame, const DeconvConfig& cfg) {
  if (frame.empty()) throw InvalidArgument("deconvolve: empty frame");
  if (!(cfg.epsilon > 0.0) || !std::isfinite(cfg.epsilon))
    throw InvalidArgument("deconvolve: epsilon must be positive");

  std::vector<double> psf;
  std::size_t origin = cfg.psf_origin;
  if (cfg.mode == DeconvMode::known_psf) {
    if (cfg.psf.empty()) throw InvalidArgument("deconvolve: known_psf mode requires a psf");
    psf = cfg.psf;
  } else {
    psf = estimate_psf_cepstral(frame, cfg.cepstral_segment, cfg.cepstral_lifter);
    origin = 0;
  }
  if (origin >= psf.size()) throw InvalidArgument("deconvolve: psf origin outside psf");
  for (double v : psf)
    if (!std::isfinite(v)) throw InvalidArgument("deconvolve: non-finite psf");
  if (std::all_of(psf.begin(), psf.end(), [](double v) { return v == 0.0; }))
    throw InvalidArgument("deconvolve: all-zero psf");

  const std::size_t n = frame.axial_count();
  const std::size_t nfft = fft::next_pow2(n + psf.size());
  // Circularly shift so the zero-lag tap sits at index 0.
  std::vector<double> kernel(nfft, 0.0);
  for (std::size_t i = 0; i < psf.size(); ++i) {
    const auto lag = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(origin);
    const auto at = (lag % static_cast<std::ptrdiff_t>(nfft) + static_cast<std::ptrdiff_t>(nfft)) %
                    static_cast<std::ptrdiff_t>(nfft);
    kernel[static_cast<std::size_t>(at)] += psf[i];
  }
  const auto p = fft::rfft(kernel, nfft);
  double peak = 0.0;
  for (const auto& v : p) peak = std::max(peak, std::norm(v));
  const double floor = cfg.epsilon * peak;
  std::vector<cd> filter(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) filter[k] = std::conj(p[k]) / (std::norm(p[k]) + floor);

  return map_lines(frame, [&](const std::vector<double>& line) {
    auto spec = fft::rfft(line, nfft);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= filter[k];
    auto y = fft::irfft(spec, nfft);
    y.resize(n);
    return y;
  });
}

std::vector<double> estimate_psf_cepstral(const RFFrame& frame, std::size_t segment_len,
                                          std::size_t lifter) {
  if (frame.empty()) throw InvalidArgument("cepstral psf: empty frame");
  const std::size_t seg = std::min(segment_len, frame.axial_count());
  if (seg < 16) throw InvalidArgument("cepstral psf: segment shorter than 16 samples");
  const std::size_t hop = seg / 2;
  const auto window = periodic_hann(seg);

  std::vector<double> power(seg / 2 + 1, 0.0);
  std::size_t count = 0;
  std::vector<double> buf(seg);
  for (std::size_t j = 0; j < frame.lateral_count(); ++j) {
    const auto line = frame.line(j);
    for (std::size_t s = 0; s + seg <= line.size(); s += hop) {
      for (std::size_t i = 0; i < seg; ++i) buf[i] = line[s + i] * window[i];
      const auto spec = fft::rfft(buf, seg);
      for (std::size_t k = 0; k < spec.size(); ++k) power[k] += std::norm(spec[k]);
      ++count;
    }
  }
  const double peak = *std::max_element(power.begin(), power.end());
  if (!(peak > 0.0)) throw InvalidArgument("cepstral psf: frame has no energy");

  // Log amplitude of the averaged spectrum, floored 120 dB below the peak.
  std::vector<cd> log_amp(power.size());
  for (std::size_t k = 0; k < power.size(); ++k)
    log_amp[k] = 0.5 * std::log(std::max(power[k] / static_cast<double>(count), peak * 1e-12));
  auto cep = fft::irfft(log_amp, seg);

  // Fold onto positive quefrencies (minimum phase) and keep the smooth envelope only.
  const std::size_t cut = std::clamp<std::size_t>(lifter, 1, seg / 2);
  std::vector<double> folded(seg, 0.0);
  folded[0] = cep[0];
  for (std::size_t q = 1; q < cut; ++q) folded[q] = 2.0 * cep[q];
  const auto log_min = fft::rfft(folded, seg);
  std::vector<cd> spec(log_min.size());
  for (std::size_t k = 0; k < spec.size(); ++k) spec[k] = std::exp(log_min[k]);
  auto psf = fft::irfft(spec, seg);
  double top = 0.0;
  for (double v : psf) top = std::max(top, std::abs(v));
  for (double& v : psf) v /= top;
  return psf;
}

RFFrame bandpass(const RFFrame& frame, double lo_mhz, double hi_mhz) {
  const double fs = frame.acquisition().sampling_rate_mhz;
  if (!(lo_mhz >= 0.0 && hi_mhz > lo_mhz)) throw InvalidArgument("bandpass: invalid band");
  if (!(fs > 2.0 * hi_mhz)) throw InvalidArgument("bandpass: sampling rate too low for band");
  const std::size_t n = frame.axial_count();
  return map_lines(frame, [&](const std::vector<double>& line) {
    auto spec = fft::rfft(line, n);
    for (std::size_t k = 0; k < spec.size(); ++k) {
      const double f = fft::bin_frequency(k, n, fs);
      if (f < lo_mhz || f > hi_mhz) spec[k] = 0.0;
    }
    return fft::irfft(spec, n);
  });
}

RFFrame bandpass_2_13(const RFFrame& frame) { return bandpass(frame, 2.0, 13.0); }

CompensationResult compensate_attenuation(const RFFrame& frame, double beta,
                                          const AttenuationOptions& opts) {
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw InvalidArgument("compensate_attenuation: beta must be >= 0");
  if (opts.segment_len < 8 || opts.segment_len % 2 != 0)
    throw InvalidArgument("compensate_attenuation: segment length must be even and >= 8");
  if (beta == 0.0) return {frame, false};
  const double cap = std::pow(10.0, opts.max_gain_db / 20.0);
  std::vector<char> capped(frame.lateral_count(), 0);
  const std::size_t lines = frame.lateral_count();
  std::vector<std::vector<double>> out(lines);
  parallel_for(lines, [&](std::size_t j) {
    out[j] = short_time_filter(frame.line(j), frame, opts.segment_len, [&](double f, double z) {
      const double g = std::exp(2.0 * beta * f * z);
      if (g > cap) {
        capped[j] = 1;
        return cap;
      }
      return g;
    });
  });
  CompensationResult result{frame.with_samples(std::vector<double>(frame.samples().size())), false};
  for (std::size_t j = 0; j < lines; ++j) result.frame.set_line(j, out[j]);
  result.gain_capped = std::any_of(capped.begin(), capped.end(), [](char c) { return c != 0; });
  return result;
}

RFFrame apply_attenuation(const RFFrame& frame, double beta, const AttenuationOptions& opts) {
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw InvalidArgument("apply_attenuation: beta must be >= 0");
  if (opts.segment_len < 8 || opts.segment_len % 2 != 0)
    throw InvalidArgument("apply_attenuation: segment length must be even and >= 8");
  if (beta == 0.0) return frame;
  return map_lines(frame, [&](const std::vector<double>& line) {
    return short_time_filter(line, frame, opts.segment_len,
                             [&](double f, double z) { return std::exp(-2.0 * beta * f * z); });
  });
}

}  // namespace quskit
