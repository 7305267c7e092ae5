#include "quskit/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "quskit/core.hpp"
#include "quskit/fft.hpp"

namespace quskit {

namespace {

std::vector<double> hamming(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                  static_cast<double>(n - 1));
  return w;
}

std::vector<double> frequency_grid(std::size_t nfft, double fs_mhz) {
  std::vector<double> f(nfft / 2 + 1);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = fft::bin_frequency(k, nfft, fs_mhz);
  return f;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

Spectrum welch_psd(std::span<const std::vector<double>> lines, double fs_mhz,
                   const WelchOptions& opts) {
  if (lines.empty()) throw InvalidArgument("welch: empty block");
  if (opts.segment_len < 32) throw InvalidArgument("welch: segment length must be >= 32");
  if (!(opts.overlap >= 0.0 && opts.overlap < 1.0))
    throw InvalidArgument("welch: overlap must be in [0, 1)");
  const std::size_t seg = opts.segment_len;
  const std::size_t nfft = std::max(opts.nfft, seg);
  const auto hop = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(static_cast<double>(seg) * (1.0 - opts.overlap))));

  const auto window = hamming(seg);
  const double window_power = std::inner_product(window.begin(), window.end(), window.begin(), 0.0);

  Spectrum out;
  out.kind = SpectrumKind::welch;
  out.frequencies_mhz = frequency_grid(nfft, fs_mhz);
  out.power.assign(nfft / 2 + 1, 0.0);

  std::size_t segments = 0;
  std::vector<double> buffer(seg);
  for (const auto& line : lines) {
    if (line.size() < seg) throw InvalidArgument("welch: segment longer than line");
    for (std::size_t start = 0; start + seg <= line.size(); start += hop) {
      for (std::size_t i = 0; i < seg; ++i) buffer[i] = line[start + i] * window[i];
      const auto spec = fft::rfft(buffer, nfft);
      for (std::size_t k = 0; k < spec.size(); ++k) out.power[k] += std::norm(spec[k]);
      ++segments;
    }
  }
  // One-sided density: doubled except at DC and Nyquist.
  const double scale = 1.0 / (static_cast<double>(segments) * fs_mhz * window_power);
  for (std::size_t k = 0; k < out.power.size(); ++k) {
    const bool edge = k == 0 || (nfft % 2 == 0 && k == out.power.size() - 1);
    out.power[k] *= scale * (edge ? 1.0 : 2.0);
  }
  return out;
}

FrequencyBand usable_band(const Spectrum& spectrum, double drop_db) {
  const auto& p = spectrum.power;
  if (p.empty()) throw InvalidArgument("usable_band: empty spectrum");
  const auto peak_it = std::max_element(p.begin(), p.end());
  if (!(*peak_it > 0.0)) throw NumericalError("usable_band: spectrum has no positive power");
  const double threshold = *peak_it * std::pow(10.0, -drop_db / 10.0);
  std::size_t lo = static_cast<std::size_t>(peak_it - p.begin());
  std::size_t hi = lo;
  while (lo > 0 && p[lo - 1] >= threshold) --lo;
  while (hi + 1 < p.size() && p[hi + 1] >= threshold) ++hi;
  return {spectrum.frequencies_mhz[lo], spectrum.frequencies_mhz[hi]};
}

ArModel burg(std::span<const double> signal, std::size_t order) {
  const std::size_t n = signal.size();
  if (order < 4 || 2 * order >= n)
    throw InvalidArgument("ar_spectrum: order must satisfy 4 <= order < length/2");

  // Forward errors aligned with f[t], backward errors with b[t-1]; both shrink each stage.
  std::vector<double> f(signal.begin() + 1, signal.end());
  std::vector<double> b(signal.begin(), signal.end() - 1);

  ArModel model;
  model.noise_variance =
      std::inner_product(signal.begin(), signal.end(), signal.begin(), 0.0) / static_cast<double>(n);
  if (!(model.noise_variance > 0.0)) throw NumericalError("ar_spectrum: zero-energy signal");

  std::vector<double> a;
  for (std::size_t m = 1; m <= order; ++m) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t t = 0; t < f.size(); ++t) {
      num += f[t] * b[t];
      den += f[t] * f[t] + b[t] * b[t];
    }
    if (!(den > 0.0)) throw NumericalError("ar_spectrum: degenerate prediction error");
    const double k = -2.0 * num / den;
    if (!(std::abs(k) < 1.0)) throw NumericalError("ar_spectrum: unstable reflection coefficient");

    std::vector<double> next(m);
    for (std::size_t i = 0; i + 1 < m; ++i) next[i] = a[i] + k * a[m - 2 - i];
    next[m - 1] = k;
    a = std::move(next);
    model.reflection.push_back(k);
    model.noise_variance *= (1.0 - k * k);

    const std::size_t len = f.size();
    std::vector<double> nf(len - 1);
    std::vector<double> nb(len - 1);
    for (std::size_t t = 0; t + 1 < len; ++t) {
      nf[t] = f[t + 1] + k * b[t + 1];
      nb[t] = b[t] + k * f[t];
    }
    f = std::move(nf);
    b = std::move(nb);
  }
  model.coefficients = std::move(a);
  return model;
}

Spectrum ar_spectrum(std::span<const double> signal, std::size_t order, double fs_mhz,
                     std::size_t nfft) {
  if (order >= signal.size()) throw InvalidArgument("ar_spectrum: order >= signal length");
  const ArModel model = burg(signal, order);
  std::vector<double> poly(order + 1);
  poly[0] = 1.0;
  std::copy(model.coefficients.begin(), model.coefficients.end(), poly.begin() + 1);
  const auto response = fft::rfft(poly, nfft);

  Spectrum out;
  out.kind = SpectrumKind::ar;
  out.frequencies_mhz = frequency_grid(nfft, fs_mhz);
  out.power.resize(response.size());
  for (std::size_t k = 0; k < response.size(); ++k)
    out.power[k] = 2.0 * model.noise_variance / (fs_mhz * std::norm(response[k]));
  return out;
}

std::vector<double> find_spectral_peaks(const Spectrum& spectrum, FrequencyBand band,
                                        const PeakOptions& opts) {
  const auto& f = spectrum.frequencies_mhz;
  const auto& p = spectrum.power;
  const double df = spectrum.resolution_mhz();
  const auto half = static_cast<std::ptrdiff_t>(
      df > 0.0 ? std::max(1.0, std::round(opts.median_halfwidth_mhz / df)) : 1.0);
  const double factor = std::pow(10.0, opts.prominence_db / 10.0);

  std::vector<double> peaks;
  const auto n = static_cast<std::ptrdiff_t>(p.size());
  for (std::ptrdiff_t i = 1; i + 1 < n; ++i) {
    if (!band.contains(f[i])) continue;
    if (!(p[i] > p[i - 1] && p[i] >= p[i + 1])) continue;
    // Local median over in-band bins only, so a stopband next to the band edge does not
    // make edge ripple look prominent.
    std::vector<double> window;
    for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, i - half); k <= std::min(n - 1, i + half); ++k)
      if (band.contains(f[k])) window.push_back(p[k]);
    const double local = median(std::move(window));
    if (p[i] >= factor * local) peaks.push_back(f[i]);
  }
  return peaks;
}

double spectral_peak_spacing(const Spectrum& spectrum, FrequencyBand band,
                             const PeakOptions& opts) {
  const auto peaks = find_spectral_peaks(spectrum, band, opts);
  if (peaks.size() < 2) throw NoPeriodicityError("no periodicity: fewer than two spectral peaks");
  std::vector<double> gaps(peaks.size() - 1);
  for (std::size_t i = 0; i + 1 < peaks.size(); ++i) gaps[i] = peaks[i + 1] - peaks[i];
  const double typical = median(gaps);
  double sum = 0.0;
  std::size_t kept = 0;
  for (double g : gaps) {
    if (g >= opts.harmonic_guard * typical) continue;
    sum += g;
    ++kept;
  }
  return sum / static_cast<double>(kept);
}

}  // namespace quskit
