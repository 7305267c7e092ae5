#include "quskit/decomp.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_interp.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <random>

#include "quskit/core.hpp"
#include "quskit/parallel.hpp"

namespace quskit {

namespace {

struct Extrema {
  std::vector<std::size_t> maxima;
  std::vector<std::size_t> minima;
};

Extrema find_extrema(std::span<const double> x) {
  Extrema e;
  const std::size_t n = x.size();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (x[i] > x[i - 1] && x[i] >= x[i + 1]) e.maxima.push_back(i);
    else if (x[i] < x[i - 1] && x[i] <= x[i + 1]) e.minima.push_back(i);
  }
  return e;
}

bool is_monotonic(std::span<const double> x) {
  bool up = true;
  bool down = true;
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (x[i] < x[i - 1]) up = false;
    if (x[i] > x[i - 1]) down = false;
  }
  return up || down;
}

struct GslInterpDeleter {
  void operator()(gsl_interp* p) const { gsl_interp_free(p); }
};
struct GslAccelDeleter {
  void operator()(gsl_interp_accel* p) const { gsl_interp_accel_free(p); }
};

// Natural cubic spline through the extrema, with the two extrema nearest each end
// mirrored about that end. An end sample that lies outside the envelope is added as a knot.
std::vector<double> envelope(std::span<const double> x, const std::vector<std::size_t>& idx,
                             bool upper) {
  const auto n = static_cast<double>(x.size());
  const double last = n - 1.0;
  const auto beyond = [upper](double a, double b) { return upper ? a > b : a < b; };

  std::vector<double> t;
  std::vector<double> v;
  const std::size_t mirror = std::min<std::size_t>(2, idx.size());
  for (std::size_t k = mirror; k-- > 0;) {
    t.push_back(-static_cast<double>(idx[k]));
    v.push_back(x[idx[k]]);
  }
  if (beyond(x.front(), x[idx.front()])) {
    t.push_back(0.0);
    v.push_back(x.front());
  }
  for (std::size_t i : idx) {
    t.push_back(static_cast<double>(i));
    v.push_back(x[i]);
  }
  if (beyond(x.back(), x[idx.back()])) {
    t.push_back(last);
    v.push_back(x.back());
  }
  for (std::size_t k = 0; k < mirror; ++k) {
    const std::size_t i = idx[idx.size() - 1 - k];
    t.push_back(2.0 * last - static_cast<double>(i));
    v.push_back(x[i]);
  }

  std::unique_ptr<gsl_interp, GslInterpDeleter> interp(gsl_interp_alloc(gsl_interp_cspline, t.size()));
  std::unique_ptr<gsl_interp_accel, GslAccelDeleter> accel(gsl_interp_accel_alloc());
  if (gsl_interp_init(interp.get(), t.data(), v.data(), t.size()) != GSL_SUCCESS)
    throw NumericalError("emd: spline construction failed");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = gsl_interp_eval(interp.get(), t.data(), v.data(), static_cast<double>(i), accel.get());
  return out;
}

void disable_gsl_abort() {
  static const bool once = [] {
    gsl_set_error_handler_off();
    return true;
  }();
  (void)once;
}

bool is_imf(std::span<const double> x) {
  const auto c = count_oscillations(x);
  const auto d = c.extrema > c.zero_crossings ? c.extrema - c.zero_crossings : c.zero_crossings - c.extrema;
  return d <= 1;
}

double mean_power(std::span<const double> x) {
  return std::inner_product(x.begin(), x.end(), x.begin(), 0.0) / static_cast<double>(x.size());
}

}  // namespace

ImfSet emd(std::span<const double> signal, const EmdOptions& opts) {
  if (signal.size() < 16) throw InvalidArgument("emd: signal shorter than 16 samples");
  for (double v : signal)
    if (!std::isfinite(v)) throw InvalidArgument("emd: non-finite sample");
  disable_gsl_abort();

  ImfSet set;
  std::vector<double> residue(signal.begin(), signal.end());
  while (set.imfs.size() < opts.max_imfs) {
    const Extrema re = find_extrema(residue);
    if (re.maxima.size() + re.minima.size() < 3 || is_monotonic(residue)) break;

    std::vector<double> h = residue;
    bool extracted = false;
    for (std::size_t it = 0; it < opts.max_sift_iterations; ++it) {
      const Extrema e = find_extrema(h);
      if (e.maxima.empty() || e.minima.empty()) break;
      const auto up = envelope(h, e.maxima, true);
      const auto lo = envelope(h, e.minima, false);
      double diff = 0.0;
      double base = 0.0;
      for (std::size_t i = 0; i < h.size(); ++i) {
        const double m = 0.5 * (up[i] + lo[i]);
        diff += m * m;
        base += h[i] * h[i];
        h[i] -= m;
      }
      extracted = true;
      if (base == 0.0) break;
      // The Cauchy bound alone can stop on a component that still rides on a local
      // mean; also require the extrema and zero-crossing counts to agree.
      if (diff / base < opts.sd_threshold && is_imf(h)) break;
    }
    if (!extracted) break;
    for (std::size_t i = 0; i < residue.size(); ++i) residue[i] -= h[i];
    set.imfs.push_back(std::move(h));
  }
  // Sequential subtraction keeps the residue exact up to rounding of each step.
  set.residue = std::move(residue);
  set.ensemble_size = 1;
  return set;
}

ImfSet eemd(std::span<const double> signal, const EemdOptions& opts) {
  if (opts.ensemble_size == 0) throw InvalidArgument("eemd: ensemble size must be >= 1");
  if (signal.size() < 16) throw InvalidArgument("eemd: signal shorter than 16 samples");

  const double power = mean_power(signal);
  const double sigma = std::isinf(opts.noise_snr_db) && opts.noise_snr_db > 0
                           ? 0.0
                           : std::sqrt(power / std::pow(10.0, opts.noise_snr_db / 10.0));

  std::vector<ImfSet> members(opts.ensemble_size);
  parallel_for(opts.ensemble_size, [&](std::size_t m) {
    std::vector<double> noisy(signal.begin(), signal.end());
    if (sigma > 0.0) {
      std::mt19937_64 rng(derive_seed(opts.seed, "eemd", m));
      std::normal_distribution<double> noise(0.0, sigma);
      for (double& v : noisy) v += noise(rng);
    }
    members[m] = emd(noisy, opts.emd);
  });

  std::size_t k = members.front().size();
  for (const auto& m : members) k = std::min(k, m.size());

  ImfSet out;
  out.imfs.assign(k, std::vector<double>(signal.size(), 0.0));
  for (const auto& m : members)
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t i = 0; i < signal.size(); ++i) out.imfs[j][i] += m.imfs[j][i];
  const double inv = 1.0 / static_cast<double>(members.size());
  out.residue.assign(signal.begin(), signal.end());
  for (auto& imf : out.imfs)
    for (std::size_t i = 0; i < signal.size(); ++i) {
      imf[i] *= inv;
      out.residue[i] -= imf[i];
    }
  out.ensemble_size = opts.ensemble_size;
  out.noise_snr_db = opts.noise_snr_db;
  return out;
}

double kolmogorov_sf(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // Small-argument series for the CDF, which converges quickly here.
    const double y = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double cdf = 0.0;
    for (int k = 1; k <= 50; k += 2) cdf += std::exp(-static_cast<double>(k * k) * y);
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_gaussianity(std::span<const double> samples, double alpha) {
  const std::size_t n = samples.size();
  if (n < 50) throw InvalidArgument("ks_gaussianity: at least 50 samples required");
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0) || !std::isfinite(sd)) return {1.0, 0.0, false};

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const auto nd = static_cast<double>(n);
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double cdf = 0.5 * std::erfc(-(sorted[i] - mean) / (sd * std::numbers::sqrt2));
    d = std::max({d, cdf - static_cast<double>(i) / nd, static_cast<double>(i + 1) / nd - cdf});
  }
  // p < 1 always, so alpha = 1 rejects everything.
  const double p = std::min(kolmogorov_sf(std::sqrt(nd) * d), std::nextafter(1.0, 0.0));
  return {d, p, p >= alpha};
}

ImfSet select_imfs(ImfSet set, double alpha, bool normalize) {
  set.diffuse_indices.clear();
  set.coherent_indices.clear();
  set.scales.assign(set.imfs.size(), 1.0);
  for (std::size_t j = 0; j < set.imfs.size(); ++j) {
    const auto& imf = set.imfs[j];
    const bool gaussian = ks_gaussianity(imf, alpha).gaussian;
    (gaussian ? set.diffuse_indices : set.coherent_indices).push_back(j);
    if (normalize) {
      double peak = 0.0;
      for (double v : imf) peak = std::max(peak, std::abs(v));
      if (peak > 0.0) set.scales[j] = peak;
    }
  }
  set.normalized = normalize;
  set.selected = true;
  return set;
}

namespace {

std::vector<double> partition_sum(const ImfSet& set, const std::vector<std::size_t>& idx,
                                  const char* what) {
  if (!set.selected) throw InvalidArgument("IMF selection has not been run");
  if (idx.empty()) throw EmptyComponentError(std::string("no ") + what + " component found");
  std::vector<double> out(set.length(), 0.0);
  for (std::size_t j : idx) {
    const double s = set.scales.empty() ? 1.0 : set.scales[j];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += set.imfs[j][i] / s;
  }
  return out;
}

}  // namespace

std::vector<double> diffuse_signal(const ImfSet& set) {
  return partition_sum(set, set.diffuse_indices, "diffuse");
}

std::vector<double> coherent_signal(const ImfSet& set) {
  return partition_sum(set, set.coherent_indices, "coherent");
}

OscillationCounts count_oscillations(std::span<const double> x) {
  const Extrema e = find_extrema(x);
  OscillationCounts c;
  c.extrema = e.maxima.size() + e.minima.size();
  for (std::size_t i = 1; i < x.size(); ++i)
    if ((x[i - 1] < 0.0 && x[i] >= 0.0) || (x[i - 1] > 0.0 && x[i] <= 0.0)) ++c.zero_crossings;
  return c;
}

}  // namespace quskit
