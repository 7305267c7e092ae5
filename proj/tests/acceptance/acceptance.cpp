// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Seeds and ROI layouts are fixed here; tolerances are the published targets.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "quskit/classify.hpp"
#include "quskit/decomp.hpp"
#include "quskit/esd.hpp"
#include "quskit/io.hpp"
#include "quskit/mss.hpp"
#include "quskit/parallel.hpp"
#include "quskit/synthrf.hpp"

namespace fs = std::filesystem;
using namespace quskit;

namespace {

const fs::path kSource = QUSKIT_SOURCE_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

RFFrame simulate(const PhantomSpec& spec, std::uint64_t seed) {
  AcquisitionParams acq;
  return synthesize_rf(generate_scatterer_field(spec, seed, acq), acq);
}

PhantomSpec phantom(const std::string& name) {
  return phantom_from_json(load_json_file(kSource / "phantoms" / name));
}

// 1. Confusion-matrix arithmetic against the published rows.
Outcome metric_arithmetic() {
  struct Row {
    ConfusionCounts c;
    double sens, spec, acc, mcc;
  };
  const Row rows[] = {{{51, 99, 4, 5}, 91.07, 96.12, 94.34, 0.8755},
                      {{54, 98, 5, 2}, 96.43, 95.15, 95.60, 0.9054},
                      {{42, 72, 31, 14}, 75.00, 69.90, 71.70, 0.4304}};
  bool ok = true;
  double worst_pct = 0.0, worst_mcc = 0.0;
  for (const auto& r : rows) {
    const auto m = compute_metrics(r.c);
    for (double d : {m.sensitivity - r.sens, m.specificity - r.spec, m.accuracy - r.acc})
      worst_pct = std::max(worst_pct, std::abs(d));
    worst_mcc = std::max(worst_mcc, std::abs(m.mcc - r.mcc));
  }
  const auto t8 = compute_metrics({51, 99, 4, 5});
  for (auto [got, want] : {std::pair{t8.ppv, 92.73}, std::pair{t8.npv, 95.19}})
    worst_pct = std::max(worst_pct, std::abs(got - want));
  ok = worst_pct <= 0.05 && worst_mcc <= 0.0005;
  return {ok, fmt("max |dev| %.4f pct-pts (tol 0.05), max |dMCC| %.6f (tol 0.0005)", worst_pct, worst_mcc)};
}

// 2. Homogeneous 45 um sample against an independent 45 um reference, 25 ROIs.
Outcome phantom_accuracy() {
  const std::uint64_t seed = 1;
  const auto sample = simulate(phantom("A.json"), derive_seed(seed, "simulation"));
  const auto reference = simulate(phantom("B.json"), derive_seed(seed + 1, "simulation"));
  std::vector<RoiSpec> rois;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) rois.push_back({0.5 + 4.0 * i, 9.5, 2.0 + 8.4 * j, 8.8});
  PipelineConfig cfg;
  cfg.beta = 0.058;
  const auto maps = estimate_esd_maps(sample, reference, rois, cfg);
  std::vector<double> means;
  for (const auto& m : maps)
    if (std::isfinite(m.summary.mean_esd_um)) means.push_back(m.summary.mean_esd_um);
  if (means.size() != rois.size())
    return {false, fmt("%zu of %zu ROIs produced no estimate", rois.size() - means.size(), rois.size())};
  const double grand = mean(means);
  const double mape = std::abs(grand - 45.0) / 45.0 * 100.0;
  const double sd = sample_sd(means);
  return {mape <= 10.0 && sd <= 7.0,
          fmt("mean %.2f um, MAPE %.2f%% (tol 10), SD over ROI means %.2f um (tol 7)", grand, mape, sd)};
}

// 3. Phantom C: inclusion and background levels and a monotone lateral transition.
Outcome inclusion_contrast() {
  const auto sample = simulate(phantom("C.json"), 1);
  const auto reference = simulate(phantom("B.json"), 1001);
  const std::vector<RoiSpec> rois = {
      {15.25, 9.5, 14.8, 8.8, RoiTag::inclusion}, {2.0, 9.5, 1.5, 8.8},   {2.0, 9.5, 28.0, 8.8},
      {15.25, 9.5, 1.5, 8.8},                     {15.25, 9.5, 28.0, 8.8}, {2.0, 9.5, 14.8, 8.8},
      {17.0, 6.0, 2.0, 34.0}};
  PipelineConfig cfg;
  cfg.beta = 0.058;
  const auto maps = estimate_esd_maps(sample, reference, rois, cfg);

  const double inclusion = maps[0].summary.mean_esd_um;
  std::vector<double> bg_means, bg_blocks;
  for (std::size_t r = 1; r <= 5; ++r) {
    bg_means.push_back(maps[r].summary.mean_esd_um);
    for (std::size_t k = 0; k < maps[r].esd_um.size(); ++k)
      if (maps[r].reliable[k]) bg_blocks.push_back(maps[r].esd_um[k]);
  }
  const double background = mean(bg_means);

  // Column medians across the profile ROI, clamped to the plateau medians, must not
  // decrease from either background edge towards the inclusion centre.
  const auto& prof = maps[6];
  const double lo = median(bg_blocks), hi = maps[0].summary.median_esd_um;
  const double pitch = sample.acquisition().lateral_pitch_mm;
  const double centre_mm = 19.2;
  std::vector<double> col_mm, col_esd;
  for (std::size_t c = 0; c < prof.cols(); ++c) {
    std::vector<double> v;
    for (std::size_t r = 0; r < prof.rows(); ++r)
      if (prof.reliable[r * prof.cols() + c]) v.push_back(prof.esd_um[r * prof.cols() + c]);
    const double centre = rois[6].lateral_start_mm +
                          (static_cast<double>(prof.grid.lateral_begin(c)) +
                           0.5 * static_cast<double>(prof.grid.spec().lateral_len - 1)) * pitch;
    col_mm.push_back(centre);
    col_esd.push_back(std::clamp(median(v), lo, hi));
  }
  bool monotone = true;
  std::size_t gaps = 0;
  for (std::size_t c = 1; c < col_esd.size(); ++c) {
    if (std::isnan(col_esd[c]) || std::isnan(col_esd[c - 1])) {
      ++gaps;
      continue;
    }
    const bool left = col_mm[c] <= centre_mm;
    const bool right = col_mm[c - 1] >= centre_mm;
    if (left && col_esd[c] < col_esd[c - 1]) monotone = false;
    if (right && col_esd[c] > col_esd[c - 1]) monotone = false;
  }
  std::string profile;
  for (double e : col_esd) profile += fmt(" %.0f", e);
  const bool ok = std::abs(inclusion - 70.0) <= 7.0 && std::abs(background - 45.0) <= 4.5 && monotone && gaps == 0;
  return {ok, fmt("inclusion %.2f um (70 +/- 7), background %.2f um (45 +/- 4.5), profile%s %s", inclusion,
                  background, profile.c_str(), monotone ? "monotone" : "NOT monotone")};
}

// 4. Closed-form inversion and a noiseless forward/inverse round trip.
Outcome closed_form_inversion() {
  const double d = esd_from_slope(-0.037950, 0.045);
  double worst = 0.0;
  AcquisitionParams acq;
  const auto spectrum = [&](double d_mm) {
    Spectrum s;
    for (std::size_t k = 0; k <= 1024; ++k) {
      const double f = 40.0 * static_cast<double>(k) / 2048.0;
      const double p = pulse_spectrum(f, acq);
      s.frequencies_mhz.push_back(f);
      s.power.push_back(p * p * std::pow(d_mm, 6) * std::pow(f, 4) *
                        std::exp(-12.159 * f * f * d_mm * d_mm / 4.0));
    }
    return s;
  };
  // The inversion constant 13.20 is 10 log10(e) * 12.159 / 4 = 13.2014 rounded. The
  // unrounded figure is reported alongside to show where the residual error comes from.
  const double exact_constant = 10.0 * std::log10(std::exp(1.0)) * 12.159 / 4.0;
  double worst_exact = 0.0;
  for (int ds = 20; ds <= 150; ds += 10)
    for (int dr = 20; dr <= 150; dr += 10) {
      const double dsm = ds * 1e-3, drm = dr * 1e-3;
      const auto y = normalized_log_spectrum(spectrum(dsm), spectrum(drm));
      const auto fit = fit_block_regression(y);
      worst = std::max(worst, std::abs(esd_from_slope(fit.slope, drm) / dsm - 1.0));
      const double unrounded = std::sqrt(-fit.slope / exact_constant + drm * drm);
      worst_exact = std::max(worst_exact, std::abs(unrounded / dsm - 1.0));
    }
  const bool ok = std::abs(d - 0.070) < 1e-9 && worst < 1e-3;
  return {ok, fmt("inversion %.12f mm (0.070 +/- 1e-9), worst round-trip error %.4f%% over 196 pairs (tol 0.1%%); "
                  "%.2e%% with the unrounded constant %.4f",
                  d, worst * 100.0, worst_exact * 100.0, exact_constant)};
}

// 5. EMD over a 1000-signal corpus.
Outcome emd_reconstruction() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  std::size_t imfs = 0, good = 0;
  for (int s = 0; s < 1000; ++s) {
    const std::size_t n = 128 + static_cast<std::size_t>(u(rng) * 896);
    std::vector<double> x(n);
    const int kind = s % 4;
    const double f1 = 0.5 + u(rng) * 10.0, f2 = 0.2 + u(rng) * 3.0, a = u(rng) * 3.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / 40.0;
      switch (kind) {
        case 0: x[i] = g(rng); break;
        case 1: x[i] = std::sin(2 * M_PI * f1 * t) + a * std::sin(2 * M_PI * f2 * t) + 0.1 * g(rng); break;
        case 2: x[i] = std::sin(2 * M_PI * (f2 + f1 * t / 2) * t) + 0.05 * g(rng); break;
        default: x[i] = a * t + std::sin(2 * M_PI * f1 * t) * std::exp(-t) + g(rng); break;
      }
    }
    const auto set = emd(x);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double sum = set.residue[i];
      for (const auto& imf : set.imfs) sum += imf[i];
      num += (sum - x[i]) * (sum - x[i]);
      den += x[i] * x[i];
    }
    worst = std::max(worst, std::sqrt(num / den));
    for (const auto& imf : set.imfs) {
      const auto c = count_oscillations(imf);
      const std::size_t diff = c.extrema > c.zero_crossings ? c.extrema - c.zero_crossings : c.zero_crossings - c.extrema;
      good += diff <= 1;
      ++imfs;
    }
  }
  const double frac = static_cast<double>(good) / static_cast<double>(imfs);
  return {worst < 1e-10 && frac >= 0.95,
          fmt("worst relative reconstruction error %.2e (tol 1e-10), IMF property on %.1f%% of %zu IMFs (tol 95%%)",
              worst, frac * 100.0, imfs)};
}

// 6. K-S selection rates.
Outcome ks_selection() {
  int accepted = 0, rejected = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<double> noise(1000), sine(1000);
    for (std::size_t i = 0; i < 1000; ++i) {
      noise[i] = g(rng);
      sine[i] = std::sin(0.1 * static_cast<double>(i)) + 0.05 * g(rng);
    }
    accepted += ks_gaussianity(noise, 0.05).gaussian;
    rejected += !ks_gaussianity(sine, 0.05).gaussian;
  }
  return {accepted >= 88 && rejected >= 95,
          fmt("Gaussian accepted %d/100 (tol 88), sinusoid rejected %d/100 (tol 95)", accepted, rejected)};
}

// 7. MSS recovery on lattices and rejection of a diffuse-only phantom.
Outcome mss_recovery() {
  const auto lattice = [](std::optional<double> spacing) {
    PhantomSpec p;
    PhantomRegion r;
    r.axial_min_mm = 0;
    r.axial_max_mm = 100;
    r.lateral_min_mm = -10;
    r.lateral_max_mm = 100;
    r.esd_um = 45;
    r.coherent_spacing_mm = spacing;
    r.coherent_jitter = 0.03;
    r.coherent_amplitude_ratio = 2.0;
    p.regions = {r};
    p.attenuation_beta = 0.058;
    p.depth_offset_mm = 5;
    p.axial_extent_mm = 30;
    p.lateral_extent_mm = 30;
    return p;
  };
  // 15 mm holds at least 14 periods of the widest lattice.
  const RoiSpec roi{5.0, 15.0, 5.0, 8.8};
  PipelineConfig cfg;
  bool ok = true;
  double previous = 0.0;
  std::string detail;
  for (double s : {0.60, 0.75, 0.90, 1.05}) {
    const auto e = estimate_mss(simulate(lattice(s), 1), roi, cfg);
    ok = ok && e.reliable && std::abs(e.mss_mm - s) <= 0.05 && e.mss_mm > previous;
    previous = e.mss_mm;
    detail += fmt("%.2f->%.3f ", s, e.mss_mm);
  }
  const auto diffuse = estimate_mss(simulate(lattice(std::nullopt), 1), roi, cfg);
  ok = ok && !diffuse.reliable;
  detail += fmt("(tol 0.05, strictly increasing); diffuse-only %s", diffuse.reliable ? "RELIABLE" : "unreliable");
  return {ok, detail};
}

// 8. Ablation ordering on the ten-phantom manifest.
Outcome ablation_ordering() {
  const fs::path path = kSource / "manifests" / "ablation.json";
  const auto cases = ablation_cases_from_json(load_json_file(path), path.parent_path());
  const auto rows = run_ablation(cases, PipelineConfig{});
  const auto by_error = [](const AblationRow& a, const AblationRow& b) {
    return a.mean_abs_error_pct < b.mean_abs_error_pct;
  };
  const auto lowest = std::min_element(rows.begin(), rows.end(), by_error);
  const auto highest = std::max_element(rows.begin(), rows.end(), by_error);
  std::string detail = fmt("%zu phantoms:", cases.size());
  for (const auto& r : rows) detail += fmt(" %s %.2f%%", r.name.c_str(), r.mean_abs_error_pct);
  const bool ok = cases.size() == 10 && lowest->name == "full" && highest->name == "no-eemd";
  return {ok, detail};
}

// 9. Classifier harness on the default synthetic cohort and a separable cohort.
Outcome classifier_harness() {
  const auto cohort = synth_cohort(CohortSpec{}, 1);
  const auto rep = evaluate_classifiers(cohort, make_groups(cohort, 5, 1), FeatureSet::esd_mss, 200, 1);
  const double best = rep.classifiers[rep.best].metrics.sum5;
  const double width = rep.best_auc.ci_high - rep.best_auc.ci_low;

  std::vector<CohortRecord> sep;
  for (int i = 0; i < 40; ++i) sep.push_back({130.0 + i, 0.80 + 0.001 * i, 0, 0, Subtype::malignant});
  for (int i = 0; i < 40; ++i) sep.push_back({60.0 + i, 0.70 + 0.001 * i, 0, 0, Subtype::fibroadenoma});
  normalize_cohort(sep);
  const auto m = compute_metrics(run_cv(sep, ClassifierKind::lda_linear, make_groups(sep, 5, 1)).counts);
  const bool perfect = m.sensitivity == 100 && m.specificity == 100 && m.accuracy == 100 && m.ppv == 100 &&
                       m.npv == 100 && m.mcc == 1.0;
  const bool ok = best >= 450.0 && rep.best_auc.mean_auc >= 0.90 && width <= 0.10 && perfect;
  return {ok, fmt("best Sum5 %.2f by %s (tol 450), AUC %.3f [%.3f, %.3f] width %.3f (tol 0.90, 0.10); "
                  "separable cohort %s",
                  best, std::string(to_string(rep.classifiers[rep.best].kind)).c_str(), rep.best_auc.mean_auc,
                  rep.best_auc.ci_low, rep.best_auc.ci_high, width, perfect ? "perfect" : "NOT perfect")};
}

// 10. Every CLI command gives byte-identical reports across reruns and thread counts.
Outcome cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / fmt("quskit_accept_%d", static_cast<int>(getpid()));
  fs::create_directories(dir);
  const auto run = [&](const std::string& args, const std::string& threads) {
    const std::string cmd = "QUSKIT_THREADS=" + threads + " '" + std::string(QUSKIT_CLI) + "' " + args +
                            " >/dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  };
  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const auto p = [&](const std::string& name) { return "'" + (dir / name).string() + "'"; };

  // Small frames keep the reruns quick.
  auto small = phantom("A.json");
  small.axial_extent_mm = 14;
  small.lateral_extent_mm = 12;
  auto lat = phantom("lattice_075.json");
  lat.axial_extent_mm = 14;
  lat.lateral_extent_mm = 12;
  write_file_atomic(dir / "h.json", dump_json(to_json(small)));
  write_file_atomic(dir / "l.json", dump_json(to_json(lat)));
  const Json manifest{{"cases",
                       {{{"sample", {{"phantom", to_json(lat)}, {"seed", 3}}},
                         {"reference", {{"phantom", to_json(small)}, {"seed", 4}}},
                         {"rois", {to_json(RoiSpec{1.0, 9.5, 1.0, 8.8})}},
                         {"truth_esd_um", 45},
                         {"beta", 0.058}}}}};
  write_file_atomic(dir / "m.json", dump_json(manifest));

  struct Command {
    std::string name, args, out;
  };
  const std::vector<Command> commands = {
      {"simulate", "simulate " + p("h.json") + " --seed 11 --out ", "s.qrf"},
      {"esd", "esd " + p("s1.qrf") + " " + p("r1.qrf") + " --beta 0.058 --roi 1,9.5,1,8.8 --seed 5 --out ", "e.json"},
      {"mss", "mss " + p("l1.qrf") + " --roi 1,10,1,8.8 --seed 5 --out ", "m.json"},
      {"classify", "classify --synthetic --seed 7 --out ", "c.json"},
      {"ablate", "ablate " + p("m.json") + " --seed 5 --out ", "a.json"}};

  if (run("simulate " + p("h.json") + " --seed 1 --out " + p("s1.qrf"), "1") != 0 ||
      run("simulate " + p("h.json") + " --seed 2 --out " + p("r1.qrf"), "1") != 0 ||
      run("simulate " + p("l.json") + " --seed 1 --out " + p("l1.qrf"), "1") != 0) {
    fs::remove_all(dir);
    return {false, "could not simulate the input frames"};
  }

  bool ok = true;
  std::string detail;
  for (const auto& c : commands) {
    std::vector<std::string> outputs;
    bool ran = true;
    for (const std::string threads : {"1", "2", "1"}) {
      const std::string out = threads + "_" + std::to_string(outputs.size()) + "_" + c.out;
      const int code = run(c.args + p(out), threads);
      ran = ran && (code == 0 || code == 4);
      outputs.push_back(slurp(dir / out));
    }
    const bool same = ran && !outputs[0].empty() && outputs[0] == outputs[1] && outputs[1] == outputs[2];
    ok = ok && same;
    detail += c.name + (same ? " identical; " : " DIFFERS; ");
  }
  fs::remove_all(dir);
  detail += "threads 1/2/1";
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"metric arithmetic", metric_arithmetic},
      {"ESD phantom accuracy", phantom_accuracy},
      {"inclusion contrast", inclusion_contrast},
      {"closed-form inversion", closed_form_inversion},
      {"EMD reconstruction", emd_reconstruction},
      {"K-S selection", ks_selection},
      {"MSS recovery", mss_recovery},
      {"ablation ordering", ablation_ordering},
      {"classifier harness", classifier_harness},
      {"determinism", cli_determinism}};

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::printf("criterion %2zu %s: %s: %s [%.1f s]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
