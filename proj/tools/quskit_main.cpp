// quskit command-line front end. Exit codes: 0 ok, 2 config or usage, 3 I/O,
// 4 unreliable result (the report is still written).

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "quskit/classify.hpp"
#include "quskit/core.hpp"
#include "quskit/esd.hpp"
#include "quskit/io.hpp"
#include "quskit/mss.hpp"
#include "quskit/parallel.hpp"
#include "quskit/pipeline.hpp"
#include "quskit/synthrf.hpp"

namespace fs = std::filesystem;
using namespace quskit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitUnreliable = 4;

struct AcqFlags {
  std::optional<double> fc, fs, bandwidth, sound_speed, beam_width, pitch;

  void add(CLI::App* cmd) {
    cmd->add_option("--fc", fc, "Center frequency (MHz)");
    cmd->add_option("--fs", fs, "Sampling rate (MHz)");
    cmd->add_option("--bandwidth", bandwidth, "Fractional bandwidth");
    cmd->add_option("--sound-speed", sound_speed, "Sound speed (m/s)");
    cmd->add_option("--beam-width", beam_width, "Lateral beam width (mm)");
    cmd->add_option("--pitch", pitch, "Line pitch (mm)");
  }
  void apply(AcquisitionParams& a) const {
    if (fc) a.center_frequency_mhz = *fc;
    if (fs) a.sampling_rate_mhz = *fs;
    if (bandwidth) a.fractional_bandwidth = *bandwidth;
    if (sound_speed) a.sound_speed = *sound_speed;
    if (beam_width) a.beam_width_mm = *beam_width;
    if (pitch) a.lateral_pitch_mm = *pitch;
    a.validate();
  }
};

struct Common {
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out;

  void add(CLI::App* cmd, bool out_required = true) {
    cmd->add_option("--seed", seed, "Root seed for every random sub-stream");
    cmd->add_option("--threads", threads, "Worker threads (0 = QUSKIT_THREADS or all cores)");
    auto* o = cmd->add_option("--out", out, "Output path");
    if (out_required) o->required();
  }
};

/// "axial_start,axial_extent,lateral_start,lateral_extent" in mm.
RoiSpec parse_roi(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::logic_error&) {
      throw InvalidArgument("--roi: '" + text + "' is not four numbers");
    }
  }
  if (v.size() != 4) throw InvalidArgument("--roi: '" + text + "' is not four numbers");
  return RoiSpec{v[0], v[1], v[2], v[3]};
}

std::vector<RoiSpec> resolve_rois(const std::vector<std::string>& flags, const std::string& roi_file,
                                  const RFFrame& frame) {
  std::vector<RoiSpec> rois;
  for (const auto& f : flags) rois.push_back(parse_roi(f));
  if (!roi_file.empty()) {
    const Json j = load_json_file(roi_file);
    if (!j.is_array()) throw InvalidArgument(roi_file + ": expected an array of ROIs");
    for (const auto& r : j) rois.push_back(roi_from_json(r));
  }
  if (rois.empty()) {
    const auto& acq = frame.acquisition();
    rois.push_back({0.0, static_cast<double>(frame.axial_count()) * acq.axial_spacing_mm(), 0.0,
                    static_cast<double>(frame.lateral_count()) * acq.lateral_pitch_mm});
  }
  return rois;
}

PipelineConfig load_config(const std::string& path) {
  return path.empty() ? PipelineConfig{} : pipeline_config_from_json(load_json_file(path));
}

void write_json(const std::string& path, const Json& j) { write_file_atomic(path, dump_json(j)); }

int cmd_simulate(const std::string& phantom_path, const AcqFlags& flags, const Common& common) {
  const Json j = load_json_file(phantom_path);
  const PhantomSpec spec = phantom_from_json(j);
  AcquisitionParams acq;
  if (j.contains("acquisition")) acq = acquisition_from_json(j.at("acquisition"));
  flags.apply(acq);
  const std::uint64_t seed = common.seed.value_or(0);
  const ScattererField field = generate_scatterer_field(spec, derive_seed(seed, "simulation"), acq);
  const RFFrame frame = synthesize_rf(field, acq);
  write_file_atomic(common.out, encode_rf_frame(frame));
  fs::path truth = common.out;
  truth.replace_extension(".truth.json");
  Json body = ground_truth_json(field, seed);
  body.erase("seed");
  write_json(truth.string(), report_envelope(seed, config_hash(to_json(spec)), body));
  return kExitOk;
}

PipelineConfig seeded(PipelineConfig cfg, const Common& common) {
  if (common.seed) cfg.eemd.seed = derive_seed(*common.seed, "eemd");
  return cfg;
}

std::uint64_t report_seed(const PipelineConfig& cfg, const Common& common) {
  return common.seed.value_or(cfg.eemd.seed);
}

int cmd_esd(const std::string& sample_path, const std::string& reference_path,
            const std::vector<std::string>& roi_flags, const std::string& roi_file,
            const std::string& config_path, std::optional<double> beta,
            std::optional<double> reference_beta, const std::string& map_path,
            const Common& common) {
  PipelineConfig cfg = seeded(load_config(config_path), common);
  if (beta) cfg.beta = *beta;
  if (reference_beta) cfg.reference_beta = *reference_beta;
  cfg.validate();
  const RFFrame sample = load_rf_frame(sample_path);
  const RFFrame reference = load_rf_frame(reference_path);
  const auto rois = resolve_rois(roi_flags, roi_file, sample);
  const auto maps = estimate_esd_maps(sample, reference, rois, cfg);

  double sum = 0.0, ss = 0.0;
  std::size_t reliable = 0, blocks = 0;
  bool erratic = false;
  Json per_roi = Json::array();
  for (const auto& m : maps) {
    for (std::size_t k = 0; k < m.esd_um.size(); ++k)
      if (m.reliable[k]) {
        sum += m.esd_um[k];
        ++reliable;
      }
    blocks += m.esd_um.size();
    erratic = erratic || m.summary.erratic;
    per_roi.push_back(esd_report_json(m));
  }
  const double mean = reliable ? sum / static_cast<double>(reliable) : 0.0;
  for (const auto& m : maps)
    for (std::size_t k = 0; k < m.esd_um.size(); ++k)
      if (m.reliable[k]) ss += (m.esd_um[k] - mean) * (m.esd_um[k] - mean);
  Json body{{"sample", fs::path(sample_path).filename().string()},
            {"reference", fs::path(reference_path).filename().string()},
            {"mean_esd_um", reliable ? Json(mean) : Json(nullptr)},
            {"sd_um", reliable > 1 ? Json(std::sqrt(ss / static_cast<double>(reliable - 1))) : Json(nullptr)},
            {"reliable_fraction", blocks ? static_cast<double>(reliable) / static_cast<double>(blocks) : 0.0},
            {"erratic", erratic},
            {"config", to_json(cfg)},
            {"rois", per_roi}};
  const Json cfg_json = to_json(cfg);
  write_json(common.out, report_envelope(report_seed(cfg, common), config_hash(cfg_json), body));

  if (!map_path.empty()) {
    for (std::size_t i = 0; i < maps.size(); ++i) {
      fs::path p = map_path;
      if (maps.size() > 1)
        p.replace_filename(p.stem().string() + "_" + std::to_string(i) + p.extension().string());
      write_file_atomic(p, esd_map_ppm(maps[i], 20.0, 150.0));
    }
  }
  return erratic ? kExitUnreliable : kExitOk;
}

int cmd_mss(const std::string& sample_path, const std::vector<std::string>& roi_flags,
            const std::string& roi_file, const std::string& config_path, const Common& common) {
  const PipelineConfig cfg = seeded(load_config(config_path), common);
  const RFFrame sample = load_rf_frame(sample_path);
  const auto rois = resolve_rois(roi_flags, roi_file, sample);
  const PreparedFrame prepared = prepare_frame_for_mss(sample, cfg);
  Json per_roi = Json::array();
  bool all_reliable = true;
  for (const auto& roi : rois) {
    const MssEstimate est = estimate_mss_prepared(prepared.frame, roi, cfg);
    all_reliable = all_reliable && est.reliable;
    Json r{{"roi", to_json(roi)}};
    r.update(mss_report_json(est));
    per_roi.push_back(std::move(r));
  }
  Json body{{"sample", fs::path(sample_path).filename().string()}};
  if (per_roi.size() == 1) {
    for (const auto& item : per_roi[0].items()) body[item.key()] = item.value();
  } else {
    body["rois"] = per_roi;
  }
  body["config"] = to_json(cfg);
  write_json(common.out, report_envelope(report_seed(cfg, common), config_hash(to_json(cfg)), body));
  return all_reliable ? kExitOk : kExitUnreliable;
}

int cmd_classify(const std::string& cohort_path, bool synthetic, const std::string& classifier,
                 const std::string& features_name, const std::string& normalization_name,
                 std::size_t bootstraps, const std::string& cohort_out, const Common& common) {
  if (synthetic == !cohort_path.empty())
    throw InvalidArgument("give exactly one of --cohort and --synthetic");
  const std::uint64_t seed = common.seed.value_or(0);
  const FeatureSet features = feature_set_from_string(features_name);
  const Normalization norm = normalization_from_string(normalization_name);
  std::optional<ClassifierKind> only;
  if (classifier != "all") only = classifier_from_string(classifier);

  std::vector<CohortRecord> records;
  if (synthetic) {
    CohortSpec spec;
    spec.normalization = norm;
    records = synth_cohort(spec, derive_seed(seed, "cohort"));
  } else {
    records = read_cohort_csv(cohort_path);
    normalize_cohort(records, norm);
  }
  if (!cohort_out.empty()) write_file_atomic(cohort_out, cohort_csv(records));

  const auto groups = make_groups(records, 5, derive_seed(seed, "groups"));
  const std::uint64_t boot_seed = derive_seed(seed, "bootstrap");
  Json options{{"features", to_string(features)},
               {"normalization", to_string(norm)},
               {"classifier", classifier},
               {"folds", 5},
               {"bootstraps", bootstraps},
               {"knn_k", ClassifierOptions{}.knn_k},
               {"svm_c", ClassifierOptions{}.svm_c},
               {"cohort", synthetic ? "synthetic" : fs::path(cohort_path).filename().string()}};
  Json body{{"options", options}, {"n", records.size()}};
  if (only) {
    const CvResult cv = run_cv(records, *only, groups, features);
    std::vector<bool> positive;
    for (const auto& r : records) positive.push_back(r.label() == Label::malignant);
    const AucInterval a = bootstrap_auc(cv.scores, positive, bootstraps, boot_seed);
    ClassificationReport rep;
    rep.features = features;
    rep.classifiers.push_back({*only, cv.counts, compute_metrics(cv.counts)});
    rep.sum5_mean = rep.classifiers[0].metrics.sum5;
    rep.best_auc = a;
    rep.fold_sizes = cv.fold_sizes;
    body.update(classification_report_json(rep));
    body.erase("sum5_sd");
  } else {
    body.update(classification_report_json(
        evaluate_classifiers(records, groups, features, bootstraps, boot_seed)));
  }
  write_json(common.out, report_envelope(seed, config_hash(options), body));
  return kExitOk;
}

int cmd_ablate(const std::string& manifest_path, const std::string& config_path, const Common& common) {
  const PipelineConfig cfg = seeded(load_config(config_path), common);
  const Json manifest = load_json_file(manifest_path);
  const auto cases = ablation_cases_from_json(manifest, fs::path(manifest_path).parent_path());
  const auto rows = run_ablation(cases, cfg);
  std::size_t best = 0, worst = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].mean_abs_error_pct < rows[best].mean_abs_error_pct) best = i;
    if (rows[i].mean_abs_error_pct > rows[worst].mean_abs_error_pct) worst = i;
  }
  Json body{{"manifest", fs::path(manifest_path).filename().string()},
            {"cases", cases.size()},
            {"rows", ablation_json(rows)},
            {"lowest_error", rows[best].name},
            {"highest_error", rows[worst].name},
            {"config", to_json(cfg)}};
  Json hashed{{"config", to_json(cfg)}, {"manifest", manifest}};
  write_json(common.out, report_envelope(report_seed(cfg, common), config_hash(hashed), body));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quskit: quantitative ultrasound scatterer size and spacing toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  AcqFlags acq_flags;
  Common common;
  std::string phantom_path, sample_path, reference_path, config_path, roi_file, map_path;
  std::string manifest_path, cohort_path, cohort_out;
  std::vector<std::string> roi_flags;
  std::optional<double> beta, reference_beta;
  bool synthetic = false;
  std::string classifier = "all", features = "esd+mss", normalization = "min-max";
  std::size_t bootstraps = 200;

  auto* sim = app.add_subcommand("simulate", "Simulate a phantom into a QRF1 frame plus ground truth");
  sim->add_option("phantom", phantom_path, "Phantom JSON")->required();
  acq_flags.add(sim);
  common.add(sim);

  const auto add_roi = [&](CLI::App* cmd) {
    cmd->add_option("--roi", roi_flags, "ROI as axial_start,axial_extent,lateral_start,lateral_extent (mm)");
    cmd->add_option("--roi-file", roi_file, "JSON array of ROIs");
    cmd->add_option("--config", config_path, "Pipeline config JSON");
  };

  auto* esd = app.add_subcommand("esd", "Estimate effective scatterer diameter maps");
  esd->add_option("sample", sample_path, "Sample QRF1 frame")->required();
  esd->add_option("reference", reference_path, "Reference QRF1 frame")->required();
  add_roi(esd);
  esd->add_option("--beta", beta, "Sample attenuation (Np/cm/MHz), overrides config");
  esd->add_option("--reference-beta", reference_beta, "Reference attenuation, overrides config");
  esd->add_option("--map", map_path, "PPM colormap output");
  common.add(esd);

  auto* mss = app.add_subcommand("mss", "Estimate mean scatterer spacing");
  mss->add_option("sample", sample_path, "Sample QRF1 frame")->required();
  add_roi(mss);
  common.add(mss);

  auto* cls = app.add_subcommand("classify", "Cross-validated benign/malignant classification");
  cls->add_option("--cohort", cohort_path, "Cohort CSV (esd_um,mss_mm,subtype,label)");
  cls->add_flag("--synthetic", synthetic, "Draw the default synthetic cohort");
  cls->add_option("--classifier", classifier, "all or one classifier name");
  cls->add_option("--features", features, "esd or esd+mss");
  cls->add_option("--normalization", normalization, "min-max or z-score");
  cls->add_option("--bootstraps", bootstraps, "Bootstrap resamples for the AUC interval");
  cls->add_option("--cohort-out", cohort_out, "Also write the cohort as CSV");
  common.add(cls);

  auto* abl = app.add_subcommand("ablate", "Rerun ESD estimation with each stage removed");
  abl->add_option("manifest", manifest_path, "Ablation manifest JSON")->required();
  abl->add_option("--config", config_path, "Pipeline config JSON");
  common.add(abl);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (common.threads > 0) set_worker_count(common.threads);
    if (sim->parsed()) return cmd_simulate(phantom_path, acq_flags, common);
    if (esd->parsed())
      return cmd_esd(sample_path, reference_path, roi_flags, roi_file, config_path, beta,
                     reference_beta, map_path, common);
    if (mss->parsed()) return cmd_mss(sample_path, roi_flags, roi_file, config_path, common);
    if (cls->parsed())
      return cmd_classify(cohort_path, synthetic, classifier, features, normalization, bootstraps,
                          cohort_out, common);
    if (abl->parsed()) return cmd_ablate(manifest_path, config_path, common);
  } catch (const IoError& e) {
    std::cerr << "quskit: " << e.what() << "\n";
    return kExitIo;
  } catch (const InvalidArgument& e) {
    std::cerr << "quskit: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "quskit: " << e.what() << "\n";
    return kExitUnreliable;
  } catch (const std::exception& e) {
    std::cerr << "quskit: " << e.what() << "\n";
    return 1;
  }
  return kExitConfig;
}
