#include "quskit/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace quskit {

namespace {

/// Reads fields of one JSON object and rejects any key it was not asked about.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(std::string("bad value for '") + key + "'");
    }
  }

  template <typename T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T v{};
    get(key, v);
    out = v;
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const Json& at(const char* key) const { return j_.at(key); }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.contains(item.key())) fail("unknown key '" + item.key() + "'");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw InvalidArgument(where_ + ": " + msg);
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string, std::less<>> seen_;
};

/// Non-finite numbers serialize as null; read them back as +inf.
double number_or_inf(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string_view to_string(RegionShape s) { return s == RegionShape::circle ? "circle" : "rectangle"; }

std::string_view to_string(DeconvMode m) {
  return m == DeconvMode::known_psf ? "known_psf" : "cepstral_estimate";
}

}  // namespace

Json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(path.string() + ": malformed JSON: " + e.what());
  }
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

std::string config_hash(const Json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

AcquisitionParams acquisition_from_json(const Json& j) {
  AcquisitionParams a;
  ObjectReader r(j, "acquisition");
  r.get("center_frequency_mhz", a.center_frequency_mhz);
  r.get("fractional_bandwidth", a.fractional_bandwidth);
  r.get("sampling_rate_mhz", a.sampling_rate_mhz);
  r.get("sound_speed", a.sound_speed);
  r.get("pulse_length_mm", a.pulse_length_mm);
  r.get("beam_width_mm", a.beam_width_mm);
  r.get("lateral_pitch_mm", a.lateral_pitch_mm);
  r.get("aperture_ratio_q", a.aperture_ratio_q);
  r.get("gate_length_mm", a.gate_length_mm);
  r.finish();
  a.validate();
  return a;
}

Json to_json(const AcquisitionParams& a) {
  return Json{{"center_frequency_mhz", a.center_frequency_mhz},
              {"fractional_bandwidth", a.fractional_bandwidth},
              {"sampling_rate_mhz", a.sampling_rate_mhz},
              {"sound_speed", a.sound_speed},
              {"pulse_length_mm", a.pulse_length_mm},
              {"beam_width_mm", a.beam_width_mm},
              {"lateral_pitch_mm", a.lateral_pitch_mm},
              {"aperture_ratio_q", a.aperture_ratio_q},
              {"gate_length_mm", a.gate_length_mm}};
}

PhantomSpec phantom_from_json(const Json& j) {
  PhantomSpec p;
  ObjectReader r(j, "phantom");
  r.has("acquisition");  // read separately by the caller
  r.has("description");
  if (!r.has("regions") || !r.at("regions").is_array()) r.fail("'regions' must be an array");
  std::size_t index = 0;
  for (const auto& jr : r.at("regions")) {
    PhantomRegion g;
    ObjectReader rr(jr, "phantom.regions[" + std::to_string(index++) + "]");
    std::string shape = "rectangle";
    rr.get("shape", shape);
    if (shape == "circle") g.shape = RegionShape::circle;
    else if (shape != "rectangle") rr.fail("unknown shape '" + shape + "'");
    rr.get("axial_min_mm", g.axial_min_mm);
    rr.get("axial_max_mm", g.axial_max_mm);
    rr.get("lateral_min_mm", g.lateral_min_mm);
    rr.get("lateral_max_mm", g.lateral_max_mm);
    rr.get("center_axial_mm", g.center_axial_mm);
    rr.get("center_lateral_mm", g.center_lateral_mm);
    rr.get("radius_mm", g.radius_mm);
    rr.get("esd_um", g.esd_um);
    rr.get("concentration", g.concentration);
    rr.get("diffuse_density", g.diffuse_density);
    rr.get("coherent_spacing_mm", g.coherent_spacing_mm);
    rr.get("coherent_jitter", g.coherent_jitter);
    rr.get("coherent_amplitude_ratio", g.coherent_amplitude_ratio);
    rr.get("cyst", g.cyst);
    rr.finish();
    p.regions.push_back(g);
  }
  r.get("attenuation_beta", p.attenuation_beta);
  r.get("axial_extent_mm", p.axial_extent_mm);
  r.get("lateral_extent_mm", p.lateral_extent_mm);
  r.get("depth_offset_mm", p.depth_offset_mm);
  r.get("diffraction_ripple_db", p.diffraction_ripple_db);
  if (r.has("noise_snr_db")) {
    try {
      p.noise_snr_db = number_or_inf(r.at("noise_snr_db"));
    } catch (const nlohmann::json::exception&) {
      r.fail("bad value for 'noise_snr_db'");
    }
  }
  r.finish();
  p.validate();
  return p;
}

Json to_json(const PhantomSpec& p) {
  Json regions = Json::array();
  for (const auto& g : p.regions) {
    Json jr{{"shape", to_string(g.shape)}};
    if (g.shape == RegionShape::rectangle) {
      jr["axial_min_mm"] = g.axial_min_mm;
      jr["axial_max_mm"] = g.axial_max_mm;
      jr["lateral_min_mm"] = g.lateral_min_mm;
      jr["lateral_max_mm"] = g.lateral_max_mm;
    } else {
      jr["center_axial_mm"] = g.center_axial_mm;
      jr["center_lateral_mm"] = g.center_lateral_mm;
      jr["radius_mm"] = g.radius_mm;
    }
    jr["esd_um"] = g.esd_um;
    jr["concentration"] = g.concentration;
    jr["diffuse_density"] = g.diffuse_density;
    jr["coherent_spacing_mm"] = g.coherent_spacing_mm ? Json(*g.coherent_spacing_mm) : Json(nullptr);
    jr["coherent_jitter"] = g.coherent_jitter;
    jr["coherent_amplitude_ratio"] = g.coherent_amplitude_ratio;
    jr["cyst"] = g.cyst;
    regions.push_back(std::move(jr));
  }
  return Json{{"regions", regions},
              {"attenuation_beta", p.attenuation_beta},
              {"axial_extent_mm", p.axial_extent_mm},
              {"lateral_extent_mm", p.lateral_extent_mm},
              {"depth_offset_mm", p.depth_offset_mm},
              {"diffraction_ripple_db", p.diffraction_ripple_db},
              {"noise_snr_db", finite_or_null(p.noise_snr_db)}};
}

PipelineConfig pipeline_config_from_json(const Json& j) {
  PipelineConfig c;
  ObjectReader r(j, "config");
  if (r.has("deconv")) {
    ObjectReader d(r.at("deconv"), "config.deconv");
    std::string mode = "known_psf";
    d.get("mode", mode);
    if (mode == "cepstral_estimate") c.deconv.mode = DeconvMode::cepstral_estimate;
    else if (mode != "known_psf") d.fail("unknown mode '" + mode + "'");
    d.get("psf", c.deconv.psf);
    d.get("psf_origin", c.deconv.psf_origin);
    d.get("epsilon", c.deconv.epsilon);
    d.get("cepstral_segment", c.deconv.cepstral_segment);
    d.get("cepstral_lifter", c.deconv.cepstral_lifter);
    d.finish();
  }
  r.get("beta", c.beta);
  r.get("reference_beta", c.reference_beta);
  if (r.has("eemd")) {
    ObjectReader e(r.at("eemd"), "config.eemd");
    e.get("ensemble_size", c.eemd.ensemble_size);
    e.get("snr_db", c.eemd.snr_db);
    e.get("seed", c.eemd.seed);
    e.finish();
  }
  r.get("ks_alpha", c.ks_alpha);
  r.get("min_diffuse_energy", c.min_diffuse_energy);
  r.get("normalize_imfs", c.normalize_imfs);
  if (r.has("welch")) {
    ObjectReader w(r.at("welch"), "config.welch");
    w.get("segment_len", c.welch.segment_len);
    w.get("overlap", c.welch.overlap);
    w.get("nfft", c.welch.nfft);
    w.finish();
  }
  if (r.has("blocks") && !r.at("blocks").is_null()) {
    BlockSpec b;
    ObjectReader br(r.at("blocks"), "config.blocks");
    br.get("axial_len", b.axial_len);
    br.get("lateral_len", b.lateral_len);
    br.get("axial_step", b.axial_step);
    br.get("lateral_step", b.lateral_step);
    br.finish();
    c.blocks = b;
  }
  if (r.has("nnarlf")) {
    ObjectReader n(r.at("nnarlf"), "config.nnarlf");
    n.get("half_axial", c.nnarlf.half_axial);
    n.get("half_lateral", c.nnarlf.half_lateral);
    n.get("lambda_axial", c.nnarlf.lambda_axial);
    n.get("lambda_lateral", c.nnarlf.lambda_lateral);
    n.finish();
  }
  r.get("reference_esd_um", c.reference_esd_um);
  r.get("reference_concentration", c.reference_concentration);
  r.get("band_lo_mhz", c.band_lo_mhz);
  r.get("band_hi_mhz", c.band_hi_mhz);
  r.get("usable_drop_db", c.usable_drop_db);
  r.get("min_band_mhz", c.min_band_mhz);
  r.get("roi_usable_band", c.roi_usable_band);
  r.get("r2_min", c.r2_min);
  r.get("max_residual_db", c.max_residual_db);
  r.get("erratic_fraction", c.erratic_fraction);
  r.get("ar_order", c.ar_order);
  r.get("mss_deconv_epsilon", c.mss_deconv_epsilon);
  r.get("mss_min_mm", c.mss_min_mm);
  r.get("mss_max_mm", c.mss_max_mm);
  r.get("mss_max_dispersion", c.mss_max_dispersion);
  std::vector<std::string> ablation;
  r.get("ablation", ablation);
  for (const auto& name : ablation) c.ablation.insert(stage_from_ablation(name));
  r.finish();
  c.validate();
  return c;
}

Json to_json(const PipelineConfig& c) {
  Json ablation = Json::array();
  for (Stage s : kAllStages)
    if (!c.enabled(s)) ablation.push_back(ablation_name(s));
  Json blocks = nullptr;
  if (c.blocks)
    blocks = Json{{"axial_len", c.blocks->axial_len},
                  {"lateral_len", c.blocks->lateral_len},
                  {"axial_step", c.blocks->axial_step},
                  {"lateral_step", c.blocks->lateral_step}};
  return Json{
      {"deconv",
       {{"mode", to_string(c.deconv.mode)},
        {"psf", c.deconv.psf},
        {"psf_origin", c.deconv.psf_origin},
        {"epsilon", c.deconv.epsilon},
        {"cepstral_segment", c.deconv.cepstral_segment},
        {"cepstral_lifter", c.deconv.cepstral_lifter}}},
      {"beta", c.beta},
      {"reference_beta", c.reference_beta ? Json(*c.reference_beta) : Json(nullptr)},
      {"eemd", {{"ensemble_size", c.eemd.ensemble_size}, {"snr_db", c.eemd.snr_db}, {"seed", c.eemd.seed}}},
      {"ks_alpha", c.ks_alpha},
      {"min_diffuse_energy", c.min_diffuse_energy},
      {"normalize_imfs", c.normalize_imfs},
      {"welch", {{"segment_len", c.welch.segment_len}, {"overlap", c.welch.overlap}, {"nfft", c.welch.nfft}}},
      {"blocks", blocks},
      {"nnarlf",
       {{"half_axial", c.nnarlf.half_axial},
        {"half_lateral", c.nnarlf.half_lateral},
        {"lambda_axial", c.nnarlf.lambda_axial},
        {"lambda_lateral", c.nnarlf.lambda_lateral}}},
      {"reference_esd_um", c.reference_esd_um},
      {"reference_concentration", c.reference_concentration},
      {"band_lo_mhz", c.band_lo_mhz},
      {"band_hi_mhz", c.band_hi_mhz},
      {"usable_drop_db", c.usable_drop_db},
      {"min_band_mhz", c.min_band_mhz},
      {"roi_usable_band", c.roi_usable_band},
      {"r2_min", c.r2_min},
      {"max_residual_db", c.max_residual_db},
      {"erratic_fraction", c.erratic_fraction},
      {"ar_order", c.ar_order},
      {"mss_deconv_epsilon", c.mss_deconv_epsilon},
      {"mss_min_mm", c.mss_min_mm},
      {"mss_max_mm", c.mss_max_mm},
      {"mss_max_dispersion", c.mss_max_dispersion},
      {"ablation", ablation}};
}

RoiSpec roi_from_json(const Json& j) {
  RoiSpec roi;
  ObjectReader r(j, "roi");
  r.get("axial_start_mm", roi.axial_start_mm);
  r.get("axial_extent_mm", roi.axial_extent_mm);
  r.get("lateral_start_mm", roi.lateral_start_mm);
  r.get("lateral_extent_mm", roi.lateral_extent_mm);
  std::string tag = std::string(to_string(roi.tag));
  r.get("tag", tag);
  roi.tag = roi_tag_from_string(tag);
  r.finish();
  return roi;
}

Json to_json(const RoiSpec& roi) {
  return Json{{"axial_start_mm", roi.axial_start_mm},
              {"axial_extent_mm", roi.axial_extent_mm},
              {"lateral_start_mm", roi.lateral_start_mm},
              {"lateral_extent_mm", roi.lateral_extent_mm},
              {"tag", to_string(roi.tag)}};
}

Json ground_truth_json(const ScattererField& field, std::uint64_t seed) {
  const auto& spec = field.source_spec;
  std::size_t diffuse = 0, coherent = 0;
  for (const auto& s : field.scatterers) (s.kind == ScattererKind::diffuse ? diffuse : coherent)++;
  Json regions = Json::array();
  for (const auto& g : spec.regions)
    regions.push_back({{"esd_um", g.esd_um},
                       {"concentration", g.concentration},
                       {"coherent_spacing_mm", g.coherent_spacing_mm ? Json(*g.coherent_spacing_mm) : Json(nullptr)},
                       {"cyst", g.cyst}});
  // The first region is the background by convention.
  return Json{{"seed", seed},
              {"esd_um", spec.regions.front().esd_um},
              {"attenuation_beta", spec.attenuation_beta},
              {"regions", regions},
              {"diffuse_scatterers", diffuse},
              {"coherent_scatterers", coherent},
              {"phantom", to_json(spec)},
              {"acquisition", to_json(field.acquisition)}};
}

Json esd_report_json(const EsdMap& map) {
  Json blocks = Json::array();
  for (std::size_t k = 0; k < map.regressions.size(); ++k) {
    const auto& reg = map.regressions[k];
    blocks.push_back({{"row", reg.index.row},
                      {"col", reg.index.col},
                      {"esd_um", finite_or_null(map.esd_um[k])},
                      {"reliable", static_cast<bool>(map.reliable[k])},
                      {"slope_db_per_mhz2", finite_or_null(reg.slope)},
                      {"intercept_db", finite_or_null(reg.intercept)},
                      {"r2", finite_or_null(reg.r2)},
                      {"weighted_slope", finite_or_null(map.weighted_slope[k])},
                      {"eac_log_ratio_db", finite_or_null(map.eac_log_ratio_db[k])},
                      {"failure", reg.failure}});
  }
  const auto& s = map.summary;
  return Json{{"roi", to_json(map.roi)},
              {"mean_esd_um", finite_or_null(s.mean_esd_um)},
              {"sd_um", finite_or_null(s.sd_esd_um)},
              {"median_esd_um", finite_or_null(s.median_esd_um)},
              {"reliable_fraction", s.reliable_fraction},
              {"reliable_blocks", s.reliable_blocks},
              {"erratic", s.erratic},
              {"gain_capped", map.gain_capped},
              {"rows", map.rows()},
              {"cols", map.cols()},
              {"per_block", blocks}};
}

Json mss_report_json(const MssEstimate& e) {
  Json per_line = Json::array();
  for (double v : e.per_line_mm) per_line.push_back(v);
  return Json{{"mss_mm", e.mss_mm},
              {"sd_mm", e.sd_mm},
              {"delta_f_mhz", e.delta_f_mhz},
              {"dispersion", e.dispersion},
              {"n_peaks", e.n_peaks},
              {"lines", e.lines},
              {"failed_lines", e.failed_lines},
              {"reliable", e.reliable},
              {"reason", e.reason},
              {"per_line_mm", per_line}};
}

Json metrics_json(const MetricsReport& m) {
  return Json{{"sensitivity", m.sensitivity}, {"specificity", m.specificity},
              {"accuracy", m.accuracy},       {"ppv", m.ppv},
              {"npv", m.npv},                 {"sum5", m.sum5},
              {"mcc", m.mcc},                 {"undefined", m.undefined}};
}

Json classification_report_json(const ClassificationReport& rep) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < rep.classifiers.size(); ++i) {
    const auto& c = rep.classifiers[i];
    Json row{{"classifier", to_string(c.kind)},
             {"tp", c.counts.tp},
             {"tn", c.counts.tn},
             {"fp", c.counts.fp},
             {"fn", c.counts.fn}};
    row.update(metrics_json(c.metrics));
    row["best"] = i == rep.best;
    rows.push_back(std::move(row));
  }
  return Json{{"features", to_string(rep.features)},
              {"fold_sizes", rep.fold_sizes},
              {"classifiers", rows},
              {"best_classifier", to_string(rep.classifiers[rep.best].kind)},
              {"sum5_mean", rep.sum5_mean},
              {"sum5_sd", rep.sum5_sd},
              {"auc",
               {{"classifier", to_string(rep.classifiers[rep.best].kind)},
                {"mean", rep.best_auc.mean_auc},
                {"ci_low", rep.best_auc.ci_low},
                {"ci_high", rep.best_auc.ci_high}}}};
}

Json ablation_json(const std::vector<AblationRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows)
    out.push_back({{"name", r.name},
                   {"mean_abs_error_pct", r.mean_abs_error_pct},
                   {"mean_abs_error_um", finite_or_null(r.mean_abs_error_um)},
                   {"mean_sd_um", finite_or_null(r.mean_sd_um)},
                   {"reliable_fraction", r.reliable_fraction},
                   {"failed_cases", r.failed_cases}});
  return out;
}

Json report_envelope(std::uint64_t seed, const std::string& hash, const Json& body) {
  Json out{{"tool", "quskit"}, {"version", kToolVersion}, {"seed", seed}, {"config_hash", hash}};
  for (const auto& item : body.items()) out[item.key()] = item.value();
  return out;
}

std::vector<AblationCase> ablation_cases_from_json(const Json& j,
                                                  const std::filesystem::path& base_dir) {
  ObjectReader top(j, "manifest");
  AcquisitionParams acq;
  if (top.has("acquisition")) acq = acquisition_from_json(top.at("acquisition"));
  top.has("description");
  if (!top.has("cases") || !top.at("cases").is_array()) top.fail("'cases' must be an array");
  top.finish();

  std::map<std::string, RFFrame> frames;  // identical frame specs are built once
  const auto frame_of = [&](const Json& f, const std::string& where) -> RFFrame {
    const std::string key = f.dump();
    if (auto it = frames.find(key); it != frames.end()) return it->second;
    RFFrame frame;
    if (f.is_string()) {
      frame = load_rf_frame(base_dir / f.get<std::string>());
    } else {
      ObjectReader r(f, where);
      std::uint64_t seed = 0;
      r.get("seed", seed);
      if (!r.has("phantom")) r.fail("needs a path or a phantom");
      const PhantomSpec spec = phantom_from_json(r.at("phantom"));
      r.finish();
      frame = synthesize_rf(generate_scatterer_field(spec, seed, acq), acq);
    }
    frames.emplace(key, frame);
    return frame;
  };

  std::vector<AblationCase> cases;
  std::size_t index = 0;
  for (const auto& jc : top.at("cases")) {
    const std::string where = "manifest.cases[" + std::to_string(index++) + "]";
    ObjectReader r(jc, where);
    AblationCase c;
    if (!r.has("sample") || !r.has("reference")) r.fail("needs sample and reference");
    c.sample = frame_of(r.at("sample"), where + ".sample");
    c.reference = frame_of(r.at("reference"), where + ".reference");
    if (!r.has("rois") || !r.at("rois").is_array() || r.at("rois").empty())
      r.fail("'rois' must be a non-empty array");
    for (const auto& jr : r.at("rois")) c.rois.push_back(roi_from_json(jr));
    r.get("truth_esd_um", c.truth_esd_um);
    r.get("beta", c.beta);
    r.get("reference_beta", c.reference_beta);
    r.finish();
    if (!(c.truth_esd_um > 0.0)) r.fail("truth_esd_um must be positive");
    cases.push_back(std::move(c));
  }
  return cases;
}

std::vector<CohortRecord> read_cohort_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument(path.string() + ": empty cohort file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "esd_um,mss_mm,subtype,label")
    throw InvalidArgument(path.string() + ": expected header esd_um,mss_mm,subtype,label");
  std::vector<CohortRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != 4) throw InvalidArgument(where + ": expected 4 columns");
    CohortRecord r;
    try {
      std::size_t used = 0;
      r.esd_um = std::stod(cells[0], &used);
      if (used != cells[0].size()) throw std::invalid_argument("trailing");
      r.mss_mm = std::stod(cells[1], &used);
      if (used != cells[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      throw InvalidArgument(where + ": non-numeric feature");
    }
    r.subtype = subtype_from_string(cells[2]);
    if (cells[3] != to_string(r.label()))
      throw InvalidArgument(where + ": label does not match subtype");
    out.push_back(r);
  }
  return out;
}

std::string cohort_csv(const std::vector<CohortRecord>& records) {
  std::string out = "esd_um,mss_mm,subtype,label\n";
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,", r.esd_um, r.mss_mm);
    out += buf;
    out += to_string(r.subtype);
    out += ',';
    out += to_string(r.label());
    out += '\n';
  }
  return out;
}

}  // namespace quskit
