#pragma once

// JSON configs and reports, cohort CSV, and the report envelope (tool version, seed,
// config hash). Config readers reject unknown keys so typos fail loudly.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "quskit/classify.hpp"
#include "quskit/core.hpp"
#include "quskit/esd.hpp"
#include "quskit/mss.hpp"
#include "quskit/pipeline.hpp"
#include "quskit/synthrf.hpp"

namespace quskit {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kToolVersion = "1.0.0";

/// Missing or unreadable file is IoError; malformed JSON is InvalidArgument.
Json load_json_file(const std::filesystem::path& path);

/// Two-space indented with a trailing newline.
std::string dump_json(const Json& j);

/// FNV-1a 64 over the compact serialization, as 16 hex digits.
std::string config_hash(const Json& j);

AcquisitionParams acquisition_from_json(const Json& j);
Json to_json(const AcquisitionParams& acq);

/// Accepts an optional "acquisition" object alongside the phantom fields.
PhantomSpec phantom_from_json(const Json& j);
Json to_json(const PhantomSpec& spec);

PipelineConfig pipeline_config_from_json(const Json& j);
Json to_json(const PipelineConfig& cfg);

RoiSpec roi_from_json(const Json& j);
Json to_json(const RoiSpec& roi);

/// Ground truth written next to a simulated frame.
Json ground_truth_json(const ScattererField& field, std::uint64_t seed);

Json esd_report_json(const EsdMap& map);
Json mss_report_json(const MssEstimate& est);
Json metrics_json(const MetricsReport& m);
Json classification_report_json(const ClassificationReport& rep);
Json ablation_json(const std::vector<AblationRow>& rows);

/// {"tool", "version", "seed", "config_hash"} followed by the body's fields.
Json report_envelope(std::uint64_t seed, const std::string& config_hash, const Json& body);

/// {"acquisition"?, "cases": [{"sample", "reference", "rois", "truth_esd_um", "beta",
/// "reference_beta"?}]}. A frame is either a QRF1 path relative to base_dir or
/// {"phantom": {...}, "seed": n}, simulated in memory.
std::vector<AblationCase> ablation_cases_from_json(const Json& j, const std::filesystem::path& base_dir);

/// Header `esd_um,mss_mm,subtype,label`. Reading checks that label matches subtype;
/// normalized columns are recomputed by the caller.
std::vector<CohortRecord> read_cohort_csv(const std::filesystem::path& path);
std::string cohort_csv(const std::vector<CohortRecord>& records);

}  // namespace quskit
