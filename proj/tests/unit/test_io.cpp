#include <doctest.h>

#include <fstream>

#include "quskit/io.hpp"
#include "support.hpp"

using namespace quskit;
using quskit::test::TempDir;

TEST_SUITE("io") {
  TEST_CASE("pipeline config round trip") {
    PipelineConfig cfg;
    cfg.beta = 0.07;
    cfg.reference_beta = 0.05;
    cfg.nnarlf.half_axial = 2;
    cfg.blocks = BlockSpec{96, 5, 48, 2};
    cfg.ablation = {Stage::eemd, Stage::bandpass};
    const Json j = to_json(cfg);
    const auto back = pipeline_config_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(back.ablation.contains(Stage::eemd));
    CHECK(back.blocks->axial_len == 96);
  }

  TEST_CASE("configs reject unknown keys and bad values") {
    CHECK_THROWS_AS(pipeline_config_from_json(Json{{"bta", 0.1}}), InvalidArgument);
    CHECK_THROWS_AS(pipeline_config_from_json(Json{{"nnarlf", {{"half_axil", 1}}}}), InvalidArgument);
    CHECK_THROWS_AS(pipeline_config_from_json(Json{{"ablation", {"no-magic"}}}), InvalidArgument);
    CHECK_THROWS_AS(pipeline_config_from_json(Json{{"beta", "high"}}), InvalidArgument);
    CHECK_THROWS_AS(pipeline_config_from_json(Json{{"ks_alpha", -0.5}}), InvalidArgument);
    CHECK_NOTHROW(pipeline_config_from_json(Json::object()));
  }

  TEST_CASE("config hash") {
    const Json a = to_json(PipelineConfig{});
    Json b = a;
    b["beta"] = 0.1;
    CHECK(config_hash(a) == config_hash(to_json(PipelineConfig{})));
    CHECK(config_hash(a) != config_hash(b));
    CHECK(config_hash(a).size() == 16);
  }

  TEST_CASE("phantom documents") {
    auto p = test::homogeneous_phantom(45, 30, 46, 0.058);
    p.regions[0].coherent_spacing_mm = 0.8;
    const auto back = phantom_from_json(to_json(p));
    CHECK(back.regions.size() == 1);
    CHECK(*back.regions[0].coherent_spacing_mm == 0.8);
    CHECK(back.attenuation_beta == 0.058);

    Json j = to_json(p);
    j["regions"][0]["radious_mm"] = 3;
    CHECK_THROWS_AS(phantom_from_json(j), InvalidArgument);
  }

  TEST_CASE("JSON files") {
    TempDir dir("io");
    CHECK_THROWS_AS(load_json_file(dir / "missing.json"), IoError);
    std::ofstream(dir / "bad.json") << "{\"beta\": ";
    CHECK_THROWS_AS(load_json_file(dir / "bad.json"), InvalidArgument);
    const std::string text = dump_json(Json{{"a", 1}});
    CHECK(text.back() == '\n');
  }

  TEST_CASE("cohort CSV") {
    TempDir dir("cohort");
    const auto cohort = synth_cohort(CohortSpec{}, 3);
    write_file_atomic(dir / "c.csv", cohort_csv(cohort));
    const auto back = read_cohort_csv(dir / "c.csv");
    REQUIRE(back.size() == cohort.size());
    CHECK(back[10].subtype == cohort[10].subtype);
    CHECK(back[10].esd_um == doctest::Approx(cohort[10].esd_um).epsilon(1e-12));

    std::ofstream(dir / "bad.csv") << "esd_um,mss_mm,subtype,label\n100,0.7,fibroadenoma,malignant\n";
    CHECK_THROWS_AS(read_cohort_csv(dir / "bad.csv"), InvalidArgument);
    std::ofstream(dir / "hdr.csv") << "esd,mss,subtype,label\n";
    CHECK_THROWS_AS(read_cohort_csv(dir / "hdr.csv"), InvalidArgument);
    CHECK_THROWS_AS(read_cohort_csv(dir / "none.csv"), IoError);
  }

  TEST_CASE("ablation manifest") {
    TempDir dir("manifest");
    const auto p = test::homogeneous_phantom(45, 12, 10);
    save_rf_frame(test::simulate(p, 1), dir / "ref.qrf");
    const Json roi = to_json(RoiSpec{1, 9, 1, 8});
    const Json m{{"cases",
                  {{{"sample", {{"phantom", to_json(p)}, {"seed", 4}}},
                    {"reference", "ref.qrf"},
                    {"rois", {roi}},
                    {"truth_esd_um", 45},
                    {"beta", 0.0}}}}};
    const auto cases = ablation_cases_from_json(m, dir.path());
    REQUIRE(cases.size() == 1);
    CHECK(cases[0].sample == test::simulate(p, 4));
    CHECK(cases[0].reference.axial_count() == test::simulate(p, 1).axial_count());

    Json bad = m;
    bad["cases"][0]["truth"] = 1;
    CHECK_THROWS_AS(ablation_cases_from_json(bad, dir.path()), InvalidArgument);
    bad = m;
    bad["cases"][0]["reference"] = "nope.qrf";
    CHECK_THROWS_AS(ablation_cases_from_json(bad, dir.path()), IoError);
  }

  TEST_CASE("report envelope") {
    const Json r = report_envelope(9, "abc", Json{{"x", 1}});
    CHECK(r["tool"] == "quskit");
    CHECK(r["version"] == std::string(kToolVersion));
    CHECK(r["seed"] == 9);
    CHECK(r["x"] == 1);
  }
}
