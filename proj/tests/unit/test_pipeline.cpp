// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <fstream>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qixai/decomp.hpp"
#include "qixai/error.hpp"
#include "qixai/fixture.hpp"
#include "qixai/pipeline.hpp"
#include "qixai/report.hpp"
#include "temp_dir.hpp"

namespace qixai {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = std::make_unique<testing::TempDir>();
    files_ = fixture::write_fixture(dir_->path());
    config_ = read_run_config(files_.config);
    model_ = std::make_unique<Model>(load_model(read_model_spec(config_.model_spec), read_archive(config_.weights)));
    inputs_ = read_archive(config_.input_batch);
    report_ = std::make_unique<AnalysisReport>(run_analysis(config_));
  }
  static void TearDownTestSuite() {
    report_.reset();
    model_.reset();
    dir_.reset();
  }

  static AnalysisReport run(const RunConfig& c) { return run_analysis(c, *model_, inputs_); }

  static inline std::unique_ptr<testing::TempDir> dir_;
  static inline fixture::FixtureFiles files_;
  static inline RunConfig config_;
  static inline std::unique_ptr<Model> model_;
  static inline TensorArchive inputs_;
  static inline std::unique_ptr<AnalysisReport> report_;
};

TEST_F(Pipeline, DefaultsMirrorReferenceSettings) {
  const RunConfig c = parse_run_config(R"({"model_spec":"m","weights":"w","input_batch":"b"})");
  EXPECT_EQ(c.pca_components, 32u);
  EXPECT_EQ(c.mi_bins, 20u);
  EXPECT_EQ(c.ig.steps, 100u);
  EXPECT_EQ(c.ig.sub_batch, 10u);
  EXPECT_EQ(c.ig.baseline, "zeros");
  EXPECT_TRUE(c.center_pca);
  EXPECT_FALSE(c.replicate_paper_truncation);
}

TEST_F(Pipeline, ConfigParsing) {
  const RunConfig c = parse_run_config(R"({"model_spec":"m.json","weights":"/abs/w.qixt","input_batch":"b"})", "/base");
  EXPECT_EQ(c.model_spec, fs::path("/base/m.json"));
  EXPECT_EQ(c.weights, fs::path("/abs/w.qixt"));
  EXPECT_THROW(parse_run_config(R"({"model_spec":"m","weights":"w","input_batch":"b","pca":3})"), UsageError);
  EXPECT_THROW(parse_run_config(R"({"weights":"w","input_batch":"b"})"), UsageError);
  EXPECT_THROW(parse_run_config(R"({"model_spec":"m","weights":"w","input_batch":"b","mi_bins":1})"), UsageError);
  EXPECT_EQ(parse_run_config(run_config_to_json(config_)), config_);
}

TEST_F(Pipeline, DefaultLayerSelection) {
  EXPECT_EQ(default_analysis_layers(fixture::analysis_cnn_spec()),
            (std::vector<std::string>{"relu1", "relu2", "relu3"}));
  EXPECT_EQ(default_analysis_layers(fixture::small_cnn_spec()),
            (std::vector<std::string>{"relu1", "relu2", "dense"}));
}

TEST_F(Pipeline, ReportStructure) {
  const AnalysisReport& r = *report_;
  EXPECT_EQ(r.n_samples, 64u);
  ASSERT_EQ(r.similarity.size(), 3u);
  EXPECT_EQ(r.similarity[0].cosine.layer_a, "relu1");
  EXPECT_EQ(r.similarity[0].cosine.layer_b, "relu2");
  EXPECT_EQ(r.similarity[1].cosine.layer_b, "relu3");
  EXPECT_EQ(r.similarity[2].cosine.layer_a, "relu2");
  EXPECT_EQ(r.layer_mi.bins, 20u);
  EXPECT_EQ(r.top_mi_pairs.size(), config_.mi_top_k);
  ASSERT_EQ(r.explained_variance.size(), 2u);
  EXPECT_EQ(r.explained_variance[0].mode, VarianceMode::variance_ratio);
  EXPECT_EQ(r.explained_variance[1].mode, VarianceMode::singular_mass);
  ASSERT_TRUE(r.attribution);
  EXPECT_EQ(r.attribution->target, "logit");
  ASSERT_EQ(r.attribution->samples.size(), config_.ig.samples.size());
  for (const auto& p : r.similarity) EXPECT_TRUE(r.artifacts.contains(p.cosine.matrix_entry));
  for (const auto& s : r.attribution->samples) {
    EXPECT_TRUE(r.artifacts.contains(s.attributions_entry));
    EXPECT_TRUE(r.artifacts.contains(s.heatmap_entry));
    EXPECT_EQ(s.summary.top_locations.size(), config_.ig.top_k);
  }
}

TEST_F(Pipeline, SpectrumIsSingularMassOfDenseSvd) {
  const Tensor& dense = report_->artifacts.at("features.relu3");
  EXPECT_EQ(report_->spectrum.cumulative,
            explained_variance(svd(dense).s, VarianceMode::singular_mass).cumulative);
}

TEST_F(Pipeline, AuditFindsNoMismatches) {
  const AuditResult audit = audit_report(*report_);
  EXPECT_TRUE(audit.ok()) << (audit.mismatches.empty() ? "" : audit.mismatches.front());
  EXPECT_GT(audit.checked, 100u);
}

TEST_F(Pipeline, AuditDetectsTampering) {
  AnalysisReport tampered = *report_;
  tampered.similarity[1].cosine.matrix_mean += 1e-12;
  tampered.attribution->samples[0].completeness_gap *= 2;
  const AuditResult audit = audit_report(tampered);
  EXPECT_EQ(audit.mismatches.size(), 2u);
}

TEST_F(Pipeline, DocumentRoundTripIsExact) {
  const AnalysisReport back = report_from_json(report_to_json(*report_), report_->artifacts);
  EXPECT_EQ(back, *report_);
}

TEST_F(Pipeline, RepeatedRunsAreByteIdentical) {
  testing::TempDir out;
  write_report(*report_, out / "a");
  write_report(run_analysis(config_), out / "b");
  for (const char* f : {kReportFile, kArtifactsFile, "spectrum.csv", "heatmaps/ig.sample0.png"}) {
    EXPECT_EQ(slurp(out / "a" / f), slurp(out / "b" / f)) << f;
  }
  const AnalysisReport reread = read_report(out / "a");
  EXPECT_EQ(reread, *report_);
  EXPECT_TRUE(audit_report(reread).ok());
}

TEST_F(Pipeline, DisablingIgLeavesOtherSectionsUnchanged) {
  RunConfig c = config_;
  c.ig.enabled = false;
  const AnalysisReport r = run(c);
  EXPECT_FALSE(r.attribution);
  json with = json::parse(report_to_json(*report_));
  json without = json::parse(report_to_json(r));
  EXPECT_FALSE(without.contains("attribution"));
  for (const char* key : {"samples", "layers", "similarity", "mutual_information", "explained_variance", "spectrum"}) {
    EXPECT_EQ(with[key], without[key]) << key;
  }
  for (const auto& [name, tensor] : r.artifacts.entries()) {
    EXPECT_TRUE(bitwise_equal(tensor, report_->artifacts.at(name))) << name;
  }
}

TEST_F(Pipeline, VarianceModeSelectsTables) {
  RunConfig c = config_;
  c.ig.enabled = false;
  c.variance_mode = VarianceSelection::singular_mass;
  const AnalysisReport r = run(c);
  ASSERT_EQ(r.explained_variance.size(), 1u);
  EXPECT_EQ(r.explained_variance[0], report_->explained_variance[1]);
}

TEST_F(Pipeline, SingleSampleFailsInReduceStage) {
  TensorArchive one;
  one.add("batch", inputs_.at("batch").slice_leading(0, 1));
  RunConfig c = config_;
  c.ig.samples = {0};
  try {
    run_analysis(c, *model_, one);
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "reduce");
    EXPECT_NE(std::string(e.what()).find("PCA requires n >= 2"), std::string::npos) << e.what();
    EXPECT_EQ(e.kind(), ErrorKind::data);
  }
}

TEST_F(Pipeline, TooManyComponentsHintsAtConfig) {
  RunConfig c = config_;
  c.pca_components = 41;
  try {
    run(c);
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "reduce");
    EXPECT_NE(std::string(e.what()).find("lower pca_components"), std::string::npos) << e.what();
  }
}

TEST_F(Pipeline, OutOfRangeIgSampleFailsInAttributionStage) {
  RunConfig c = config_;
  c.ig.samples = {64};
  try {
    run(c);
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "attribution");
  }
}

TEST_F(Pipeline, MissingWeightsFailInLoadStage) {
  RunConfig c = config_;
  c.weights = dir_->path() / "absent.qixt";
  try {
    run_analysis(c);
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "load");
    EXPECT_EQ(e.kind(), ErrorKind::io);
  }
}

TEST_F(Pipeline, AlternativeModesStayAuditable) {
  RunConfig c = config_;
  c.ig.samples = {5};
  c.ig.steps = 16;
  c.ig.sub_batch = 3;
  c.compare_reduced = false;
  c.replicate_paper_truncation = true;
  c.pca_components = 16;
  c.center_pca = false;
  const AnalysisReport r = run(c);
  EXPECT_EQ(r.artifacts.at("reduced.relu1").shape(), (Shape{64, 16}));
  const AuditResult audit = audit_report(report_from_json(report_to_json(r), r.artifacts));
  EXPECT_TRUE(audit.ok()) << (audit.mismatches.empty() ? "" : audit.mismatches.front());
}

TEST_F(Pipeline, SpatialFeatureMapMiNeedsMatchingExtents) {
  RunConfig c = config_;
  c.ig.enabled = false;
  c.mi_feature_maps = FeatureMapMode::spatial;
  try {
    run(c);
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "mutual_information");
  }
  // conv1 and relu1 share a 30 x 30 grid.
  c.layers = {"conv1", "relu1", "relu3"};
  const AnalysisReport r = run(c);
  EXPECT_TRUE(r.artifacts.contains("feature_maps.conv1"));
  EXPECT_EQ(r.top_mi_pairs.size(), 10u);
  const AuditResult audit = audit_report(r);
  EXPECT_TRUE(audit.ok()) << (audit.mismatches.empty() ? "" : audit.mismatches.front());
}

TEST_F(Pipeline, CustomBaselineEntry) {
  TensorArchive inputs = inputs_;
  inputs.add("gray", Tensor({1, 32, 32, 3}, 0.5));
  RunConfig c = config_;
  c.ig.baseline = "gray";
  c.ig.steps = 8;
  const AnalysisReport r = run_analysis(c, *model_, inputs);
  EXPECT_EQ(r.attribution->baseline, "gray");
  EXPECT_EQ(r.attribution->samples[0].f_baseline,
            model_->logit().predict(inputs.at("gray"))[0]);
}

TEST_F(Pipeline, FailedWriteLeavesNoPartialFiles) {
  testing::TempDir out;
  fs::create_directories(out / "r");
  std::ofstream(out / "r" / kHeatmapDir) << "blocks the heatmap directory";
  EXPECT_THROW(write_report(*report_, out / "r"), IoError);
  std::vector<std::string> left;
  for (const auto& e : fs::directory_iterator(out / "r")) left.push_back(e.path().filename().string());
  EXPECT_EQ(left, (std::vector<std::string>{kHeatmapDir}));

  std::ofstream(out / "file") << "x";
  EXPECT_THROW(write_report(*report_, out / "file" / "sub"), IoError);
}

TEST_F(Pipeline, WriteCreatesNestedDirectoriesAndCleansThemUp) {
  testing::TempDir out;
  write_report(*report_, out / "x" / "y");
  EXPECT_TRUE(fs::exists(out / "x" / "y" / kReportFile));
  EXPECT_TRUE(fs::exists(out / "x" / "y" / "heatmaps" / "similarity.relu2.relu3.png"));
  EXPECT_TRUE(fs::exists(out / "x" / "y" / "spectrum.csv"));
}

}  // namespace
}  // namespace qixai
