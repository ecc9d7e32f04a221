// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qixai/archive.hpp"
#include "qixai/attribution.hpp"
#include "qixai/infotheory.hpp"
#include "qixai/model.hpp"
#include "qixai/reduce.hpp"
#include "qixai/similarity.hpp"

namespace qixai {

struct IgConfig {
  bool enabled = true;
  std::size_t steps = 100;
  std::size_t sub_batch = 10;
  std::string baseline = "zeros";  // or an entry name in the input archive
  std::vector<std::size_t> samples{0};
  std::size_t output_index = 0;
  std::size_t top_k = 5;
  friend bool operator==(const IgConfig&, const IgConfig&) = default;
};

enum class VarianceSelection { both, variance_ratio, singular_mass };

std::string_view to_string(VarianceSelection selection) noexcept;

struct RunConfig {
  std::filesystem::path model_spec;
  std::filesystem::path weights;
  std::filesystem::path input_batch;
  std::string input_entry = "batch";
  /// Exactly three layers: two spatial layers, then the dense layer. Empty
  /// selects the first conv, second conv and first dense layer, each taken
  /// after a directly following relu.
  std::vector<std::string> layers;
  std::size_t pca_components = 32;
  bool center_pca = true;
  bool replicate_paper_truncation = false;
  /// Compare PCA-reduced features (true) or the raw pooled features.
  bool compare_reduced = true;
  std::size_t mi_bins = kDefaultBins;
  std::size_t mi_top_k = 10;
  FeatureMapMode mi_feature_maps = FeatureMapMode::pooled;
  IgConfig ig;
  std::filesystem::path output_dir = "qixai-report";
  VarianceSelection variance_mode = VarianceSelection::both;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Relative paths in the document resolve against base_dir.
RunConfig parse_run_config(std::string_view document,
                           const std::filesystem::path& base_dir = {});
RunConfig read_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& config);

/// Throws UsageError on values outside the operation preconditions.
void validate(const RunConfig& config);

struct LayerPairReport {
  SimilaritySummary cosine;
  double mean_inner_product = 0.0;
  std::string heatmap_image;
  friend bool operator==(const LayerPairReport&, const LayerPairReport&) = default;
};

struct LayerMiReport {
  std::string layer_a;
  std::string layer_b;
  std::size_t bins = 0;
  double mi_nats = 0.0;
  friend bool operator==(const LayerMiReport&, const LayerMiReport&) = default;
};

struct VarianceTable {
  std::string layer;
  VarianceMode mode = VarianceMode::variance_ratio;
  bool centered = true;
  std::vector<double> singular_values;
  ExplainedVariance values;
  friend bool operator==(const VarianceTable&, const VarianceTable&) = default;
};

struct SpectrumReport {
  std::string layer;
  std::vector<double> singular_values;
  std::vector<double> cumulative;
  std::string csv;
  friend bool operator==(const SpectrumReport&, const SpectrumReport&) = default;
};

struct SampleAttribution {
  std::size_t sample = 0;
  double f_input = 0.0;
  double f_baseline = 0.0;
  double completeness_gap = 0.0;
  AttributionSummary summary;
  std::string attributions_entry;
  std::string heatmap_entry;
  std::string heatmap_image;
  friend bool operator==(const SampleAttribution&, const SampleAttribution&) = default;
};

struct AttributionReport {
  std::string target;  // "logit" or "output"
  std::string baseline;
  std::size_t steps = 0;
  std::size_t sub_batch = 0;
  std::size_t output_index = 0;
  std::vector<SampleAttribution> samples;
  friend bool operator==(const AttributionReport&, const AttributionReport&) = default;
};

/// Everything one analysis run produces. Matrices and tensors live in
/// `artifacts`; the scalar sections reference them by entry name.
struct AnalysisReport {
  std::string toolkit_version;
  RunConfig config;
  std::vector<std::string> layers;  // resolved capture names
  std::size_t n_samples = 0;
  std::vector<LayerPairReport> similarity;
  LayerMiReport layer_mi;
  std::vector<MiPair> top_mi_pairs;
  std::vector<VarianceTable> explained_variance;
  SpectrumReport spectrum;
  std::optional<AttributionReport> attribution;
  TensorArchive artifacts;
  friend bool operator==(const AnalysisReport&, const AnalysisReport&) = default;
};

std::string_view toolkit_version() noexcept;

/// Layers the pipeline analyzes when the config leaves them unset.
std::vector<std::string> default_analysis_layers(const ModelSpec& spec);

/// Runs every analysis stage in order. Any failure is rethrown as a
/// StageError naming the stage.
AnalysisReport run_analysis(const RunConfig& config);

/// Same, with the model and input batch supplied in memory.
AnalysisReport run_analysis(const RunConfig& config, const Model& model,
                            const TensorArchive& inputs);

}  // namespace qixai
