// SPDX-License-Identifier: Apache-2.0
#include "qixai/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qixai/decomp.hpp"
#include "qixai/error.hpp"
#include "qixai/report.hpp"

#ifndef QIXAI_VERSION
#define QIXAI_VERSION "0.0.0"
#endif

namespace qixai {

namespace {

using json = nlohmann::ordered_json;

template <typename Fn>
auto run_stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  }
}

std::size_t get_count(const json& doc, const char* key, std::size_t fallback) {
  if (!doc.contains(key)) return fallback;
  const json& v = doc.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw UsageError(std::string("config '") + key + "' must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

bool get_flag(const json& doc, const char* key, bool fallback) {
  if (!doc.contains(key)) return fallback;
  if (!doc.at(key).is_boolean()) throw UsageError(std::string("config '") + key + "' must be a boolean");
  return doc.at(key).get<bool>();
}

std::string get_string(const json& doc, const char* key, const std::string& fallback) {
  if (!doc.contains(key)) return fallback;
  if (!doc.at(key).is_string()) throw UsageError(std::string("config '") + key + "' must be a string");
  return doc.at(key).get<std::string>();
}

void reject_unknown(const json& doc, std::initializer_list<std::string_view> known,
                    const char* where) {
  for (const auto& item : doc.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
      throw UsageError(std::string("unknown key '") + item.key() + "' in " + where);
    }
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

Tensor as_features(const Tensor& activation, const std::string& layer) {
  if (activation.rank() == 4) return global_average_pool(activation);
  if (activation.rank() == 2) return activation;
  throw DataError("layer '" + layer + "' output has shape " + shape_to_string(activation.shape()) +
                  "; expected NHWC or N x F");
}

Tensor select_baseline(const IgConfig& ig, const TensorArchive& inputs, const Shape& sample) {
  if (ig.baseline == "zeros") return Tensor(sample);
  const Tensor& b = inputs.at(ig.baseline);
  if (b.shape() == sample) return b;
  if (shape_product(b.shape()) == shape_product(sample) &&
      std::equal(b.shape().rbegin(), b.shape().rend(), sample.rbegin(),
                 sample.rbegin() + static_cast<std::ptrdiff_t>(b.shape().size()))) {
    return reshape(b, sample);
  }
  throw DataError("baseline entry '" + ig.baseline + "' has shape " + shape_to_string(b.shape()) +
                  ", expected " + shape_to_string(sample));
}

}  // namespace

std::string_view to_string(VarianceSelection selection) noexcept {
  switch (selection) {
    case VarianceSelection::both:
      return "both";
    case VarianceSelection::variance_ratio:
      return "variance_ratio";
    case VarianceSelection::singular_mass:
      return "singular_mass";
  }
  return "both";
}

std::string_view toolkit_version() noexcept { return QIXAI_VERSION; }

RunConfig parse_run_config(std::string_view document, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("run config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw UsageError("run config must be a JSON object");
  reject_unknown(doc,
                 {"model_spec", "weights", "input_batch", "input_entry", "layers",
                  "pca_components", "center_pca", "replicate_paper_truncation", "compare_reduced",
                  "mi_bins", "mi_top_k", "mi_feature_maps", "ig", "output_dir", "variance_mode"},
                 "run config");

  RunConfig c;
  for (const char* key : {"model_spec", "weights", "input_batch"}) {
    if (get_string(doc, key, "").empty()) throw UsageError(std::string("run config needs '") + key + "'");
  }
  c.model_spec = resolve(base_dir, doc.at("model_spec").get<std::string>());
  c.weights = resolve(base_dir, doc.at("weights").get<std::string>());
  c.input_batch = resolve(base_dir, doc.at("input_batch").get<std::string>());
  c.input_entry = get_string(doc, "input_entry", c.input_entry);
  if (doc.contains("layers")) {
    if (!doc.at("layers").is_array()) throw UsageError("config 'layers' must be an array of names");
    for (const json& l : doc.at("layers")) {
      if (!l.is_string()) throw UsageError("config 'layers' must be an array of names");
      c.layers.push_back(l.get<std::string>());
    }
  }
  c.pca_components = get_count(doc, "pca_components", c.pca_components);
  c.center_pca = get_flag(doc, "center_pca", c.center_pca);
  c.replicate_paper_truncation =
      get_flag(doc, "replicate_paper_truncation", c.replicate_paper_truncation);
  c.compare_reduced = get_flag(doc, "compare_reduced", c.compare_reduced);
  c.mi_bins = get_count(doc, "mi_bins", c.mi_bins);
  c.mi_top_k = get_count(doc, "mi_top_k", c.mi_top_k);
  const std::string maps = get_string(doc, "mi_feature_maps", "pooled");
  if (maps == "pooled") {
    c.mi_feature_maps = FeatureMapMode::pooled;
  } else if (maps == "spatial") {
    c.mi_feature_maps = FeatureMapMode::spatial;
  } else {
    throw UsageError("config 'mi_feature_maps' must be \"pooled\" or \"spatial\"");
  }
  const std::string variance = get_string(doc, "variance_mode", "both");
  if (variance == "both") {
    c.variance_mode = VarianceSelection::both;
  } else if (variance == "variance_ratio") {
    c.variance_mode = VarianceSelection::variance_ratio;
  } else if (variance == "singular_mass") {
    c.variance_mode = VarianceSelection::singular_mass;
  } else {
    throw UsageError("config 'variance_mode' must be both, variance_ratio or singular_mass");
  }
  c.output_dir = resolve(base_dir, get_string(doc, "output_dir", c.output_dir.string()));

  if (doc.contains("ig")) {
    const json& ig = doc.at("ig");
    if (!ig.is_object()) throw UsageError("config 'ig' must be an object");
    reject_unknown(ig, {"enabled", "steps", "sub_batch", "baseline", "samples", "output_index", "top_k"},
                   "config 'ig'");
    c.ig.enabled = get_flag(ig, "enabled", c.ig.enabled);
    c.ig.steps = get_count(ig, "steps", c.ig.steps);
    c.ig.sub_batch = get_count(ig, "sub_batch", c.ig.sub_batch);
    c.ig.baseline = get_string(ig, "baseline", c.ig.baseline);
    c.ig.output_index = get_count(ig, "output_index", c.ig.output_index);
    c.ig.top_k = get_count(ig, "top_k", c.ig.top_k);
    if (ig.contains("samples")) {
      if (!ig.at("samples").is_array()) throw UsageError("config 'ig.samples' must be an array");
      c.ig.samples.clear();
      for (const json& s : ig.at("samples")) {
        if (!s.is_number_integer() || s.get<long long>() < 0) {
          throw UsageError("config 'ig.samples' entries must be nonnegative integers");
        }
        c.ig.samples.push_back(s.get<std::size_t>());
      }
    }
  }
  validate(c);
  return c;
}

RunConfig read_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open run config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str(), path.parent_path());
}

std::string run_config_to_json(const RunConfig& c) {
  json doc;
  doc["model_spec"] = c.model_spec.generic_string();
  doc["weights"] = c.weights.generic_string();
  doc["input_batch"] = c.input_batch.generic_string();
  doc["input_entry"] = c.input_entry;
  doc["layers"] = c.layers;
  doc["pca_components"] = c.pca_components;
  doc["center_pca"] = c.center_pca;
  doc["replicate_paper_truncation"] = c.replicate_paper_truncation;
  doc["compare_reduced"] = c.compare_reduced;
  doc["mi_bins"] = c.mi_bins;
  doc["mi_top_k"] = c.mi_top_k;
  doc["mi_feature_maps"] = std::string(to_string(c.mi_feature_maps));
  doc["variance_mode"] = std::string(to_string(c.variance_mode));
  doc["output_dir"] = c.output_dir.generic_string();
  doc["ig"] = {{"enabled", c.ig.enabled},       {"steps", c.ig.steps},
               {"sub_batch", c.ig.sub_batch},   {"baseline", c.ig.baseline},
               {"samples", c.ig.samples},       {"output_index", c.ig.output_index},
               {"top_k", c.ig.top_k}};
  return doc.dump(2) + "\n";
}

void validate(const RunConfig& c) {
  if (c.model_spec.empty() || c.weights.empty() || c.input_batch.empty()) {
    throw UsageError("model_spec, weights and input_batch paths must be set");
  }
  if (c.input_entry.empty()) throw UsageError("input_entry must be nonempty");
  if (!c.layers.empty() && c.layers.size() != 3) {
    throw UsageError("config 'layers' needs exactly three names (two spatial layers, then dense)");
  }
  if (c.pca_components < 1) throw UsageError("pca_components must be at least 1");
  if (c.mi_bins < 2) throw UsageError("mi_bins must be at least 2");
  if (c.mi_top_k < 1) throw UsageError("mi_top_k must be at least 1");
  if (c.ig.enabled) {
    if (c.ig.steps < 1) throw UsageError("ig.steps must be at least 1");
    if (c.ig.sub_batch < 1) throw UsageError("ig.sub_batch must be at least 1");
    if (c.ig.top_k < 1) throw UsageError("ig.top_k must be at least 1");
    if (c.ig.baseline.empty()) throw UsageError("ig.baseline must be \"zeros\" or an entry name");
  }
}

std::vector<std::string> default_analysis_layers(const ModelSpec& spec) {
  const auto& layers = spec.layers;
  auto captured = [&](std::size_t i) {
    if (i + 1 < layers.size() && layers[i + 1].kind == LayerKind::relu) return layers[i + 1].name;
    return layers[i].name;
  };
  std::vector<std::string> convs;
  std::string dense;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::conv2d && convs.size() < 2) convs.push_back(captured(i));
    if (layers[i].kind == LayerKind::dense && dense.empty()) dense = captured(i);
  }
  if (convs.size() < 2 || dense.empty()) {
    throw DataError("model needs two conv2d layers and a dense layer for the default layer "
                    "selection; set 'layers' in the config");
  }
  return {convs[0], convs[1], dense};
}

AnalysisReport run_analysis(const RunConfig& config) {
  const Model model = run_stage("load", [&] {
    return load_model(read_model_spec(config.model_spec), read_archive(config.weights));
  });
  const TensorArchive inputs = run_stage("load", [&] { return read_archive(config.input_batch); });
  return run_analysis(config, model, inputs);
}

AnalysisReport run_analysis(const RunConfig& config, const Model& model,
                            const TensorArchive& inputs) {
  run_stage("config", [&] {
    validate(config);
    return 0;
  });

  AnalysisReport report;
  report.toolkit_version = std::string(toolkit_version());
  report.config = config;
  report.config.output_dir.clear();

  // forward pass with capture
  const Tensor& batch = run_stage("forward", [&]() -> const Tensor& { return inputs.at(config.input_entry); });
  const ForwardResult forward = run_stage("forward", [&] {
    report.layers = config.layers.empty() ? default_analysis_layers(model.spec()) : config.layers;
    for (const std::string& name : report.layers) {
      if (!is_valid_entry_name(name)) {
        throw DataError("layer name '" + name + "' cannot be used as an artifact entry name");
      }
    }
    ForwardResult r = model.forward(batch);
    for (const std::string& name : report.layers) r.activations.at(name);
    return r;
  });
  report.n_samples = batch.shape()[0];
  const auto& names = report.layers;
  TensorArchive& artifacts = report.artifacts;

  std::vector<Tensor> features = run_stage("pool", [&] {
    std::vector<Tensor> out;
    for (const std::string& name : names) {
      out.push_back(as_features(forward.activations.at(name), name));
      artifacts.add("features." + name, out.back());
    }
    return out;
  });

  // Optional channel slice, then independent PCA per layer.
  const std::vector<Tensor> pca_inputs = run_stage("reduce", [&] {
    std::vector<Tensor> out;
    for (std::size_t l = 0; l < names.size(); ++l) {
      const Tensor& f = features[l];
      if (f.rows() < 2) {
        throw DataError("PCA requires n >= 2 samples (got " + std::to_string(f.rows()) + ")");
      }
      if (f.cols() < config.pca_components) {
        throw DataError("layer '" + names[l] + "' has " + std::to_string(f.cols()) +
                        " features, fewer than pca_components=" +
                        std::to_string(config.pca_components) + "; lower pca_components");
      }
      out.push_back(config.replicate_paper_truncation ? truncate_channels(f, config.pca_components)
                                                      : f);
    }
    return out;
  });
  const std::vector<Tensor> compared = run_stage("reduce", [&] {
    std::vector<Tensor> out;
    for (std::size_t l = 0; l < names.size(); ++l) {
      const PcaModel pca = fit_pca(pca_inputs[l], config.pca_components, config.center_pca);
      Tensor reduced = transform_pca(pca, pca_inputs[l]);
      artifacts.add("reduced." + names[l], reduced);
      out.push_back(config.compare_reduced ? std::move(reduced) : pca_inputs[l]);
    }
    return out;
  });

  run_stage("similarity", [&] {
    for (auto [a, b] : {std::pair<std::size_t, std::size_t>{0, 1}, {0, 2}, {1, 2}}) {
      LayerSimilarity sim = layer_similarity_summary(compared[a], compared[b]);
      LayerPairReport pair;
      pair.cosine = std::move(sim.summary);
      pair.cosine.layer_a = names[a];
      pair.cosine.layer_b = names[b];
      pair.cosine.matrix_entry = "similarity." + names[a] + "." + names[b];
      pair.mean_inner_product = mean_inner_product(compared[a], compared[b]);
      pair.heatmap_image = std::string(kHeatmapDir) + "/" + pair.cosine.matrix_entry + ".png";
      artifacts.add(pair.cosine.matrix_entry, std::move(sim.matrix));
      report.similarity.push_back(std::move(pair));
    }
    return 0;
  });

  run_stage("mutual_information", [&] {
    report.layer_mi.layer_a = names[0];
    report.layer_mi.layer_b = names[1];
    report.layer_mi.bins = config.mi_bins;
    report.layer_mi.mi_nats =
        config.replicate_paper_truncation
            ? layer_mi(pca_inputs[0], pca_inputs[1], config.mi_bins)
            : layer_mi(features[0], features[1], config.mi_bins);
    PairwiseMiOptions options{config.mi_bins, config.mi_top_k, config.mi_feature_maps, names[0],
                              names[1]};
    if (config.mi_feature_maps == FeatureMapMode::spatial) {
      const Tensor& a = forward.activations.at(names[0]);
      const Tensor& b = forward.activations.at(names[1]);
      report.top_mi_pairs = pairwise_feature_map_mi(a, b, options);
      artifacts.add("feature_maps." + names[0], a);
      artifacts.add("feature_maps." + names[1], b);
    } else {
      report.top_mi_pairs = pairwise_pooled_mi(features[0], features[1], options);
    }
    return 0;
  });

  run_stage("spectrum", [&] {
    DenseSpectrum spectrum = dense_layer_spectrum(features[2]);
    report.spectrum = SpectrumReport{names[2], spectrum.svd.s, std::move(spectrum.cumulative),
                                     "spectrum.csv"};
    return 0;
  });

  run_stage("explained_variance", [&] {
    const Tensor& dense = features[2];
    const PcaModel pca = fit_pca(dense, std::min(dense.rows(), dense.cols()), config.center_pca);
    std::vector<VarianceMode> modes;
    if (config.variance_mode != VarianceSelection::singular_mass) {
      modes.push_back(VarianceMode::variance_ratio);
    }
    if (config.variance_mode != VarianceSelection::variance_ratio) {
      modes.push_back(VarianceMode::singular_mass);
    }
    for (VarianceMode mode : modes) {
      report.explained_variance.push_back(VarianceTable{
          names[2], mode, config.center_pca, pca.singular_values,
          explained_variance(pca.singular_values, mode)});
    }
    return 0;
  });

  if (config.ig.enabled) {
    run_stage("attribution", [&] {
      const bool has_sigmoid = model.spec().layers.back().kind == LayerKind::sigmoid;
      const Model target = has_sigmoid ? model.logit() : model;
      Shape sample_shape = batch.shape();
      sample_shape[0] = 1;
      const Tensor baseline = select_baseline(config.ig, inputs, sample_shape);

      AttributionReport ig;
      ig.target = has_sigmoid ? "logit" : "output";
      ig.baseline = config.ig.baseline;
      ig.steps = config.ig.steps;
      ig.sub_batch = config.ig.sub_batch;
      ig.output_index = config.ig.output_index;
      for (std::size_t index : config.ig.samples) {
        if (index >= batch.shape()[0]) {
          throw DataError("ig sample index " + std::to_string(index) + " out of range for " +
                          std::to_string(batch.shape()[0]) + " samples");
        }
        AttributionMap map = integrated_gradients(
            target, batch.slice_leading(index, 1), baseline,
            IgOptions{config.ig.steps, config.ig.sub_batch, config.ig.output_index});
        const std::string prefix = "ig.sample" + std::to_string(index);
        SampleAttribution s;
        s.sample = index;
        s.f_input = map.f_input;
        s.f_baseline = map.f_baseline;
        s.completeness_gap = map.completeness_gap;
        s.summary = attribution_summary(map, config.ig.top_k);
        s.attributions_entry = prefix + ".attributions";
        std::optional<Tensor> heatmap;
        if (map.attributions.rank() == 4) heatmap = attribution_to_heatmap(map);
        artifacts.add(s.attributions_entry, std::move(map.attributions));
        if (heatmap) {
          s.heatmap_entry = prefix + ".heatmap";
          s.heatmap_image = std::string(kHeatmapDir) + "/" + prefix + ".png";
          artifacts.add(s.heatmap_entry, std::move(*heatmap));
        }
        ig.samples.push_back(std::move(s));
      }
      report.attribution = std::move(ig);
      return 0;
    });
  }
  return report;
}

}  // namespace qixai
