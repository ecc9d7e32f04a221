// SPDX-License-Identifier: Apache-2.0
#include "qixai/report.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qixai/decomp.hpp"
#include "qixai/error.hpp"
#include "qixai/image.hpp"

namespace qixai {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

json config_echo(const RunConfig& config) {
  json doc = json::parse(run_config_to_json(config));
  doc.erase("output_dir");
  return doc;
}

json summary_json(const AttributionSummary& s) {
  json top = json::array();
  for (const auto& loc : s.top_locations) top.push_back({{"index", loc.index}, {"value", loc.value}});
  return {{"mean", s.mean},
          {"max_positive", s.max_positive},
          {"min_negative", s.min_negative},
          {"top_locations", std::move(top)}};
}

json map_ref(const FeatureMapRef& r) { return {{"layer", r.layer}, {"channel", r.channel}}; }

FeatureMapRef parse_map_ref(const json& j) {
  return {j.at("layer").get<std::string>(), j.at("channel").get<std::size_t>()};
}

VarianceMode parse_variance_mode(const std::string& text) {
  if (text == "variance_ratio") return VarianceMode::variance_ratio;
  if (text == "singular_mass") return VarianceMode::singular_mass;
  throw DataError("unknown explained-variance mode '" + text + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string format_double(double v) {
  char buffer[32];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), v);
  return std::string(buffer, end);
}

std::string spectrum_csv(const SpectrumReport& s) {
  std::string out = "component,singular_value,cumulative_singular_mass\n";
  for (std::size_t i = 0; i < s.singular_values.size(); ++i) {
    out += std::to_string(i + 1) + "," + format_double(s.singular_values[i]) + "," +
           format_double(s.cumulative[i]) + "\n";
  }
  return out;
}

// Removes everything it tracked unless release() was called.
class CreatedFiles {
 public:
  ~CreatedFiles() {
    if (released_) return;
    std::error_code ec;
    for (auto it = paths_.rbegin(); it != paths_.rend(); ++it) fs::remove(*it, ec);
  }
  void track(fs::path p) { paths_.push_back(std::move(p)); }
  void release() { released_ = true; }

 private:
  std::vector<fs::path> paths_;
  bool released_ = false;
};

void make_dirs(const fs::path& dir, CreatedFiles& created) {
  std::vector<fs::path> missing;
  for (fs::path p = dir; !p.empty() && !fs::exists(p); p = p.parent_path()) {
    missing.push_back(p);
    if (p == p.parent_path()) break;
  }
  for (auto it = missing.rbegin(); it != missing.rend(); ++it) {
    std::error_code ec;
    fs::create_directory(*it, ec);
    if (ec) throw IoError("cannot create directory '" + it->string() + "': " + ec.message());
    created.track(*it);
  }
  if (!fs::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
}

class Auditor {
 public:
  void scalar(const std::string& what, double reported, double recomputed) {
    ++result_.checked;
    if (std::bit_cast<std::uint64_t>(reported) != std::bit_cast<std::uint64_t>(recomputed)) {
      result_.mismatches.push_back(what + ": report " + format_double(reported) +
                                   " vs recomputed " + format_double(recomputed));
    }
  }
  void values(const std::string& what, const std::vector<double>& reported,
              const std::vector<double>& recomputed) {
    if (reported.size() != recomputed.size()) {
      ++result_.checked;
      result_.mismatches.push_back(what + ": length " + std::to_string(reported.size()) +
                                   " vs recomputed " + std::to_string(recomputed.size()));
      return;
    }
    for (std::size_t i = 0; i < reported.size(); ++i) {
      scalar(what + "[" + std::to_string(i) + "]", reported[i], recomputed[i]);
    }
  }
  void tensor(const std::string& what, const Tensor& stored, const Tensor& recomputed) {
    ++result_.checked;
    if (!bitwise_equal(stored, recomputed)) result_.mismatches.push_back(what + ": artifact differs");
  }
  void check(const std::string& what, bool ok) {
    ++result_.checked;
    if (!ok) result_.mismatches.push_back(what);
  }
  void summary(const std::string& what, const AttributionSummary& reported,
               const AttributionSummary& recomputed) {
    scalar(what + ".mean", reported.mean, recomputed.mean);
    scalar(what + ".max_positive", reported.max_positive, recomputed.max_positive);
    scalar(what + ".min_negative", reported.min_negative, recomputed.min_negative);
    check(what + ".top_locations differ", reported.top_locations == recomputed.top_locations);
  }
  AuditResult take() { return std::move(result_); }

 private:
  AuditResult result_;
};

}  // namespace

std::string report_to_json(const AnalysisReport& r) {
  json doc;
  doc["toolkit"] = {{"name", "qixai"}, {"version", r.toolkit_version}};
  doc["config"] = config_echo(r.config);
  doc["samples"] = r.n_samples;
  doc["layers"] = r.layers;

  json pairs = json::array();
  for (const LayerPairReport& p : r.similarity) {
    const SimilaritySummary& c = p.cosine;
    pairs.push_back({{"layers", {c.layer_a, c.layer_b}},
                     {"cosine",
                      {{"matrix_mean", c.matrix_mean},
                       {"diagonal_mean", c.diagonal_mean ? json(*c.diagonal_mean) : json(nullptr)},
                       {"min", c.min},
                       {"max", c.max}}},
                     {"zero_norm_rows", {{"a", c.zero_rows_a}, {"b", c.zero_rows_b}}},
                     {"mean_inner_product", p.mean_inner_product},
                     {"matrix_entry", c.matrix_entry},
                     {"heatmap_image", p.heatmap_image}});
  }
  doc["similarity"] = {{"measure", "cosine"},
                       {"space", r.config.compare_reduced ? "pca" : "pooled"},
                       {"pairs", std::move(pairs)}};

  json top = json::array();
  for (const MiPair& p : r.top_mi_pairs) {
    top.push_back({{"map_a", map_ref(p.map_a)}, {"map_b", map_ref(p.map_b)}, {"mi", p.mi_nats}});
  }
  doc["mutual_information"] = {
      {"units", "nats"},
      {"bins", r.layer_mi.bins},
      {"feature_maps", std::string(to_string(r.config.mi_feature_maps))},
      {"layer_mi", {{"layers", {r.layer_mi.layer_a, r.layer_mi.layer_b}}, {"value", r.layer_mi.mi_nats}}},
      {"top_pairs", std::move(top)}};

  json tables = json::array();
  for (const VarianceTable& t : r.explained_variance) {
    tables.push_back({{"layer", t.layer},
                      {"mode", std::string(to_string(t.mode))},
                      {"centered", t.centered},
                      {"singular_values", t.singular_values},
                      {"ratios", t.values.ratios},
                      {"cumulative", t.values.cumulative}});
  }
  doc["explained_variance"] = std::move(tables);

  doc["spectrum"] = {{"layer", r.spectrum.layer},
                     {"centered", false},
                     {"singular_values", r.spectrum.singular_values},
                     {"cumulative_singular_mass", r.spectrum.cumulative},
                     {"csv", r.spectrum.csv}};

  if (r.attribution) {
    const AttributionReport& a = *r.attribution;
    json samples = json::array();
    for (const SampleAttribution& s : a.samples) {
      samples.push_back({{"sample", s.sample},
                         {"f_input", s.f_input},
                         {"f_baseline", s.f_baseline},
                         {"completeness_gap", s.completeness_gap},
                         {"summary", summary_json(s.summary)},
                         {"attributions_entry", s.attributions_entry},
                         {"heatmap_entry", s.heatmap_entry},
                         {"heatmap_image", s.heatmap_image}});
    }
    doc["attribution"] = {{"method", "integrated_gradients"},
                          {"rule", "midpoint"},
                          {"target", a.target},
                          {"baseline", a.baseline},
                          {"steps", a.steps},
                          {"sub_batch", a.sub_batch},
                          {"output_index", a.output_index},
                          {"samples", std::move(samples)}};
  }

  json entries = json::array();
  for (const auto& [name, tensor] : r.artifacts.entries()) {
    entries.push_back({{"name", name}, {"shape", tensor.shape()}});
  }
  doc["artifacts"] = {{"archive", kArtifactsFile}, {"entries", std::move(entries)}};
  return doc.dump(2) + "\n";
}

AnalysisReport report_from_json(std::string_view document, TensorArchive artifacts) {
  try {
    const json doc = json::parse(document);
    AnalysisReport r;
    r.toolkit_version = doc.at("toolkit").at("version").get<std::string>();
    r.config = parse_run_config(doc.at("config").dump());
    r.config.output_dir.clear();
    r.n_samples = doc.at("samples").get<std::size_t>();
    r.layers = doc.at("layers").get<std::vector<std::string>>();

    for (const json& p : doc.at("similarity").at("pairs")) {
      LayerPairReport pair;
      const json& c = p.at("cosine");
      pair.cosine.layer_a = p.at("layers").at(0).get<std::string>();
      pair.cosine.layer_b = p.at("layers").at(1).get<std::string>();
      pair.cosine.matrix_mean = c.at("matrix_mean").get<double>();
      if (!c.at("diagonal_mean").is_null()) pair.cosine.diagonal_mean = c.at("diagonal_mean").get<double>();
      pair.cosine.min = c.at("min").get<double>();
      pair.cosine.max = c.at("max").get<double>();
      pair.cosine.zero_rows_a = p.at("zero_norm_rows").at("a").get<std::size_t>();
      pair.cosine.zero_rows_b = p.at("zero_norm_rows").at("b").get<std::size_t>();
      pair.cosine.matrix_entry = p.at("matrix_entry").get<std::string>();
      pair.mean_inner_product = p.at("mean_inner_product").get<double>();
      pair.heatmap_image = p.at("heatmap_image").get<std::string>();
      r.similarity.push_back(std::move(pair));
    }

    const json& mi = doc.at("mutual_information");
    r.layer_mi.layer_a = mi.at("layer_mi").at("layers").at(0).get<std::string>();
    r.layer_mi.layer_b = mi.at("layer_mi").at("layers").at(1).get<std::string>();
    r.layer_mi.bins = mi.at("bins").get<std::size_t>();
    r.layer_mi.mi_nats = mi.at("layer_mi").at("value").get<double>();
    for (const json& p : mi.at("top_pairs")) {
      r.top_mi_pairs.push_back(
          {parse_map_ref(p.at("map_a")), parse_map_ref(p.at("map_b")), p.at("mi").get<double>()});
    }

    for (const json& t : doc.at("explained_variance")) {
      r.explained_variance.push_back(
          VarianceTable{t.at("layer").get<std::string>(),
                        parse_variance_mode(t.at("mode").get<std::string>()),
                        t.at("centered").get<bool>(),
                        t.at("singular_values").get<std::vector<double>>(),
                        {t.at("ratios").get<std::vector<double>>(),
                         t.at("cumulative").get<std::vector<double>>()}});
    }

    const json& s = doc.at("spectrum");
    r.spectrum = SpectrumReport{s.at("layer").get<std::string>(),
                                s.at("singular_values").get<std::vector<double>>(),
                                s.at("cumulative_singular_mass").get<std::vector<double>>(),
                                s.at("csv").get<std::string>()};

    if (doc.contains("attribution")) {
      const json& a = doc.at("attribution");
      AttributionReport ig;
      ig.target = a.at("target").get<std::string>();
      ig.baseline = a.at("baseline").get<std::string>();
      ig.steps = a.at("steps").get<std::size_t>();
      ig.sub_batch = a.at("sub_batch").get<std::size_t>();
      ig.output_index = a.at("output_index").get<std::size_t>();
      for (const json& j : a.at("samples")) {
        SampleAttribution sa;
        sa.sample = j.at("sample").get<std::size_t>();
        sa.f_input = j.at("f_input").get<double>();
        sa.f_baseline = j.at("f_baseline").get<double>();
        sa.completeness_gap = j.at("completeness_gap").get<double>();
        const json& sum = j.at("summary");
        sa.summary.mean = sum.at("mean").get<double>();
        sa.summary.max_positive = sum.at("max_positive").get<double>();
        sa.summary.min_negative = sum.at("min_negative").get<double>();
        for (const json& loc : sum.at("top_locations")) {
          sa.summary.top_locations.push_back(
              {loc.at("index").get<std::vector<std::size_t>>(), loc.at("value").get<double>()});
        }
        sa.attributions_entry = j.at("attributions_entry").get<std::string>();
        sa.heatmap_entry = j.at("heatmap_entry").get<std::string>();
        sa.heatmap_image = j.at("heatmap_image").get<std::string>();
        ig.samples.push_back(std::move(sa));
      }
      r.attribution = std::move(ig);
    }

    for (const json& e : doc.at("artifacts").at("entries")) {
      const auto name = e.at("name").get<std::string>();
      if (!artifacts.contains(name)) throw DataError("report references missing artifact '" + name + "'");
    }
    r.artifacts = std::move(artifacts);
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report document: ") + e.what());
  }
}

void write_report(const AnalysisReport& report, const fs::path& dir) {
  CreatedFiles created;
  make_dirs(dir, created);

  const fs::path doc_path = dir / kReportFile;
  created.track(doc_path);
  write_text(doc_path, report_to_json(report));

  const fs::path archive_path = dir / kArtifactsFile;
  created.track(archive_path);
  write_archive(report.artifacts, archive_path);

  const fs::path csv_path = dir / report.spectrum.csv;
  created.track(csv_path);
  write_text(csv_path, spectrum_csv(report.spectrum));

  make_dirs(dir / kHeatmapDir, created);
  for (const LayerPairReport& p : report.similarity) {
    const fs::path image = dir / p.heatmap_image;
    created.track(image);
    write_png(render_matrix(report.artifacts.at(p.cosine.matrix_entry), Colormap::diverging), image);
  }
  if (report.attribution) {
    for (const SampleAttribution& s : report.attribution->samples) {
      if (s.heatmap_entry.empty()) continue;
      const fs::path image = dir / s.heatmap_image;
      created.track(image);
      write_png(render_matrix(report.artifacts.at(s.heatmap_entry), Colormap::grayscale), image);
    }
  }
  created.release();
}

AnalysisReport read_report(const fs::path& dir) {
  std::ifstream in(dir / kReportFile, std::ios::binary);
  if (!in) throw IoError("cannot open '" + (dir / kReportFile).string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return report_from_json(buffer.str(), read_archive(dir / kArtifactsFile));
}

AuditResult audit_report(const AnalysisReport& r) {
  Auditor audit;
  const RunConfig& config = r.config;
  const TensorArchive& artifacts = r.artifacts;
  if (r.layers.size() != 3) {
    audit.check("report must list three analyzed layers", false);
    return audit.take();
  }

  std::vector<Tensor> features;
  std::vector<Tensor> pca_inputs;
  std::vector<Tensor> compared;
  for (const std::string& name : r.layers) {
    features.push_back(artifacts.at("features." + name));
    const Tensor& f = features.back();
    pca_inputs.push_back(config.replicate_paper_truncation
                             ? truncate_channels(f, config.pca_components)
                             : f);
    Tensor reduced = transform_pca(
        fit_pca(pca_inputs.back(), config.pca_components, config.center_pca), pca_inputs.back());
    audit.tensor("reduced." + name, artifacts.at("reduced." + name), reduced);
    compared.push_back(config.compare_reduced ? std::move(reduced) : pca_inputs.back());
  }
  audit.check("sample count", features[0].rows() == r.n_samples);

  const std::pair<std::size_t, std::size_t> pair_index[] = {{0, 1}, {0, 2}, {1, 2}};
  audit.check("three similarity pairs", r.similarity.size() == 3);
  for (std::size_t k = 0; k < r.similarity.size() && k < 3; ++k) {
    const auto [a, b] = pair_index[k];
    const LayerPairReport& p = r.similarity[k];
    const std::string label = "similarity[" + p.cosine.layer_a + "," + p.cosine.layer_b + "]";
    LayerSimilarity sim = layer_similarity_summary(compared[a], compared[b]);
    audit.tensor(label + ".matrix", artifacts.at(p.cosine.matrix_entry), sim.matrix);
    const SimilaritySummary from_artifact = summarize_similarity(artifacts.at(p.cosine.matrix_entry));
    audit.scalar(label + ".matrix_mean", p.cosine.matrix_mean, from_artifact.matrix_mean);
    audit.scalar(label + ".min", p.cosine.min, from_artifact.min);
    audit.scalar(label + ".max", p.cosine.max, from_artifact.max);
    audit.check(label + ".diagonal_mean presence",
                p.cosine.diagonal_mean.has_value() == from_artifact.diagonal_mean.has_value());
    if (p.cosine.diagonal_mean && from_artifact.diagonal_mean) {
      audit.scalar(label + ".diagonal_mean", *p.cosine.diagonal_mean, *from_artifact.diagonal_mean);
    }
    audit.check(label + ".zero_norm_rows",
                p.cosine.zero_rows_a == sim.summary.zero_rows_a &&
                    p.cosine.zero_rows_b == sim.summary.zero_rows_b);
    audit.scalar(label + ".mean_inner_product", p.mean_inner_product,
                 mean_inner_product(compared[a], compared[b]));
  }

  const double mi = config.replicate_paper_truncation
                        ? layer_mi(pca_inputs[0], pca_inputs[1], config.mi_bins)
                        : layer_mi(features[0], features[1], config.mi_bins);
  audit.scalar("layer_mi", r.layer_mi.mi_nats, mi);
  PairwiseMiOptions options{config.mi_bins, config.mi_top_k, config.mi_feature_maps, r.layers[0],
                            r.layers[1]};
  const std::vector<MiPair> pairs =
      config.mi_feature_maps == FeatureMapMode::spatial
          ? pairwise_feature_map_mi(artifacts.at("feature_maps." + r.layers[0]),
                                    artifacts.at("feature_maps." + r.layers[1]), options)
          : pairwise_pooled_mi(features[0], features[1], options);
  audit.check("top MI pair count", pairs.size() == r.top_mi_pairs.size());
  for (std::size_t i = 0; i < pairs.size() && i < r.top_mi_pairs.size(); ++i) {
    const std::string label = "top_mi_pairs[" + std::to_string(i) + "]";
    audit.check(label + " identity", pairs[i].map_a == r.top_mi_pairs[i].map_a &&
                                         pairs[i].map_b == r.top_mi_pairs[i].map_b);
    audit.scalar(label + ".mi", r.top_mi_pairs[i].mi_nats, pairs[i].mi_nats);
  }

  const DenseSpectrum spectrum = dense_layer_spectrum(features[2]);
  audit.values("spectrum.singular_values", r.spectrum.singular_values, spectrum.svd.s);
  audit.values("spectrum.cumulative", r.spectrum.cumulative, spectrum.cumulative);

  const Tensor& dense = features[2];
  const PcaModel pca = fit_pca(dense, std::min(dense.rows(), dense.cols()), config.center_pca);
  for (const VarianceTable& t : r.explained_variance) {
    const std::string label = "explained_variance[" + std::string(to_string(t.mode)) + "]";
    const ExplainedVariance ev = explained_variance(pca.singular_values, t.mode);
    audit.values(label + ".singular_values", t.singular_values, pca.singular_values);
    audit.values(label + ".ratios", t.values.ratios, ev.ratios);
    audit.values(label + ".cumulative", t.values.cumulative, ev.cumulative);
  }

  if (r.attribution) {
    // Endpoint values need the model; recheck them when the inputs are still on disk.
    std::optional<Model> target;
    std::optional<TensorArchive> inputs;
    std::error_code ec;
    if (fs::exists(config.model_spec, ec) && fs::exists(config.weights, ec) &&
        fs::exists(config.input_batch, ec)) {
      Model model = load_model(read_model_spec(config.model_spec), read_archive(config.weights));
      target = r.attribution->target == "logit" ? model.logit() : model;
      inputs = read_archive(config.input_batch);
    }
    for (const SampleAttribution& s : r.attribution->samples) {
      const std::string label = "attribution[sample " + std::to_string(s.sample) + "]";
      const Tensor& attributions = artifacts.at(s.attributions_entry);
      AttributionMap map{attributions, "", "", r.attribution->steps, r.attribution->output_index,
                         0.0, s.f_input, s.f_baseline};
      audit.scalar(label + ".completeness_gap", s.completeness_gap, completeness_gap(map));
      audit.summary(label + ".summary", s.summary,
                    attribution_summary(attributions, s.summary.top_locations.size()));
      if (!s.heatmap_entry.empty()) {
        audit.tensor(label + ".heatmap", artifacts.at(s.heatmap_entry),
                     attribution_to_heatmap(attributions));
      }
      if (target && inputs) {
        const Tensor& batch = inputs->at(config.input_entry);
        const Tensor sample = batch.slice_leading(s.sample, 1);
        const Tensor baseline = r.attribution->baseline == "zeros"
                                    ? Tensor(sample.shape())
                                    : reshape(inputs->at(r.attribution->baseline), sample.shape());
        audit.scalar(label + ".f_input", s.f_input,
                     target->predict(sample)[r.attribution->output_index]);
        audit.scalar(label + ".f_baseline", s.f_baseline,
                     target->predict(baseline)[r.attribution->output_index]);
      }
    }
  }
  return audit.take();
}

}  // namespace qixai
