// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>

#include <CLI11.hpp>

#include "qixai/archive.hpp"
#include "qixai/attribution.hpp"
#include "qixai/decomp.hpp"
#include "qixai/error.hpp"
#include "qixai/image.hpp"
#include "qixai/infotheory.hpp"
#include "qixai/model.hpp"
#include "qixai/pipeline.hpp"
#include "qixai/reduce.hpp"
#include "qixai/report.hpp"
#include "qixai/similarity.hpp"

namespace qixai::cli {

namespace {

namespace fs = std::filesystem;

std::string num(double v) {
  char buffer[32];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), v);
  return std::string(buffer, end);
}

struct EntryRef {
  fs::path archive;
  std::string entry;
};

// "path/to/file.qixt:entry"; the split is at the last ':' so paths may contain one.
EntryRef parse_entry_ref(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw UsageError("expected ARCHIVE:ENTRY, got '" + text + "'");
  }
  return {text.substr(0, colon), text.substr(colon + 1)};
}

Tensor load_entry(const std::string& ref) {
  EntryRef r = parse_entry_ref(ref);
  return read_archive(r.archive).at(r.entry);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open '" + path.string() + "' for writing");
  file << text;
  if (!file.flush()) throw IoError("failed writing '" + path.string() + "'");
}

std::string index_string(const std::vector<std::size_t>& index) {
  std::string s = "(";
  for (std::size_t i = 0; i < index.size(); ++i) s += (i ? "," : "") + std::to_string(index[i]);
  return s + ")";
}

// ---- analyze --------------------------------------------------------------

struct AnalyzeArgs {
  std::string config;
  std::string output_dir;
  bool audit = false;
};

int analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err) {
  RunConfig config = read_run_config(args.config);
  if (!args.output_dir.empty()) config.output_dir = args.output_dir;
  AnalysisReport report = run_analysis(config);
  write_report(report, config.output_dir);

  out << "forward: " << report.n_samples << " samples, layers";
  for (const auto& l : report.layers) out << " " << l;
  out << "\n";
  out << "pool: " << report.layers.size() << " pooled feature matrices\n";
  out << "reduce: pca_components=" << config.pca_components
      << (config.center_pca ? " centered" : " uncentered") << "\n";
  for (const auto& p : report.similarity) {
    out << "similarity: " << p.cosine.layer_a << " vs " << p.cosine.layer_b
        << " cosine_mean=" << num(p.cosine.matrix_mean)
        << " mean_inner_product=" << num(p.mean_inner_product) << "\n";
  }
  out << "mutual_information: " << report.layer_mi.layer_a << " vs " << report.layer_mi.layer_b
      << " mi=" << num(report.layer_mi.mi_nats) << " nats, top " << report.top_mi_pairs.size()
      << " feature-map pairs\n";
  out << "spectrum: " << report.spectrum.layer << " " << report.spectrum.singular_values.size()
      << " singular values -> " << report.spectrum.csv << "\n";
  out << "explained_variance: " << report.explained_variance.size() << " tables\n";
  if (report.attribution) {
    for (const auto& s : report.attribution->samples) {
      out << "attribution: sample " << s.sample << " f_input=" << num(s.f_input)
          << " f_baseline=" << num(s.f_baseline) << " completeness_gap=" << num(s.completeness_gap)
          << "\n";
    }
  } else {
    out << "attribution: disabled\n";
  }
  out << "report: " << (config.output_dir / kReportFile).string() << "\n";

  if (args.audit) {
    const AuditResult audit = audit_report(read_report(config.output_dir));
    out << "audit: " << audit.checked << " checks, " << audit.mismatches.size()
        << " mismatches\n";
    for (const auto& m : audit.mismatches) err << "audit mismatch: " << m << "\n";
    if (!audit.ok()) return exit_code_for(ErrorKind::data);
  }
  return 0;
}

// ---- similarity -----------------------------------------------------------

struct SimilarityArgs {
  std::string a;
  std::string b;
  std::string out;
};

int similarity(const SimilarityArgs& args, std::ostream& out) {
  const Tensor a = load_entry(args.a);
  const Tensor b = load_entry(args.b);
  const LayerSimilarity sim = layer_similarity_summary(a, b);
  const SimilaritySummary& s = sim.summary;
  out << "matrix_mean " << num(s.matrix_mean) << "\n";
  if (s.diagonal_mean) out << "diagonal_mean " << num(*s.diagonal_mean) << "\n";
  out << "min " << num(s.min) << "\n";
  out << "max " << num(s.max) << "\n";
  out << "mean_inner_product " << num(mean_inner_product(a, b)) << "\n";
  out << "zero_norm_rows " << s.zero_rows_a << " " << s.zero_rows_b << "\n";
  if (!args.out.empty()) {
    TensorArchive archive;
    archive.add("similarity", sim.matrix);
    write_archive(archive, args.out);
  }
  return 0;
}

// ---- mi -------------------------------------------------------------------

struct MiArgs {
  std::string a;
  std::string b;
  std::size_t bins = kDefaultBins;
  std::size_t top_k = 10;
};

int mi(const MiArgs& args, std::ostream& out) {
  const Tensor a = load_entry(args.a);
  const Tensor b = load_entry(args.b);
  PairwiseMiOptions options;
  options.n_bins = args.bins;
  options.top_k = args.top_k;
  options.layer_a = parse_entry_ref(args.a).entry;
  options.layer_b = parse_entry_ref(args.b).entry;

  std::vector<MiPair> pairs;
  if (a.rank() == 4 && b.rank() == 4) {
    options.mode = FeatureMapMode::spatial;
    const Tensor pa = global_average_pool(a);
    const Tensor pb = global_average_pool(b);
    out << "layer_mi " << num(layer_mi(pa, pb, args.bins)) << "\n";
    pairs = pairwise_feature_map_mi(a, b, options);
  } else {
    out << "layer_mi " << num(layer_mi(a, b, args.bins)) << "\n";
    pairs = pairwise_pooled_mi(a, b, options);
  }
  out << "bins " << args.bins << "\n";
  for (const MiPair& p : pairs) {
    out << p.map_a.layer << "[" << p.map_a.channel << "] " << p.map_b.layer << "["
        << p.map_b.channel << "] " << num(p.mi_nats) << "\n";
  }
  return 0;
}

// ---- ig -------------------------------------------------------------------

struct IgArgs {
  std::string model;
  std::string weights;
  std::string input;
  std::size_t sample = 0;
  std::string baseline = "zeros";
  std::size_t steps = 100;
  std::size_t sub_batch = 10;
  std::size_t output_index = 0;
  std::string target = "auto";
  std::size_t top_k = 5;
  std::string out;
  std::string heatmap;
};

int ig(const IgArgs& args, std::ostream& out) {
  Model model = load_model(read_model_spec(args.model), read_archive(args.weights));
  const bool ends_in_sigmoid =
      !model.spec().layers.empty() && model.spec().layers.back().kind == LayerKind::sigmoid;
  if (args.target == "logit" || (args.target == "auto" && ends_in_sigmoid)) model = model.logit();

  const Tensor batch = load_entry(args.input);
  if (batch.rank() == 0 || args.sample >= batch.extent(0)) {
    throw UsageError("--sample " + std::to_string(args.sample) + " is outside the input batch");
  }
  const Tensor input = batch.slice_leading(args.sample, 1);
  const Tensor baseline = args.baseline == "zeros" ? Tensor(input.shape())
                                                   : reshape(load_entry(args.baseline), input.shape());

  IgOptions options{args.steps, args.sub_batch, args.output_index};
  const AttributionMap map = integrated_gradients(model, input, baseline, options);
  const AttributionSummary summary = attribution_summary(map, args.top_k);
  out << "f_input " << num(map.f_input) << "\n";
  out << "f_baseline " << num(map.f_baseline) << "\n";
  out << "completeness_gap " << num(map.completeness_gap) << "\n";
  out << "mean " << num(summary.mean) << "\n";
  out << "max_positive " << num(summary.max_positive) << "\n";
  out << "min_negative " << num(summary.min_negative) << "\n";
  for (const auto& loc : summary.top_locations) {
    out << "top " << index_string(loc.index) << " " << num(loc.value) << "\n";
  }

  const bool spatial = map.attributions.rank() == 4;
  if (!args.out.empty()) {
    TensorArchive archive;
    archive.add("attributions", map.attributions);
    if (spatial) archive.add("heatmap", attribution_to_heatmap(map));
    write_archive(archive, args.out);
  }
  if (!args.heatmap.empty()) {
    if (!spatial) throw DataError("heatmaps need image-shaped (1 x H x W x C) attributions");
    write_png(render_matrix(attribution_to_heatmap(map), Colormap::grayscale), args.heatmap);
  }
  return 0;
}

// ---- pca ------------------------------------------------------------------

struct PcaArgs {
  std::string data;
  std::size_t components = 32;
  bool no_center = false;
  std::string mode = "both";
  std::string out;
};

int pca(const PcaArgs& args, std::ostream& out) {
  std::vector<VarianceMode> modes;
  if (args.mode == "both" || args.mode == "variance_ratio") modes.push_back(VarianceMode::variance_ratio);
  if (args.mode == "both" || args.mode == "singular_mass") modes.push_back(VarianceMode::singular_mass);

  const Tensor data = load_entry(args.data);
  const PcaModel model = fit_pca(data, args.components, !args.no_center);
  out << "component singular_value";
  std::vector<ExplainedVariance> tables;
  for (VarianceMode m : modes) {
    tables.push_back(explained_variance(model.singular_values, m));
    out << " " << to_string(m) << " cumulative_" << to_string(m);
  }
  out << "\n";
  for (std::size_t i = 0; i < model.singular_values.size(); ++i) {
    out << i + 1 << " " << num(model.singular_values[i]);
    for (const auto& t : tables) out << " " << num(t.ratios[i]) << " " << num(t.cumulative[i]);
    out << "\n";
  }
  if (!args.out.empty()) {
    TensorArchive archive;
    archive.add("projected", transform_pca(model, data));
    archive.add("components", model.components);
    archive.add("mean", Tensor::vector(model.mean));
    archive.add("singular_values", Tensor::vector(model.singular_values));
    write_archive(archive, args.out);
  }
  return 0;
}

// ---- spectrum -------------------------------------------------------------

struct SpectrumArgs {
  std::string data;
  std::string csv;
};

int spectrum(const SpectrumArgs& args, std::ostream& out) {
  const DenseSpectrum s = dense_layer_spectrum(load_entry(args.data));
  std::string text = "component,singular_value,cumulative_singular_mass\n";
  for (std::size_t i = 0; i < s.svd.s.size(); ++i) {
    text += std::to_string(i + 1) + "," + num(s.svd.s[i]) + "," + num(s.cumulative[i]) + "\n";
  }
  if (args.csv.empty()) {
    out << text;
  } else {
    write_text(args.csv, text);
    out << s.svd.s.size() << " singular values -> " << args.csv << "\n";
  }
  return 0;
}

// ---- render ---------------------------------------------------------------

struct RenderArgs {
  std::string matrix;
  std::string out;
  std::string colormap = "auto";
  std::size_t scale = 1;
};

int render(const RenderArgs& args, std::ostream& out) {
  const Tensor matrix = load_entry(args.matrix);
  if (matrix.rank() != 2) {
    throw DataError("render needs a rank-2 matrix, '" + args.matrix + "' has shape " +
                    shape_to_string(matrix.shape()));
  }
  Colormap map = default_colormap(matrix);
  if (args.colormap != "auto") {
    auto parsed = parse_colormap(args.colormap);
    if (!parsed) throw UsageError("unknown colormap '" + args.colormap + "'");
    map = *parsed;
  }
  const RgbImage image = render_matrix(matrix, map, args.scale);
  write_png(image, args.out);
  out << args.out << ": " << image.width << "x" << image.height << " " << to_string(map) << "\n";
  return 0;
}

// ---- inspect --------------------------------------------------------------

int inspect(const std::string& path, std::ostream& out) {
  const TensorArchive archive = read_archive(path);
  out << archive.size() << (archive.size() == 1 ? " entry" : " entries") << "\n";
  for (const auto& [name, tensor] : archive.entries()) {
    out << name << " " << shape_to_string(tensor.shape());
    const auto data = tensor.data();
    if (!data.empty()) {
      const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
      double sum = 0.0;
      for (double v : data) sum += v;
      out << " min=" << num(*lo) << " max=" << num(*hi)
          << " mean=" << num(sum / static_cast<double>(data.size()));
    }
    out << "\n";
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"qixai: interpretability analyses for small convolutional networks", "qixai"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_version_flag("--version", std::string(toolkit_version()));

  std::function<int()> action;

  AnalyzeArgs analyze_args;
  auto* cmd = app.add_subcommand("analyze", "Run the full analysis pipeline and write a report");
  cmd->add_option("--config", analyze_args.config, "Run configuration (JSON)")->required();
  cmd->add_option("--output-dir", analyze_args.output_dir, "Override the configured output directory");
  cmd->add_flag("--audit", analyze_args.audit, "Recompute every report scalar from the artifacts afterwards");
  cmd->callback([&] { action = [&] { return analyze(analyze_args, out, err); }; });

  SimilarityArgs sim_args;
  cmd = app.add_subcommand("similarity", "Cosine similarity summary of two N x D matrices");
  cmd->add_option("--a", sim_args.a, "First matrix as ARCHIVE:ENTRY")->required();
  cmd->add_option("--b", sim_args.b, "Second matrix as ARCHIVE:ENTRY")->required();
  cmd->add_option("--out", sim_args.out, "Write the N x N similarity matrix to this archive");
  cmd->callback([&] { action = [&] { return similarity(sim_args, out); }; });

  MiArgs mi_args;
  cmd = app.add_subcommand("mi", "Histogram mutual information between two activation sets");
  cmd->add_option("--a", mi_args.a, "N x C pooled or N x H x W x C activations as ARCHIVE:ENTRY")->required();
  cmd->add_option("--b", mi_args.b, "Second activation set as ARCHIVE:ENTRY")->required();
  cmd->add_option("--bins", mi_args.bins, "Uniform histogram bins")->capture_default_str();
  cmd->add_option("--top-k", mi_args.top_k, "Feature-map pairs to list")->capture_default_str();
  cmd->callback([&] { action = [&] { return mi(mi_args, out); }; });

  IgArgs ig_args;
  cmd = app.add_subcommand("ig", "Integrated Gradients attribution for one input sample");
  cmd->add_option("--model", ig_args.model, "Model spec (JSON)")->required();
  cmd->add_option("--weights", ig_args.weights, "Weights archive")->required();
  cmd->add_option("--input", ig_args.input, "Input batch as ARCHIVE:ENTRY")->required();
  cmd->add_option("--sample", ig_args.sample, "Sample index in the batch")->capture_default_str();
  cmd->add_option("--baseline", ig_args.baseline, "\"zeros\" or ARCHIVE:ENTRY")->capture_default_str();
  cmd->add_option("--steps", ig_args.steps, "Path integration steps")->capture_default_str();
  cmd->add_option("--sub-batch", ig_args.sub_batch, "Path points per gradient batch")->capture_default_str();
  cmd->add_option("--output-index", ig_args.output_index, "Model output to attribute")->capture_default_str();
  cmd->add_option("--target", ig_args.target, "auto (logit when the model ends in a sigmoid), logit or output")
      ->check(CLI::IsMember({"auto", "logit", "output"}))
      ->capture_default_str();
  cmd->add_option("--top-k", ig_args.top_k, "Top attribution locations to list")->capture_default_str();
  cmd->add_option("--out", ig_args.out, "Write attributions (and heatmap) to this archive");
  cmd->add_option("--heatmap", ig_args.heatmap, "Write a grayscale heatmap PNG");
  cmd->callback([&] { action = [&] { return ig(ig_args, out); }; });

  PcaArgs pca_args;
  cmd = app.add_subcommand("pca", "PCA and explained-variance table of an N x D matrix");
  cmd->add_option("--data", pca_args.data, "Data matrix as ARCHIVE:ENTRY")->required();
  cmd->add_option("--components", pca_args.components, "Number of components")->capture_default_str();
  cmd->add_flag("--no-center", pca_args.no_center, "Skip mean centering");
  cmd->add_option("--mode", pca_args.mode, "variance_ratio, singular_mass or both")
      ->check(CLI::IsMember({"both", "variance_ratio", "singular_mass"}))
      ->capture_default_str();
  cmd->add_option("--out", pca_args.out, "Write projection, components, mean and singular values to this archive");
  cmd->callback([&] { action = [&] { return pca(pca_args, out); }; });

  SpectrumArgs spectrum_args;
  cmd = app.add_subcommand("spectrum", "Singular-value spectrum of uncentered activations");
  cmd->add_option("--data", spectrum_args.data, "Activations as ARCHIVE:ENTRY")->required();
  cmd->add_option("--csv", spectrum_args.csv, "Write the CSV table here instead of standard output");
  cmd->callback([&] { action = [&] { return spectrum(spectrum_args, out); }; });

  RenderArgs render_args;
  cmd = app.add_subcommand("render", "Render a matrix as a PNG heatmap");
  cmd->add_option("--matrix", render_args.matrix, "Rank-2 tensor as ARCHIVE:ENTRY")->required();
  cmd->add_option("--out", render_args.out, "Output PNG path")->required();
  cmd->add_option("--colormap", render_args.colormap,
                  "auto (diverging for signed data), grayscale or diverging")
      ->check(CLI::IsMember({"auto", "grayscale", "diverging"}))
      ->capture_default_str();
  cmd->add_option("--scale", render_args.scale, "Integer upscale factor")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->callback([&] { action = [&] { return render(render_args, out); }; });

  std::string inspect_path;
  cmd = app.add_subcommand("inspect", "List archive entries with shapes and value ranges");
  cmd->add_option("--archive", inspect_path, "Tensor archive")->required();
  cmd->callback([&] { action = [&] { return inspect(inspect_path, out); }; });

  std::vector<std::string> argv_storage{"qixai"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : exit_code_for(ErrorKind::usage);
  }

  try {
    return action();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    if (e.kind() == ErrorKind::usage) err << app.help();
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(ErrorKind::data);
  }
}

}  // namespace qixai::cli
