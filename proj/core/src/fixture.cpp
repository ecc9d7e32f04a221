// SPDX-License-Identifier: Apache-2.0
#include "qixai/fixture.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "qixai/error.hpp"
#include "qixai/pipeline.hpp"

namespace qixai::fixture {

namespace {

LayerSpec conv(std::string name, std::size_t filters) {
  return {std::move(name), LayerKind::conv2d, Conv2dParams{filters, 3, 3, 1, Padding::valid}};
}
LayerSpec simple(std::string name, LayerKind kind) { return {std::move(name), kind, {}}; }
LayerSpec pool(std::string name) {
  return {std::move(name), LayerKind::maxpool2d, MaxPool2dParams{2, 2, 2}};
}
LayerSpec dense(std::string name, std::size_t out) {
  return {std::move(name), LayerKind::dense, DenseParams{out}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

ModelSpec small_cnn_spec() {
  return ModelSpec{{32, 32, 3},
                   {conv("conv1", 8), simple("relu1", LayerKind::relu), pool("pool1"),
                    conv("conv2", 16), simple("relu2", LayerKind::relu),
                    simple("gap", LayerKind::global_avg_pool), dense("dense", 1),
                    simple("sigmoid", LayerKind::sigmoid)}};
}

ModelSpec analysis_cnn_spec() {
  return ModelSpec{{32, 32, 3},
                   {conv("conv1", 32), simple("relu1", LayerKind::relu), pool("pool1"),
                    conv("conv2", 32), simple("relu2", LayerKind::relu),
                    simple("gap", LayerKind::global_avg_pool), dense("dense1", 40),
                    simple("relu3", LayerKind::relu), dense("dense2", 1),
                    simple("sigmoid", LayerKind::sigmoid)}};
}

TensorArchive random_weights(const ModelSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<Shape> shapes = infer_shapes(spec);
  TensorArchive weights;
  Shape input = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (auto expected = expected_weight_shapes(spec.layers[i], input)) {
      const std::size_t fan_in = shape_product(expected->kernel) / expected->kernel.back();
      std::normal_distribution<double> kernel_dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
      std::normal_distribution<double> bias_dist(0.0, 0.05);
      Tensor kernel(expected->kernel);
      for (double& v : kernel.data()) v = kernel_dist(rng);
      Tensor bias(expected->bias);
      for (double& v : bias.data()) v = bias_dist(rng);
      weights.add(spec.layers[i].name + ".kernel", std::move(kernel));
      weights.add(spec.layers[i].name + ".bias", std::move(bias));
    }
    input = shapes[i];
  }
  return weights;
}

Tensor synthetic_batch(std::size_t n, const Shape& sample_shape, std::uint64_t seed) {
  if (sample_shape.size() != 3) throw DataError("synthetic batches are NHWC images");
  const std::size_t h = sample_shape[0];
  const std::size_t w = sample_shape[1];
  const std::size_t c = sample_shape[2];
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.03);

  Shape shape{n};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  Tensor batch(shape);
  for (std::size_t s = 0; s < n; ++s) {
    struct Blob {
      double y, x, radius;
      std::vector<double> amplitude;
    };
    std::vector<Blob> blobs(2 + s % 3);
    for (Blob& b : blobs) {
      b.y = unit(rng) * static_cast<double>(h);
      b.x = unit(rng) * static_cast<double>(w);
      b.radius = 2.0 + 5.0 * unit(rng);
      for (std::size_t ch = 0; ch < c; ++ch) b.amplitude.push_back(0.3 + 0.7 * unit(rng));
    }
    const double background = 0.1 + 0.2 * unit(rng);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          double v = background;
          for (const Blob& b : blobs) {
            const double dy = static_cast<double>(y) - b.y;
            const double dx = static_cast<double>(x) - b.x;
            v += b.amplitude[ch] * std::exp(-(dy * dy + dx * dx) / (2.0 * b.radius * b.radius));
          }
          v += noise(rng);
          batch[((s * h + y) * w + x) * c + ch] = std::clamp(v, 0.0, 1.0);
        }
      }
    }
  }
  return batch;
}

FixtureFiles write_fixture(const std::filesystem::path& dir, std::size_t n_samples,
                           std::uint64_t seed) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

  const ModelSpec spec = analysis_cnn_spec();
  FixtureFiles files{dir / "model.json", dir / "weights.qixt", dir / "batch.qixt",
                     dir / "config.json"};
  write_text(files.model_spec, model_spec_to_json(spec));
  write_archive(random_weights(spec, seed), files.weights);

  TensorArchive inputs;
  inputs.add("batch", synthetic_batch(n_samples, spec.input_shape, seed + 1));
  write_archive(inputs, files.batch);

  RunConfig config;
  config.model_spec = "model.json";
  config.weights = "weights.qixt";
  config.input_batch = "batch.qixt";
  config.output_dir = "report";
  config.ig.samples = {0, 1, 2};
  write_text(files.config, run_config_to_json(config));
  return files;
}

}  // namespace qixai::fixture
