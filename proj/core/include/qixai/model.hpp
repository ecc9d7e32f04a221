// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "qixai/archive.hpp"
#include "qixai/tensor.hpp"

namespace qixai {

enum class LayerKind { conv2d, relu, maxpool2d, global_avg_pool, flatten, dense, sigmoid };
enum class Padding { valid, same };

std::string_view to_string(LayerKind kind) noexcept;
std::optional<LayerKind> parse_layer_kind(std::string_view text) noexcept;

struct Conv2dParams {
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  Padding padding = Padding::valid;
  friend bool operator==(const Conv2dParams&, const Conv2dParams&) = default;
};

/// Stride defaults to the pool extent; no padding.
struct MaxPool2dParams {
  std::size_t pool_h = 0;
  std::size_t pool_w = 0;
  std::size_t stride = 0;
  friend bool operator==(const MaxPool2dParams&, const MaxPool2dParams&) = default;
};

struct DenseParams {
  std::size_t out_features = 0;
  friend bool operator==(const DenseParams&, const DenseParams&) = default;
};

using LayerParams = std::variant<std::monostate, Conv2dParams, MaxPool2dParams, DenseParams>;

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::relu;
  LayerParams params;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Per-sample input shape ([H, W, C] for images, [F] for feature vectors)
/// plus the ordered layer list.
struct ModelSpec {
  Shape input_shape;
  std::vector<LayerSpec> layers;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Parses the JSON model-spec document (schema in docs/formats.md).
ModelSpec parse_model_spec(std::string_view document);
ModelSpec read_model_spec(const std::filesystem::path& path);
std::string model_spec_to_json(const ModelSpec& spec);

/// Per-sample output shapes of every layer. Throws DataError when the layer
/// sequence does not type-check against the input shape.
std::vector<Shape> infer_shapes(const ModelSpec& spec);

/// Expected "<layer>.kernel" / "<layer>.bias" shapes for a parametric layer.
struct WeightShapes {
  Shape kernel;
  Shape bias;
};
std::optional<WeightShapes> expected_weight_shapes(const LayerSpec& layer, const Shape& input);

/// Named per-layer outputs captured during a forward pass, in layer order.
class ActivationSet {
 public:
  void add(std::string name, Tensor activation);

  const Tensor& at(std::string_view name) const;
  const Tensor* find(std::string_view name) const noexcept;
  const std::vector<std::pair<std::string, Tensor>>& entries() const noexcept {
    return entries_;
  }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

struct ForwardResult {
  Tensor output;
  ActivationSet activations;
};

/// A validated network: spec, weights and inferred shapes. Immutable; forward
/// and gradient evaluation are const and safe to call concurrently.
class Model {
 public:
  const ModelSpec& spec() const noexcept { return spec_; }
  const Shape& input_shape() const noexcept { return spec_.input_shape; }
  const std::vector<Shape>& layer_shapes() const noexcept { return shapes_; }
  /// Flattened per-sample width of the final layer.
  std::size_t output_width() const;
  const TensorArchive& weights() const noexcept { return weights_; }

  /// batch shape must be [N] + input_shape.
  ForwardResult forward(const Tensor& batch) const;
  /// Final-layer output only; skips activation capture.
  Tensor predict(const Tensor& batch) const;

  /// d output[output_index] / d input for a single sample [1] + input_shape.
  Tensor gradient_wrt_input(const Tensor& input, std::size_t output_index) const;
  /// Per-sample gradients for a whole batch; row n is d out[n, k] / d in[n].
  Tensor gradient_batch(const Tensor& batch, std::size_t output_index) const;

  /// The same network without its trailing sigmoid (attribution target).
  Model logit() const;

 private:
  friend Model load_model(ModelSpec spec, const TensorArchive& weights);

  Model() = default;

  // Indices into weights_.entries(); stable across copies of the model.
  struct LayerWeights {
    std::size_t kernel = 0;
    std::size_t bias = 0;
  };

  void bind_weights();
  void check_batch(const Tensor& batch) const;
  Tensor run(const Tensor& batch, std::vector<Tensor>* trace) const;
  Tensor backward(const Tensor& batch, const std::vector<Tensor>& trace,
                  Tensor upstream) const;

  ModelSpec spec_;
  TensorArchive weights_;
  std::vector<Shape> shapes_;
  std::vector<std::optional<LayerWeights>> bound_;
};

/// Validates the spec against the weights (every parametric layer needs a
/// kernel and bias of the inferred shape) and returns the model.
Model load_model(ModelSpec spec, const TensorArchive& weights);

inline Model logit_of(const Model& model) { return model.logit(); }

}  // namespace qixai
