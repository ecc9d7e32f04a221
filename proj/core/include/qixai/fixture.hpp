// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "qixai/archive.hpp"
#include "qixai/model.hpp"

namespace qixai::fixture {

/// conv1(8, 3x3) relu1 pool1(2x2) conv2(16, 3x3) relu2 gap dense(1) sigmoid
/// on 32x32x3 inputs.
ModelSpec small_cnn_spec();

/// Wider network sized for the default analysis settings (32 PCA
/// components): conv1(32) relu1 pool1 conv2(32) relu2 gap dense1(40) relu3
/// dense2(1) sigmoid on 32x32x3 inputs.
ModelSpec analysis_cnn_spec();

/// He-normal kernels and small normal biases, deterministic in the seed.
TensorArchive random_weights(const ModelSpec& spec, std::uint64_t seed);

/// Smooth blob images in [0, 1], shape [n] + sample_shape (NHWC).
Tensor synthetic_batch(std::size_t n, const Shape& sample_shape, std::uint64_t seed);

struct FixtureFiles {
  std::filesystem::path model_spec;
  std::filesystem::path weights;
  std::filesystem::path batch;
  std::filesystem::path config;
};

/// Writes model.json, weights.qixt, batch.qixt (entry "batch") and a default
/// config.json whose output directory is <dir>/report.
FixtureFiles write_fixture(const std::filesystem::path& dir, std::size_t n_samples = 64,
                           std::uint64_t seed = 7);

}  // namespace qixai::fixture
