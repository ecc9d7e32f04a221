// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "qixai/tensor.hpp"

namespace qixai {

/// NHWC -> N x C, mean over the spatial axes.
Tensor global_average_pool(const Tensor& activations);

/// Keeps the first k columns of an N x C matrix.
Tensor truncate_channels(const Tensor& pooled, std::size_t k);

struct PcaModel {
  std::vector<double> mean;          // zeros when not centered
  Tensor components;                 // k x d, orthonormal rows
  std::vector<double> singular_values;
  std::size_t n_samples = 0;
  bool centered = true;
};

/// Principal axes from the SVD of the (optionally centered) data matrix.
/// Requires n >= 2 and n_components <= min(n, d).
PcaModel fit_pca(const Tensor& data, std::size_t n_components, bool center = true);

/// (data - mean) * components^T
Tensor transform_pca(const PcaModel& model, const Tensor& data);

/// projected * components + mean
Tensor inverse_transform_pca(const PcaModel& model, const Tensor& projected);

enum class VarianceMode {
  variance_ratio,  // s_i^2 / sum s_j^2
  singular_mass,   // s_i / sum s_j
};

std::string_view to_string(VarianceMode mode) noexcept;

struct ExplainedVariance {
  std::vector<double> ratios;
  std::vector<double> cumulative;
  friend bool operator==(const ExplainedVariance&, const ExplainedVariance&) = default;
};

/// Singular values must be nonnegative, nonincreasing and not all zero.
ExplainedVariance explained_variance(std::span<const double> singular_values,
                                     VarianceMode mode);

}  // namespace qixai
