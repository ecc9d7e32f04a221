// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "qixai/tensor.hpp"

namespace qixai {

/// Rows whose Euclidean norm is at or below this are treated as zero vectors.
inline constexpr double kZeroNormThreshold = 1e-300;

/// Rows of A and B that had (near) zero norm; their similarities are 0.
struct SimilarityDiagnostics {
  std::vector<std::size_t> zero_rows_a;
  std::vector<std::size_t> zero_rows_b;
};

/// out[i, j] = <A_i, B_j> / (|A_i| |B_j|) for A (n x d) and B (m x d).
Tensor cosine_similarity_matrix(const Tensor& a, const Tensor& b,
                                SimilarityDiagnostics* diagnostics = nullptr);

/// Mean over rows i of <A_i, B_i>; A and B must have identical shapes.
double mean_inner_product(const Tensor& a, const Tensor& b);

struct SimilaritySummary {
  std::string layer_a;
  std::string layer_b;
  double matrix_mean = 0.0;
  std::optional<double> diagonal_mean;  // only for square matrices
  double min = 0.0;
  double max = 0.0;
  std::size_t zero_rows_a = 0;
  std::size_t zero_rows_b = 0;
  std::string matrix_entry;  // artifact archive entry, empty when not persisted
  friend bool operator==(const SimilaritySummary&, const SimilaritySummary&) = default;
};

/// Scalar statistics of an already computed similarity matrix.
SimilaritySummary summarize_similarity(const Tensor& matrix);

struct LayerSimilarity {
  SimilaritySummary summary;
  Tensor matrix;
};

LayerSimilarity layer_similarity_summary(const Tensor& a, const Tensor& b);

}  // namespace qixai
