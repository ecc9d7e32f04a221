// SPDX-License-Identifier: Apache-2.0
#include "qixai/similarity.hpp"

#include <algorithm>
#include <cmath>

#include "qixai/error.hpp"
#include "qixai/parallel.hpp"

namespace qixai {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

void require_matrix(const Tensor& t, const char* which) {
  if (t.rank() != 2) {
    throw DataError(std::string("similarity operand ") + which + " must be a matrix, got shape " +
                    shape_to_string(t.shape()));
  }
}

}  // namespace

Tensor cosine_similarity_matrix(const Tensor& a, const Tensor& b,
                                SimilarityDiagnostics* diagnostics) {
  require_matrix(a, "A");
  require_matrix(b, "B");
  if (a.cols() != b.cols()) {
    throw DataError("feature dimension mismatch: A has " + std::to_string(a.cols()) +
                    " columns, B has " + std::to_string(b.cols()));
  }
  const std::size_t n = a.rows();
  const std::size_t m = b.rows();
  std::vector<double> norm_a(n);
  std::vector<double> norm_b(m);
  for (std::size_t i = 0; i < n; ++i) norm_a[i] = std::sqrt(dot(a.row(i), a.row(i)));
  for (std::size_t j = 0; j < m; ++j) norm_b[j] = std::sqrt(dot(b.row(j), b.row(j)));

  Tensor out = Tensor::matrix(n, m);
  parallel_for(n, [&](std::size_t i) {
    if (norm_a[i] <= kZeroNormThreshold) return;
    for (std::size_t j = 0; j < m; ++j) {
      if (norm_b[j] <= kZeroNormThreshold) continue;
      out(i, j) = dot(a.row(i), b.row(j)) / (norm_a[i] * norm_b[j]);
    }
  });

  if (diagnostics) {
    diagnostics->zero_rows_a.clear();
    diagnostics->zero_rows_b.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (norm_a[i] <= kZeroNormThreshold) diagnostics->zero_rows_a.push_back(i);
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (norm_b[j] <= kZeroNormThreshold) diagnostics->zero_rows_b.push_back(j);
    }
  }
  return out;
}

double mean_inner_product(const Tensor& a, const Tensor& b) {
  require_matrix(a, "A");
  require_matrix(b, "B");
  if (a.shape() != b.shape()) {
    throw DataError("inner product needs identical shapes, got " + shape_to_string(a.shape()) +
                    " and " + shape_to_string(b.shape()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) sum += dot(a.row(i), b.row(i));
  return sum / static_cast<double>(a.rows());
}

SimilaritySummary summarize_similarity(const Tensor& matrix) {
  require_matrix(matrix, "matrix");
  SimilaritySummary s;
  double sum = 0.0;
  s.min = matrix[0];
  s.max = matrix[0];
  for (double v : matrix.data()) {
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  // Rounding can push the mean of near-equal values just past an extreme.
  s.matrix_mean = std::clamp(sum / static_cast<double>(matrix.size()), s.min, s.max);
  if (matrix.rows() == matrix.cols()) {
    double diag = 0.0;
    for (std::size_t i = 0; i < matrix.rows(); ++i) diag += matrix(i, i);
    s.diagonal_mean = diag / static_cast<double>(matrix.rows());
  }
  return s;
}

LayerSimilarity layer_similarity_summary(const Tensor& a, const Tensor& b) {
  SimilarityDiagnostics diagnostics;
  Tensor matrix = cosine_similarity_matrix(a, b, &diagnostics);
  SimilaritySummary summary = summarize_similarity(matrix);
  summary.zero_rows_a = diagnostics.zero_rows_a.size();
  summary.zero_rows_b = diagnostics.zero_rows_b.size();
  return {std::move(summary), std::move(matrix)};
}

}  // namespace qixai
