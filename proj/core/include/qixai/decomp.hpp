// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "qixai/tensor.hpp"

namespace qixai {

/// Thin SVD A = U diag(S) Vt with k = min(n, d).
///
/// S is nonincreasing. Each row of Vt is signed so that its largest-magnitude
/// element (first one on ties) is nonnegative; the matching U column is
/// flipped with it.
struct SvdResult {
  Tensor u;               // n x k, orthonormal columns
  std::vector<double> s;  // k
  Tensor vt;              // k x d, orthonormal rows
  std::size_t sweeps = 0; // Jacobi sweeps used
};

struct SvdOptions {
  /// A column pair counts as orthogonal once |a_i . a_j| <= tol * |a_i| |a_j|.
  double tolerance = 1e-12;
  std::size_t max_sweeps = 100;
};

/// One-sided (Hestenes) Jacobi SVD. Throws DataError on non-finite input and
/// ConvergenceError when max_sweeps is exhausted.
SvdResult svd(const Tensor& a, const SvdOptions& options = {});

/// Raw (uncentered) SVD of a dense activation matrix plus the cumulative
/// singular-value mass curve cumsum(S) / sum(S).
struct DenseSpectrum {
  SvdResult svd;
  std::vector<double> cumulative;
};

DenseSpectrum dense_layer_spectrum(const Tensor& activations);

}  // namespace qixai
