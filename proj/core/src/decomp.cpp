// SPDX-License-Identifier: Apache-2.0
#include "qixai/decomp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qixai/error.hpp"
#include "qixai/reduce.hpp"

namespace qixai {

namespace {

// Columns below this norm are treated as exact zeros.
constexpr double kTinyNorm = 1e-290;

using Column = std::vector<double>;

double dot(const Column& a, const Column& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

void rotate(Column& a, Column& b, double c, double s) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i];
    const double y = b[i];
    a[i] = c * x - s * y;
    b[i] = s * x + c * y;
  }
}

// Completes `basis` with orthonormal vectors of length n until it holds
// `target` columns: picks the unit vector with the largest residual after
// two Gram-Schmidt passes.
void complete_basis(std::vector<Column>& basis, std::size_t n, std::size_t target) {
  while (basis.size() < target) {
    Column best;
    double best_norm = -1.0;
    for (std::size_t e = 0; e < n; ++e) {
      Column v(n, 0.0);
      v[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (const Column& q : basis) {
          const double proj = dot(v, q);
          for (std::size_t i = 0; i < n; ++i) v[i] -= proj * q[i];
        }
      }
      const double norm = std::sqrt(dot(v, v));
      if (norm > best_norm) {
        best_norm = norm;
        best = std::move(v);
      }
    }
    for (double& x : best) x /= best_norm;
    basis.push_back(std::move(best));
  }
}

// Tall case (n >= d): orthogonalize the d columns of A by plane rotations,
// accumulating them into V. Then A V = U diag(S).
SvdResult jacobi_tall(const Tensor& a, const SvdOptions& options) {
  const std::size_t n = a.rows();
  const std::size_t d = a.cols();

  std::vector<Column> cols(d, Column(n));
  std::vector<Column> v(d, Column(d, 0.0));
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) cols[j][i] = a(i, j);
    v[j][j] = 1.0;
  }

  std::size_t sweep = 0;
  for (bool rotated = true; rotated; ++sweep) {
    if (sweep == options.max_sweeps) {
      throw ConvergenceError("Jacobi SVD did not converge within " +
                             std::to_string(options.max_sweeps) + " sweeps on a " +
                             std::to_string(n) + "x" + std::to_string(d) + " matrix");
    }
    rotated = false;
    for (std::size_t p = 0; p + 1 < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double alpha = dot(cols[p], cols[p]);
        const double beta = dot(cols[q], cols[q]);
        const double gamma = dot(cols[p], cols[q]);
        if (alpha <= kTinyNorm * kTinyNorm || beta <= kTinyNorm * kTinyNorm) continue;
        if (std::abs(gamma) <= options.tolerance * std::sqrt(alpha) * std::sqrt(beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        rotate(cols[p], cols[q], c, s);
        rotate(v[p], v[q], c, s);
      }
    }
  }

  std::vector<double> sigma(d);
  for (std::size_t j = 0; j < d; ++j) sigma[j] = std::sqrt(dot(cols[j], cols[j]));
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SvdResult result{Tensor::matrix(n, d), std::vector<double>(d), Tensor::matrix(d, d), sweep};
  std::vector<Column> basis;
  std::vector<std::size_t> missing;
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t j = order[k];
    if (sigma[j] <= kTinyNorm) {
      result.s[k] = 0.0;
      missing.push_back(k);
      continue;
    }
    result.s[k] = sigma[j];
    Column u = cols[j];
    for (double& x : u) x /= sigma[j];
    basis.push_back(u);
    for (std::size_t i = 0; i < n; ++i) result.u(i, k) = u[i];
  }
  if (!missing.empty()) {
    const std::size_t have = basis.size();
    complete_basis(basis, n, d);
    for (std::size_t m = 0; m < missing.size(); ++m) {
      for (std::size_t i = 0; i < n; ++i) result.u(i, missing[m]) = basis[have + m][i];
    }
  }
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < d; ++i) result.vt(k, i) = v[order[k]][i];
  }
  return result;
}

// Largest-magnitude element of each Vt row made nonnegative.
void fix_signs(SvdResult& r) {
  const std::size_t k = r.vt.rows();
  const std::size_t d = r.vt.cols();
  const std::size_t n = r.u.rows();
  for (std::size_t row = 0; row < k; ++row) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < d; ++j) {
      if (std::abs(r.vt(row, j)) > std::abs(r.vt(row, best))) best = j;
    }
    if (r.vt(row, best) < 0.0) {
      for (std::size_t j = 0; j < d; ++j) r.vt(row, j) = -r.vt(row, j);
      for (std::size_t i = 0; i < n; ++i) r.u(i, row) = -r.u(i, row);
    }
  }
}

}  // namespace

SvdResult svd(const Tensor& a, const SvdOptions& options) {
  if (a.rank() != 2) throw DataError("svd expects a matrix, got shape " + shape_to_string(a.shape()));
  if (std::size_t bad = a.first_non_finite(); bad != a.size()) {
    throw DataError("svd input has a non-finite value at flat index " + std::to_string(bad));
  }
  SvdResult result = [&] {
    if (a.rows() >= a.cols()) return jacobi_tall(a, options);
    // A^T = U' S V'^T  =>  A = V' S U'^T
    SvdResult t = jacobi_tall(transpose(a), options);
    return SvdResult{transpose(t.vt), std::move(t.s), transpose(t.u), t.sweeps};
  }();
  fix_signs(result);
  return result;
}

DenseSpectrum dense_layer_spectrum(const Tensor& activations) {
  if (activations.rank() != 2) {
    throw DataError("dense spectrum expects an n x d activation matrix, got shape " +
                    shape_to_string(activations.shape()));
  }
  if (activations.rows() < 2) {
    throw DataError("dense spectrum requires n >= 2 samples (got " +
                    std::to_string(activations.rows()) + ")");
  }
  if (std::all_of(activations.data().begin(), activations.data().end(),
                  [](double x) { return x == 0.0; })) {
    throw DataError("dense spectrum of an all-zero activation matrix is undefined");
  }
  DenseSpectrum out{svd(activations), {}};
  out.cumulative = explained_variance(out.svd.s, VarianceMode::singular_mass).cumulative;
  return out;
}

}  // namespace qixai
