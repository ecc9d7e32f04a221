// SPDX-License-Identifier: Apache-2.0
#include "qixai/reduce.hpp"

#include <algorithm>

#include "qixai/decomp.hpp"
#include "qixai/error.hpp"

namespace qixai {

Tensor global_average_pool(const Tensor& activations) {
  if (activations.rank() != 4) {
    throw DataError("global average pooling expects an NHWC tensor, got shape " +
                    shape_to_string(activations.shape()));
  }
  const auto& s = activations.shape();
  const std::size_t n = s[0];
  const std::size_t hw = s[1] * s[2];
  const std::size_t c = s[3];
  Tensor out = Tensor::matrix(n, c);
  const double scale = 1.0 / static_cast<double>(hw);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double sum = 0.0;
      for (std::size_t p = 0; p < hw; ++p) sum += activations[(i * hw + p) * c + ch];
      out(i, ch) = sum * scale;
    }
  }
  return out;
}

Tensor truncate_channels(const Tensor& pooled, std::size_t k) {
  const std::size_t n = pooled.rows();
  const std::size_t c = pooled.cols();
  if (k == 0 || k > c) {
    throw DataError("cannot keep " + std::to_string(k) + " channels of a matrix with " +
                    std::to_string(c));
  }
  Tensor out = Tensor::matrix(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(pooled.row(i).begin(), k, out.row(i).begin());
  }
  return out;
}

PcaModel fit_pca(const Tensor& data, std::size_t n_components, bool center) {
  if (data.rank() != 2) {
    throw DataError("PCA expects an n x d matrix, got shape " + shape_to_string(data.shape()));
  }
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  if (n < 2) throw DataError("PCA requires n >= 2 samples (got " + std::to_string(n) + ")");
  if (n_components == 0 || n_components > std::min(n, d)) {
    throw DataError("PCA n_components=" + std::to_string(n_components) +
                    " must be between 1 and min(n, d)=" + std::to_string(std::min(n, d)) +
                    "; lower pca_components");
  }

  PcaModel model{std::vector<double>(d, 0.0), Tensor::matrix(n_components, d), {}, n, center};
  Tensor centered = data;
  if (center) {
    for (std::size_t j = 0; j < d; ++j) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += data(i, j);
      model.mean[j] = sum / static_cast<double>(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) centered(i, j) -= model.mean[j];
    }
  }

  const SvdResult decomposition = svd(centered);
  model.singular_values.assign(decomposition.s.begin(),
                               decomposition.s.begin() + static_cast<std::ptrdiff_t>(n_components));
  for (std::size_t k = 0; k < n_components; ++k) {
    std::copy_n(decomposition.vt.row(k).begin(), d, model.components.row(k).begin());
  }
  return model;
}

Tensor transform_pca(const PcaModel& model, const Tensor& data) {
  const std::size_t d = model.components.cols();
  const std::size_t k = model.components.rows();
  if (data.rank() != 2 || data.cols() != d) {
    throw DataError("PCA transform expects n x " + std::to_string(d) + " data, got shape " +
                    shape_to_string(data.shape()));
  }
  const std::size_t n = data.rows();
  Tensor out = Tensor::matrix(n, k);
  std::vector<double> centered(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) centered[j] = data(i, j) - model.mean[j];
    for (std::size_t c = 0; c < k; ++c) {
      double sum = 0.0;
      for (std::size_t j = 0; j < d; ++j) sum += centered[j] * model.components(c, j);
      out(i, c) = sum;
    }
  }
  return out;
}

Tensor inverse_transform_pca(const PcaModel& model, const Tensor& projected) {
  const std::size_t d = model.components.cols();
  const std::size_t k = model.components.rows();
  if (projected.rank() != 2 || projected.cols() != k) {
    throw DataError("PCA inverse transform expects n x " + std::to_string(k) +
                    " scores, got shape " + shape_to_string(projected.shape()));
  }
  const std::size_t n = projected.rows();
  Tensor out = Tensor::matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double sum = model.mean[j];
      for (std::size_t c = 0; c < k; ++c) sum += projected(i, c) * model.components(c, j);
      out(i, j) = sum;
    }
  }
  return out;
}

std::string_view to_string(VarianceMode mode) noexcept {
  return mode == VarianceMode::variance_ratio ? "variance_ratio" : "singular_mass";
}

ExplainedVariance explained_variance(std::span<const double> singular_values,
                                     VarianceMode mode) {
  if (singular_values.empty()) throw DataError("explained variance needs at least one value");
  for (std::size_t i = 0; i < singular_values.size(); ++i) {
    if (!(singular_values[i] >= 0.0)) {
      throw DataError("singular values must be nonnegative (index " + std::to_string(i) + ")");
    }
    if (i > 0 && singular_values[i] > singular_values[i - 1]) {
      throw DataError("singular values must be nonincreasing (index " + std::to_string(i) + ")");
    }
  }
  if (singular_values.front() == 0.0) {
    throw DataError("explained variance is undefined when every singular value is zero");
  }

  ExplainedVariance out;
  out.ratios.reserve(singular_values.size());
  double total = 0.0;
  for (double s : singular_values) total += mode == VarianceMode::variance_ratio ? s * s : s;
  double running = 0.0;
  for (double s : singular_values) {
    const double r = (mode == VarianceMode::variance_ratio ? s * s : s) / total;
    running += r;
    out.ratios.push_back(r);
    out.cumulative.push_back(running);
  }
  return out;
}

}  // namespace qixai
