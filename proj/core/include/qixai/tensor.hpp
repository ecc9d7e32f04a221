// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace qixai {

using Shape = std::vector<std::size_t>;

std::size_t shape_product(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major tensor of doubles.
///
/// Every tensor has rank >= 1 and every extent >= 1; the constructor enforces
/// product(shape) == data.size(). Activations use the NHWC convention.
class Tensor {
 public:
  Tensor(Shape shape, std::vector<double> data);
  explicit Tensor(Shape shape, double fill = 0.0);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  static Tensor vector(std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t axis) const;

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t flat) const { return data_[flat]; }
  double& operator[](std::size_t flat) { return data_[flat]; }

  // Rank-2 access. rows()/cols() throw DataError on other ranks.
  std::size_t rows() const;
  std::size_t cols() const;
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  std::span<const double> row(std::size_t r) const;
  std::span<double> row(std::size_t r);

  /// Row-major flat offset of a full multi-index (bounds-checked).
  std::size_t offset(std::span<const std::size_t> index) const;
  std::size_t offset(std::initializer_list<std::size_t> index) const {
    return offset(std::span<const std::size_t>(index.begin(), index.size()));
  }
  /// Inverse of offset().
  std::vector<std::size_t> unravel(std::size_t flat) const;

  /// Sub-tensor along the leading axis (e.g. one sample of a batch).
  Tensor slice_leading(std::size_t begin, std::size_t count) const;

  /// Index of the first non-finite element, or size() when all are finite.
  std::size_t first_non_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Same data under a new shape; product of extents must match.
Tensor reshape(const Tensor& t, Shape new_shape);

/// Elementwise bit-for-bit equality (distinguishes -0.0 from 0.0, NaN payloads).
bool bitwise_equal(const Tensor& a, const Tensor& b) noexcept;

Tensor transpose(const Tensor& matrix);

/// Concatenates along the leading axis; trailing extents must agree.
Tensor concat_leading(std::span<const Tensor> parts);

}  // namespace qixai
