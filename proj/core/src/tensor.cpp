// SPDX-License-Identifier: Apache-2.0
#include "qixai/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "qixai/error.hpp"

namespace qixai {

std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DataError("tensor rank must be at least 1");
  for (std::size_t e : shape) {
    if (e == 0) throw DataError("tensor extents must be positive, got " + shape_to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_product(shape_) != data_.size()) {
    throw DataError("tensor shape " + shape_to_string(shape_) + " needs " +
                    std::to_string(shape_product(shape_)) + " values, got " +
                    std::to_string(data_.size()));
  }
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_product(shape_), fill);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, double fill) {
  return Tensor({rows, cols}, fill);
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DataError("axis " + std::to_string(axis) + " out of range for rank " +
                    std::to_string(shape_.size()));
  }
  return shape_[axis];
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DataError("expected a matrix, got shape " + shape_to_string(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DataError("expected a matrix, got shape " + shape_to_string(shape_));
  return shape_[1];
}

std::span<const double> Tensor::row(std::size_t r) const {
  const std::size_t c = cols();
  return std::span<const double>(data_).subspan(r * c, c);
}

std::span<double> Tensor::row(std::size_t r) {
  const std::size_t c = cols();
  return std::span<double>(data_).subspan(r * c, c);
}

std::size_t Tensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw DataError("index rank " + std::to_string(index.size()) + " does not match tensor rank " +
                    std::to_string(shape_.size()));
  }
  std::size_t flat = 0;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= shape_[i]) throw DataError("index out of range on axis " + std::to_string(i));
    flat = flat * shape_[i] + index[i];
  }
  return flat;
}

std::vector<std::size_t> Tensor::unravel(std::size_t flat) const {
  std::vector<std::size_t> index(shape_.size());
  for (std::size_t i = shape_.size(); i-- > 0;) {
    index[i] = flat % shape_[i];
    flat /= shape_[i];
  }
  return index;
}

Tensor Tensor::slice_leading(std::size_t begin, std::size_t count) const {
  if (count == 0 || begin + count > shape_[0]) {
    throw DataError("leading slice [" + std::to_string(begin) + ", " +
                    std::to_string(begin + count) + ") out of range for extent " +
                    std::to_string(shape_[0]));
  }
  const std::size_t stride = data_.size() / shape_[0];
  Shape shape = shape_;
  shape[0] = count;
  auto first = data_.begin() + static_cast<std::ptrdiff_t>(begin * stride);
  return Tensor(std::move(shape),
                std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * stride)));
}

std::size_t Tensor::first_non_finite() const noexcept {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) return i;
  }
  return data_.size();
}

Tensor reshape(const Tensor& t, Shape new_shape) {
  if (new_shape.empty() || shape_product(new_shape) != t.size()) {
    throw DataError("cannot reshape " + shape_to_string(t.shape()) + " to " +
                    shape_to_string(new_shape));
  }
  return Tensor(std::move(new_shape), t.values());
}

bool bitwise_equal(const Tensor& a, const Tensor& b) noexcept {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

Tensor transpose(const Tensor& matrix) {
  const std::size_t r = matrix.rows();
  const std::size_t c = matrix.cols();
  Tensor out = Tensor::matrix(c, r);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out(j, i) = matrix(i, j);
  }
  return out;
}

Tensor concat_leading(std::span<const Tensor> parts) {
  if (parts.empty()) throw DataError("nothing to concatenate");
  Shape shape = parts.front().shape();
  std::size_t leading = 0;
  std::vector<double> data;
  for (const Tensor& p : parts) {
    if (p.rank() != shape.size() ||
        !std::equal(p.shape().begin() + 1, p.shape().end(), shape.begin() + 1)) {
      throw DataError("cannot concatenate " + shape_to_string(p.shape()) + " onto " +
                      shape_to_string(shape));
    }
    leading += p.shape()[0];
    data.insert(data.end(), p.values().begin(), p.values().end());
  }
  shape[0] = leading;
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace qixai
