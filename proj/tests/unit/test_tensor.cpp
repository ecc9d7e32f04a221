// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "qixai/error.hpp"
#include "qixai/tensor.hpp"

namespace qixai {
namespace {

TEST(Tensor, RejectsDataLengthMismatch) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DataError);
  EXPECT_THROW(Tensor(Shape{}), DataError);
  EXPECT_THROW(Tensor(Shape{2, 0}), DataError);
}

TEST(Tensor, RowMajorOffsets) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.offset({1, 2, 3}), 23u);
  EXPECT_EQ(t.unravel(23), (std::vector<std::size_t>{1, 2, 3}));
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t.offset(t.unravel(i)), i);
  EXPECT_THROW(t.offset({2, 0, 0}), DataError);
}

TEST(Tensor, ReshapeKeepsDataOrder) {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor flat = reshape(t, {6});
  EXPECT_EQ(flat.shape(), (Shape{6}));
  EXPECT_EQ(flat.values(), t.values());
}

TEST(Tensor, ReshapeToHigherRankIsIdentity) {
  Tensor t({1}, {4.5});
  Tensor r = reshape(t, {1, 1, 1});
  EXPECT_EQ(r.shape(), (Shape{1, 1, 1}));
  EXPECT_EQ(r[0], 4.5);
}

TEST(Tensor, ReshapeRejectsWrongCount) {
  EXPECT_THROW(reshape(Tensor({2, 3}), {4}), DataError);
}

TEST(Tensor, SliceAndConcat) {
  Tensor t({3, 2}, {1, 2, 3, 4, 5, 6});
  Tensor mid = t.slice_leading(1, 1);
  EXPECT_EQ(mid.shape(), (Shape{1, 2}));
  EXPECT_EQ(mid.values(), (std::vector<double>{3, 4}));
  const Tensor parts[] = {t.slice_leading(0, 1), t.slice_leading(1, 2)};
  EXPECT_EQ(concat_leading(parts), t);
  EXPECT_THROW(t.slice_leading(2, 2), DataError);
}

TEST(Tensor, TransposeAndBitwiseEquality) {
  Tensor m({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor mt = transpose(m);
  EXPECT_EQ(mt.shape(), (Shape{3, 2}));
  EXPECT_EQ(mt(2, 1), 6.0);
  EXPECT_TRUE(bitwise_equal(transpose(mt), m));
  EXPECT_FALSE(bitwise_equal(Tensor({1}, {0.0}), Tensor({1}, {-0.0})));
}

TEST(Tensor, FirstNonFinite) {
  Tensor t({3}, {1.0, std::nan(""), 2.0});
  EXPECT_EQ(t.first_non_finite(), 1u);
  EXPECT_EQ(Tensor({2}).first_non_finite(), 2u);
}

}  // namespace
}  // namespace qixai
