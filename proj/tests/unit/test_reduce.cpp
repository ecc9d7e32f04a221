// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "qixai/decomp.hpp"
#include "qixai/error.hpp"
#include "qixai/reduce.hpp"

namespace qixai {
namespace {

double frobenius(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return std::sqrt(s);
}

TEST(GlobalAveragePool, ConstantMap) {
  const Tensor p = global_average_pool(Tensor({2, 3, 3, 4}, 7.0));
  EXPECT_EQ(p.shape(), (Shape{2, 4}));
  for (double v : p.data()) EXPECT_EQ(v, 7.0);
}

TEST(GlobalAveragePool, ArithmeticMean) {
  EXPECT_EQ(global_average_pool(Tensor({1, 2, 2, 1}, {1, 2, 3, 4})).values(), (std::vector<double>{2.5}));
}

TEST(GlobalAveragePool, MatchesLoopOracle) {
  oracle::Rng rng(12);
  const Tensor x = oracle::random_tensor({3, 5, 5, 4}, rng);
  const Tensor p = global_average_pool(x);
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t c = 0; c < 4; ++c) {
      long double sum = 0;
      for (std::size_t h = 0; h < 5; ++h)
        for (std::size_t w = 0; w < 5; ++w) sum += x.data()[x.offset({n, h, w, c})];
      EXPECT_NEAR(p(n, c), static_cast<double>(sum / 25), 1e-12);
    }
  EXPECT_THROW(global_average_pool(Tensor({3, 4})), DataError);
}

TEST(TruncateChannels, KeepsLeadingColumns) {
  const Tensor m({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(truncate_channels(m, 3), m);
  EXPECT_EQ(truncate_channels(m, 2).values(), (std::vector<double>{1, 2, 4, 5}));
  EXPECT_THROW(truncate_channels(Tensor({4, 16}), 32), DataError);
}

TEST(Pca, SymmetricTwoPointComponent) {
  const PcaModel m = fit_pca(Tensor({2, 2}, {1, 0, 0, 1}), 1);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::fabs(m.components(0, 0)), r, 1e-12);
  EXPECT_NEAR(m.components(0, 0), -m.components(0, 1), 1e-12);
}

TEST(Pca, RankOneDataHasOneComponent) {
  oracle::Rng rng(6);
  const Tensor v = oracle::random_matrix(1, 5, rng);
  Tensor data = Tensor::matrix(10, 5);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 5; ++j) data(i, j) = (static_cast<double>(i) - 3.0) * v(0, j);
  const PcaModel m = fit_pca(data, 5);
  EXPECT_GT(m.singular_values[0], 1.0);
  for (std::size_t k = 1; k < 5; ++k) EXPECT_LE(m.singular_values[k], 1e-10);
}

TEST(Pca, FullReconstruction) {
  oracle::Rng rng(50);
  const Tensor data = oracle::random_matrix(50, 8, rng);
  const PcaModel m = fit_pca(data, 8);
  const Tensor back = inverse_transform_pca(m, transform_pca(m, data));
  Tensor diff = data;
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= back[i];
  Tensor centered = data;
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = 0; j < 8; ++j) centered(i, j) -= m.mean[j];
  EXPECT_LE(frobenius(diff) / frobenius(centered), 1e-8);
}

TEST(Pca, TransformIsLeftFactorTimesSigma) {
  oracle::Rng rng(7);
  const Tensor data = oracle::random_matrix(20, 6, rng);
  const PcaModel m = fit_pca(data, 6);
  const Tensor projected = transform_pca(m, data);
  Tensor centered = data;
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 6; ++j) centered(i, j) -= m.mean[j];
  const SvdResult s = svd(centered);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(projected(i, k), s.u(i, k) * s.s[k], 1e-8);
}

TEST(Pca, MeanMapsToOrigin) {
  oracle::Rng rng(8);
  const PcaModel m = fit_pca(oracle::random_matrix(12, 4, rng), 3);
  const Tensor z = transform_pca(m, Tensor({1, 4}, m.mean));
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(transform_pca(m, Tensor({1, 5})), DataError);
}

TEST(Pca, Preconditions) {
  EXPECT_THROW(fit_pca(Tensor({1, 4}, 1.0), 1), DataError);
  EXPECT_THROW(fit_pca(Tensor({3, 4}, 1.0), 4), DataError);
  oracle::Rng rng(1);
  const PcaModel uncentered = fit_pca(oracle::random_matrix(6, 3, rng), 2, false);
  EXPECT_FALSE(uncentered.centered);
  for (double v : uncentered.mean) EXPECT_EQ(v, 0.0);
}

TEST(ExplainedVariance, HandFormulas) {
  const std::vector<double> s{2, 1, 1};
  const auto mass = explained_variance(s, VarianceMode::singular_mass);
  EXPECT_EQ(mass.ratios, (std::vector<double>{0.5, 0.25, 0.25}));
  EXPECT_EQ(mass.cumulative, (std::vector<double>{0.5, 0.75, 1.0}));
  const auto var = explained_variance(s, VarianceMode::variance_ratio);
  EXPECT_DOUBLE_EQ(var.ratios[0], 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(var.ratios[1], 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(var.cumulative[2], 1.0);
  const std::vector<double> s2{2, 0};
  EXPECT_EQ(explained_variance(s2, VarianceMode::variance_ratio).ratios, (std::vector<double>{1.0, 0.0}));
}

TEST(ExplainedVariance, RejectsInvalidSpectra) {
  const std::vector<double> increasing{3, 4};
  EXPECT_THROW(explained_variance(increasing, VarianceMode::variance_ratio), DataError);
  const std::vector<double> zero{0, 0};
  EXPECT_THROW(explained_variance(zero, VarianceMode::singular_mass), DataError);
  const std::vector<double> negative{1, -1};
  EXPECT_THROW(explained_variance(negative, VarianceMode::singular_mass), DataError);
}

TEST(ExplainedVariance, RandomSpectraProperties) {
  oracle::Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const PcaModel m = fit_pca(oracle::random_matrix(30, 10, rng), 10);
    for (VarianceMode mode : {VarianceMode::variance_ratio, VarianceMode::singular_mass}) {
      const auto ev = explained_variance(m.singular_values, mode);
      for (std::size_t i = 1; i < ev.ratios.size(); ++i) EXPECT_LE(ev.ratios[i], ev.ratios[i - 1]);
      EXPECT_LE(ev.cumulative.back(), 1.0 + 1e-12);
    }
  }
}

}  // namespace
}  // namespace qixai
