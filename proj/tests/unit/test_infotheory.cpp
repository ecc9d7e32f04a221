// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "qixai/error.hpp"
#include "qixai/infotheory.hpp"

namespace qixai {
namespace {

std::vector<double> equiprobable(std::size_t bins, std::size_t per_bin) {
  std::vector<double> v;
  for (std::size_t b = 0; b < bins; ++b)
    for (std::size_t k = 0; k < per_bin; ++k) v.push_back(static_cast<double>(b));
  return v;
}

TEST(Digitize, Endpoints) {
  const std::vector<double> v{0.0, 1.0};
  const Digitization d = digitize(v, 2);
  EXPECT_EQ(d.bins, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(d.edges, (std::vector<double>{0.0, 0.5, 1.0}));
}

TEST(Digitize, ConstantValues) {
  const std::vector<double> v(7, 3.25);
  const Digitization d = digitize(v, 20);
  for (auto b : d.bins) EXPECT_EQ(b, 0u);
  EXPECT_EQ(d.edges.front(), 3.25);
  EXPECT_EQ(d.edges.size(), 21u);
}

TEST(Digitize, UniformCounts) {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 0.0);
  const Digitization d = digitize(v, 20);
  std::vector<int> counts(20, 0);
  for (auto b : d.bins) ++counts[b];
  for (int c : counts) EXPECT_EQ(c, 5);
}

TEST(Digitize, MatchesOracleBinning) {
  oracle::Rng rng(60);
  const Tensor t = oracle::random_tensor({500}, rng, -3.0, 5.0);
  EXPECT_EQ(digitize(t.data(), 13).bins, oracle::uniform_bins(t.data(), 13));
}

TEST(Digitize, Preconditions) {
  const std::vector<double> v{1.0, 2.0};
  EXPECT_THROW(digitize(v, 1), DataError);
  EXPECT_THROW(digitize(std::vector<double>{}, 4), DataError);
  EXPECT_THROW(digitize(std::vector<double>{1.0, NAN}, 4), DataError);
}

TEST(Entropy, AnalyticValues) {
  EXPECT_EQ(entropy(digitize(std::vector<double>(5, 1.0), 4)), 0.0);
  EXPECT_NEAR(entropy(digitize(equiprobable(2, 8), 2)), std::log(2.0), 1e-15);
  EXPECT_NEAR(entropy(digitize(equiprobable(20, 3), 20)), std::log(20.0), 1e-12);
}

TEST(MutualInformation, ProductGridIsExactlyZero) {
  std::vector<double> x, y;
  for (int i = 0; i < 16; ++i) {
    x.push_back(i % 4);
    y.push_back((i / 4) % 4);
  }
  EXPECT_EQ(mutual_information(digitize(x, 4), digitize(y, 4)), 0.0);
}

TEST(MutualInformation, SelfInformationIsEntropy) {
  const Digitization d = digitize(equiprobable(20, 5), 20);
  EXPECT_NEAR(mutual_information(d, d), std::log(20.0), 1e-12);
  EXPECT_EQ(mutual_information(d, d), entropy(d));
}

TEST(MutualInformation, MatchesContingencyOracle) {
  oracle::Rng rng(61);
  std::normal_distribution<double> noise;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x(400), y(400);
    for (std::size_t i = 0; i < 400; ++i) {
      x[i] = noise(rng);
      y[i] = 0.7 * x[i] + noise(rng);
    }
    const Digitization dx = digitize(x, 10), dy = digitize(y, 10);
    EXPECT_NEAR(mutual_information(dx, dy), oracle::contingency_mi(dx.bins, dy.bins), 1e-12);
    EXPECT_NEAR(entropy(dx), oracle::plugin_entropy(dx.bins), 1e-12);
  }
}

TEST(MutualInformation, SymmetricAndNonnegative) {
  oracle::Rng rng(62);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor a = oracle::random_tensor({200}, rng);
    const Tensor b = oracle::random_tensor({200}, rng);
    const Digitization da = digitize(a.data(), 20), db = digitize(b.data(), 20);
    const double ab = mutual_information(da, db);
    EXPECT_GE(ab, 0.0);
    EXPECT_NEAR(ab, mutual_information(db, da), 1e-12);
  }
  EXPECT_THROW(mutual_information(digitize(std::vector<double>{1, 2}, 2),
                                  digitize(std::vector<double>{1, 2, 3}, 2)),
               DataError);
}

TEST(LayerMi, IdenticalLayersGiveEntropy) {
  oracle::Rng rng(63);
  const Tensor a = oracle::random_tensor({40, 8}, rng);
  EXPECT_EQ(layer_mi(a, a, 20), entropy(digitize(a.data(), 20)));
}

TEST(LayerMi, PermutationNull) {
  oracle::Rng rng(64);
  const Tensor a = oracle::random_tensor({1250, 8}, rng);
  std::vector<double> shuffled(a.data().begin(), a.data().end());
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const Tensor b({1250, 8}, shuffled);
  EXPECT_LT(layer_mi(a, b, 20), 0.05);
}

TEST(LayerMi, EqualsDirectCallOnFlattenedInputs) {
  oracle::Rng rng(65);
  const Tensor a = oracle::random_tensor({64, 32}, rng);
  const Tensor b = oracle::random_tensor({64, 32}, rng);
  const std::vector<double> fa(a.data().begin(), a.data().end());
  const std::vector<double> fb(b.data().begin(), b.data().end());
  EXPECT_EQ(layer_mi(a, b, 20), mutual_information(digitize(fa, 20), digitize(fb, 20)));
}

TEST(LayerMi, UnequalWidthsPointAtTruncation) {
  try {
    layer_mi(Tensor({4, 8}), Tensor({4, 16}), 20);
    FAIL() << "expected an error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("replicate_paper_truncation"), std::string::npos);
  }
}

TEST(PairwiseMi, ClonedChannelRanksFirst) {
  oracle::Rng rng(66);
  const Tensor a = oracle::random_tensor({50, 2, 2, 3}, rng);
  Tensor b = oracle::random_tensor({50, 2, 2, 4}, rng);
  for (std::size_t n = 0; n < 50; ++n)
    for (std::size_t h = 0; h < 2; ++h)
      for (std::size_t w = 0; w < 2; ++w) b[b.offset({n, h, w, 3})] = a[a.offset({n, h, w, 1})];
  PairwiseMiOptions opt;
  opt.mode = FeatureMapMode::spatial;
  opt.top_k = 3;
  const auto pairs = pairwise_feature_map_mi(a, b, opt);
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_EQ(pairs[0].map_a.channel, 1u);
  EXPECT_EQ(pairs[0].map_b.channel, 3u);
  std::vector<double> channel;
  for (std::size_t i = 1; i < a.size(); i += 3) channel.push_back(a[i]);
  EXPECT_EQ(pairs[0].mi_nats, entropy(digitize(channel, 20)));
}

TEST(PairwiseMi, ConstantChannelsKeepLexicographicOrder) {
  PairwiseMiOptions opt;
  opt.top_k = 20;
  const auto pairs = pairwise_feature_map_mi(Tensor({6, 2, 2, 2}, 1.0), Tensor({6, 2, 2, 3}, 2.0), opt);
  ASSERT_EQ(pairs.size(), 6u);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_EQ(pairs[k].mi_nats, 0.0);
    EXPECT_EQ(pairs[k].map_a.channel, k / 3);
    EXPECT_EQ(pairs[k].map_b.channel, k % 3);
  }
}

TEST(PairwiseMi, FullRankingMatchesExhaustiveOracle) {
  oracle::Rng rng(67);
  const Tensor a = oracle::random_tensor({80, 3, 3, 4}, rng);
  const Tensor b = oracle::random_tensor({80, 3, 3, 4}, rng);
  for (FeatureMapMode mode : {FeatureMapMode::pooled, FeatureMapMode::spatial}) {
    PairwiseMiOptions opt;
    opt.mode = mode;
    opt.top_k = 16;
    opt.n_bins = 8;
    const auto pairs = pairwise_feature_map_mi(a, b, opt);
    struct Ref {
      std::size_t i, j;
      double mi;
    };
    std::vector<Ref> refs;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        std::vector<double> xa, xb;
        for (std::size_t n = 0; n < 80; ++n) {
          double sa = 0, sb = 0;
          for (std::size_t p = 0; p < 9; ++p) {
            const double va = a[(n * 9 + p) * 4 + i], vb = b[(n * 9 + p) * 4 + j];
            if (mode == FeatureMapMode::spatial) {
              xa.push_back(va);
              xb.push_back(vb);
            }
            sa += va;
            sb += vb;
          }
          if (mode == FeatureMapMode::pooled) {
            xa.push_back(sa / 9);
            xb.push_back(sb / 9);
          }
        }
        refs.push_back({i, j, oracle::contingency_mi(oracle::uniform_bins(xa, 8), oracle::uniform_bins(xb, 8))});
      }
    std::stable_sort(refs.begin(), refs.end(), [](const Ref& x, const Ref& y) { return x.mi > y.mi; });
    ASSERT_EQ(pairs.size(), 16u);
    for (std::size_t k = 0; k < 16; ++k) {
      EXPECT_NEAR(pairs[k].mi_nats, refs[k].mi, 1e-12);
      // Ranking compares exact doubles; the oracle's ties only matter when values coincide.
      if (k + 1 < 16 && refs[k].mi - refs[k + 1].mi > 1e-9) {
        EXPECT_EQ(pairs[k].map_a.channel, refs[k].i);
        EXPECT_EQ(pairs[k].map_b.channel, refs[k].j);
      }
    }
  }
}

TEST(PairwiseMi, PooledScanMatchesSpatialPooledMode) {
  oracle::Rng rng(68);
  const Tensor a = oracle::random_tensor({30, 2, 2, 3}, rng);
  const Tensor b = oracle::random_tensor({30, 2, 2, 5}, rng);
  PairwiseMiOptions opt;
  opt.top_k = 15;
  const auto from_maps = pairwise_feature_map_mi(a, b, opt);
  Tensor pa = Tensor::matrix(30, 3), pb = Tensor::matrix(30, 5);
  for (std::size_t n = 0; n < 30; ++n)
    for (std::size_t p = 0; p < 4; ++p) {
      for (std::size_t c = 0; c < 3; ++c) pa(n, c) += a[(n * 4 + p) * 3 + c] / 4.0;
      for (std::size_t c = 0; c < 5; ++c) pb(n, c) += b[(n * 4 + p) * 5 + c] / 4.0;
    }
  const auto from_pooled = pairwise_pooled_mi(pa, pb, opt);
  ASSERT_EQ(from_maps.size(), from_pooled.size());
  for (std::size_t k = 0; k < from_maps.size(); ++k) {
    EXPECT_NEAR(from_maps[k].mi_nats, from_pooled[k].mi_nats, 1e-12);
  }
}

}  // namespace
}  // namespace qixai
