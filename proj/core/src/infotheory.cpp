// SPDX-License-Identifier: Apache-2.0
#include "qixai/infotheory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qixai/error.hpp"
#include "qixai/parallel.hpp"
#include "qixai/reduce.hpp"

namespace qixai {

namespace {

std::vector<std::size_t> histogram(const Digitization& d) {
  std::vector<std::size_t> counts(d.n_bins, 0);
  for (std::size_t b : d.bins) ++counts[b];
  return counts;
}

std::vector<double> column(const Tensor& m, std::size_t c) {
  std::vector<double> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = m(i, c);
  return out;
}

// All N*H*W values of one channel, in row-major order.
std::vector<double> channel_values(const Tensor& acts, std::size_t c) {
  const std::size_t channels = acts.shape().back();
  std::vector<double> out;
  out.reserve(acts.size() / channels);
  for (std::size_t i = c; i < acts.size(); i += channels) out.push_back(acts[i]);
  return out;
}

std::vector<MiPair> rank_pairs(const std::vector<Digitization>& a,
                               const std::vector<Digitization>& b,
                               const PairwiseMiOptions& options) {
  const std::size_t cb = b.size();
  std::vector<MiPair> pairs(a.size() * cb);
  parallel_for(pairs.size(), [&](std::size_t k) {
    const std::size_t i = k / cb;
    const std::size_t j = k % cb;
    pairs[k] = MiPair{{options.layer_a, i}, {options.layer_b, j}, mutual_information(a[i], b[j])};
  });
  // pairs are generated in (i, j) order, so a stable sort keeps that order on ties
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const MiPair& x, const MiPair& y) { return x.mi_nats > y.mi_nats; });
  if (pairs.size() > options.top_k) pairs.resize(options.top_k);
  return pairs;
}

void check_options(const PairwiseMiOptions& options) {
  if (options.top_k < 1) throw DataError("top_k must be at least 1");
  if (options.n_bins < 2) throw DataError("n_bins must be at least 2");
}

}  // namespace

Digitization digitize(std::span<const double> values, std::size_t n_bins) {
  if (n_bins < 2) throw DataError("digitize needs n_bins >= 2, got " + std::to_string(n_bins));
  if (values.empty()) throw DataError("digitize needs at least one value");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DataError("digitize input has a non-finite value at index " + std::to_string(i));
    }
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;

  Digitization d;
  d.n_bins = n_bins;
  d.bins.assign(values.size(), 0);
  d.edges.resize(n_bins + 1);
  if (lo == hi) {
    for (std::size_t i = 0; i <= n_bins; ++i) d.edges[i] = lo + static_cast<double>(i);
    return d;
  }
  const double width = (hi - lo) / static_cast<double>(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i) d.edges[i] = lo + static_cast<double>(i) * width;
  d.edges[n_bins] = hi;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bin = static_cast<std::size_t>(std::floor((values[i] - lo) / width));
    d.bins[i] = std::min(bin, n_bins - 1);
  }
  return d;
}

double entropy(const Digitization& d) {
  const double n = static_cast<double>(d.bins.size());
  double h = 0.0;
  for (std::size_t c : histogram(d)) {
    if (c == 0) continue;
    const double count = static_cast<double>(c);
    h += count / n * std::log(n / count);
  }
  return h;
}

double mutual_information_unclamped(const Digitization& x, const Digitization& y) {
  if (x.bins.size() != y.bins.size()) {
    throw DataError("mutual information needs equal lengths, got " +
                    std::to_string(x.bins.size()) + " and " + std::to_string(y.bins.size()));
  }
  if (x.bins.empty()) throw DataError("mutual information needs at least one observation");
  const std::vector<std::size_t> cx = histogram(x);
  const std::vector<std::size_t> cy = histogram(y);
  std::vector<std::size_t> joint(x.n_bins * y.n_bins, 0);
  for (std::size_t i = 0; i < x.bins.size(); ++i) ++joint[x.bins[i] * y.n_bins + y.bins[i]];

  const double n = static_cast<double>(x.bins.size());
  double mi = 0.0;
  for (std::size_t a = 0; a < x.n_bins; ++a) {
    for (std::size_t b = 0; b < y.n_bins; ++b) {
      const std::size_t c = joint[a * y.n_bins + b];
      if (c == 0) continue;
      const double count = static_cast<double>(c);
      mi += count / n *
            std::log(count * n / (static_cast<double>(cx[a]) * static_cast<double>(cy[b])));
    }
  }
  return mi;
}

double mutual_information(const Digitization& x, const Digitization& y) {
  return std::max(0.0, mutual_information_unclamped(x, y));
}

double layer_mi(const Tensor& pooled_a, const Tensor& pooled_b, std::size_t n_bins) {
  if (pooled_a.rank() != 2 || pooled_b.rank() != 2) {
    throw DataError("layer MI expects pooled N x C matrices");
  }
  if (pooled_a.rows() != pooled_b.rows()) {
    throw DataError("layer MI needs the same sample count, got " +
                    std::to_string(pooled_a.rows()) + " and " + std::to_string(pooled_b.rows()));
  }
  if (pooled_a.size() != pooled_b.size()) {
    throw DataError("layer MI compares flattened pooled activations of equal length, got " +
                    std::to_string(pooled_a.size()) + " and " + std::to_string(pooled_b.size()) +
                    " (channel counts " + std::to_string(pooled_a.cols()) + " vs " +
                    std::to_string(pooled_b.cols()) +
                    "); enable replicate_paper_truncation to slice both to pca_components");
  }
  return mutual_information(digitize(pooled_a.data(), n_bins), digitize(pooled_b.data(), n_bins));
}

std::string_view to_string(FeatureMapMode mode) noexcept {
  return mode == FeatureMapMode::pooled ? "pooled" : "spatial";
}

std::vector<MiPair> pairwise_pooled_mi(const Tensor& pooled_a, const Tensor& pooled_b,
                                       const PairwiseMiOptions& options) {
  check_options(options);
  if (pooled_a.rank() != 2 || pooled_b.rank() != 2) {
    throw DataError("pooled feature-map MI expects N x C matrices");
  }
  if (pooled_a.rows() != pooled_b.rows()) {
    throw DataError("feature-map MI needs the same sample count, got " +
                    std::to_string(pooled_a.rows()) + " and " + std::to_string(pooled_b.rows()));
  }
  std::vector<Digitization> da;
  std::vector<Digitization> db;
  for (std::size_t c = 0; c < pooled_a.cols(); ++c) {
    da.push_back(digitize(column(pooled_a, c), options.n_bins));
  }
  for (std::size_t c = 0; c < pooled_b.cols(); ++c) {
    db.push_back(digitize(column(pooled_b, c), options.n_bins));
  }
  return rank_pairs(da, db, options);
}

std::vector<MiPair> pairwise_feature_map_mi(const Tensor& acts_a, const Tensor& acts_b,
                                            const PairwiseMiOptions& options) {
  check_options(options);
  if (acts_a.rank() != 4 || acts_b.rank() != 4) {
    throw DataError("feature-map MI expects NHWC activations, got shapes " +
                    shape_to_string(acts_a.shape()) + " and " + shape_to_string(acts_b.shape()));
  }
  if (acts_a.shape()[0] != acts_b.shape()[0]) {
    throw DataError("feature-map MI needs the same sample count");
  }
  if (options.mode == FeatureMapMode::pooled) {
    return pairwise_pooled_mi(global_average_pool(acts_a), global_average_pool(acts_b), options);
  }

  const std::size_t len_a = acts_a.size() / acts_a.shape()[3];
  const std::size_t len_b = acts_b.size() / acts_b.shape()[3];
  if (len_a != len_b) {
    throw DataError("spatial feature-map MI needs equal N*H*W per channel, got " +
                    std::to_string(len_a) + " and " + std::to_string(len_b) +
                    "; use pooled mode for layers of different spatial size");
  }
  std::vector<Digitization> da;
  std::vector<Digitization> db;
  for (std::size_t c = 0; c < acts_a.shape()[3]; ++c) {
    da.push_back(digitize(channel_values(acts_a, c), options.n_bins));
  }
  for (std::size_t c = 0; c < acts_b.shape()[3]; ++c) {
    db.push_back(digitize(channel_values(acts_b, c), options.n_bins));
  }
  return rank_pairs(da, db, options);
}

}  // namespace qixai
