// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qixai/tensor.hpp"

namespace qixai {

inline constexpr std::size_t kDefaultBins = 20;

/// Uniform-width histogram binning over [min, max].
///
/// Value v lands in floor((v - min) / width), with v == max clamped into the
/// last bin. When min == max every value goes to bin 0 and the edges use a
/// unit width starting at min.
struct Digitization {
  std::vector<std::size_t> bins;
  std::vector<double> edges;  // n_bins + 1, ascending
  std::size_t n_bins = 0;
};

Digitization digitize(std::span<const double> values, std::size_t n_bins = kDefaultBins);

/// Shannon entropy in nats over occupied bins.
double entropy(const Digitization& d);

/// Discrete mutual information in nats from the joint contingency table.
/// Clamped at zero.
double mutual_information(const Digitization& x, const Digitization& y);
/// Same accumulation without the final clamp.
double mutual_information_unclamped(const Digitization& x, const Digitization& y);

/// Flattens both pooled matrices (all samples x all channels), bins each
/// independently and returns their mutual information. The flattened lengths
/// must match.
double layer_mi(const Tensor& pooled_a, const Tensor& pooled_b,
                std::size_t n_bins = kDefaultBins);

enum class FeatureMapMode {
  pooled,   // GAP each channel to one value per sample
  spatial,  // bin every spatial value of the channel
};

std::string_view to_string(FeatureMapMode mode) noexcept;

struct FeatureMapRef {
  std::string layer;
  std::size_t channel = 0;
  friend bool operator==(const FeatureMapRef&, const FeatureMapRef&) = default;
};

struct MiPair {
  FeatureMapRef map_a;
  FeatureMapRef map_b;
  double mi_nats = 0.0;
  friend bool operator==(const MiPair&, const MiPair&) = default;
};

struct PairwiseMiOptions {
  std::size_t n_bins = kDefaultBins;
  std::size_t top_k = 10;
  FeatureMapMode mode = FeatureMapMode::pooled;
  std::string layer_a = "a";
  std::string layer_b = "b";
};

/// MI for every channel pair of two NHWC activation tensors. Returns the
/// top_k pairs by descending MI, ties broken by (channel_a, channel_b).
std::vector<MiPair> pairwise_feature_map_mi(const Tensor& acts_a, const Tensor& acts_b,
                                            const PairwiseMiOptions& options);

/// Pooled-mode scan over columns of already pooled N x C matrices.
std::vector<MiPair> pairwise_pooled_mi(const Tensor& pooled_a, const Tensor& pooled_b,
                                       const PairwiseMiOptions& options);

}  // namespace qixai
