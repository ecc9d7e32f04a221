// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "qixai/model.hpp"
#include "qixai/tensor.hpp"

namespace qixai {

struct IgOptions {
  std::size_t steps = 100;
  std::size_t sub_batch = 10;
  std::size_t output_index = 0;
};

struct AttributionMap {
  Tensor attributions;
  std::string input_ref;
  std::string baseline_ref;
  std::size_t steps = 0;
  std::size_t output_index = 0;
  double completeness_gap = 0.0;
  double f_input = 0.0;
  double f_baseline = 0.0;
};

/// Integrated Gradients with the midpoint rule: alpha_t = (t - 0.5) / steps.
///
/// Gradients are evaluated sub_batch path points at a time and summed in
/// ascending t, so the grouping never changes the result. Targets the raw
/// model output; pass logit_of(model) to attribute a sigmoid network's logit.
AttributionMap integrated_gradients(const Model& model, const Tensor& input,
                                    const Tensor& baseline, const IgOptions& options = {});

/// |sum(attributions) - (f_input - f_baseline)|
double completeness_gap(const AttributionMap& map);

struct AttributionLocation {
  std::vector<std::size_t> index;
  double value = 0.0;
  friend bool operator==(const AttributionLocation&, const AttributionLocation&) = default;
};

struct AttributionSummary {
  double mean = 0.0;
  double max_positive = 0.0;  // largest element
  double min_negative = 0.0;  // smallest element
  std::vector<AttributionLocation> top_locations;
  friend bool operator==(const AttributionSummary&, const AttributionSummary&) = default;
};

/// Top locations are sorted by descending value; equal values keep row-major order.
AttributionSummary attribution_summary(const Tensor& attributions, std::size_t top_k);
inline AttributionSummary attribution_summary(const AttributionMap& map, std::size_t top_k) {
  return attribution_summary(map.attributions, top_k);
}

/// 1 x H x W x C attributions -> H x W map of channel-summed |attribution|,
/// min-max normalized to [0, 1]; a constant map becomes all zeros.
Tensor attribution_to_heatmap(const Tensor& attributions);
inline Tensor attribution_to_heatmap(const AttributionMap& map) {
  return attribution_to_heatmap(map.attributions);
}

}  // namespace qixai
