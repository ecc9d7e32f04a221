// SPDX-License-Identifier: Apache-2.0
#include "qixai/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "qixai/error.hpp"
#include "qixai/parallel.hpp"

namespace qixai {

namespace {

double output_at(const Model& model, const Tensor& sample, std::size_t index) {
  return model.predict(sample)[index];
}

}  // namespace

AttributionMap integrated_gradients(const Model& model, const Tensor& input,
                                    const Tensor& baseline, const IgOptions& options) {
  if (input.shape() != baseline.shape()) {
    throw DataError("input shape " + shape_to_string(input.shape()) +
                    " differs from baseline shape " + shape_to_string(baseline.shape()));
  }
  if (input.rank() == 0 || input.shape()[0] != 1) {
    throw DataError("integrated gradients expects a single sample with leading extent 1");
  }
  if (options.steps < 1) throw DataError("integrated gradients needs steps >= 1");
  if (options.sub_batch < 1) throw DataError("integrated gradients needs sub_batch >= 1");
  if (options.output_index >= model.output_width()) {
    throw DataError("output index " + std::to_string(options.output_index) +
                    " out of range for output width " + std::to_string(model.output_width()));
  }

  const std::size_t elems = input.size();
  std::vector<double> diff(elems);
  for (std::size_t i = 0; i < elems; ++i) diff[i] = input[i] - baseline[i];

  const std::size_t steps = options.steps;
  const std::size_t groups = (steps + options.sub_batch - 1) / options.sub_batch;
  const std::size_t wave = std::max<std::size_t>(1, thread_count());

  // Groups of path points run concurrently a wave at a time; the per-step
  // gradients are then summed in ascending step order.
  std::vector<double> total(elems, 0.0);
  for (std::size_t first = 0; first < groups; first += wave) {
    const std::size_t count = std::min(wave, groups - first);
    std::vector<std::optional<Tensor>> grads(count);
    parallel_for(count, [&](std::size_t g) {
      const std::size_t t0 = (first + g) * options.sub_batch;
      const std::size_t n = std::min(options.sub_batch, steps - t0);
      Shape shape = input.shape();
      shape[0] = n;
      Tensor points(shape);
      for (std::size_t k = 0; k < n; ++k) {
        const double alpha = (static_cast<double>(t0 + k) + 0.5) / static_cast<double>(steps);
        double* p = points.data().data() + k * elems;
        for (std::size_t i = 0; i < elems; ++i) p[i] = baseline[i] + alpha * diff[i];
      }
      grads[g] = model.gradient_batch(points, options.output_index);
    });
    for (const auto& g : grads) {
      const std::size_t n = g->shape()[0];
      for (std::size_t k = 0; k < n; ++k) {
        const double* row = g->data().data() + k * elems;
        for (std::size_t i = 0; i < elems; ++i) total[i] += row[i];
      }
    }
  }

  Tensor attributions(input.shape());
  const double inv_steps = 1.0 / static_cast<double>(steps);
  for (std::size_t i = 0; i < elems; ++i) attributions[i] = diff[i] * (total[i] * inv_steps);

  AttributionMap map{std::move(attributions), "", "", steps, options.output_index, 0.0,
                     output_at(model, input, options.output_index),
                     output_at(model, baseline, options.output_index)};
  map.completeness_gap = completeness_gap(map);
  return map;
}

double completeness_gap(const AttributionMap& map) {
  double sum = 0.0;
  for (double v : map.attributions.data()) sum += v;
  return std::abs(sum - (map.f_input - map.f_baseline));
}

AttributionSummary attribution_summary(const Tensor& attributions, std::size_t top_k) {
  if (top_k < 1) throw DataError("attribution summary needs top_k >= 1");
  AttributionSummary s;
  double sum = 0.0;
  s.max_positive = attributions[0];
  s.min_negative = attributions[0];
  for (double v : attributions.data()) {
    sum += v;
    s.max_positive = std::max(s.max_positive, v);
    s.min_negative = std::min(s.min_negative, v);
  }
  s.mean = std::clamp(sum / static_cast<double>(attributions.size()), s.min_negative,
                      s.max_positive);

  std::vector<std::size_t> order(attributions.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t k = std::min(top_k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (attributions[a] != attributions[b]) return attributions[a] > attributions[b];
                      return a < b;
                    });
  for (std::size_t i = 0; i < k; ++i) {
    s.top_locations.push_back({attributions.unravel(order[i]), attributions[order[i]]});
  }
  return s;
}

Tensor attribution_to_heatmap(const Tensor& attributions) {
  if (attributions.rank() != 4 || attributions.shape()[0] != 1) {
    throw DataError("heatmap expects single-sample 1 x H x W x C attributions, got shape " +
                    shape_to_string(attributions.shape()));
  }
  const std::size_t h = attributions.shape()[1];
  const std::size_t w = attributions.shape()[2];
  const std::size_t c = attributions.shape()[3];
  Tensor map = Tensor::matrix(h, w);
  for (std::size_t p = 0; p < h * w; ++p) {
    double sum = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) sum += std::abs(attributions[p * c + ch]);
    map[p] = sum;
  }
  const auto [lo, hi] = std::minmax_element(map.data().begin(), map.data().end());
  const double min = *lo;
  const double range = *hi - *lo;
  for (double& v : map.data()) v = range > 0.0 ? (v - min) / range : 0.0;
  return map;
}

}  // namespace qixai
