// SPDX-License-Identifier: Apache-2.0
#include "qixai/model.hpp"

#include <algorithm>
#include <cmath>

#include "qixai/error.hpp"

namespace qixai {

namespace {

struct SpatialDims {
  std::size_t n, h, w, c;
};

SpatialDims dims4(const Tensor& t) {
  return {t.shape()[0], t.shape()[1], t.shape()[2], t.shape()[3]};
}

/// Low-side zero padding. "same" pads (out - 1) * stride + kernel - in in
/// total, with the odd element on the high side.
std::size_t pad_low(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                    Padding padding) {
  if (padding == Padding::valid) return 0;
  const std::size_t needed = (out - 1) * stride + kernel;
  return needed > in ? (needed - in) / 2 : 0;
}

Tensor conv2d_forward(const Tensor& in, const Conv2dParams& p, const Tensor& kernel,
                      const Tensor& bias, const Shape& out_sample) {
  const auto [n, h, w, c] = dims4(in);
  const std::size_t oh_n = out_sample[0];
  const std::size_t ow_n = out_sample[1];
  const std::size_t co_n = p.out_channels;
  const std::size_t top = pad_low(h, oh_n, p.kernel_h, p.stride, p.padding);
  const std::size_t left = pad_low(w, ow_n, p.kernel_w, p.stride, p.padding);

  Tensor out({n, oh_n, ow_n, co_n});
  const double* x = in.data().data();
  const double* k = kernel.data().data();
  double* y = out.data().data();
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t oh = 0; oh < oh_n; ++oh) {
      for (std::size_t ow = 0; ow < ow_n; ++ow) {
        double* acc = y + ((s * oh_n + oh) * ow_n + ow) * co_n;
        std::copy_n(bias.data().data(), co_n, acc);
        for (std::size_t kh = 0; kh < p.kernel_h; ++kh) {
          const std::size_t ih = oh * p.stride + kh;
          if (ih < top || ih - top >= h) continue;
          for (std::size_t kw = 0; kw < p.kernel_w; ++kw) {
            const std::size_t iw = ow * p.stride + kw;
            if (iw < left || iw - left >= w) continue;
            const double* pixel = x + ((s * h + (ih - top)) * w + (iw - left)) * c;
            const double* krow = k + (kh * p.kernel_w + kw) * c * co_n;
            for (std::size_t ci = 0; ci < c; ++ci) {
              const double v = pixel[ci];
              const double* kc = krow + ci * co_n;
              for (std::size_t co = 0; co < co_n; ++co) acc[co] += v * kc[co];
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor conv2d_backward(const Tensor& in, const Conv2dParams& p, const Tensor& kernel,
                       const Tensor& upstream) {
  const auto [n, h, w, c] = dims4(in);
  const std::size_t oh_n = upstream.shape()[1];
  const std::size_t ow_n = upstream.shape()[2];
  const std::size_t co_n = p.out_channels;
  const std::size_t top = pad_low(h, oh_n, p.kernel_h, p.stride, p.padding);
  const std::size_t left = pad_low(w, ow_n, p.kernel_w, p.stride, p.padding);

  Tensor grad(in.shape());
  const double* k = kernel.data().data();
  const double* g = upstream.data().data();
  double* dx = grad.data().data();
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t oh = 0; oh < oh_n; ++oh) {
      for (std::size_t ow = 0; ow < ow_n; ++ow) {
        const double* gy = g + ((s * oh_n + oh) * ow_n + ow) * co_n;
        for (std::size_t kh = 0; kh < p.kernel_h; ++kh) {
          const std::size_t ih = oh * p.stride + kh;
          if (ih < top || ih - top >= h) continue;
          for (std::size_t kw = 0; kw < p.kernel_w; ++kw) {
            const std::size_t iw = ow * p.stride + kw;
            if (iw < left || iw - left >= w) continue;
            double* pixel = dx + ((s * h + (ih - top)) * w + (iw - left)) * c;
            const double* krow = k + (kh * p.kernel_w + kw) * c * co_n;
            for (std::size_t ci = 0; ci < c; ++ci) {
              const double* kc = krow + ci * co_n;
              double sum = 0.0;
              for (std::size_t co = 0; co < co_n; ++co) sum += gy[co] * kc[co];
              pixel[ci] += sum;
            }
          }
        }
      }
    }
  }
  return grad;
}

struct PoolGeometry {
  std::size_t ph, pw, sh, sw;
};

PoolGeometry pool_geometry(const MaxPool2dParams& p) {
  return {p.pool_h, p.pool_w, p.stride ? p.stride : p.pool_h, p.stride ? p.stride : p.pool_w};
}

// Flat input offset of the window maximum; first occurrence in row-major
// window order wins ties.
template <typename Visit>
void for_each_pool_argmax(const Tensor& in, const MaxPool2dParams& p, const Shape& out_sample,
                          Visit visit) {
  const auto [n, h, w, c] = dims4(in);
  const auto g = pool_geometry(p);
  const double* x = in.data().data();
  std::size_t out_index = 0;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t oh = 0; oh < out_sample[0]; ++oh) {
      for (std::size_t ow = 0; ow < out_sample[1]; ++ow) {
        for (std::size_t ch = 0; ch < c; ++ch, ++out_index) {
          std::size_t best = ((s * h + oh * g.sh) * w + ow * g.sw) * c + ch;
          for (std::size_t i = 0; i < g.ph; ++i) {
            for (std::size_t j = 0; j < g.pw; ++j) {
              const std::size_t at = ((s * h + oh * g.sh + i) * w + ow * g.sw + j) * c + ch;
              if (x[at] > x[best]) best = at;
            }
          }
          visit(out_index, best);
        }
      }
    }
  }
}

Tensor maxpool_forward(const Tensor& in, const MaxPool2dParams& p, const Shape& out_sample) {
  Tensor out({in.shape()[0], out_sample[0], out_sample[1], out_sample[2]});
  for_each_pool_argmax(in, p, out_sample,
                       [&](std::size_t o, std::size_t best) { out[o] = in[best]; });
  return out;
}

Tensor maxpool_backward(const Tensor& in, const MaxPool2dParams& p, const Shape& out_sample,
                        const Tensor& upstream) {
  Tensor grad(in.shape());
  for_each_pool_argmax(in, p, out_sample,
                       [&](std::size_t o, std::size_t best) { grad[best] += upstream[o]; });
  return grad;
}

Tensor gap_forward(const Tensor& in) {
  const auto [n, h, w, c] = dims4(in);
  Tensor out({n, c});
  const double scale = 1.0 / static_cast<double>(h * w);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double sum = 0.0;
      for (std::size_t i = 0; i < h * w; ++i) sum += in[(s * h * w + i) * c + ch];
      out[s * c + ch] = sum * scale;
    }
  }
  return out;
}

Tensor gap_backward(const Tensor& in, const Tensor& upstream) {
  const auto [n, h, w, c] = dims4(in);
  Tensor grad(in.shape());
  const double scale = 1.0 / static_cast<double>(h * w);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < h * w; ++i) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        grad[(s * h * w + i) * c + ch] = upstream[s * c + ch] * scale;
      }
    }
  }
  return grad;
}

Tensor dense_forward(const Tensor& in, const Tensor& kernel, const Tensor& bias) {
  const std::size_t n = in.shape()[0];
  const std::size_t fin = kernel.shape()[0];
  const std::size_t fout = kernel.shape()[1];
  Tensor out({n, fout});
  for (std::size_t s = 0; s < n; ++s) {
    double* acc = out.data().data() + s * fout;
    std::copy_n(bias.data().data(), fout, acc);
    for (std::size_t i = 0; i < fin; ++i) {
      const double v = in[s * fin + i];
      const double* krow = kernel.data().data() + i * fout;
      for (std::size_t o = 0; o < fout; ++o) acc[o] += v * krow[o];
    }
  }
  return out;
}

Tensor dense_backward(const Tensor& in, const Tensor& kernel, const Tensor& upstream) {
  const std::size_t n = in.shape()[0];
  const std::size_t fin = kernel.shape()[0];
  const std::size_t fout = kernel.shape()[1];
  Tensor grad(in.shape());
  for (std::size_t s = 0; s < n; ++s) {
    const double* g = upstream.data().data() + s * fout;
    for (std::size_t i = 0; i < fin; ++i) {
      const double* krow = kernel.data().data() + i * fout;
      double sum = 0.0;
      for (std::size_t o = 0; o < fout; ++o) sum += g[o] * krow[o];
      grad[s * fin + i] = sum;
    }
  }
  return grad;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Shape batched(std::size_t n, const Shape& sample) {
  Shape s{n};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

}  // namespace

void ActivationSet::add(std::string name, Tensor activation) {
  if (find(name)) throw DataError("duplicate activation '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(activation));
}

const Tensor* ActivationSet::find(std::string_view name) const noexcept {
  for (const auto& [n, t] : entries_) {
    if (n == name) return &t;
  }
  return nullptr;
}

const Tensor& ActivationSet::at(std::string_view name) const {
  if (const Tensor* t = find(name)) return *t;
  std::string available;
  for (const auto& [n, t] : entries_) available += (available.empty() ? "" : ", ") + n;
  throw DataError("no activation for layer '" + std::string(name) + "' (available: " +
                  available + ")");
}

Model load_model(ModelSpec spec, const TensorArchive& weights) {
  Model model;
  model.spec_ = std::move(spec);
  model.shapes_ = infer_shapes(model.spec_);

  Shape input = model.spec_.input_shape;
  for (std::size_t i = 0; i < model.spec_.layers.size(); ++i) {
    const LayerSpec& layer = model.spec_.layers[i];
    if (auto expected = expected_weight_shapes(layer, input)) {
      for (const auto& [suffix, shape] : {std::pair<const char*, const Shape&>{".kernel", expected->kernel},
                                          std::pair<const char*, const Shape&>{".bias", expected->bias}}) {
        const std::string entry = layer.name + suffix;
        const Tensor* t = weights.find(entry);
        if (!t) throw DataError("missing weight entry '" + entry + "'");
        if (t->shape() != shape) {
          throw DataError("layer '" + layer.name + "': " + std::string(suffix + 1) +
                          " shape mismatch: expected " + shape_to_string(shape) + ", found " +
                          shape_to_string(t->shape()));
        }
        if (std::size_t bad = t->first_non_finite(); bad != t->size()) {
          throw DataError("weight entry '" + entry + "' has a non-finite value at flat index " +
                          std::to_string(bad));
        }
        model.weights_.set(entry, *t);
      }
    }
    input = model.shapes_[i];
  }
  model.bind_weights();
  return model;
}

void Model::bind_weights() {
  bound_.assign(spec_.layers.size(), std::nullopt);
  const auto& entries = weights_.entries();
  auto index_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].first == name) return i;
    }
    throw DataError("missing weight entry '" + name + "'");
  };
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& layer = spec_.layers[i];
    if (layer.kind == LayerKind::conv2d || layer.kind == LayerKind::dense) {
      bound_[i] = LayerWeights{index_of(layer.name + ".kernel"), index_of(layer.name + ".bias")};
    }
  }
}

std::size_t Model::output_width() const { return shape_product(shapes_.back()); }

void Model::check_batch(const Tensor& batch) const {
  const Shape& s = batch.shape();
  if (s.size() != spec_.input_shape.size() + 1 ||
      !std::equal(spec_.input_shape.begin(), spec_.input_shape.end(), s.begin() + 1)) {
    throw DataError("input shape " + shape_to_string(s) + " does not match model input [N]+" +
                    shape_to_string(spec_.input_shape));
  }
}

Tensor Model::run(const Tensor& batch, std::vector<Tensor>* trace) const {
  check_batch(batch);
  const std::size_t n = batch.shape()[0];
  const auto& entries = weights_.entries();

  Tensor current = batch;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& layer = spec_.layers[i];
    Tensor next = [&]() -> Tensor {
      switch (layer.kind) {
        case LayerKind::conv2d:
          return conv2d_forward(current, std::get<Conv2dParams>(layer.params),
                                entries[bound_[i]->kernel].second, entries[bound_[i]->bias].second,
                                shapes_[i]);
        case LayerKind::maxpool2d:
          return maxpool_forward(current, std::get<MaxPool2dParams>(layer.params), shapes_[i]);
        case LayerKind::global_avg_pool:
          return gap_forward(current);
        case LayerKind::flatten:
          return reshape(current, batched(n, shapes_[i]));
        case LayerKind::dense:
          return dense_forward(current, entries[bound_[i]->kernel].second,
                               entries[bound_[i]->bias].second);
        case LayerKind::relu: {
          Tensor out = current;
          for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
          return out;
        }
        case LayerKind::sigmoid: {
          Tensor out = current;
          for (double& v : out.data()) v = sigmoid(v);
          return out;
        }
      }
      throw DataError("unsupported layer kind");
    }();
    if (trace) trace->push_back(next);
    current = std::move(next);
  }
  return current;
}

Tensor Model::backward(const Tensor& batch, const std::vector<Tensor>& trace,
                       Tensor upstream) const {
  const auto& entries = weights_.entries();
  for (std::size_t i = spec_.layers.size(); i-- > 0;) {
    const LayerSpec& layer = spec_.layers[i];
    const Tensor& in = i == 0 ? batch : trace[i - 1];
    switch (layer.kind) {
      case LayerKind::conv2d:
        upstream = conv2d_backward(in, std::get<Conv2dParams>(layer.params),
                                   entries[bound_[i]->kernel].second, upstream);
        break;
      case LayerKind::maxpool2d:
        upstream = maxpool_backward(in, std::get<MaxPool2dParams>(layer.params), shapes_[i],
                                    upstream);
        break;
      case LayerKind::global_avg_pool:
        upstream = gap_backward(in, upstream);
        break;
      case LayerKind::flatten:
        upstream = reshape(upstream, in.shape());
        break;
      case LayerKind::dense:
        upstream = dense_backward(in, entries[bound_[i]->kernel].second, upstream);
        break;
      case LayerKind::relu:
        for (std::size_t j = 0; j < upstream.size(); ++j) {
          if (!(in[j] > 0.0)) upstream[j] = 0.0;
        }
        break;
      case LayerKind::sigmoid: {
        const Tensor& out = trace[i];
        for (std::size_t j = 0; j < upstream.size(); ++j) {
          upstream[j] *= out[j] * (1.0 - out[j]);
        }
        break;
      }
    }
  }
  return upstream;
}

ForwardResult Model::forward(const Tensor& batch) const {
  std::vector<Tensor> trace;
  trace.reserve(spec_.layers.size());
  Tensor output = run(batch, &trace);
  ActivationSet activations;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    activations.add(spec_.layers[i].name, std::move(trace[i]));
  }
  return {std::move(output), std::move(activations)};
}

Tensor Model::predict(const Tensor& batch) const { return run(batch, nullptr); }

Tensor Model::gradient_batch(const Tensor& batch, std::size_t output_index) const {
  const std::size_t width = output_width();
  if (output_index >= width) {
    throw DataError("output index " + std::to_string(output_index) +
                    " out of range for output width " + std::to_string(width));
  }
  std::vector<Tensor> trace;
  trace.reserve(spec_.layers.size());
  run(batch, &trace);
  Tensor seed(trace.back().shape());
  for (std::size_t s = 0; s < batch.shape()[0]; ++s) seed[s * width + output_index] = 1.0;
  return backward(batch, trace, std::move(seed));
}

Tensor Model::gradient_wrt_input(const Tensor& input, std::size_t output_index) const {
  check_batch(input);
  if (input.shape()[0] != 1) {
    throw DataError("gradient_wrt_input expects a single sample, got batch extent " +
                    std::to_string(input.shape()[0]));
  }
  return gradient_batch(input, output_index);
}

Model Model::logit() const {
  if (spec_.layers.empty() || spec_.layers.back().kind != LayerKind::sigmoid) {
    throw DataError("model does not end in a sigmoid layer; attribute the raw output instead");
  }
  if (spec_.layers.size() == 1) throw DataError("model consists of a single sigmoid layer");
  ModelSpec truncated = spec_;
  truncated.layers.pop_back();
  return load_model(std::move(truncated), weights_);
}

}  // namespace qixai
