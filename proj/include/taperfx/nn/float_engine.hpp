/* Copyright 2026 The taperfx Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// 32-bit float reference path, batchnorm folding and max-abs calibration.
#pragma once

#include <taperfx/nn/dataset.hpp>
#include <taperfx/nn/model.hpp>
#include <taperfx/select.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace taperfx::nn {

namespace detail {

inline Tensor conv2d_float(const Layer& l, const Tensor& in, const Shape& out_shape) {
  Tensor out(out_shape);
  const int ih = in.shape[1];
  const int iw = in.shape[2];
  const int oh = out_shape[1];
  const int ow = out_shape[2];
  for (int o = 0; o < l.out_channels; ++o) {
    const float b = l.bias.empty() ? 0.0f : l.bias[static_cast<std::size_t>(o)];
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        float acc = b;
        for (int c = 0; c < l.in_channels; ++c) {
          for (int ky = 0; ky < l.kernel_h; ++ky) {
            const int sy = y * l.stride + ky - l.padding;
            if (sy < 0 || sy >= ih) continue;
            for (int kx = 0; kx < l.kernel_w; ++kx) {
              const int sx = x * l.stride + kx - l.padding;
              if (sx < 0 || sx >= iw) continue;
              acc += l.weight[static_cast<std::size_t>(((o * l.in_channels + c) * l.kernel_h + ky) * l.kernel_w + kx)] *
                     in.data[static_cast<std::size_t>((c * ih + sy) * iw + sx)];
            }
          }
        }
        out.data[static_cast<std::size_t>((o * oh + y) * ow + x)] = acc;
      }
    }
  }
  return out;
}

inline Tensor dense_float(const Layer& l, const Tensor& in) {
  Tensor out(Shape{l.out_features});
  for (int o = 0; o < l.out_features; ++o) {
    float acc = l.bias.empty() ? 0.0f : l.bias[static_cast<std::size_t>(o)];
    const float* row = l.weight.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(l.in_features);
    for (int k = 0; k < l.in_features; ++k) acc += row[k] * in.data[static_cast<std::size_t>(k)];
    out.data[static_cast<std::size_t>(o)] = acc;
  }
  return out;
}

inline Tensor pool_float(const Layer& l, const Tensor& in, const Shape& out_shape) {
  Tensor out(out_shape);
  const int ih = in.shape[1];
  const int iw = in.shape[2];
  const bool is_max = l.kind == LayerKind::MaxPool;
  for (int c = 0; c < out_shape[0]; ++c) {
    for (int y = 0; y < out_shape[1]; ++y) {
      for (int x = 0; x < out_shape[2]; ++x) {
        float acc = is_max ? -std::numeric_limits<float>::infinity() : 0.0f;
        for (int ky = 0; ky < l.kernel_h; ++ky) {
          for (int kx = 0; kx < l.kernel_w; ++kx) {
            const float v = in.data[static_cast<std::size_t>((c * ih + y * l.stride + ky) * iw + x * l.stride + kx)];
            acc = is_max ? std::max(acc, v) : acc + v;
          }
        }
        if (!is_max) acc /= static_cast<float>(l.kernel_h * l.kernel_w);
        out.data[static_cast<std::size_t>((c * out_shape[1] + y) * out_shape[2] + x)] = acc;
      }
    }
  }
  return out;
}

inline Tensor batchnorm_float(const Layer& l, const Tensor& in) {
  Tensor out = in;
  const std::size_t channels = static_cast<std::size_t>(in.shape[0]);
  const std::size_t per_channel = in.data.size() / channels;
  for (std::size_t c = 0; c < channels; ++c) {
    const float inv = 1.0f / std::sqrt(l.var[c] + static_cast<float>(l.epsilon));
    for (std::size_t k = 0; k < per_channel; ++k) {
      float& v = out.data[c * per_channel + k];
      v = l.gamma[c] * (v - l.mean[c]) * inv + l.beta[c];
    }
  }
  return out;
}

}  // namespace detail

/// Runs the float path and returns the output of every layer.
inline std::vector<Tensor> forward_float_all(const Model& model, const Tensor& input) {
  const auto shapes = infer_shapes(model, false);
  if (input.shape != model.input_shape) {
    fail(ErrorCode::ShapeMismatch,
         "input " + shape_string(input.shape) + " does not match model input " + shape_string(model.input_shape));
  }
  std::vector<Tensor> outs;
  outs.reserve(model.layers.size());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& l = model.layers[i];
    const Tensor& in = i == 0 ? input : outs.back();
    switch (l.kind) {
      case LayerKind::Conv2d: outs.push_back(detail::conv2d_float(l, in, shapes[i])); break;
      case LayerKind::Dense: outs.push_back(detail::dense_float(l, in)); break;
      case LayerKind::Relu: {
        Tensor t = in;
        for (float& v : t.data) v = std::max(v, 0.0f);
        outs.push_back(std::move(t));
        break;
      }
      case LayerKind::MaxPool:
      case LayerKind::AvgPool: outs.push_back(detail::pool_float(l, in, shapes[i])); break;
      case LayerKind::BatchNorm: outs.push_back(detail::batchnorm_float(l, in)); break;
      case LayerKind::ResidualAdd: {
        Tensor t = in;
        const Tensor& other = outs[static_cast<std::size_t>(model.index_of(l.residual_from))];
        for (std::size_t k = 0; k < t.data.size(); ++k) t.data[k] += other.data[k];
        outs.push_back(std::move(t));
        break;
      }
      case LayerKind::Flatten: outs.push_back(Tensor(shapes[i], in.data)); break;
    }
  }
  return outs;
}

inline Tensor forward_float(const Model& model, const Tensor& input) { return forward_float_all(model, input).back(); }

/// Index of the largest logit; the lowest index wins ties.
inline int argmax(const std::vector<float>& logits) {
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

/// Absorbs every batchnorm into the preceding conv2d or dense layer.
inline Model fold_batchnorm(const Model& model) {
  infer_shapes(model);
  Model out = model;
  out.layers.clear();
  std::map<std::string, std::string> renamed;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& l = model.layers[i];
    if (l.kind != LayerKind::BatchNorm) {
      Layer copy = l;
      if (copy.kind == LayerKind::ResidualAdd) {
        if (const auto it = renamed.find(copy.residual_from); it != renamed.end()) copy.residual_from = it->second;
      }
      out.layers.push_back(std::move(copy));
      continue;
    }
    if (out.layers.empty() || !out.layers.back().has_weights()) {
      fail(ErrorCode::NotFoldable, "batchnorm '" + l.name + "' does not follow a conv2d or dense layer");
    }
    Layer& prev = out.layers.back();
    // The pre-normalization output disappears; nothing may still read it.
    for (std::size_t j = i + 1; j < model.layers.size(); ++j) {
      if (model.layers[j].kind == LayerKind::ResidualAdd && model.layers[j].residual_from == prev.name) {
        fail(ErrorCode::NotFoldable, "layer '" + model.layers[j].name + "' reads the unnormalized output of '" +
                                         prev.name + "'");
      }
    }
    const auto channels = static_cast<std::size_t>(prev.bias_size());
    if (prev.bias.empty()) prev.bias.assign(channels, 0.0f);
    const std::size_t per_channel = prev.weight.size() / channels;
    for (std::size_t c = 0; c < channels; ++c) {
      const double scale = l.gamma[c] / std::sqrt(static_cast<double>(l.var[c]) + l.epsilon);
      for (std::size_t k = 0; k < per_channel; ++k) {
        float& w = prev.weight[c * per_channel + k];
        w = static_cast<float>(w * scale);
      }
      prev.bias[c] = static_cast<float>((prev.bias[c] - l.mean[c]) * scale + l.beta[c]);
    }
    renamed[l.name] = prev.name;
  }
  infer_shapes(out);
  return out;
}

/// Max-abs statistics: w_amax of each layer's weights (0 without weights)
/// and a_amax of each layer's output, plus the network input.
struct Calibration {
  double input_amax = 0.0;
  std::vector<LayerStats> layers;
};

inline Calibration calibrate(const Model& model, const Dataset& samples) {
  if (samples.size() == 0) fail(ErrorCode::EmptyBatch, "calibration batch is empty");
  Calibration cal;
  cal.layers.resize(model.layers.size());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    if (model.layers[i].has_weights()) cal.layers[i].w_amax = tensor_stats(model.layers[i].weight);
  }
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const Tensor x = samples.sample(s);
    cal.input_amax = std::max(cal.input_amax, tensor_stats(x.data));
    const auto outs = forward_float_all(model, x);
    for (std::size_t i = 0; i < outs.size(); ++i) {
      cal.layers[i].a_amax = std::max(cal.layers[i].a_amax, tensor_stats(outs[i].data));
    }
  }
  return cal;
}

}  // namespace taperfx::nn
