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

/*
 * Layer builders and the seeded tiny ConvNet used by tests and the CLI.
 *
 * tiny-convnet (input 1x28x28, 10 classes):
 *   conv1 1->4 3x3/2, relu, conv2 4->8 3x3/1, bn2, relu, maxpool 2x2/2,
 *   flatten, dense1 200->64, relu, dense2 64->10
 *
 * Convolution and dense1 weights are clipped normals. bn2 statistics come
 * from the training split, and dense2 is a nearest-centroid readout over the
 * dense1 features, so the network classifies synthetic data well without any
 * gradient training.
 */
#pragma once

#include <taperfx/nn/dataset.hpp>
#include <taperfx/nn/evaluate.hpp>
#include <taperfx/nn/float_engine.hpp>
#include <taperfx/nn/model.hpp>

#include <cmath>
#include <string>

namespace taperfx::nn {

inline Layer conv2d_layer(const std::string& name, int in_c, int out_c, int kernel, int stride = 1, int padding = 0) {
  Layer l;
  l.name = name;
  l.kind = LayerKind::Conv2d;
  l.in_channels = in_c;
  l.out_channels = out_c;
  l.kernel_h = l.kernel_w = kernel;
  l.stride = stride;
  l.padding = padding;
  l.weight.assign(element_count(l.weight_shape()), 0.0f);
  l.bias.assign(static_cast<std::size_t>(out_c), 0.0f);
  return l;
}

inline Layer dense_layer(const std::string& name, int in_f, int out_f) {
  Layer l;
  l.name = name;
  l.kind = LayerKind::Dense;
  l.in_features = in_f;
  l.out_features = out_f;
  l.weight.assign(element_count(l.weight_shape()), 0.0f);
  l.bias.assign(static_cast<std::size_t>(out_f), 0.0f);
  return l;
}

inline Layer pool_layer(const std::string& name, LayerKind kind, int kernel, int stride) {
  Layer l;
  l.name = name;
  l.kind = kind;
  l.kernel_h = l.kernel_w = kernel;
  l.stride = stride;
  return l;
}

inline Layer batchnorm_layer(const std::string& name, int channels) {
  Layer l;
  l.name = name;
  l.kind = LayerKind::BatchNorm;
  l.gamma.assign(static_cast<std::size_t>(channels), 1.0f);
  l.beta.assign(static_cast<std::size_t>(channels), 0.0f);
  l.mean.assign(static_cast<std::size_t>(channels), 0.0f);
  l.var.assign(static_cast<std::size_t>(channels), 1.0f);
  return l;
}

inline Layer simple_layer(const std::string& name, LayerKind kind, const std::string& from = "") {
  Layer l;
  l.name = name;
  l.kind = kind;
  l.residual_from = from;
  return l;
}

/// Normal(0, sigma) clipped to +-3 sigma.
inline void fill_bell(std::vector<float>& values, double sigma, Rng& rng) {
  for (float& v : values) v = static_cast<float>(std::clamp(rng.normal(), -3.0, 3.0) * sigma);
}

struct FixtureConfig {
  std::uint64_t seed = 7;
  std::size_t train_count = 2000;
};

inline Model make_tiny_convnet(const FixtureConfig& cfg = {}) {
  Rng rng(cfg.seed);
  Model m;
  m.name = "tiny-convnet";
  m.input_shape = {1, 28, 28};
  m.num_classes = 10;

  Layer conv1 = conv2d_layer("conv1", 1, 4, 3, 2);
  fill_bell(conv1.weight, std::sqrt(2.0 / 9.0), rng);
  Layer conv2 = conv2d_layer("conv2", 4, 8, 3, 1);
  fill_bell(conv2.weight, std::sqrt(2.0 / 36.0), rng);
  Layer dense1 = dense_layer("dense1", 200, 64);
  fill_bell(dense1.weight, std::sqrt(2.0 / 200.0), rng);

  m.layers = {conv1,
              simple_layer("relu1", LayerKind::Relu),
              conv2,
              batchnorm_layer("bn2", 8),
              simple_layer("relu2", LayerKind::Relu),
              pool_layer("pool2", LayerKind::MaxPool, 2, 2),
              simple_layer("flatten", LayerKind::Flatten),
              dense1,
              simple_layer("relu3", LayerKind::Relu),
              dense_layer("dense2", 64, 10)};
  const std::size_t conv2_at = 2;
  const std::size_t bn_at = 3;
  const std::size_t features_at = 8;

  const std::uint64_t train_seed = cfg.seed + 1;
  const Dataset train = make_synthetic(train_seed, cfg.train_count, m.input_shape, m.num_classes);

  // Batchnorm statistics of the conv2 output.
  Layer& bn = m.layers[bn_at];
  std::vector<double> sum(8, 0.0);
  std::vector<double> sq(8, 0.0);
  double per_channel = 0.0;
  for (std::size_t s = 0; s < train.size(); ++s) {
    const auto outs = forward_float_all(m, train.sample(s));
    const Tensor& t = outs[conv2_at];
    const std::size_t plane = t.data.size() / 8;
    for (std::size_t c = 0; c < 8; ++c) {
      for (std::size_t k = 0; k < plane; ++k) {
        const double v = t.data[c * plane + k];
        sum[c] += v;
        sq[c] += v * v;
      }
    }
    per_channel += static_cast<double>(plane);
  }
  for (std::size_t c = 0; c < 8; ++c) {
    const double mean = sum[c] / per_channel;
    bn.mean[c] = static_cast<float>(mean);
    bn.var[c] = static_cast<float>(std::max(sq[c] / per_channel - mean * mean, 1e-6));
    bn.gamma[c] = static_cast<float>(rng.uniform(0.8, 1.2));
    bn.beta[c] = static_cast<float>(rng.uniform(0.0, 0.2));
  }

  // Nearest-centroid readout, centered over classes:
  //   logit_c = a * ((mu_c - mu_mean) . h - (|mu_c|^2 - mean |mu|^2) / 2)
  // with `a` putting the largest training logit at kLogitPeak.
  constexpr double kLogitPeak = 3.5;
  std::vector<std::vector<float>> features;
  features.reserve(train.size());
  std::vector<std::vector<double>> centroid(10, std::vector<double>(64, 0.0));
  std::vector<double> count(10, 0.0);
  for (std::size_t s = 0; s < train.size(); ++s) {
    features.push_back(forward_float_all(m, train.sample(s))[features_at].data);
    const auto label = static_cast<std::size_t>(train.labels[s]);
    for (std::size_t k = 0; k < 64; ++k) centroid[label][k] += features.back()[k];
    count[label] += 1.0;
  }
  std::vector<double> mean_centroid(64, 0.0);
  std::vector<double> norm2(10, 0.0);
  double mean_norm2 = 0.0;
  for (std::size_t c = 0; c < 10; ++c) {
    for (std::size_t k = 0; k < 64; ++k) {
      centroid[c][k] /= std::max(count[c], 1.0);
      mean_centroid[k] += centroid[c][k] / 10.0;
      norm2[c] += centroid[c][k] * centroid[c][k];
    }
    mean_norm2 += norm2[c] / 10.0;
  }
  Layer& dense2 = m.layers.back();
  for (std::size_t c = 0; c < 10; ++c) {
    for (std::size_t k = 0; k < 64; ++k) dense2.weight[c * 64 + k] = static_cast<float>(centroid[c][k] - mean_centroid[k]);
    dense2.bias[c] = static_cast<float>(-(norm2[c] - mean_norm2) / 2.0);
  }
  double peak = 0.0;
  for (const auto& h : features) {
    for (std::size_t c = 0; c < 10; ++c) {
      double logit = dense2.bias[c];
      for (std::size_t k = 0; k < 64; ++k) logit += static_cast<double>(dense2.weight[c * 64 + k]) * h[k];
      peak = std::max(peak, std::abs(logit));
    }
  }
  const double a = peak > 0.0 ? kLogitPeak / peak : 1.0;
  for (float& w : dense2.weight) w = static_cast<float>(w * a);
  for (float& b : dense2.bias) b = static_cast<float>(b * a);

  m.metadata = {{"generator", "tiny-convnet"},
                {"seed", cfg.seed},
                {"train_dataset", "synth:" + std::to_string(train_seed)},
                {"train_count", cfg.train_count},
                {"float_top1", evaluate(m, train).top1}};
  infer_shapes(m);
  return m;
}

}  // namespace taperfx::nn
