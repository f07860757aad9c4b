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

// Top-1 accuracy and per-layer weight MSE over a labeled dataset.
#pragma once

#include <taperfx/nn/dataset.hpp>
#include <taperfx/nn/float_engine.hpp>
#include <taperfx/nn/quantized.hpp>

#include <numeric>
#include <vector>

namespace taperfx::nn {

struct EvalReport {
  double top1 = 0.0;
  /// One entry per conv2d/dense layer; empty for the float path.
  std::vector<double> layer_mse;
  std::size_t samples = 0;

  double mean_mse() const {
    if (layer_mse.empty()) return 0.0;
    return std::accumulate(layer_mse.begin(), layer_mse.end(), 0.0) / static_cast<double>(layer_mse.size());
  }
};

inline int argmax(const std::vector<double>& logits) {
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

namespace detail {

inline void check_dataset(const Dataset& data) {
  if (data.size() == 0) fail(ErrorCode::EmptyBatch, "dataset has no samples");
  if (data.pixels.size() != data.size() * element_count(data.sample_shape)) {
    fail(ErrorCode::DatasetError, std::to_string(data.size()) + " labels for " +
                                      std::to_string(data.pixels.size()) + " pixels of shape " +
                                      shape_string(data.sample_shape));
  }
}

inline double top1(const std::vector<int>& predicted, const Dataset& data) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == data.labels[i];
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

}  // namespace detail

inline std::vector<int> predict(const Model& model, const Dataset& data) {
  detail::check_dataset(data);
  std::vector<int> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(argmax(forward_float(model, data.sample(i)).data));
  return out;
}

inline std::vector<int> predict(const QuantizedModel& qm, const Dataset& data) {
  detail::check_dataset(data);
  const QuantizedEngine engine(qm);
  std::vector<int> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(argmax(engine.logits(data.sample(i))));
  return out;
}

inline EvalReport evaluate(const Model& model, const Dataset& data) {
  const auto predicted = predict(model, data);
  return {detail::top1(predicted, data), {}, data.size()};
}

inline EvalReport evaluate(const QuantizedModel& qm, const Dataset& data) {
  const auto predicted = predict(qm, data);
  return {detail::top1(predicted, data), qm.weight_mse(), data.size()};
}

/// Fraction of positions where two prediction lists agree.
inline double agreement(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size() || a.empty()) fail(ErrorCode::LengthMismatch, "prediction lists differ in length");
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

}  // namespace taperfx::nn
