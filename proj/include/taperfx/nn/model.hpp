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
 * Layer graph and its on-disk manifest.
 *
 * A manifest is a JSON document listing layers in execution order. Parameter
 * tensors live in sibling blob files of raw little-endian float32 values
 * (row-major; OIHW for conv kernels, [out, in] for dense) and each blob
 * reference carries its shape and a CRC-32 of the blob bytes:
 *
 *   {
 *     "format": "taperfx-model", "version": 1, "name": "tiny-convnet",
 *     "input_shape": [1, 28, 28], "num_classes": 10, "metadata": {...},
 *     "layers": [
 *       {"name": "conv1", "kind": "conv2d", "in_channels": 1, "out_channels": 4,
 *        "kernel": [3, 3], "stride": 2, "padding": 0,
 *        "tensors": {"weight": {"file": "conv1.weight.bin", "shape": [4, 1, 3, 3],
 *                               "crc32": "1a2b3c4d"}, "bias": {...}}},
 *       {"name": "bn2", "kind": "batchnorm", "epsilon": 1e-5,
 *        "tensors": {"gamma": ..., "beta": ..., "mean": ..., "var": ...}},
 *       {"name": "add1", "kind": "residual_add", "from": "relu1"},
 *       ...
 *     ]
 *   }
 */
#pragma once

#include <taperfx/error.hpp>
#include <taperfx/nn/tensor.hpp>

#include <json.hpp>
#include <zlib.h>

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace taperfx::nn {

enum class LayerKind { Conv2d, Dense, Relu, MaxPool, AvgPool, BatchNorm, ResidualAdd, Flatten };

inline std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Dense: return "dense";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::AvgPool: return "avgpool";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::ResidualAdd: return "residual_add";
    case LayerKind::Flatten: return "flatten";
  }
  return "unknown";
}

inline LayerKind parse_layer_kind(const std::string& text) {
  static const std::map<std::string, LayerKind> kinds = {
      {"conv2d", LayerKind::Conv2d},       {"dense", LayerKind::Dense},
      {"relu", LayerKind::Relu},           {"maxpool", LayerKind::MaxPool},
      {"avgpool", LayerKind::AvgPool},     {"batchnorm", LayerKind::BatchNorm},
      {"residual_add", LayerKind::ResidualAdd}, {"flatten", LayerKind::Flatten}};
  const auto it = kinds.find(text);
  if (it == kinds.end()) fail(ErrorCode::UnknownLayer, "unknown layer kind '" + text + "'");
  return it->second;
}

struct Layer {
  std::string name;
  LayerKind kind = LayerKind::Relu;

  // conv2d
  int in_channels = 0;
  int out_channels = 0;
  // conv2d and pooling windows
  int kernel_h = 0;
  int kernel_w = 0;
  int stride = 1;
  int padding = 0;
  // dense
  int in_features = 0;
  int out_features = 0;
  // batchnorm
  double epsilon = 1e-5;
  // residual_add: output of the named earlier layer is added to the input
  std::string residual_from;

  std::vector<float> weight;
  std::vector<float> bias;
  std::vector<float> gamma;
  std::vector<float> beta;
  std::vector<float> mean;
  std::vector<float> var;

  bool has_weights() const { return kind == LayerKind::Conv2d || kind == LayerKind::Dense; }

  Shape weight_shape() const {
    if (kind == LayerKind::Conv2d) return {out_channels, in_channels, kernel_h, kernel_w};
    if (kind == LayerKind::Dense) return {out_features, in_features};
    return {};
  }

  int bias_size() const { return kind == LayerKind::Conv2d ? out_channels : out_features; }
};

struct Model {
  std::string name;
  Shape input_shape;
  int num_classes = 0;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<Layer> layers;

  int index_of(const std::string& layer_name) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].name == layer_name) return static_cast<int>(i);
    }
    return -1;
  }
};

namespace detail {

inline int conv_extent(int in, int kernel, int stride, int padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

inline void require(bool ok, const std::string& message) {
  if (!ok) fail(ErrorCode::ShapeMismatch, message);
}

}  // namespace detail

/// Output shape of every layer; validates composition and, when
/// `check_params` is set, parameter tensor sizes.
inline std::vector<Shape> infer_shapes(const Model& model, bool check_params = true) {
  if (model.layers.empty()) fail(ErrorCode::EmptyModel, "model '" + model.name + "' has no layers");
  detail::require(!model.input_shape.empty() && element_count(model.input_shape) > 0, "model input shape is empty");

  std::vector<Shape> shapes;
  Shape cur = model.input_shape;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& l = model.layers[i];
    const std::string where = "layer '" + l.name + "' (" + to_string(l.kind) + ")";
    for (std::size_t j = 0; j < i; ++j) {
      detail::require(model.layers[j].name != l.name, "duplicate layer name '" + l.name + "'");
    }
    switch (l.kind) {
      case LayerKind::Conv2d: {
        detail::require(cur.size() == 3 && cur[0] == l.in_channels,
                        where + " expects " + std::to_string(l.in_channels) + " input channels, got " +
                            shape_string(cur));
        detail::require(l.kernel_h >= 1 && l.kernel_w >= 1 && l.stride >= 1 && l.padding >= 0 && l.out_channels >= 1,
                        where + " has invalid hyperparameters");
        const int oh = detail::conv_extent(cur[1], l.kernel_h, l.stride, l.padding);
        const int ow = detail::conv_extent(cur[2], l.kernel_w, l.stride, l.padding);
        detail::require(oh >= 1 && ow >= 1, where + " kernel larger than padded input");
        cur = {l.out_channels, oh, ow};
        break;
      }
      case LayerKind::Dense:
        detail::require(cur.size() == 1 && cur[0] == l.in_features,
                        where + " expects " + std::to_string(l.in_features) + " features, got " + shape_string(cur));
        detail::require(l.out_features >= 1, where + " has no outputs");
        cur = {l.out_features};
        break;
      case LayerKind::Relu:
        break;
      case LayerKind::MaxPool:
      case LayerKind::AvgPool: {
        detail::require(cur.size() == 3, where + " needs a CHW input");
        detail::require(l.kernel_h >= 1 && l.kernel_w >= 1 && l.stride >= 1, where + " has invalid window");
        const int oh = detail::conv_extent(cur[1], l.kernel_h, l.stride, 0);
        const int ow = detail::conv_extent(cur[2], l.kernel_w, l.stride, 0);
        detail::require(oh >= 1 && ow >= 1, where + " window larger than input");
        cur = {cur[0], oh, ow};
        break;
      }
      case LayerKind::BatchNorm:
        detail::require(!cur.empty(), where + " on an empty shape");
        if (check_params) {
          const auto c = static_cast<std::size_t>(cur[0]);
          detail::require(l.gamma.size() == c && l.beta.size() == c && l.mean.size() == c && l.var.size() == c,
                          where + " parameters do not match " + std::to_string(c) + " channels");
        }
        break;
      case LayerKind::ResidualAdd: {
        const int from = model.index_of(l.residual_from);
        detail::require(from >= 0 && from < static_cast<int>(i),
                        where + " refers to unknown or later layer '" + l.residual_from + "'");
        detail::require(shapes[static_cast<std::size_t>(from)] == cur,
                        where + " adds " + shape_string(shapes[static_cast<std::size_t>(from)]) + " to " +
                            shape_string(cur));
        break;
      }
      case LayerKind::Flatten:
        cur = {static_cast<int>(element_count(cur))};
        break;
    }
    if (check_params && l.has_weights()) {
      detail::require(l.weight.size() == element_count(l.weight_shape()),
                      where + " weight has " + std::to_string(l.weight.size()) + " elements, expected " +
                          std::to_string(element_count(l.weight_shape())));
      detail::require(l.bias.empty() || l.bias.size() == static_cast<std::size_t>(l.bias_size()),
                      where + " bias length mismatch");
    }
    shapes.push_back(cur);
  }
  return shapes;
}

/// Multiply-accumulates per single-sample inference, counted from output
/// shapes and per-output fan-in.
inline std::uint64_t mac_count(const Model& model) {
  const auto shapes = infer_shapes(model, false);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& l = model.layers[i];
    if (l.kind == LayerKind::Conv2d) {
      total += element_count(shapes[i]) * static_cast<std::uint64_t>(l.in_channels * l.kernel_h * l.kernel_w);
    } else if (l.kind == LayerKind::Dense) {
      total += static_cast<std::uint64_t>(l.out_features) * static_cast<std::uint64_t>(l.in_features);
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Blob and manifest I/O
// ---------------------------------------------------------------------------

inline std::string crc32_hex(const std::vector<unsigned char>& bytes) {
  const uLong crc = ::crc32(::crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size()));
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

inline std::vector<unsigned char> floats_to_bytes(const std::vector<float>& values) {
  std::vector<unsigned char> bytes;
  bytes.reserve(values.size() * 4);
  for (const float v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int k = 0; k < 4; ++k) bytes.push_back(static_cast<unsigned char>((bits >> (8 * k)) & 0xFFU));
  }
  return bytes;
}

inline std::vector<float> bytes_to_floats(const std::vector<unsigned char>& bytes) {
  std::vector<float> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(bytes[4 * i + k]) << (8 * k);
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

inline std::vector<unsigned char> read_file(const std::filesystem::path& path, ErrorCode missing) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(missing, "cannot open '" + path.string() + "'");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "short write to '" + path.string() + "'");
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::vector<unsigned char>(text.begin(), text.end()));
}

/// Reads a blob reference, verifying presence and checksum.
inline std::vector<unsigned char> read_blob(const std::filesystem::path& dir, const nlohmann::json& ref) {
  if (!ref.contains("file") || !ref["file"].is_string()) fail(ErrorCode::ParseError, "blob reference lacks 'file'");
  const auto path = dir / ref["file"].get<std::string>();
  auto bytes = read_file(path, ErrorCode::MissingBlob);
  if (ref.contains("crc32") && ref["crc32"].get<std::string>() != crc32_hex(bytes)) {
    fail(ErrorCode::ChecksumMismatch, "checksum mismatch for '" + path.string() + "'");
  }
  return bytes;
}

inline nlohmann::json write_blob(const std::filesystem::path& dir, const std::string& file,
                                 const std::vector<unsigned char>& bytes) {
  write_file(dir / file, bytes);
  return nlohmann::json{{"file", file}, {"crc32", crc32_hex(bytes)}};
}

/// Layer hyperparameters without tensors.
inline nlohmann::json layer_to_json(const Layer& l) {
  nlohmann::json j{{"name", l.name}, {"kind", to_string(l.kind)}};
  switch (l.kind) {
    case LayerKind::Conv2d:
      j["in_channels"] = l.in_channels;
      j["out_channels"] = l.out_channels;
      j["kernel"] = {l.kernel_h, l.kernel_w};
      j["stride"] = l.stride;
      j["padding"] = l.padding;
      break;
    case LayerKind::Dense:
      j["in_features"] = l.in_features;
      j["out_features"] = l.out_features;
      break;
    case LayerKind::MaxPool:
    case LayerKind::AvgPool:
      j["kernel"] = {l.kernel_h, l.kernel_w};
      j["stride"] = l.stride;
      break;
    case LayerKind::BatchNorm:
      j["epsilon"] = l.epsilon;
      break;
    case LayerKind::ResidualAdd:
      j["from"] = l.residual_from;
      break;
    case LayerKind::Relu:
    case LayerKind::Flatten:
      break;
  }
  return j;
}

inline Layer layer_from_json(const nlohmann::json& j) {
  Layer l;
  try {
    l.name = j.at("name").get<std::string>();
    l.kind = parse_layer_kind(j.at("kind").get<std::string>());
    switch (l.kind) {
      case LayerKind::Conv2d:
        l.in_channels = j.at("in_channels").get<int>();
        l.out_channels = j.at("out_channels").get<int>();
        l.kernel_h = j.at("kernel").at(0).get<int>();
        l.kernel_w = j.at("kernel").at(1).get<int>();
        l.stride = j.value("stride", 1);
        l.padding = j.value("padding", 0);
        break;
      case LayerKind::Dense:
        l.in_features = j.at("in_features").get<int>();
        l.out_features = j.at("out_features").get<int>();
        break;
      case LayerKind::MaxPool:
      case LayerKind::AvgPool:
        l.kernel_h = j.at("kernel").at(0).get<int>();
        l.kernel_w = j.at("kernel").at(1).get<int>();
        l.stride = j.value("stride", l.kernel_h);
        break;
      case LayerKind::BatchNorm:
        l.epsilon = j.value("epsilon", 1e-5);
        break;
      case LayerKind::ResidualAdd:
        l.residual_from = j.at("from").get<std::string>();
        break;
      case LayerKind::Relu:
      case LayerKind::Flatten:
        break;
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("malformed layer entry: ") + e.what());
  }
  return l;
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  const auto bytes = read_file(path, ErrorCode::IoError);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, "'" + path.string() + "': " + e.what());
  }
}

namespace detail {

inline std::vector<float> load_tensor(const std::filesystem::path& dir, const nlohmann::json& ref,
                                      const std::string& what) {
  const auto values = bytes_to_floats(read_blob(dir, ref));
  const Shape shape = ref.at("shape").get<Shape>();
  if (values.size() != element_count(shape)) {
    fail(ErrorCode::ShapeMismatch, what + ": blob holds " + std::to_string(values.size()) + " floats, shape " +
                                       shape_string(shape) + " needs " + std::to_string(element_count(shape)));
  }
  return values;
}

}  // namespace detail

inline Model load_model(const std::filesystem::path& manifest_path) {
  const nlohmann::json doc = read_json(manifest_path);
  const auto dir = manifest_path.parent_path();
  Model model;
  try {
    if (doc.value("format", std::string{}) != "taperfx-model") {
      fail(ErrorCode::ParseError, "'" + manifest_path.string() + "' is not a taperfx-model manifest");
    }
    model.name = doc.value("name", std::string{"model"});
    model.input_shape = doc.at("input_shape").get<Shape>();
    model.num_classes = doc.value("num_classes", 0);
    model.metadata = doc.value("metadata", nlohmann::json::object());
    for (const auto& lj : doc.at("layers")) {
      Layer l = layer_from_json(lj);
      const nlohmann::json tensors = lj.value("tensors", nlohmann::json::object());
      const auto load = [&](const char* key, std::vector<float>& into, const Shape& expected) {
        if (!tensors.contains(key)) return;
        into = detail::load_tensor(dir, tensors[key], l.name + "." + key);
        if (!expected.empty() && tensors[key].at("shape").get<Shape>() != expected) {
          fail(ErrorCode::ShapeMismatch, l.name + "." + key + " declared " +
                                             shape_string(tensors[key].at("shape").get<Shape>()) + ", layer needs " +
                                             shape_string(expected));
        }
      };
      if (l.has_weights()) {
        if (!tensors.contains("weight")) fail(ErrorCode::MissingBlob, "layer '" + l.name + "' has no weight");
        load("weight", l.weight, l.weight_shape());
        load("bias", l.bias, Shape{l.bias_size()});
      }
      if (l.kind == LayerKind::BatchNorm) {
        for (const char* key : {"gamma", "beta", "mean", "var"}) {
          if (!tensors.contains(key)) fail(ErrorCode::MissingBlob, "batchnorm '" + l.name + "' lacks " + key);
        }
        load("gamma", l.gamma, {});
        load("beta", l.beta, {});
        load("mean", l.mean, {});
        load("var", l.var, {});
      }
      model.layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, "'" + manifest_path.string() + "': " + e.what());
  }
  infer_shapes(model);
  return model;
}

inline void save_model(const Model& model, const std::filesystem::path& dir,
                       const std::string& manifest_name = "model.json") {
  infer_shapes(model);
  std::filesystem::create_directories(dir);
  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& l : model.layers) {
    nlohmann::json j = layer_to_json(l);
    nlohmann::json tensors = nlohmann::json::object();
    const auto put = [&](const char* key, const std::vector<float>& values, const Shape& shape) {
      nlohmann::json ref = write_blob(dir, l.name + "." + key + ".bin", floats_to_bytes(values));
      ref["shape"] = shape;
      tensors[key] = ref;
    };
    if (l.has_weights()) {
      put("weight", l.weight, l.weight_shape());
      if (!l.bias.empty()) put("bias", l.bias, {l.bias_size()});
    }
    if (l.kind == LayerKind::BatchNorm) {
      const Shape s{static_cast<int>(l.gamma.size())};
      put("gamma", l.gamma, s);
      put("beta", l.beta, s);
      put("mean", l.mean, s);
      put("var", l.var, s);
    }
    if (!tensors.empty()) j["tensors"] = tensors;
    layers.push_back(j);
  }
  const nlohmann::json doc{{"format", "taperfx-model"}, {"version", 1},          {"name", model.name},
                           {"input_shape", model.input_shape}, {"num_classes", model.num_classes},
                           {"metadata", model.metadata},         {"layers", layers}};
  write_text(dir / manifest_name, doc.dump(2) + "\n");
}

}  // namespace taperfx::nn
