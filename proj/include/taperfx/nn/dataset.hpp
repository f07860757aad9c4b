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

// Labeled image datasets: IDX (MNIST family), CIFAR-10 binary, and a seeded
// synthetic generator. Pixels are scaled to [0, 1].
#pragma once

#include <taperfx/error.hpp>
#include <taperfx/nn/model.hpp>
#include <taperfx/nn/tensor.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace taperfx::nn {

struct Dataset {
  Shape sample_shape;
  std::vector<float> pixels;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }

  Tensor sample(std::size_t i) const {
    const std::size_t n = element_count(sample_shape);
    return Tensor(sample_shape, std::vector<float>(pixels.begin() + static_cast<std::ptrdiff_t>(i * n),
                                                   pixels.begin() + static_cast<std::ptrdiff_t>((i + 1) * n)));
  }

  /// First `count` samples (all when count exceeds the size).
  Dataset head(std::size_t count) const {
    Dataset out;
    out.sample_shape = sample_shape;
    const std::size_t k = std::min(count, size());
    const std::size_t n = element_count(sample_shape);
    out.pixels.assign(pixels.begin(), pixels.begin() + static_cast<std::ptrdiff_t>(k * n));
    out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(k));
    return out;
  }
};

namespace detail {

inline std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<unsigned char> data;
};

inline IdxArray read_idx(const std::filesystem::path& path) {
  const auto bytes = read_file(path, ErrorCode::DatasetError);
  if (bytes.size() < 4 || bytes[0] != 0 || bytes[1] != 0) {
    fail(ErrorCode::DatasetError, "'" + path.string() + "' is not an IDX file");
  }
  if (bytes[2] != 0x08) fail(ErrorCode::DatasetError, "'" + path.string() + "' is not unsigned-byte IDX");
  const int ndims = bytes[3];
  if (bytes.size() < 4 + 4 * static_cast<std::size_t>(ndims)) {
    fail(ErrorCode::DatasetError, "'" + path.string() + "' truncated header");
  }
  IdxArray out;
  std::size_t count = 1;
  for (int d = 0; d < ndims; ++d) {
    out.dims.push_back(read_be32(bytes, 4 + 4 * static_cast<std::size_t>(d)));
    count *= out.dims.back();
  }
  const std::size_t offset = 4 + 4 * static_cast<std::size_t>(ndims);
  if (bytes.size() != offset + count) {
    fail(ErrorCode::DatasetError, "'" + path.string() + "' payload size does not match its dimensions");
  }
  out.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  return out;
}

}  // namespace detail

inline Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const detail::IdxArray images = detail::read_idx(images_path);
  const detail::IdxArray labels = detail::read_idx(labels_path);
  if (images.dims.size() != 3 || labels.dims.size() != 1) {
    fail(ErrorCode::DatasetError, "IDX images must be 3-D and labels 1-D");
  }
  if (images.dims[0] != labels.dims[0]) {
    fail(ErrorCode::DatasetError, std::to_string(images.dims[0]) + " images but " + std::to_string(labels.dims[0]) +
                                      " labels");
  }
  Dataset ds;
  ds.sample_shape = {1, static_cast<int>(images.dims[1]), static_cast<int>(images.dims[2])};
  ds.pixels.reserve(images.data.size());
  for (const unsigned char p : images.data) ds.pixels.push_back(static_cast<float>(p) / 255.0f);
  ds.labels.assign(labels.data.begin(), labels.data.end());
  return ds;
}

/// Looks for the t10k (then train) image/label pair inside `dir`.
inline Dataset load_idx_dir(const std::filesystem::path& dir) {
  for (const char* prefix : {"t10k", "train"}) {
    const auto images = dir / (std::string(prefix) + "-images-idx3-ubyte");
    const auto labels = dir / (std::string(prefix) + "-labels-idx1-ubyte");
    if (std::filesystem::exists(images) && std::filesystem::exists(labels)) return load_idx(images, labels);
  }
  fail(ErrorCode::DatasetError, "no IDX image/label pair in '" + dir.string() + "'");
}

inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * 32 * 32;

/// CIFAR-10 binary: 3073-byte records, label byte then 3x32x32 pixels.
/// Accepts a batch file or a directory holding test_batch.bin.
inline Dataset load_cifar10(const std::filesystem::path& path) {
  const auto file = std::filesystem::is_directory(path) ? path / "test_batch.bin" : path;
  const auto bytes = read_file(file, ErrorCode::DatasetError);
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
    fail(ErrorCode::DatasetError, "'" + file.string() + "' is not a whole number of CIFAR-10 records");
  }
  Dataset ds;
  ds.sample_shape = {3, 32, 32};
  const std::size_t count = bytes.size() / kCifarRecordBytes;
  ds.pixels.reserve(count * (kCifarRecordBytes - 1));
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t base = r * kCifarRecordBytes;
    if (bytes[base] > 9) fail(ErrorCode::DatasetError, "CIFAR-10 label out of range");
    ds.labels.push_back(bytes[base]);
    for (std::size_t k = 1; k < kCifarRecordBytes; ++k) ds.pixels.push_back(static_cast<float>(bytes[base + k]) / 255.0f);
  }
  return ds;
}

/// Seeded synthetic classification data. Class prototypes are smooth blob
/// patterns that depend only on the sample shape and class count, so models
/// fitted on one seed transfer to another; the seed drives labels, shifts and
/// pixel noise.
inline Dataset make_synthetic(std::uint64_t seed, std::size_t count, const Shape& shape, int classes) {
  if (shape.size() != 3 || classes < 1) fail(ErrorCode::InvalidArgument, "synthetic data needs a CHW shape");
  const int c_dim = shape[0];
  const int h_dim = shape[1];
  const int w_dim = shape[2];
  const std::size_t plane = static_cast<std::size_t>(h_dim) * static_cast<std::size_t>(w_dim);

  Rng proto_rng(0x7A9E5EEDULL + static_cast<std::uint64_t>(classes) * 131 + element_count(shape));
  std::vector<std::vector<float>> prototypes(static_cast<std::size_t>(classes));
  for (auto& proto : prototypes) {
    proto.assign(element_count(shape), 0.0f);
    for (int c = 0; c < c_dim; ++c) {
      for (int blob = 0; blob < 3; ++blob) {
        const double cy = proto_rng.uniform(0.2, 0.8) * h_dim;
        const double cx = proto_rng.uniform(0.2, 0.8) * w_dim;
        const double sigma = proto_rng.uniform(0.08, 0.18) * std::min(h_dim, w_dim);
        const double amp = proto_rng.uniform(0.5, 1.0);
        for (int y = 0; y < h_dim; ++y) {
          for (int x = 0; x < w_dim; ++x) {
            const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
            proto[static_cast<std::size_t>(c) * plane + static_cast<std::size_t>(y * w_dim + x)] +=
                static_cast<float>(amp * std::exp(-d2 / (2 * sigma * sigma)));
          }
        }
      }
    }
  }

  Rng rng(seed);
  Dataset ds;
  ds.sample_shape = shape;
  ds.pixels.reserve(count * element_count(shape));
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    const int dy = static_cast<int>(rng.below(5)) - 2;
    const int dx = static_cast<int>(rng.below(5)) - 2;
    const auto& proto = prototypes[static_cast<std::size_t>(label)];
    for (int c = 0; c < c_dim; ++c) {
      for (int y = 0; y < h_dim; ++y) {
        for (int x = 0; x < w_dim; ++x) {
          const int sy = std::clamp(y - dy, 0, h_dim - 1);
          const int sx = std::clamp(x - dx, 0, w_dim - 1);
          const double base = proto[static_cast<std::size_t>(c) * plane + static_cast<std::size_t>(sy * w_dim + sx)];
          ds.pixels.push_back(static_cast<float>(std::clamp(base + 0.2 * rng.normal(), 0.0, 1.0)));
        }
      }
    }
    ds.labels.push_back(label);
  }
  return ds;
}

struct DatasetSpec {
  enum class Kind { Idx, Cifar10, Synthetic } kind = Kind::Synthetic;
  std::string path;
  std::uint64_t seed = 0;

  static DatasetSpec parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) fail(ErrorCode::ParseError, "dataset '" + text + "' lacks a 'kind:' prefix");
    const std::string kind = text.substr(0, colon);
    const std::string rest = text.substr(colon + 1);
    DatasetSpec spec;
    if (kind == "idx") {
      spec.kind = Kind::Idx;
      spec.path = rest;
    } else if (kind == "cifar10") {
      spec.kind = Kind::Cifar10;
      spec.path = rest;
    } else if (kind == "synth") {
      spec.kind = Kind::Synthetic;
      try {
        std::size_t used = 0;
        spec.seed = std::stoull(rest, &used);
        if (used != rest.size()) throw std::invalid_argument(rest);
      } catch (const std::exception&) {
        fail(ErrorCode::ParseError, "synthetic dataset seed '" + rest + "' is not an unsigned integer");
      }
    } else {
      fail(ErrorCode::ParseError, "unknown dataset kind '" + kind + "'");
    }
    return spec;
  }
};

/// Materializes a dataset for a model; `synthetic_count` sizes synth data.
inline Dataset load_dataset(const DatasetSpec& spec, const Model& model, std::size_t synthetic_count) {
  switch (spec.kind) {
    case DatasetSpec::Kind::Idx: return load_idx_dir(spec.path);
    case DatasetSpec::Kind::Cifar10: return load_cifar10(spec.path);
    case DatasetSpec::Kind::Synthetic:
      return make_synthetic(spec.seed, synthetic_count, model.input_shape, std::max(model.num_classes, 1));
  }
  fail(ErrorCode::DatasetError, "unreachable dataset kind");
}

}  // namespace taperfx::nn
