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
 * Per-layer post-training quantization and the quantized inference path.
 *
 * Every layer owns an output activation format; the network input has its
 * own. Conv2d/dense outputs are produced by one quire per output element
 * (weights x input activations + bias) and rounded once into the layer's
 * output format. Other layers work on exact decoded values and re-encode:
 * maxpool picks the largest code (code order is value order), avgpool and
 * residual adds round the exact rational result once.
 *
 * Exported layout (directory):
 *   quantized.json   manifest: layer hyperparameters, per-layer formats,
 *                    selection record and weight MSE
 *   <layer>.codes.bin  weight codes, densely bit-packed: code k occupies
 *                      stream bits [k*n, k*n + n), LSB first, and stream
 *                      bit b lives in byte b/8 at bit position b%8
 *   <layer>.bias.bin   float32 little-endian bias
 */
#pragma once

#include <taperfx/dot.hpp>
#include <taperfx/nn/float_engine.hpp>
#include <taperfx/nn/model.hpp>
#include <taperfx/select.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace taperfx::nn {

enum class FormatFamily { Tfx, Fxp };

inline std::string to_string(FormatFamily f) { return f == FormatFamily::Tfx ? "tfx" : "fxp"; }

/// How formats are chosen: per-layer selection for either family, or one
/// explicit descriptor applied to every weight and activation.
struct FormatPolicy {
  enum class Mode { TfxAuto, FxpAuto, Fixed };
  Mode mode = Mode::TfxAuto;
  int bits = 8;
  Format fixed;

  static FormatPolicy tfx_auto(int bits) { return {Mode::TfxAuto, bits, {}}; }
  static FormatPolicy fxp_auto(int bits) { return {Mode::FxpAuto, bits, {}}; }
  static FormatPolicy fixed_format(const Format& f) { return {Mode::Fixed, f.bits(), f}; }

  /// `tfx:auto`, `fxp:auto` (width from `bits`) or an explicit descriptor.
  static FormatPolicy parse(const std::string& text, int bits) {
    if (text == "tfx:auto") return tfx_auto(bits);
    if (text == "fxp:auto") return fxp_auto(bits);
    return fixed_format(Format::parse(text));
  }

  FormatFamily family() const {
    if (mode == Mode::Fixed) return fixed.is_tfx() ? FormatFamily::Tfx : FormatFamily::Fxp;
    return mode == Mode::TfxAuto ? FormatFamily::Tfx : FormatFamily::Fxp;
  }

  std::string label() const {
    switch (mode) {
      case Mode::TfxAuto: return "tfx:auto";
      case Mode::FxpAuto: return "fxp:auto";
      case Mode::Fixed: return fixed.descriptor();
    }
    return "";
  }
};

struct QuantizedLayer {
  std::optional<Format> weight_format;
  Format output_format;
  std::vector<Code> weight_codes;
  std::vector<float> bias;
  double weight_mse = 0.0;
  std::optional<FormatAssignment> tfx_selection;
  std::optional<FxpAssignment> fxp_selection;
};

struct QuantizedModel {
  /// Layer structure; float weights are absent after reloading an export.
  Model model;
  std::string policy;
  int bits = 8;
  FormatFamily family = FormatFamily::Tfx;
  Format input_format;
  std::vector<QuantizedLayer> layers;

  /// Weight MSE of each conv2d/dense layer, in layer order.
  std::vector<double> weight_mse() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (model.layers[i].has_weights()) out.push_back(layers[i].weight_mse);
    }
    return out;
  }
};

inline QuantizedModel quantize_model(const Model& model, const FormatPolicy& policy, const Calibration& cal) {
  infer_shapes(model);
  if (policy.bits < kMinBits || policy.bits > kMaxBits) {
    fail(ErrorCode::UnsupportedWidth, "bit width " + std::to_string(policy.bits) + " outside [2, 16]");
  }
  if (cal.layers.size() != model.layers.size()) {
    fail(ErrorCode::InvalidArgument, "calibration covers " + std::to_string(cal.layers.size()) + " of " +
                                         std::to_string(model.layers.size()) + " layers");
  }
  const int n = policy.bits;

  QuantizedModel q;
  q.model = model;
  q.policy = policy.label();
  q.bits = n;
  q.family = policy.family();

  const auto activation_format = [&](double amax) -> Format {
    switch (policy.mode) {
      case FormatPolicy::Mode::TfxAuto: return select_params(LayerStats{0.0, amax}, n).activation_format();
      case FormatPolicy::Mode::FxpAuto: return select_fxp_params(amax, n);
      case FormatPolicy::Mode::Fixed: return policy.fixed;
    }
    return policy.fixed;
  };
  q.input_format = activation_format(cal.input_amax);

  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& l = model.layers[i];
    if (l.kind == LayerKind::BatchNorm) {
      fail(ErrorCode::NotFoldable, "fold batchnorm '" + l.name + "' before quantizing");
    }
    QuantizedLayer ql;
    const LayerStats& stats = cal.layers[i];
    switch (policy.mode) {
      case FormatPolicy::Mode::TfxAuto: {
        const FormatAssignment a = select_params(stats, n);
        ql.tfx_selection = a;
        ql.output_format = a.activation_format();
        if (l.has_weights()) ql.weight_format = Format(a.weight_format());
        break;
      }
      case FormatPolicy::Mode::FxpAuto: {
        const FxpAssignment a = select_fxp_params(stats, n);
        ql.fxp_selection = a;
        ql.output_format = a.activation;
        if (l.has_weights()) ql.weight_format = Format(a.weight);
        break;
      }
      case FormatPolicy::Mode::Fixed:
        ql.output_format = policy.fixed;
        if (l.has_weights()) ql.weight_format = policy.fixed;
        break;
    }
    if (l.has_weights()) {
      ql.weight_codes.reserve(l.weight.size());
      double sq = 0.0;
      for (const float w : l.weight) {
        const Code c = quantize_real(w, *ql.weight_format);
        const double err = static_cast<double>(w) - ql.weight_format->value(c);
        sq += err * err;
        ql.weight_codes.push_back(c);
      }
      ql.weight_mse = sq / static_cast<double>(l.weight.size());
      ql.bias = l.bias;
    }
    q.layers.push_back(std::move(ql));
  }
  return q;
}

// ---------------------------------------------------------------------------
// Quantized inference
// ---------------------------------------------------------------------------

/// Signed numerator of every code of a format, indexed by code.
inline std::vector<std::int64_t> numerator_table(const Format& fmt) {
  std::vector<std::int64_t> table(std::size_t{1} << fmt.bits());
  for (Code c = 0; c < table.size(); ++c) table[c] = fmt.numerator(c);
  return table;
}

class QuantizedEngine {
 public:
  explicit QuantizedEngine(const QuantizedModel& qm) : qm_(qm), shapes_(infer_shapes(qm.model, false)) {
    if (qm.layers.size() != qm.model.layers.size()) {
      fail(ErrorCode::InvalidArgument, "quantized layer count does not match the model");
    }
    weight_nums_.resize(qm.layers.size());
    for (std::size_t i = 0; i < qm.layers.size(); ++i) {
      const QuantizedLayer& ql = qm.layers[i];
      if (!qm.model.layers[i].has_weights()) continue;
      if (!ql.weight_format || ql.weight_codes.size() != element_count(qm.model.layers[i].weight_shape())) {
        fail(ErrorCode::ShapeMismatch, "layer '" + qm.model.layers[i].name + "' weight codes do not match its shape");
      }
      const auto& table = table_for(*ql.weight_format);
      auto& nums = weight_nums_[i];
      nums.reserve(ql.weight_codes.size());
      for (const Code c : ql.weight_codes) nums.push_back(table[c]);
    }
  }

  QTensor quantize_input(const Tensor& input) const {
    if (input.shape != qm_.model.input_shape) {
      fail(ErrorCode::ShapeMismatch, "input " + shape_string(input.shape) + " does not match model input " +
                                         shape_string(qm_.model.input_shape));
    }
    QTensor q{input.shape, qm_.input_format, {}};
    q.codes.reserve(input.data.size());
    for (const float v : input.data) q.codes.push_back(quantize_real(v, qm_.input_format));
    return q;
  }

  /// Output of every layer.
  std::vector<QTensor> run_all(const Tensor& input) const {
    std::vector<QTensor> outs;
    outs.reserve(qm_.layers.size());
    const QTensor first = quantize_input(input);
    for (std::size_t i = 0; i < qm_.layers.size(); ++i) {
      const QTensor& in = i == 0 ? first : outs.back();
      outs.push_back(run_layer(i, in, outs));
    }
    return outs;
  }

  QTensor run(const Tensor& input) const { return run_all(input).back(); }

  std::vector<double> logits(const Tensor& input) const { return dequantize(run(input)); }

  std::vector<double> dequantize(const QTensor& t) const {
    const auto& table = table_for(t.format);
    const int e = t.format.resolution_exponent();
    std::vector<double> out;
    out.reserve(t.codes.size());
    for (const Code c : t.codes) out.push_back(std::ldexp(static_cast<double>(table[c]), -e));
    return out;
  }

  const QuantizedModel& model() const { return qm_; }

 private:
  const std::vector<std::int64_t>& table_for(const Format& fmt) const {
    const std::string key = fmt.descriptor();
    auto it = tables_.find(key);
    if (it == tables_.end()) it = tables_.emplace(key, numerator_table(fmt)).first;
    return it->second;
  }

  QTensor run_layer(std::size_t i, const QTensor& in, const std::vector<QTensor>& prior) const {
    const Layer& l = qm_.model.layers[i];
    const QuantizedLayer& ql = qm_.layers[i];
    const Format& out_fmt = ql.output_format;
    QTensor out{shapes_[i], out_fmt, {}};
    out.codes.resize(element_count(shapes_[i]));
    const auto& in_nums = table_for(in.format);
    const int in_exp = in.format.resolution_exponent();

    switch (l.kind) {
      case LayerKind::Conv2d: conv2d(l, ql, weight_nums_[i], in, in_nums, out); break;
      case LayerKind::Dense: {
        Quire q(static_cast<std::size_t>(l.in_features) + 1, *ql.weight_format, in.format);
        const auto& w = weight_nums_[i];
        for (int o = 0; o < l.out_features; ++o) {
          q.reset();
          const std::size_t row = static_cast<std::size_t>(o) * static_cast<std::size_t>(l.in_features);
          for (int k = 0; k < l.in_features; ++k) {
            q.mac_numerators(w[row + static_cast<std::size_t>(k)], in_nums[in.codes[static_cast<std::size_t>(k)]]);
          }
          if (!ql.bias.empty()) q.add_bias(ql.bias[static_cast<std::size_t>(o)]);
          out.codes[static_cast<std::size_t>(o)] = q.finalize(out_fmt);
        }
        break;
      }
      case LayerKind::Relu:
        for (std::size_t k = 0; k < in.codes.size(); ++k) {
          out.codes[k] = quantize_dyadic(std::max<std::int64_t>(in_nums[in.codes[k]], 0), in_exp, out_fmt);
        }
        break;
      case LayerKind::MaxPool:
      case LayerKind::AvgPool: pool(l, in, in_nums, in_exp, out); break;
      case LayerKind::Flatten:
        for (std::size_t k = 0; k < in.codes.size(); ++k) {
          out.codes[k] = in.format == out_fmt ? in.codes[k] : quantize_dyadic(in_nums[in.codes[k]], in_exp, out_fmt);
        }
        break;
      case LayerKind::ResidualAdd: {
        const QTensor& other = prior[static_cast<std::size_t>(qm_.model.index_of(l.residual_from))];
        const auto& other_nums = table_for(other.format);
        const int other_exp = other.format.resolution_exponent();
        const int e = std::max(in_exp, other_exp);
        for (std::size_t k = 0; k < in.codes.size(); ++k) {
          const std::int64_t sum = in_nums[in.codes[k]] * (std::int64_t{1} << (e - in_exp)) +
                                   other_nums[other.codes[k]] * (std::int64_t{1} << (e - other_exp));
          out.codes[k] = quantize_dyadic(sum, e, out_fmt);
        }
        break;
      }
      case LayerKind::BatchNorm:
        fail(ErrorCode::NotFoldable, "quantized path cannot run batchnorm '" + l.name + "'");
    }
    return out;
  }

  static void conv2d(const Layer& l, const QuantizedLayer& ql, const std::vector<std::int64_t>& w,
                     const QTensor& in, const std::vector<std::int64_t>& in_nums, QTensor& out) {
    const int ih = in.shape[1];
    const int iw = in.shape[2];
    const int oh = out.shape[1];
    const int ow = out.shape[2];
    const std::size_t fan_in = static_cast<std::size_t>(l.in_channels * l.kernel_h * l.kernel_w);
    Quire q(fan_in + 1, *ql.weight_format, in.format);
    for (int o = 0; o < l.out_channels; ++o) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          q.reset();
          for (int c = 0; c < l.in_channels; ++c) {
            for (int ky = 0; ky < l.kernel_h; ++ky) {
              const int sy = y * l.stride + ky - l.padding;
              if (sy < 0 || sy >= ih) continue;
              for (int kx = 0; kx < l.kernel_w; ++kx) {
                const int sx = x * l.stride + kx - l.padding;
                if (sx < 0 || sx >= iw) continue;
                q.mac_numerators(w[static_cast<std::size_t>(((o * l.in_channels + c) * l.kernel_h + ky) * l.kernel_w + kx)],
                                 in_nums[in.codes[static_cast<std::size_t>((c * ih + sy) * iw + sx)]]);
              }
            }
          }
          if (!ql.bias.empty()) q.add_bias(ql.bias[static_cast<std::size_t>(o)]);
          out.codes[static_cast<std::size_t>((o * oh + y) * ow + x)] = q.finalize(out.format);
        }
      }
    }
  }

  static void pool(const Layer& l, const QTensor& in, const std::vector<std::int64_t>& in_nums, int in_exp,
                   QTensor& out) {
    const int ih = in.shape[1];
    const int iw = in.shape[2];
    const int n_in = in.format.bits();
    const auto window = static_cast<std::uint64_t>(l.kernel_h * l.kernel_w);
    for (int c = 0; c < out.shape[0]; ++c) {
      for (int y = 0; y < out.shape[1]; ++y) {
        for (int x = 0; x < out.shape[2]; ++x) {
          std::int64_t best_rank = std::numeric_limits<std::int64_t>::min();
          Code best = 0;
          std::int64_t sum = 0;
          for (int ky = 0; ky < l.kernel_h; ++ky) {
            for (int kx = 0; kx < l.kernel_w; ++kx) {
              const Code code = in.codes[static_cast<std::size_t>((c * ih + y * l.stride + ky) * iw + x * l.stride + kx)];
              const std::int64_t rank = signed_rank(code, n_in);
              if (rank > best_rank) {
                best_rank = rank;
                best = code;
              }
              sum += in_nums[code];
            }
          }
          const auto at = static_cast<std::size_t>((c * out.shape[1] + y) * out.shape[2] + x);
          if (l.kind == LayerKind::MaxPool) {
            out.codes[at] = in.format == out.format ? best : quantize_dyadic(in_nums[best], in_exp, out.format);
          } else {
            out.codes[at] = quantize_rational(sum, window, in_exp, out.format);
          }
        }
      }
    }
  }

  const QuantizedModel& qm_;
  std::vector<Shape> shapes_;
  std::vector<std::vector<std::int64_t>> weight_nums_;
  mutable std::map<std::string, std::vector<std::int64_t>> tables_;
};

// ---------------------------------------------------------------------------
// Export / import
// ---------------------------------------------------------------------------

inline std::vector<unsigned char> pack_codes(const std::vector<Code>& codes, int bits) {
  std::vector<unsigned char> bytes((codes.size() * static_cast<std::size_t>(bits) + 7) / 8, 0);
  std::size_t pos = 0;
  for (const Code c : codes) {
    for (int b = 0; b < bits; ++b, ++pos) {
      if ((c >> b) & 1U) bytes[pos / 8] |= static_cast<unsigned char>(1U << (pos % 8));
    }
  }
  return bytes;
}

inline std::vector<Code> unpack_codes(const std::vector<unsigned char>& bytes, std::size_t count, int bits) {
  if (bytes.size() != (count * static_cast<std::size_t>(bits) + 7) / 8) {
    fail(ErrorCode::ShapeMismatch, "packed code blob holds " + std::to_string(bytes.size()) + " bytes, " +
                                       std::to_string(count) + " codes of " + std::to_string(bits) + " bits need " +
                                       std::to_string((count * static_cast<std::size_t>(bits) + 7) / 8));
  }
  std::vector<Code> codes(count, 0);
  std::size_t pos = 0;
  for (auto& c : codes) {
    for (int b = 0; b < bits; ++b, ++pos) {
      if ((bytes[pos / 8] >> (pos % 8)) & 1U) c |= Code{1} << b;
    }
  }
  return codes;
}

inline nlohmann::json selection_json(const QuantizedLayer& ql) {
  if (ql.tfx_selection) {
    return {{"is_w", ql.tfx_selection->is_w}, {"is_a", ql.tfx_selection->is_a}, {"sc_w", ql.tfx_selection->sc_w}};
  }
  if (ql.fxp_selection) {
    return {{"frac_w", ql.fxp_selection->weight.frac_bits}, {"frac_a", ql.fxp_selection->activation.frac_bits}};
  }
  return nlohmann::json::object();
}

inline void save_quantized(const QuantizedModel& qm, const std::filesystem::path& dir,
                           const std::string& manifest_name = "quantized.json") {
  std::filesystem::create_directories(dir);
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < qm.layers.size(); ++i) {
    const Layer& l = qm.model.layers[i];
    const QuantizedLayer& ql = qm.layers[i];
    nlohmann::json j = layer_to_json(l);
    j["output_format"] = ql.output_format.descriptor();
    j["selection"] = selection_json(ql);
    if (l.has_weights()) {
      j["weight_format"] = ql.weight_format->descriptor();
      j["weight_mse"] = ql.weight_mse;
      nlohmann::json codes = write_blob(dir, l.name + ".codes.bin", pack_codes(ql.weight_codes, ql.weight_format->bits()));
      codes["count"] = ql.weight_codes.size();
      codes["bits"] = ql.weight_format->bits();
      nlohmann::json tensors{{"weight_codes", codes}};
      if (!ql.bias.empty()) {
        nlohmann::json bias = write_blob(dir, l.name + ".bias.bin", floats_to_bytes(ql.bias));
        bias["shape"] = Shape{static_cast<int>(ql.bias.size())};
        tensors["bias"] = bias;
      }
      j["tensors"] = tensors;
    }
    layers.push_back(j);
  }
  const nlohmann::json doc{{"format", "taperfx-quantized"},
                           {"version", 1},
                           {"name", qm.model.name},
                           {"policy", qm.policy},
                           {"bits", qm.bits},
                           {"family", to_string(qm.family)},
                           {"input_shape", qm.model.input_shape},
                           {"num_classes", qm.model.num_classes},
                           {"input_format", qm.input_format.descriptor()},
                           {"layers", layers}};
  write_text(dir / manifest_name, doc.dump(2) + "\n");
}

inline bool is_quantized_manifest(const std::filesystem::path& path) {
  return read_json(path).value("format", std::string{}) == "taperfx-quantized";
}

inline QuantizedModel load_quantized(const std::filesystem::path& manifest_path) {
  const nlohmann::json doc = read_json(manifest_path);
  const auto dir = manifest_path.parent_path();
  QuantizedModel qm;
  try {
    if (doc.value("format", std::string{}) != "taperfx-quantized") {
      fail(ErrorCode::ParseError, "'" + manifest_path.string() + "' is not a taperfx-quantized manifest");
    }
    qm.model.name = doc.value("name", std::string{"model"});
    qm.model.input_shape = doc.at("input_shape").get<Shape>();
    qm.model.num_classes = doc.value("num_classes", 0);
    qm.policy = doc.at("policy").get<std::string>();
    qm.bits = doc.at("bits").get<int>();
    qm.family = doc.at("family").get<std::string>() == "tfx" ? FormatFamily::Tfx : FormatFamily::Fxp;
    qm.input_format = Format::parse(doc.at("input_format").get<std::string>());
    for (const auto& lj : doc.at("layers")) {
      Layer l = layer_from_json(lj);
      QuantizedLayer ql;
      ql.output_format = Format::parse(lj.at("output_format").get<std::string>());
      const nlohmann::json sel = lj.value("selection", nlohmann::json::object());
      if (sel.contains("is_w")) {
        ql.tfx_selection = FormatAssignment{sel.at("is_w").get<int>(), sel.at("is_a").get<int>(),
                                            sel.at("sc_w").get<int>(), qm.bits};
      } else if (sel.contains("frac_w")) {
        ql.fxp_selection = FxpAssignment{FxpConfig::make(qm.bits, sel.at("frac_w").get<int>()),
                                         FxpConfig::make(qm.bits, sel.at("frac_a").get<int>())};
      }
      if (l.has_weights()) {
        ql.weight_format = Format::parse(lj.at("weight_format").get<std::string>());
        ql.weight_mse = lj.value("weight_mse", 0.0);
        const auto& tensors = lj.at("tensors");
        const auto& codes = tensors.at("weight_codes");
        const std::size_t count = codes.at("count").get<std::size_t>();
        const int bits = codes.at("bits").get<int>();
        if (bits != ql.weight_format->bits() || count != element_count(l.weight_shape())) {
          fail(ErrorCode::ShapeMismatch, "layer '" + l.name + "' weight codes do not match its format or shape");
        }
        ql.weight_codes = unpack_codes(read_blob(dir, codes), count, bits);
        if (tensors.contains("bias")) {
          ql.bias = bytes_to_floats(read_blob(dir, tensors["bias"]));
          if (ql.bias.size() != static_cast<std::size_t>(l.bias_size())) {
            fail(ErrorCode::ShapeMismatch, "layer '" + l.name + "' bias length mismatch");
          }
        }
      }
      qm.model.layers.push_back(std::move(l));
      qm.layers.push_back(std::move(ql));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, "'" + manifest_path.string() + "': " + e.what());
  }
  infer_shapes(qm.model, false);
  return qm;
}

/// CSV: one row per layer with the chosen formats and selection parameters.
inline std::string selection_report_csv(const QuantizedModel& qm) {
  std::string out = "layer,kind,weight_format,activation_format,is_w,is_a,sc_w,frac_w,frac_a\n";
  out += "input,input,," + qm.input_format.descriptor() + ",,,,,\n";
  for (std::size_t i = 0; i < qm.layers.size(); ++i) {
    const Layer& l = qm.model.layers[i];
    const QuantizedLayer& ql = qm.layers[i];
    out += l.name + "," + to_string(l.kind) + "," + (ql.weight_format ? ql.weight_format->descriptor() : "") + "," +
           ql.output_format.descriptor() + ",";
    const bool w = l.has_weights();
    if (ql.tfx_selection) {
      out += (w ? std::to_string(ql.tfx_selection->is_w) : "") + "," + std::to_string(ql.tfx_selection->is_a) + "," +
             (w ? std::to_string(ql.tfx_selection->sc_w) : "") + ",,";
    } else if (ql.fxp_selection) {
      out += ",,," + (w ? std::to_string(ql.fxp_selection->weight.frac_bits) : "") + "," +
             std::to_string(ql.fxp_selection->activation.frac_bits);
    } else {
      out += ",,,,";
    }
    out += "\n";
  }
  return out;
}

}  // namespace taperfx::nn
