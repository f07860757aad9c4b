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
 * Analytic cost model of an output-stationary systolic array.
 *
 * A conv2d/dense layer lowers to a GEMM (M, K, N). Each rows x cols output
 * tile costs K + rows + cols - 2 cycles (K accumulation steps plus fill and
 * drain). Per layer the DRAM transfer (weights, input and output
 * activations at n bits) takes ceil(bytes / bandwidth) + latency cycles and is
 * double-buffered against compute:
 *
 *   total = sum_l max(compute_l, transfer_l) + latency
 *
 * where the trailing latency is the first load, which nothing hides.
 * Energy = MACs * e_mac(format, n) + bytes * (e_sram + e_dram).
 */
#pragma once

#include <taperfx/error.hpp>
#include <taperfx/nn/model.hpp>
#include <taperfx/nn/quantized.hpp>

#include <cmath>
#include <cstdint>
#include <charconv>
#include <filesystem>
#include <string>
#include <vector>

namespace taperfx::sim {

using nn::FormatFamily;

struct ArrayConfig {
  int rows = 16;
  int cols = 16;

  /// "RxC", e.g. "16x16".
  static ArrayConfig parse(const std::string& text) {
    const auto x = text.find('x');
    ArrayConfig a;
    try {
      if (x == std::string::npos) throw std::invalid_argument(text);
      std::size_t used = 0;
      a.rows = std::stoi(text.substr(0, x), &used);
      if (used != x) throw std::invalid_argument(text);
      a.cols = std::stoi(text.substr(x + 1), &used);
      if (used != text.size() - x - 1) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      fail(ErrorCode::ParseError, "array '" + text + "' is not of the form RxC");
    }
    a.validate();
    return a;
  }

  void validate() const {
    if (rows < 1 || cols < 1) fail(ErrorCode::InvalidConfig, "array dimensions must be >= 1");
  }
};

struct MemoryConfig {
  std::uint64_t sram_bytes = 3 * 108 * 1024;
  std::uint64_t dram_bytes_per_cycle = 16;
  std::uint64_t dram_latency_cycles = 100;

  void validate() const {
    if (sram_bytes == 0 || dram_bytes_per_cycle == 0 || dram_latency_cycles == 0) {
      fail(ErrorCode::InvalidConfig, "memory parameters must be positive");
    }
  }

  /// Keys: sram_bytes, dram_bytes_per_cycle, dram_latency_cycles (all optional).
  static MemoryConfig from_json(const nlohmann::json& j) {
    MemoryConfig m;
    try {
      m.sram_bytes = j.value("sram_bytes", m.sram_bytes);
      m.dram_bytes_per_cycle = j.value("dram_bytes_per_cycle", m.dram_bytes_per_cycle);
      m.dram_latency_cycles = j.value("dram_latency_cycles", m.dram_latency_cycles);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::InvalidConfig, std::string("memory config: ") + e.what());
    }
    m.validate();
    return m;
  }
};

/// Energy coefficients in joules. The defaults are ILLUSTRATIVE placeholders:
/// FXP MAC energy scales with (n / reference_bits)^width_exponent and a TFX
/// MAC costs tfx_mac_ratio times the FXP MAC of the same width.
struct CostTable {
  double fxp_mac_j = 0.2e-12;
  double tfx_mac_ratio = 1.25;
  int reference_bits = 8;
  double width_exponent = 2.0;
  double sram_byte_j = 1e-12;
  double dram_byte_j = 20e-12;

  double mac_energy(FormatFamily family, int bits) const {
    const double fxp = fxp_mac_j * std::pow(static_cast<double>(bits) / reference_bits, width_exponent);
    return family == FormatFamily::Tfx ? fxp * tfx_mac_ratio : fxp;
  }

  void validate() const {
    if (fxp_mac_j < 0 || tfx_mac_ratio < 0 || sram_byte_j < 0 || dram_byte_j < 0 || reference_bits < 1) {
      fail(ErrorCode::InvalidConfig, "cost coefficients must be non-negative");
    }
  }

  static CostTable from_json(const nlohmann::json& j) {
    CostTable c;
    try {
      c.fxp_mac_j = j.value("fxp_mac_j", c.fxp_mac_j);
      c.tfx_mac_ratio = j.value("tfx_mac_ratio", c.tfx_mac_ratio);
      c.reference_bits = j.value("reference_bits", c.reference_bits);
      c.width_exponent = j.value("width_exponent", c.width_exponent);
      c.sram_byte_j = j.value("sram_byte_j", c.sram_byte_j);
      c.dram_byte_j = j.value("dram_byte_j", c.dram_byte_j);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::InvalidConfig, std::string("cost table: ") + e.what());
    }
    c.validate();
    return c;
  }
};

struct Gemm {
  std::uint64_t m = 0;
  std::uint64_t k = 0;
  std::uint64_t n = 0;

  std::uint64_t macs() const { return m * k * n; }
};

struct TileSchedule {
  std::uint64_t cycles = 0;
  double utilization = 0.0;
};

inline std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

inline TileSchedule schedule_layer(const Gemm& g, const ArrayConfig& array) {
  array.validate();
  if (g.m == 0 || g.k == 0 || g.n == 0) return {};
  const auto rows = static_cast<std::uint64_t>(array.rows);
  const auto cols = static_cast<std::uint64_t>(array.cols);
  TileSchedule s;
  s.cycles = ceil_div(g.m, rows) * ceil_div(g.n, cols) * (g.k + rows + cols - 2);
  s.utilization = static_cast<double>(g.macs()) / (static_cast<double>(s.cycles) * static_cast<double>(rows * cols));
  return s;
}

/// im2col lowering, batch 1; layers without weights lower to (0, 0, 0).
inline Gemm lower_to_gemm(const nn::Layer& l, const nn::Shape& out_shape) {
  if (l.kind == nn::LayerKind::Dense) {
    return {static_cast<std::uint64_t>(l.out_features), static_cast<std::uint64_t>(l.in_features), 1};
  }
  if (l.kind == nn::LayerKind::Conv2d) {
    return {static_cast<std::uint64_t>(l.out_channels),
            static_cast<std::uint64_t>(l.kernel_h) * static_cast<std::uint64_t>(l.kernel_w) *
                static_cast<std::uint64_t>(l.in_channels),
            static_cast<std::uint64_t>(out_shape[1]) * static_cast<std::uint64_t>(out_shape[2])};
  }
  return {};
}

struct LayerCost {
  std::string name;
  Gemm gemm;
  std::uint64_t compute_cycles = 0;
  std::uint64_t transfer_cycles = 0;
  std::uint64_t dram_bytes = 0;
};

struct SimReport {
  std::uint64_t cycles = 0;
  std::uint64_t compute_cycles = 0;
  double utilization = 0.0;
  std::uint64_t dram_bytes = 0;
  std::uint64_t sram_bytes = 0;
  std::uint64_t macs = 0;
  double energy_j = 0.0;
  double edp = 0.0;
  std::vector<LayerCost> layers;
};

inline std::uint64_t packed_bytes(std::uint64_t elements, int bits) {
  return ceil_div(elements * static_cast<std::uint64_t>(bits), 8);
}

inline SimReport simulate_model(const nn::Model& model, int bits, FormatFamily family, const ArrayConfig& array,
                                const MemoryConfig& mem, const CostTable& costs, double clock_hz) {
  array.validate();
  mem.validate();
  costs.validate();
  if (bits < kMinBits || bits > kMaxBits) {
    fail(ErrorCode::UnsupportedWidth, "bit width " + std::to_string(bits) + " outside [2, 16]");
  }
  if (!(clock_hz > 0)) fail(ErrorCode::InvalidConfig, "clock must be positive");
  SimReport r;
  if (model.layers.empty()) return r;

  const auto shapes = nn::infer_shapes(model, false);
  const auto rows = static_cast<std::uint64_t>(array.rows);
  const auto cols = static_cast<std::uint64_t>(array.cols);
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const nn::Layer& l = model.layers[i];
    const Gemm g = lower_to_gemm(l, shapes[i]);
    if (g.macs() == 0) continue;
    const std::uint64_t tile_elements = rows * g.k + g.k * cols + rows * cols;
    if (packed_bytes(tile_elements, bits) > mem.sram_bytes) {
      fail(ErrorCode::TileOverflow, "layer '" + l.name + "' needs " + std::to_string(packed_bytes(tile_elements, bits)) +
                                        " bytes per tile, SRAM holds " + std::to_string(mem.sram_bytes));
    }
    LayerCost c;
    c.name = l.name;
    c.gemm = g;
    c.compute_cycles = schedule_layer(g, array).cycles;
    const std::uint64_t in_elements = nn::element_count(i == 0 ? model.input_shape : shapes[i - 1]);
    c.dram_bytes = packed_bytes(g.m * g.k, bits) + packed_bytes(in_elements, bits) + packed_bytes(g.m * g.n, bits);
    c.transfer_cycles = ceil_div(c.dram_bytes, mem.dram_bytes_per_cycle) + mem.dram_latency_cycles;
    r.cycles += std::max(c.compute_cycles, c.transfer_cycles);
    r.compute_cycles += c.compute_cycles;
    r.dram_bytes += c.dram_bytes;
    r.macs += g.macs();
    r.layers.push_back(c);
  }
  if (r.layers.empty()) return r;
  r.cycles += mem.dram_latency_cycles;
  r.sram_bytes = r.dram_bytes;
  r.utilization = static_cast<double>(r.macs) / (static_cast<double>(r.compute_cycles) * static_cast<double>(rows * cols));
  r.energy_j = static_cast<double>(r.macs) * costs.mac_energy(family, bits) +
               static_cast<double>(r.sram_bytes) * costs.sram_byte_j + static_cast<double>(r.dram_bytes) * costs.dram_byte_j;
  r.edp = r.energy_j * (static_cast<double>(r.cycles) / clock_hz);
  return r;
}

inline SimReport simulate_model(const nn::QuantizedModel& qm, const ArrayConfig& array, const MemoryConfig& mem,
                                const CostTable& costs, double clock_hz) {
  return simulate_model(qm.model, qm.bits, qm.family, array, mem, costs, clock_hz);
}

// ---------------------------------------------------------------------------
// Sweep table
// ---------------------------------------------------------------------------

struct SweepRow {
  FormatFamily family = FormatFamily::Tfx;
  int bits = 8;
  std::string policy;
  SimReport report;
  double top1 = 0.0;
  double mean_mse = 0.0;
};

/// Quality numbers per (format, n) point, produced by the caller.
struct SweepPoint {
  FormatFamily family = FormatFamily::Tfx;
  int bits = 8;
  std::string policy;
  double top1 = 0.0;
  double mean_mse = 0.0;
};

inline std::vector<SweepRow> edp_sweep(const nn::Model& model, const std::vector<SweepPoint>& points,
                                       const ArrayConfig& array, const MemoryConfig& mem, const CostTable& costs,
                                       double clock_hz) {
  std::vector<SweepRow> rows;
  rows.reserve(points.size());
  for (const auto& p : points) {
    rows.push_back({p.family, p.bits, p.policy, simulate_model(model, p.bits, p.family, array, mem, costs, clock_hz),
                    p.top1, p.mean_mse});
  }
  return rows;
}

/// Shortest round-trip decimal form of a double.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "format,n,is_policy,cycles,utilization,dram_bytes,energy_j,edp,top1,mean_mse,compute_cycles,macs\n";
  for (const auto& r : rows) {
    out += nn::to_string(r.family) + "," + std::to_string(r.bits) + "," + r.policy + "," +
           std::to_string(r.report.cycles) + "," + format_number(r.report.utilization) + "," +
           std::to_string(r.report.dram_bytes) + "," + format_number(r.report.energy_j) + "," +
           format_number(r.report.edp) + "," + format_number(r.top1) + "," + format_number(r.mean_mse) + "," +
           std::to_string(r.report.compute_cycles) + "," + std::to_string(r.report.macs) + "\n";
  }
  return out;
}

/// Whitespace-separated table for plotting EDP against top-1 error.
inline std::string edp_error_table(const std::vector<SweepRow>& rows) {
  std::string out = "# format n top1_error edp_js mean_mse\n";
  for (const auto& r : rows) {
    out += nn::to_string(r.family) + " " + std::to_string(r.bits) + " " + format_number(1.0 - r.top1) + " " +
           format_number(r.report.edp) + " " + format_number(r.mean_mse) + "\n";
  }
  return out;
}

}  // namespace taperfx::sim
