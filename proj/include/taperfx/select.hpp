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

// Per-layer format parameter selection from max-abs statistics.
#pragma once

#include <taperfx/error.hpp>
#include <taperfx/formats.hpp>

#include <algorithm>
#include <cmath>
#include <span>

namespace taperfx {

struct LayerStats {
  double w_amax = 0.0;
  double a_amax = 0.0;
};

struct FormatAssignment {
  int is_w = 1;
  int is_a = 1;
  int sc_w = 0;
  int n = 8;

  TfxConfig weight_format() const { return TfxConfig::make(n, is_w, sc_w); }
  /// Activations are never scaled.
  TfxConfig activation_format() const { return TfxConfig::make(n, is_a, 0); }

  bool operator==(const FormatAssignment&) const = default;
};

struct FxpAssignment {
  FxpConfig weight;
  FxpConfig activation;
};

inline double tensor_stats(std::span<const float> values) {
  if (values.empty()) {
    fail(ErrorCode::InvalidArgument, "statistics of an empty tensor");
  }
  double amax = 0.0;
  for (const float v : values) {
    if (!std::isfinite(v)) {
      fail(ErrorCode::InvalidArgument, "non-finite value in tensor");
    }
    amax = std::max(amax, static_cast<double>(std::fabs(v)));
  }
  return amax;
}

namespace detail {

inline void check_amax(double amax) {
  if (!std::isfinite(amax) || amax < 0.0) {
    fail(ErrorCode::InvalidArgument, "max-abs statistic must be finite and non-negative");
  }
}

inline void check_width(int n) {
  if (n < kMinBits || n > kMaxBits) {
    fail(ErrorCode::UnsupportedWidth, "bit width " + std::to_string(n) + " outside [2, 16]");
  }
}

/// floor(amax) + 1, saturated at n.
inline int integer_span(double amax, int n) {
  if (amax >= n) return n;
  return std::min(static_cast<int>(std::floor(amax)) + 1, n);
}

}  // namespace detail

inline FormatAssignment select_params(const LayerStats& stats, int n) {
  detail::check_amax(stats.w_amax);
  detail::check_amax(stats.a_amax);
  detail::check_width(n);

  FormatAssignment out;
  out.n = n;
  out.is_w = detail::integer_span(stats.w_amax, n);
  out.is_a = detail::integer_span(stats.a_amax, n);
  // An all-zero tensor keeps SC = 0; log2(0) is undefined.
  if (stats.w_amax > 0.0 && stats.w_amax < 0.5) {
    const int sc = static_cast<int>(std::floor(std::log2(stats.w_amax))) + 1;
    out.sc_w = std::clamp(sc, kMinScale, kMaxScale);
  }
  return out;
}

/// Largest fraction width whose positive extreme still covers amax.
inline FxpConfig select_fxp_params(double amax, int n) {
  detail::check_amax(amax);
  detail::check_width(n);
  for (int frac = n - 1; frac >= 1; --frac) {
    const FxpConfig cfg = FxpConfig::make(n, frac);
    if (amax <= extremes(Format(cfg)).max_pos) return cfg;
  }
  return FxpConfig::make(n, 1);
}

inline FxpAssignment select_fxp_params(const LayerStats& stats, int n) {
  return FxpAssignment{select_fxp_params(stats.w_amax, n), select_fxp_params(stats.a_amax, n)};
}

}  // namespace taperfx
