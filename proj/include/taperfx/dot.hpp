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
 * Exact dot products through a wide integer accumulator (quire).
 *
 * Operands are decoded to sign + unsigned numerator at the format's widest
 * fraction width. Products are accumulated without rounding; the binary point
 * of the accumulator sits at
 *
 *   (frac_w - SC_w) + (frac_a - SC_a)
 *
 * places, so the weight and activation scales are absorbed by bookkeeping
 * rather than by shifting. A single rounding happens in finalize().
 */
#pragma once

#include <taperfx/error.hpp>
#include <taperfx/formats.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>

namespace taperfx {

struct DecodedOperand {
  int sign = 1;
  std::uint64_t magnitude = 0;
  /// Fraction places of `magnitude`, before the power-of-two scale.
  int frac_places = 0;
  int scale = 0;

  std::int64_t signed_numerator() const { return sign * static_cast<std::int64_t>(magnitude); }
};

inline int ceil_log2(std::uint64_t x) { return x <= 1 ? 0 : static_cast<int>(std::bit_width(x - 1)); }

/// ceil(log2 m) + 2 ceil(log2(Max/Min)) + 2, using the wider of the two
/// operand dynamic ranges.
inline int quire_width(std::size_t m_mults, const Format& w, const Format& a) {
  if (m_mults < 1) {
    fail(ErrorCode::InvalidArgument, "quire needs at least one multiplier");
  }
  const std::uint64_t ratio = std::max(dynamic_range(w).integer_ratio(), dynamic_range(a).integer_ratio());
  return ceil_log2(m_mults) + 2 * ceil_log2(ratio) + 2;
}

inline DecodedOperand decode_operand(Code code, const Format& fmt) {
  const std::int64_t num = fmt.numerator(code);
  DecodedOperand d;
  d.sign = num < 0 ? -1 : 1;
  d.magnitude = static_cast<std::uint64_t>(num < 0 ? -num : num);
  d.frac_places = fmt.frac_places();
  d.scale = fmt.scale();
  return d;
}

class Quire {
 public:
  Quire(std::size_t max_terms, const Format& weight_fmt, const Format& act_fmt)
      : weight_fmt_(weight_fmt),
        act_fmt_(act_fmt),
        max_terms_(max_terms),
        width_(quire_width(max_terms, weight_fmt, act_fmt)),
        point_(weight_fmt.resolution_exponent() + act_fmt.resolution_exponent()) {
    if (width_ > 63) {
      fail(ErrorCode::InvalidConfig, "quire width " + std::to_string(width_) + " exceeds 63 bits");
    }
    limit_ = std::int64_t{1} << (width_ - 1);
  }

  int width() const { return width_; }
  /// Fraction places of the accumulator.
  int binary_point() const { return point_; }
  std::int64_t accumulator() const { return acc_; }
  std::size_t terms() const { return terms_; }
  std::size_t max_terms() const { return max_terms_; }
  const Format& weight_format() const { return weight_fmt_; }
  const Format& activation_format() const { return act_fmt_; }

  /// Value of the accumulator; exact whenever |acc| <= 2^53.
  double value() const { return std::ldexp(static_cast<double>(acc_), -point_); }

  void mac(Code w, Code a) { mac(decode_operand(w, weight_fmt_), decode_operand(a, act_fmt_)); }

  void mac(const DecodedOperand& w, const DecodedOperand& a) {
    const int sign = (w.sign < 0) != (a.sign < 0) ? -1 : 1;
    add_term(sign * static_cast<std::int64_t>(w.magnitude * a.magnitude));
  }

  /// Fast path for pre-decoded signed numerators (see Format::numerator).
  void mac_numerators(std::int64_t w_num, std::int64_t a_num) { add_term(w_num * a_num); }

  /// Adds a bias rounded to the accumulator's binary point. Counts as a term
  /// and saturates at the largest single-product magnitude.
  void add_bias(double bias) {
    if (!std::isfinite(bias)) {
      fail(ErrorCode::InvalidArgument, "non-finite bias");
    }
    const double bound = static_cast<double>(max_product_magnitude());
    const double aligned = std::clamp(std::nearbyint(std::ldexp(bias, point_)), -bound, bound);
    add_term(static_cast<std::int64_t>(aligned));
  }

  /// Single rounding of the exact sum into `out`.
  Code finalize(const Format& out) const { return quantize_dyadic(acc_, point_, out); }

  void reset() {
    acc_ = 0;
    terms_ = 0;
  }

 private:
  std::int64_t max_product_magnitude() const {
    const auto mag = [](const Format& f) {
      const std::int64_t v = f.numerator(f.most_negative());
      return v < 0 ? -v : v;
    };
    return mag(weight_fmt_) * mag(act_fmt_);
  }

  void add_term(std::int64_t term) {
    if (terms_ >= max_terms_) {
      fail(ErrorCode::ContractViolation, "quire declared for " + std::to_string(max_terms_) + " terms");
    }
    ++terms_;
    acc_ += term;
    if (acc_ >= limit_ || acc_ <= -limit_) {
      fail(ErrorCode::QuireOverflow, "accumulator exceeds " + std::to_string(width_) + " bits");
    }
  }

  Format weight_fmt_;
  Format act_fmt_;
  std::size_t max_terms_;
  int width_;
  int point_;
  std::int64_t limit_ = 0;
  std::int64_t acc_ = 0;
  std::size_t terms_ = 0;
};

inline Code dot(std::span<const Code> w_codes, std::span<const Code> a_codes, const Format& w_fmt,
                const Format& a_fmt, const Format& out_fmt) {
  if (w_codes.size() != a_codes.size()) {
    fail(ErrorCode::LengthMismatch, "dot operands differ in length");
  }
  Quire q(std::max<std::size_t>(w_codes.size(), 1), w_fmt, a_fmt);
  for (std::size_t i = 0; i < w_codes.size(); ++i) {
    q.mac(w_codes[i], a_codes[i]);
  }
  return q.finalize(out_fmt);
}

}  // namespace taperfx
