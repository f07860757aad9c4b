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
 * Bit-exact tapered fixed-point (TFX) and two's-complement fixed-point (FXP)
 * formats.
 *
 * TFX(n, IS, SC) layout, MSB first:
 *
 *   s | i i ... i | ~i | f f ... f
 *
 * The sign bit s is complemented to give the first run digit i = ~s, so the
 * sign position is also the first digit of the run. The run of identical
 * digits has length m (1 <= m <= IS). It ends at the first differing bit (the
 * terminator, which is consumed) or after IS digits (no terminator stored).
 * The integer is I = m - 1 when i = 1 and I = -m when i = 0. The remaining
 * fs = n - m - (m < IS) low bits are the fraction f, and the value is
 *
 *   (I + f / 2^fs) * 2^SC
 *
 * Every n-bit pattern decodes; the all-zeros pattern is the unique zero, and
 * interpreting codes as n-bit two's-complement integers orders them by value.
 */
#pragma once

#include <taperfx/error.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace taperfx {

/// An n-bit pattern holding one quantized scalar; only the low n bits are used.
using Code = std::uint32_t;

inline constexpr int kMinBits = 2;
inline constexpr int kMaxBits = 16;
inline constexpr int kMinScale = -4;
inline constexpr int kMaxScale = 0;

struct TfxConfig {
  int n = 8;
  int is_max = 8;
  int sc = 0;

  static TfxConfig make(int n, int is_max, int sc) {
    if (n < kMinBits || n > kMaxBits) {
      fail(ErrorCode::UnsupportedWidth, "tfx width " + std::to_string(n) + " outside [2, 16]");
    }
    if (is_max < 1 || is_max > n) {
      fail(ErrorCode::InvalidConfig, "IS " + std::to_string(is_max) + " outside [1, n]");
    }
    if (sc < kMinScale || sc > kMaxScale) {
      fail(ErrorCode::InvalidConfig, "SC " + std::to_string(sc) + " outside [-4, 0]");
    }
    return TfxConfig{n, is_max, sc};
  }

  /// Widest fraction field, reached at run length 1.
  int max_frac_bits() const { return is_max == 1 ? n - 1 : n - 2; }

  bool operator==(const TfxConfig&) const = default;
};

struct FxpConfig {
  int n = 8;
  int frac_bits = 7;

  static FxpConfig make(int n, int frac_bits) {
    if (n < kMinBits || n > kMaxBits) {
      fail(ErrorCode::UnsupportedWidth, "fxp width " + std::to_string(n) + " outside [2, 16]");
    }
    if (frac_bits < 1 || frac_bits > n - 1) {
      fail(ErrorCode::InvalidConfig, "frac_bits " + std::to_string(frac_bits) + " outside [1, n-1]");
    }
    return FxpConfig{n, frac_bits};
  }

  bool operator==(const FxpConfig&) const = default;
};

struct UnpackedTfx {
  int sign = 1;
  int int_value = 0;
  std::uint32_t frac_numerator = 0;
  int frac_bits = 0;
  int run_length = 1;

  bool operator==(const UnpackedTfx&) const = default;
};

struct FormatExtremes {
  double max_pos = 0.0;
  double min_neg = 0.0;
  double min_pos = 0.0;
};

/// Dynamic range as a (largest magnitude, smallest magnitude) pair,
/// independent of the power-of-two scale.
struct DynamicRange {
  double max_magnitude = 0.0;
  double min_magnitude = 0.0;

  double ratio() const { return max_magnitude / min_magnitude; }
  /// max/min is always an integer for both formats.
  std::uint64_t integer_ratio() const { return static_cast<std::uint64_t>(ratio()); }
};

struct CodeValue {
  Code code = 0;
  double value = 0.0;
};

namespace detail {

inline Code low_mask(int n) { return n >= 32 ? ~Code{0} : ((Code{1} << n) - 1); }

inline void check_code(Code code, int n) {
  if ((code & ~low_mask(n)) != 0) {
    fail(ErrorCode::InvalidArgument, "code has bits set above width " + std::to_string(n));
  }
}

}  // namespace detail

/// Two's-complement interpretation of an n-bit code.
inline std::int64_t signed_rank(Code code, int n) {
  const auto raw = static_cast<std::int64_t>(code & detail::low_mask(n));
  return raw >= (std::int64_t{1} << (n - 1)) ? raw - (std::int64_t{1} << n) : raw;
}

inline Code code_from_rank(std::int64_t rank, int n) {
  return static_cast<Code>(static_cast<std::uint64_t>(rank)) & detail::low_mask(n);
}

// ---------------------------------------------------------------------------
// TFX encode / decode
// ---------------------------------------------------------------------------

inline UnpackedTfx unpack(Code code, const TfxConfig& cfg) {
  detail::check_code(code, cfg.n);
  const int n = cfg.n;
  const auto bit = [&](int pos) { return static_cast<int>((code >> pos) & 1U); };

  const int run_digit = 1 - bit(n - 1);
  int m = 1;
  int pos = n - 2;
  while (m < cfg.is_max && pos >= 0 && bit(pos) == run_digit) {
    ++m;
    --pos;
  }
  // m < IS implies the run stopped on a differing bit: the terminator.
  const int terminator = m < cfg.is_max ? 1 : 0;
  const int fs = n - m - terminator;

  UnpackedTfx u;
  u.sign = run_digit == 1 ? 1 : -1;
  u.run_length = m;
  u.int_value = run_digit == 1 ? m - 1 : -m;
  u.frac_bits = fs;
  u.frac_numerator = code & detail::low_mask(fs);
  return u;
}

inline double to_real(const UnpackedTfx& u, const TfxConfig& cfg) {
  const double scaled = std::ldexp(static_cast<double>(u.int_value), u.frac_bits) + u.frac_numerator;
  return std::ldexp(scaled, cfg.sc - u.frac_bits);
}

inline Code pack(const UnpackedTfx& u, const TfxConfig& cfg) {
  const int run_digit = u.int_value >= 0 ? 1 : 0;
  const int m = run_digit == 1 ? u.int_value + 1 : -u.int_value;
  if (m < 1 || m > cfg.is_max) {
    fail(ErrorCode::NotRepresentable, "integer " + std::to_string(u.int_value) + " needs run length " +
                                          std::to_string(m) + " > IS " + std::to_string(cfg.is_max));
  }
  const int terminator = m < cfg.is_max ? 1 : 0;
  const int fs = cfg.n - m - terminator;
  if (u.sign != (run_digit == 1 ? 1 : -1) || u.run_length != m || u.frac_bits != fs) {
    fail(ErrorCode::NotRepresentable, "inconsistent sign, run length or fraction width");
  }
  if (u.frac_numerator > detail::low_mask(fs)) {
    fail(ErrorCode::NotRepresentable, "fraction numerator does not fit " + std::to_string(fs) + " bits");
  }

  Code code = static_cast<Code>(1 - run_digit) << (cfg.n - 1);
  int pos = cfg.n - 2;
  for (int k = 1; k < m; ++k, --pos) {
    code |= static_cast<Code>(run_digit) << pos;
  }
  if (terminator == 1) {
    code |= static_cast<Code>(1 - run_digit) << pos;
  }
  return code | u.frac_numerator;
}

// ---------------------------------------------------------------------------
// Format: either of the two number systems behind one value type
// ---------------------------------------------------------------------------

class Format {
 public:
  Format() = default;
  Format(TfxConfig cfg) : cfg_(cfg) {}  // NOLINT(google-explicit-constructor)
  Format(FxpConfig cfg) : cfg_(cfg) {}  // NOLINT(google-explicit-constructor)

  bool is_tfx() const { return std::holds_alternative<TfxConfig>(cfg_); }
  bool is_fxp() const { return std::holds_alternative<FxpConfig>(cfg_); }
  const TfxConfig& tfx() const { return std::get<TfxConfig>(cfg_); }
  const FxpConfig& fxp() const { return std::get<FxpConfig>(cfg_); }

  int bits() const {
    return std::visit([](const auto& c) { return c.n; }, cfg_);
  }

  /// Power-of-two scale; always 0 for FXP.
  int scale() const { return is_tfx() ? tfx().sc : 0; }

  /// Fraction places of the unscaled integer numerator of a code.
  int frac_places() const { return is_tfx() ? tfx().max_frac_bits() : fxp().frac_bits; }

  /// Every value is numerator(code) * 2^-resolution_exponent().
  int resolution_exponent() const { return frac_places() - scale(); }

  /// Exact unscaled signed numerator at frac_places() fractional places.
  std::int64_t numerator(Code code) const {
    if (is_fxp()) {
      detail::check_code(code, fxp().n);
      return signed_rank(code, fxp().n);
    }
    const auto& cfg = tfx();
    const UnpackedTfx u = unpack(code, cfg);
    const std::int64_t field = (std::int64_t{u.int_value} << u.frac_bits) + u.frac_numerator;
    return field * (std::int64_t{1} << (cfg.max_frac_bits() - u.frac_bits));
  }

  double value(Code code) const {
    return std::ldexp(static_cast<double>(numerator(code)), -resolution_exponent());
  }

  Code most_negative() const { return code_from_rank(-(std::int64_t{1} << (bits() - 1)), bits()); }
  Code most_positive() const { return code_from_rank((std::int64_t{1} << (bits() - 1)) - 1, bits()); }

  /// Textual descriptor: `tfx:n/IS/SC` or `fxp:n/frac`.
  std::string descriptor() const {
    if (is_tfx()) {
      const auto& c = tfx();
      return "tfx:" + std::to_string(c.n) + "/" + std::to_string(c.is_max) + "/" + std::to_string(c.sc);
    }
    return "fxp:" + std::to_string(fxp().n) + "/" + std::to_string(fxp().frac_bits);
  }

  static Format parse(std::string_view text);

  bool operator==(const Format&) const = default;

 private:
  std::variant<TfxConfig, FxpConfig> cfg_{TfxConfig{}};
};

namespace detail {

inline int parse_int(std::string_view text, std::string_view whole) {
  if (text.empty()) {
    fail(ErrorCode::ParseError, "malformed format descriptor '" + std::string(whole) + "'");
  }
  std::size_t used = 0;
  int value = 0;
  try {
    value = std::stoi(std::string(text), &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size()) {
    fail(ErrorCode::ParseError, "malformed format descriptor '" + std::string(whole) + "'");
  }
  return value;
}

inline std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = text.find(sep, start);
    parts.push_back(text.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return parts;
}

}  // namespace detail

inline Format Format::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    fail(ErrorCode::ParseError, "format descriptor '" + std::string(text) + "' lacks a 'kind:' prefix");
  }
  const std::string_view kind = text.substr(0, colon);
  const auto fields = detail::split(text.substr(colon + 1), '/');
  if (kind == "tfx" && fields.size() == 3) {
    return TfxConfig::make(detail::parse_int(fields[0], text), detail::parse_int(fields[1], text),
                           detail::parse_int(fields[2], text));
  }
  if (kind == "fxp" && fields.size() == 2) {
    return FxpConfig::make(detail::parse_int(fields[0], text), detail::parse_int(fields[1], text));
  }
  fail(ErrorCode::ParseError, "unrecognized format descriptor '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Value-set queries
// ---------------------------------------------------------------------------

/// Exact extremes. Relies on code order matching value order (tested
/// exhaustively): the extremes sit at the ends of the two's-complement range
/// and the smallest positive value at code 1.
inline FormatExtremes extremes(const Format& fmt) {
  return FormatExtremes{fmt.value(fmt.most_positive()), fmt.value(fmt.most_negative()), fmt.value(Code{1})};
}

inline DynamicRange dynamic_range(const Format& fmt) {
  const FormatExtremes e = extremes(fmt);
  const double unscale = std::ldexp(1.0, -fmt.scale());
  return DynamicRange{-e.min_neg * unscale, e.min_pos * unscale};
}

/// All 2^n codes with their values, ascending by value.
inline std::vector<CodeValue> enumerate_values(const Format& fmt) {
  const int n = fmt.bits();
  std::vector<CodeValue> out;
  out.reserve(std::size_t{1} << n);
  for (Code c = 0; c < (Code{1} << n); ++c) {
    out.push_back({c, fmt.value(c)});
  }
  std::stable_sort(out.begin(), out.end(), [](const CodeValue& a, const CodeValue& b) { return a.value < b.value; });
  return out;
}

// ---------------------------------------------------------------------------
// Rounding onto the lattice: clip to the extremes, otherwise nearest value
// with ties going to the code whose least-significant bit is zero.
// ---------------------------------------------------------------------------

namespace detail {

/// `compare(num, exp)` returns the sign of (target - num * 2^-exp).
template <typename Compare>
Code nearest_code(const Format& fmt, Compare compare) {
  const int n = fmt.bits();
  const int e = fmt.resolution_exponent();
  std::int64_t lo = -(std::int64_t{1} << (n - 1));
  std::int64_t hi = (std::int64_t{1} << (n - 1)) - 1;
  const auto num_at = [&](std::int64_t rank) { return fmt.numerator(code_from_rank(rank, n)); };

  if (compare(num_at(lo), e) <= 0) return code_from_rank(lo, n);
  if (compare(num_at(hi), e) >= 0) return code_from_rank(hi, n);

  // Invariant: value(lo) < target < value(hi).
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    const int c = compare(num_at(mid), e);
    if (c == 0) return code_from_rank(mid, n);
    (c > 0 ? lo : hi) = mid;
  }
  const int c = compare(num_at(lo) + num_at(hi), e + 1);
  if (c < 0) return code_from_rank(lo, n);
  if (c > 0) return code_from_rank(hi, n);
  const Code lo_code = code_from_rank(lo, n);
  return (lo_code & 1U) == 0 ? lo_code : code_from_rank(hi, n);
}

}  // namespace detail

inline Code quantize_real(double x, const Format& fmt) {
  if (std::isnan(x)) {
    fail(ErrorCode::InvalidArgument, "cannot quantize NaN");
  }
  // Lattice points and midpoints carry at most 22 significant bits, so the
  // double comparison below is exact.
  return detail::nearest_code(fmt, [x](std::int64_t num, int exp) {
    const double v = std::ldexp(static_cast<double>(num), -exp);
    return x < v ? -1 : (x > v ? 1 : 0);
  });
}

/// Rounds the exact rational numerator / (denominator * 2^frac_places).
inline Code quantize_rational(std::int64_t numerator, std::uint64_t denominator, int frac_places, const Format& fmt) {
  if (denominator == 0 || denominator > (std::uint64_t{1} << 32)) {
    fail(ErrorCode::InvalidArgument, "denominator must lie in [1, 2^32]");
  }
  // Keeps (num * den) << frac_places inside 128 bits.
  if (frac_places < 0 || frac_places > 60) {
    fail(ErrorCode::InvalidArgument, "fractional places outside [0, 60]");
  }
  using Wide = __int128;
  const Wide target = numerator;
  const Wide den = static_cast<Wide>(denominator);
  return detail::nearest_code(fmt, [&](std::int64_t num, int exp) {
    const Wide lhs = target << exp;
    const Wide rhs = (static_cast<Wide>(num) * den) << frac_places;
    return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
  });
}

/// Rounds the exact dyadic value numerator * 2^-frac_places.
inline Code quantize_dyadic(std::int64_t numerator, int frac_places, const Format& fmt) {
  return quantize_rational(numerator, 1, frac_places, fmt);
}

}  // namespace taperfx
