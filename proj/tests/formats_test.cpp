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
#include <taperfx/formats.hpp>

#include "oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace taperfx {
namespace {

std::vector<TfxConfig> all_tfx(int n_lo, int n_hi) {
  std::vector<TfxConfig> out;
  for (int n = n_lo; n <= n_hi; ++n)
    for (int is = 1; is <= n; ++is)
      for (int sc = kMinScale; sc <= kMaxScale; ++sc) out.push_back(TfxConfig::make(n, is, sc));
  return out;
}

TEST(Unpack, EightBitAnchor) {
  const auto cfg = TfxConfig::make(8, 8, 0);
  const UnpackedTfx u = unpack(0b01110111, cfg);
  EXPECT_EQ(u.sign, 1);
  EXPECT_EQ(u.int_value, 3);
  EXPECT_EQ(u.frac_numerator, 7U);
  EXPECT_EQ(u.frac_bits, 3);
  EXPECT_EQ(u.run_length, 4);
  EXPECT_EQ(to_real(u, cfg), 3.875);
}

TEST(Unpack, AllZerosIsZero) {
  const auto cfg = TfxConfig::make(5, 5, 0);
  const UnpackedTfx u = unpack(0b00000, cfg);
  EXPECT_EQ(u.sign, 1);
  EXPECT_EQ(u.int_value, 0);
  EXPECT_EQ(u.frac_numerator, 0U);
  EXPECT_EQ(u.frac_bits, 3);
  EXPECT_EQ(to_real(u, cfg), 0.0);
}

// Values frozen from oracle::tfx_lattice(5, 2, 0).
TEST(Unpack, SaturatedRunStoresNoTerminator) {
  const auto cfg = TfxConfig::make(5, 2, 0);
  const auto lattice = oracle::tfx_lattice(5, 2, 0);

  // Run of two 1-digits hits IS = 2: I = 1, fraction 011.
  const UnpackedTfx u = unpack(0b01011, cfg);
  EXPECT_EQ(u.int_value, 1);
  EXPECT_EQ(u.frac_numerator, 3U);
  EXPECT_EQ(u.frac_bits, 3);
  EXPECT_EQ(to_real(u, cfg), 1.375);
  EXPECT_EQ(oracle::value_of(0b01011, lattice), mpq_class(11, 8));

  // The 0.375 code terminates the run immediately.
  const UnpackedTfx v = unpack(0b00011, cfg);
  EXPECT_EQ(v.int_value, 0);
  EXPECT_EQ(v.frac_numerator, 3U);
  EXPECT_EQ(v.frac_bits, 3);
  EXPECT_EQ(to_real(v, cfg), 0.375);
  EXPECT_EQ(oracle::value_of(0b00011, lattice), mpq_class(3, 8));
}

TEST(Unpack, RejectsBitsAboveWidth) {
  EXPECT_THROW(unpack(0x100, TfxConfig::make(8, 3, 0)), Error);
}

TEST(ToReal, Examples) {
  EXPECT_EQ(to_real(UnpackedTfx{1, 3, 7, 3, 4}, TfxConfig::make(8, 8, 0)), 3.875);
  EXPECT_EQ(to_real(UnpackedTfx{1, 0, 0, 4, 1}, TfxConfig::make(6, 2, -1)), 0.0);
  // (-2 + 1/4) * 2^-1
  EXPECT_EQ(to_real(UnpackedTfx{-1, -2, 1, 2, 2}, TfxConfig::make(6, 3, -1)), -0.875);
}

TEST(Pack, Examples) {
  EXPECT_EQ(pack(UnpackedTfx{1, 3, 7, 3, 4}, TfxConfig::make(8, 8, 0)), 0b01110111U);
  EXPECT_EQ(pack(UnpackedTfx{1, 0, 0, 6, 1}, TfxConfig::make(8, 8, 0)), 0U);
  EXPECT_EQ(pack(UnpackedTfx{-1, -5, 0, 0, 5}, TfxConfig::make(5, 5, 0)), 0b10000U);
}

TEST(Pack, RejectsUnrepresentable) {
  const auto cfg = TfxConfig::make(8, 3, 0);
  // I = 3 needs m = 4 > IS.
  EXPECT_THROW(pack(UnpackedTfx{1, 3, 0, 4, 4}, cfg), Error);
  // f >= 2^fs.
  EXPECT_THROW(pack(UnpackedTfx{1, 0, 64, 6, 1}, cfg), Error);
  // Inconsistent fraction width.
  EXPECT_THROW(pack(UnpackedTfx{1, 0, 0, 5, 1}, cfg), Error);
}

TEST(Formats, DecoderMatchesConstructiveOracle) {
  for (const auto& cfg : all_tfx(2, 8)) {
    const auto lattice = oracle::tfx_lattice(cfg.n, cfg.is_max, cfg.sc);
    ASSERT_EQ(lattice.size(), std::size_t{1} << cfg.n);
    std::set<Code> codes;
    for (const auto& e : lattice) {
      codes.insert(e.code);
      ASSERT_EQ(mpq_class(Format(cfg).value(e.code)), e.value) << Format(cfg).descriptor() << " code " << e.code;
    }
    ASSERT_EQ(codes.size(), lattice.size());
  }
}

TEST(Formats, PackUnpackRoundTripExhaustive) {
  for (const auto& cfg : all_tfx(2, 8)) {
    for (Code c = 0; c < (Code{1} << cfg.n); ++c) {
      ASSERT_EQ(pack(unpack(c, cfg), cfg), c);
    }
  }
}

TEST(Formats, CodeOrderIsValueOrder) {
  for (const auto& cfg : all_tfx(2, 8)) {
    const Format fmt(cfg);
    double prev = -std::numeric_limits<double>::infinity();
    for (std::int64_t r = -(1 << (cfg.n - 1)); r < (1 << (cfg.n - 1)); ++r) {
      const double v = fmt.value(code_from_rank(r, cfg.n));
      ASSERT_LT(prev, v) << fmt.descriptor() << " rank " << r;
      prev = v;
    }
  }
}

TEST(Formats, UniformModeEqualsFixedPoint) {
  for (int n = 2; n <= 12; ++n) {
    const auto t = enumerate_values(Format(TfxConfig::make(n, 1, 0)));
    const auto f = enumerate_values(Format(FxpConfig::make(n, n - 1)));
    ASSERT_EQ(t.size(), f.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      EXPECT_EQ(t[i].value, f[i].value);
      EXPECT_EQ(t[i].code, f[i].code);
    }
  }
}

TEST(Formats, ScaleLaw) {
  for (int n = 2; n <= 8; ++n) {
    for (int is = 1; is <= n; ++is) {
      const auto base = enumerate_values(Format(TfxConfig::make(n, is, 0)));
      for (int sc = kMinScale; sc < 0; ++sc) {
        const auto scaled = enumerate_values(Format(TfxConfig::make(n, is, sc)));
        for (std::size_t i = 0; i < base.size(); ++i) {
          ASSERT_EQ(scaled[i].value, std::ldexp(base[i].value, sc));
        }
      }
    }
  }
}

TEST(Extremes, ClosedFormsMatchEnumeration) {
  for (const auto& cfg : all_tfx(2, 10)) {
    const auto values = enumerate_values(Format(cfg));
    const FormatExtremes e = extremes(Format(cfg));
    EXPECT_EQ(e.max_pos, values.back().value);
    EXPECT_EQ(e.min_neg, values.front().value);
    double min_pos = std::numeric_limits<double>::infinity();
    for (const auto& cv : values)
      if (cv.value > 0) min_pos = std::min(min_pos, cv.value);
    EXPECT_EQ(e.min_pos, min_pos);

    const int fs_sat = cfg.n - cfg.is_max;
    const double max_closed = (cfg.is_max - 1) + (std::ldexp(1.0, fs_sat) - 1) / std::ldexp(1.0, fs_sat);
    EXPECT_EQ(e.max_pos, std::ldexp(max_closed, cfg.sc));
    EXPECT_EQ(e.min_neg, -cfg.is_max * std::ldexp(1.0, cfg.sc));
    EXPECT_EQ(e.min_pos, std::ldexp(1.0, cfg.sc - (cfg.is_max == 1 ? cfg.n - 1 : cfg.n - 2)));
  }
}

TEST(Extremes, Tfx880) {
  const FormatExtremes e = extremes(Format(TfxConfig::make(8, 8, 0)));
  EXPECT_EQ(e.max_pos, 7.0);
  EXPECT_EQ(e.min_neg, -8.0);
  EXPECT_EQ(e.min_pos, std::ldexp(1.0, -6));
}

TEST(DynamicRange, SmallestRanges) {
  const DynamicRange d1 = dynamic_range(Format(TfxConfig::make(5, 1, 0)));
  EXPECT_EQ(d1.max_magnitude, 1.0);
  EXPECT_EQ(d1.min_magnitude, 0.0625);
  const DynamicRange d2 = dynamic_range(Format(TfxConfig::make(5, 2, 0)));
  EXPECT_EQ(d2.max_magnitude, 2.0);
  EXPECT_EQ(d2.min_magnitude, 0.125);
  const DynamicRange d5 = dynamic_range(Format(TfxConfig::make(5, 5, 0)));
  EXPECT_EQ(d5.max_magnitude, 5.0);
  EXPECT_EQ(d5.min_magnitude, 0.125);
}

TEST(DynamicRange, LawHoldsForEveryScale) {
  for (const auto& cfg : all_tfx(2, 12)) {
    const DynamicRange d = dynamic_range(Format(cfg));
    if (cfg.is_max == 1) {
      EXPECT_EQ(d.max_magnitude, 1.0);
      EXPECT_EQ(d.min_magnitude, std::ldexp(1.0, -(cfg.n - 1)));
    } else {
      EXPECT_EQ(d.max_magnitude, cfg.is_max);
      EXPECT_EQ(d.min_magnitude, std::ldexp(1.0, -(cfg.n - 2)));
    }
  }
}

TEST(Enumerate, UniformScaledTent) {
  const auto values = enumerate_values(Format(TfxConfig::make(5, 1, -1)));
  ASSERT_EQ(values.size(), 32U);
  EXPECT_EQ(values.front().value, -0.5);
  EXPECT_EQ(values.back().value, 0.46875);
  for (std::size_t i = 1; i < values.size(); ++i) {
    EXPECT_EQ(values[i].value - values[i - 1].value, 1.0 / 32);
  }
}

TEST(Enumerate, WidestTent) {
  const auto values = enumerate_values(Format(TfxConfig::make(5, 5, -1)));
  ASSERT_EQ(values.size(), 32U);
  EXPECT_EQ(values.front().value, -2.5);
  EXPECT_EQ(values.back().value, 2.0);
}

TEST(Enumerate, LengthAndStrictOrder) {
  for (const Format fmt : {Format(TfxConfig::make(7, 4, -2)), Format(FxpConfig::make(6, 2))}) {
    const auto values = enumerate_values(fmt);
    ASSERT_EQ(values.size(), std::size_t{1} << fmt.bits());
    for (std::size_t i = 1; i < values.size(); ++i) EXPECT_LT(values[i - 1].value, values[i].value);
  }
}

TEST(Quantize, ClipsToMaximum) {
  const Format fmt(TfxConfig::make(8, 8, 0));
  EXPECT_EQ(fmt.value(quantize_real(12.0, fmt)), 7.0);
  EXPECT_EQ(fmt.value(quantize_real(-100.0, fmt)), -8.0);
  EXPECT_EQ(fmt.value(quantize_real(std::numeric_limits<double>::infinity(), fmt)), 7.0);
  EXPECT_EQ(fmt.value(quantize_real(-std::numeric_limits<double>::infinity(), fmt)), -8.0);
}

TEST(Quantize, TieGoesToEvenCode) {
  const Format fmt(TfxConfig::make(8, 8, 0));
  const Code c = quantize_real(3.9375, fmt);
  EXPECT_EQ(fmt.value(c), 4.0);
  EXPECT_EQ(c & 1U, 0U);
  // Uniform mode reduces to ordinary round-half-even.
  const Format fxp(FxpConfig::make(8, 2));
  EXPECT_EQ(fxp.value(quantize_real(0.125, fxp)), 0.0);
  EXPECT_EQ(fxp.value(quantize_real(0.375, fxp)), 0.5);
  EXPECT_EQ(fxp.value(quantize_real(-0.375, fxp)), -0.5);
}

TEST(Quantize, NaNIsAnError) {
  EXPECT_THROW(quantize_real(std::nan(""), Format(TfxConfig::make(8, 3, 0))), Error);
}

TEST(Quantize, IdempotentOnLattice) {
  for (const auto& cfg : all_tfx(2, 8)) {
    const Format fmt(cfg);
    for (Code c = 0; c < (Code{1} << cfg.n); ++c) {
      ASSERT_EQ(quantize_real(fmt.value(c), fmt), c);
      ASSERT_EQ(quantize_dyadic(fmt.numerator(c), fmt.resolution_exponent(), fmt), c);
    }
  }
}

TEST(Quantize, MatchesRationalOracleOnRandomInputs) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pick(-12.0, 12.0);
  for (const auto& cfg : all_tfx(2, 8)) {
    const Format fmt(cfg);
    const auto lattice = oracle::lattice(fmt);
    for (int k = 0; k < 40; ++k) {
      const double x = std::ldexp(pick(rng), -(k % 5));
      ASSERT_EQ(quantize_real(x, fmt), oracle::round_nearest(mpq_class(x), lattice)) << fmt.descriptor() << " " << x;
    }
    // Every midpoint is a tie.
    for (std::size_t i = 1; i < lattice.size(); ++i) {
      const mpq_class mid = (lattice[i - 1].value + lattice[i].value) / 2;
      ASSERT_EQ(quantize_real(mid.get_d(), fmt), oracle::round_nearest(mid, lattice));
    }
  }
}

TEST(Quantize, MonotoneAndStable) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pick(-9.0, 9.0);
  for (const Format fmt : {Format(TfxConfig::make(6, 4, -1)), Format(TfxConfig::make(8, 8, 0)),
                           Format(FxpConfig::make(7, 3))}) {
    std::vector<double> xs(2000);
    for (auto& x : xs) x = pick(rng);
    std::sort(xs.begin(), xs.end());
    std::int64_t prev = std::numeric_limits<std::int64_t>::min();
    for (const double x : xs) {
      const Code q = quantize_real(x, fmt);
      const std::int64_t rank = signed_rank(q, fmt.bits());
      ASSERT_LE(prev, rank);
      prev = rank;
      ASSERT_EQ(quantize_real(fmt.value(q), fmt), q);
    }
  }
}

TEST(Quantize, RationalPathAgreesWithRealPath) {
  std::mt19937_64 rng(3);
  const Format fmt(TfxConfig::make(7, 5, -2));
  for (int k = 0; k < 5000; ++k) {
    const std::int64_t num = static_cast<std::int64_t>(rng() % 40001) - 20000;
    const std::uint64_t den = 1 + rng() % 9;
    const int places = static_cast<int>(rng() % 12);
    const mpq_class exact = mpq_class(static_cast<long>(num), static_cast<unsigned long>(den)) * oracle::pow2(-places);
    ASSERT_EQ(quantize_rational(num, den, places, fmt), oracle::round_nearest(exact, oracle::lattice(fmt)));
  }
}

TEST(FixedPoint, TwosComplementRange) {
  const Format fmt(FxpConfig::make(8, 7));
  const auto values = enumerate_values(fmt);
  ASSERT_EQ(values.size(), 256U);
  EXPECT_EQ(values.front().value, -1.0);
  EXPECT_EQ(values.back().value, 1.0 - std::ldexp(1.0, -7));
  const DynamicRange d = dynamic_range(fmt);
  EXPECT_EQ(d.integer_ratio(), 128U);
}

TEST(Config, ValidatesRanges) {
  EXPECT_THROW(TfxConfig::make(1, 1, 0), Error);
  EXPECT_THROW(TfxConfig::make(17, 3, 0), Error);
  EXPECT_THROW(TfxConfig::make(8, 0, 0), Error);
  EXPECT_THROW(TfxConfig::make(8, 9, 0), Error);
  EXPECT_THROW(TfxConfig::make(8, 3, 1), Error);
  EXPECT_THROW(TfxConfig::make(8, 3, -5), Error);
  EXPECT_THROW(FxpConfig::make(8, 0), Error);
  EXPECT_THROW(FxpConfig::make(8, 8), Error);
  try {
    TfxConfig::make(1, 1, 0);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedWidth);
  }
}

TEST(Descriptor, ParsesAndPrints) {
  EXPECT_EQ(Format::parse("tfx:8/3/-1"), Format(TfxConfig::make(8, 3, -1)));
  EXPECT_EQ(Format::parse("fxp:8/7"), Format(FxpConfig::make(8, 7)));
  EXPECT_EQ(Format::parse("tfx:5/5/-1").descriptor(), "tfx:5/5/-1");
  for (const char* bad : {"tfx:8/3", "tfx:8/3/x", "fxp:8", "posit:8/1", "8/3/0", "tfx:8/3/-1/2", "fxp:8/7 "}) {
    EXPECT_THROW(Format::parse(bad), Error) << bad;
  }
  EXPECT_THROW(Format::parse("tfx:8/9/0"), Error);
}

}  // namespace
}  // namespace taperfx
