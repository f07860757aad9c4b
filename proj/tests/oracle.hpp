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

// Test-only reference models. Nothing here calls the library's decoder,
// rounding or accumulation code.
#pragma once

#include <taperfx/formats.hpp>

#include <gmpxx.h>

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace oracle {

using taperfx::Code;

struct Entry {
  Code code = 0;
  mpq_class value;
};

inline mpq_class pow2(int e) {
  mpq_class r(1);
  if (e >= 0) {
    mpz_mul_2exp(r.get_num_mpz_t(), r.get_num_mpz_t(), static_cast<unsigned>(e));
  } else {
    mpz_mul_2exp(r.get_den_mpz_t(), r.get_den_mpz_t(), static_cast<unsigned>(-e));
  }
  r.canonicalize();
  return r;
}

/// Builds every TFX(n, IS, SC) code constructively: for each run digit,
/// run length and fraction, lay the fields out as a bit string and attach
/// the value (I + f / 2^fs) * 2^SC. Sorted ascending by value.
inline std::vector<Entry> tfx_lattice(int n, int is_max, int sc) {
  std::vector<Entry> out;
  for (int digit = 0; digit <= 1; ++digit) {
    for (int m = 1; m <= is_max; ++m) {
      const int term = m < is_max ? 1 : 0;
      const int fs = n - m - term;
      if (fs < 0) continue;
      for (std::uint32_t f = 0; f < (1U << fs); ++f) {
        std::vector<int> bits;
        bits.push_back(1 - digit);
        for (int k = 1; k < m; ++k) bits.push_back(digit);
        if (term) bits.push_back(1 - digit);
        for (int k = fs - 1; k >= 0; --k) bits.push_back(static_cast<int>((f >> k) & 1U));
        if (static_cast<int>(bits.size()) != n) throw std::logic_error("bad layout");
        Code code = 0;
        for (int b : bits) code = (code << 1) | static_cast<Code>(b);
        const int integer = digit == 1 ? m - 1 : -m;
        mpq_class value = (mpq_class(integer) + mpq_class(f) * pow2(-fs)) * pow2(sc);
        out.push_back({code, value});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });
  return out;
}

inline std::vector<Entry> fxp_lattice(int n, int frac) {
  std::vector<Entry> out;
  for (long long v = -(1LL << (n - 1)); v < (1LL << (n - 1)); ++v) {
    const Code code = static_cast<Code>(static_cast<unsigned long long>(v) & ((1ULL << n) - 1));
    out.push_back({code, mpq_class(static_cast<long>(v)) * pow2(-frac)});
  }
  return out;
}

inline std::vector<Entry> lattice(const taperfx::Format& fmt) {
  if (fmt.is_tfx()) return tfx_lattice(fmt.tfx().n, fmt.tfx().is_max, fmt.tfx().sc);
  return fxp_lattice(fmt.fxp().n, fmt.fxp().frac_bits);
}

/// Clip to the ends, otherwise nearest; exact ties go to the even code.
inline Code round_nearest(const mpq_class& x, const std::vector<Entry>& sorted) {
  if (x <= sorted.front().value) return sorted.front().code;
  if (x >= sorted.back().value) return sorted.back().code;
  const auto hi = std::lower_bound(sorted.begin(), sorted.end(), x,
                                   [](const Entry& e, const mpq_class& v) { return e.value < v; });
  if (hi->value == x) return hi->code;
  const auto lo = hi - 1;
  const mpq_class dlo = x - lo->value;
  const mpq_class dhi = hi->value - x;
  if (dlo < dhi) return lo->code;
  if (dhi < dlo) return hi->code;
  return (lo->code & 1U) == 0 ? lo->code : hi->code;
}

inline mpq_class value_of(Code code, const std::vector<Entry>& sorted) {
  for (const auto& e : sorted) {
    if (e.code == code) return e.value;
  }
  throw std::out_of_range("code not in lattice");
}

}  // namespace oracle
