// Copyright 2026 The mossq Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mossq/fp8.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "mossq/error.hpp"

namespace mossq {

namespace {

// Exponent of the binade containing a > 0, i.e. floor(log2 a).
int binade(double a) {
  int e = 0;
  std::frexp(a, &e);
  return e - 1;
}

float decode_formula(std::uint8_t bits, const Fp8Spec& s) {
  const int m = s.mantissa_bits;
  const int exp_field = (bits >> m) & ((1 << s.exponent_bits) - 1);
  const int mantissa = bits & ((1 << m) - 1);
  const double sign = (bits & 0x80) ? -1.0 : 1.0;
  const int exp_max = (1 << s.exponent_bits) - 1;
  if (s.ieee_specials && exp_field == exp_max) {
    return mantissa == 0 ? static_cast<float>(sign * std::numeric_limits<double>::infinity())
                         : std::numeric_limits<float>::quiet_NaN();
  }
  if (!s.ieee_specials && exp_field == exp_max && mantissa == (1 << m) - 1) {
    return std::numeric_limits<float>::quiet_NaN();
  }
  if (exp_field == 0) return static_cast<float>(sign * std::ldexp(mantissa, 1 - s.bias - m));
  return static_cast<float>(sign * std::ldexp((1 << m) + mantissa, exp_field - s.bias - m));
}

std::array<float, 256> build_table(const Fp8Spec& s) {
  std::array<float, 256> t{};
  for (int c = 0; c < 256; ++c) t[c] = decode_formula(static_cast<std::uint8_t>(c), s);
  return t;
}

const std::array<float, 256>& table(Fp8Format f) {
  static const std::array<float, 256> e4m3 = build_table(kE4M3);
  static const std::array<float, 256> e5m2 = build_table(kE5M2);
  return f == Fp8Format::e4m3 ? e4m3 : e5m2;
}

// Non-negative finite values in code order; increasing, indexed by code.
struct PositiveGrid {
  std::array<double, 128> value{};
  int max_code = 0;
};

PositiveGrid build_grid(Fp8Format f) {
  PositiveGrid g;
  const auto& t = table(f);
  while (g.max_code + 1 < 128 && std::isfinite(t[g.max_code + 1])) ++g.max_code;
  for (int c = 0; c <= g.max_code; ++c) g.value[c] = t[c];
  return g;
}

const PositiveGrid& grid(Fp8Format f) {
  static const PositiveGrid e4m3 = build_grid(Fp8Format::e4m3);
  static const PositiveGrid e5m2 = build_grid(Fp8Format::e5m2);
  return f == Fp8Format::e4m3 ? e4m3 : e5m2;
}

}  // namespace

Fp8Format parse_fp8_format(std::string_view name) {
  if (name == "e4m3" || name == "E4M3") return Fp8Format::e4m3;
  if (name == "e5m2" || name == "E5M2") return Fp8Format::e5m2;
  fail(Errc::invalid_argument, "unknown FP8 format '" + std::string(name) + "'");
}

float Fp8Code::value() const noexcept { return fp8_decode(bits, format); }

Fp8EncodeResult fp8_encode_checked(float x, Fp8Format format) {
  if (!std::isfinite(x)) fail(Errc::invalid_value, "cannot encode non-finite value");
  const PositiveGrid& g = grid(format);
  const double a = std::fabs(static_cast<double>(x));
  const std::uint8_t sign = std::signbit(x) ? 0x80 : 0x00;
  if (a == 0.0) return {Fp8Code{0, format}, false};

  // Bracket a between adjacent codes. Above the largest finite value the
  // upper neighbour is the next grid point of the same binade, which does not
  // exist in the format; rounding onto it saturates.
  int lo = g.max_code;
  double hi_value = 2.0 * g.value[lo] - g.value[lo - 1];
  if (a < g.value[lo]) {
    lo = static_cast<int>(std::upper_bound(g.value.begin(), g.value.begin() + g.max_code + 1, a) - g.value.begin()) - 1;
    hi_value = g.value[lo + 1];
  }
  // Sums and doubled inputs are exact: every operand has at most 24 significant bits.
  const double twice = 2.0 * a, mid = g.value[lo] + hi_value;
  const bool up = twice > mid || (twice == mid && (lo & 1) != 0);
  if (!up) return {Fp8Code{lo == 0 ? std::uint8_t{0} : static_cast<std::uint8_t>(lo | sign), format}, false};
  if (lo == g.max_code) return {Fp8Code{static_cast<std::uint8_t>(lo | sign), format}, true};
  return {Fp8Code{static_cast<std::uint8_t>((lo + 1) | sign), format}, false};
}

Fp8Code fp8_encode(float x, Fp8Format format) { return fp8_encode_checked(x, format).code; }

float fp8_decode(std::uint8_t bits, Fp8Format format) noexcept { return table(format)[bits]; }

bool fp8_is_special(std::uint8_t bits, Fp8Format format) noexcept { return !std::isfinite(table(format)[bits]); }

double fp8_spacing(double x, Fp8Format format) noexcept {
  const Fp8Spec& s = spec(format);
  const double a = std::fabs(x);
  const int e = a == 0.0 ? 1 - s.bias : std::max(binade(a), 1 - s.bias);
  return std::ldexp(1.0, e - s.mantissa_bits);
}

std::string_view to_string(ScaleRounding r) noexcept {
  return r == ScaleRounding::ceil_pow2 ? "ceil_pow2" : "nearest_log2";
}

ScaleRounding parse_scale_rounding(std::string_view name) {
  if (name == "ceil_pow2" || name == "ceil") return ScaleRounding::ceil_pow2;
  if (name == "nearest_log2" || name == "nearest") return ScaleRounding::nearest_log2;
  fail(Errc::invalid_argument, "unknown scale rounding '" + std::string(name) + "'");
}

float E8m0Code::value() const { return e8m0_decode(*this); }

E8m0Code e8m0_encode(float r, ScaleRounding rounding) {
  if (!std::isfinite(r) || !(r > 0.0f)) fail(Errc::invalid_value, "E8M0 input must be finite and positive");
  const double v = r;
  if (v > std::ldexp(1.0, 127)) fail(Errc::overflow, "E8M0 input exceeds 2^127");

  int exponent = 0;
  if (rounding == ScaleRounding::ceil_pow2) {
    int e = 0;
    const double frac = std::frexp(v, &e);  // v = frac * 2^e, frac in [0.5, 1)
    exponent = frac == 0.5 ? e - 1 : e;
  } else {
    // Compare the two neighbouring exponents directly in the log domain.
    const int lo = binade(v);
    const double l = std::log2(v);
    const double dlo = l - lo;
    const double dhi = (lo + 1) - l;
    if (dlo < dhi) exponent = lo;
    else if (dhi < dlo) exponent = lo + 1;
    else exponent = (lo % 2 == 0) ? lo : lo + 1;
  }
  exponent = std::clamp(exponent, -kE8m0Bias, 127);
  return E8m0Code{static_cast<std::uint8_t>(exponent + kE8m0Bias)};
}

float e8m0_decode(E8m0Code c) {
  if (c.bits == 255) fail(Errc::invalid_value, "E8M0 code 255 is reserved");
  return std::ldexp(1.0f, static_cast<int>(c.bits) - kE8m0Bias);
}

}  // namespace mossq
