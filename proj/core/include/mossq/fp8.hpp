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

#pragma once

// Software FP8 (OFP8 E4M3 / E5M2) and E8M0 scale codecs.
//
// Element encoding rounds to nearest, ties to even, and saturates finite
// values beyond the largest finite magnitude to +/-delta_max. Non-finite
// inputs are rejected. A zero result is always encoded as +0 (0x00).

#include <cstdint>
#include <string_view>

#include "mossq/tensor_io.hpp"

namespace mossq {

enum class Fp8Format : std::uint8_t { e4m3, e5m2 };

struct Fp8Spec {
  std::string_view name;
  int exponent_bits;
  int mantissa_bits;
  int bias;
  float delta_max;
  /// E5M2 reserves exponent-all-ones for Inf/NaN; E4M3 has no infinities and
  /// only S.1111.111 is NaN.
  bool ieee_specials;
};

inline constexpr Fp8Spec kE4M3{"e4m3", 4, 3, 7, 448.0f, false};
inline constexpr Fp8Spec kE5M2{"e5m2", 5, 2, 15, 57344.0f, true};

constexpr const Fp8Spec& spec(Fp8Format f) noexcept { return f == Fp8Format::e4m3 ? kE4M3 : kE5M2; }
constexpr float delta_max(Fp8Format f) noexcept { return spec(f).delta_max; }
constexpr DType code_dtype(Fp8Format f) noexcept { return f == Fp8Format::e4m3 ? DType::fp8_e4m3 : DType::fp8_e5m2; }

Fp8Format parse_fp8_format(std::string_view name);

struct Fp8Code {
  std::uint8_t bits = 0;
  Fp8Format format = Fp8Format::e4m3;

  float value() const noexcept;
  friend bool operator==(const Fp8Code&, const Fp8Code&) = default;
};

struct Fp8EncodeResult {
  Fp8Code code;
  /// True when the rounded magnitude exceeded delta_max and was clamped.
  bool clipped = false;
};

Fp8EncodeResult fp8_encode_checked(float x, Fp8Format format);
Fp8Code fp8_encode(float x, Fp8Format format);

/// Exact decoded value. NaN codes decode to quiet NaN and E5M2 infinity codes
/// to +/-inf; use fp8_is_special() to tell them apart from data.
float fp8_decode(std::uint8_t bits, Fp8Format format) noexcept;
inline float fp8_decode(Fp8Code c) noexcept { return fp8_decode(c.bits, c.format); }

bool fp8_is_special(std::uint8_t bits, Fp8Format format) noexcept;

/// Distance between adjacent representable values around magnitude |x|
/// (x within range). Used for half-ulp error bounds.
double fp8_spacing(double x, Fp8Format format) noexcept;

enum class ScaleRounding : std::uint8_t {
  ceil_pow2,     // smallest power of two >= r
  nearest_log2,  // 2^round(log2 r), ties to even exponent
};

std::string_view to_string(ScaleRounding r) noexcept;
ScaleRounding parse_scale_rounding(std::string_view name);

/// 2^(bits - 127); bits == 255 is invalid.
struct E8m0Code {
  std::uint8_t bits = 127;

  float value() const;
  friend bool operator==(const E8m0Code&, const E8m0Code&) = default;
};

inline constexpr int kE8m0Bias = 127;

/// r must be finite and positive; r > 2^127 is an overflow error. Results
/// below 2^-127 clamp to code 0.
E8m0Code e8m0_encode(float r, ScaleRounding rounding = ScaleRounding::ceil_pow2);
float e8m0_decode(E8m0Code c);

}  // namespace mossq
