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

// Per-tensor, per-group and two-level microscaled FP8 quantization.
//
// Groups and micro-blocks are contiguous runs along the innermost axis.
// Every quantizer rejects non-finite input. An all-zero tensor, group or
// level-1 span gets scale 1.0 and zero codes.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <variant>
#include <vector>

#include "mossq/fp8.hpp"
#include "mossq/tensor.hpp"

namespace mossq {

inline constexpr std::size_t kDefaultGroupSize = 128;
inline constexpr std::size_t kMicroBlock = 32;

struct PerTensorQuant {
  Shape shape;
  Fp8Format format = Fp8Format::e4m3;
  std::vector<std::uint8_t> codes;
  float scale = 1.0f;
  std::size_t clipped = 0;  // elements clamped to +/-delta_max
};

struct PerGroupQuant {
  Shape shape;
  Fp8Format format = Fp8Format::e4m3;
  std::size_t group_size = kDefaultGroupSize;
  std::vector<std::uint8_t> codes;
  /// Row-major [rows, ceil(cols / group_size)]; a ragged last group is scaled
  /// over the elements it actually holds.
  std::vector<float> scales;
  std::size_t clipped = 0;

  std::size_t groups_per_row() const noexcept;
};

struct TwoLevelOptions {
  ScaleRounding rounding = ScaleRounding::ceil_pow2;
  /// Level-1 span k1 along the innermost axis. 0 means one global scale for
  /// the whole tensor; otherwise a multiple of 32 dividing the innermost dim.
  std::size_t level1_span = 0;
};

/// Two-level microscaling: an FP32 level-1 scale s per span and an E8M0
/// micro-scale ss_i per 32-element block, with s = max_i s_i,
/// s_i = max|X_i| / delta_max and ss_i = round_E8M0(s_i / s).
/// Element j of block i dequantizes to decode(code_j) * s * ss_i.
struct TwoLevelQuant {
  Shape shape;
  Fp8Format format = Fp8Format::e4m3;
  TwoLevelOptions options;
  std::vector<std::uint8_t> codes;
  std::vector<float> global_scales;        // one per level-1 span, row-major
  std::vector<E8m0Code> micro_scales;      // [rows, cols / 32]
  std::size_t clipped = 0;

  std::size_t blocks_per_row() const noexcept;
  std::size_t spans_per_row() const noexcept;
  /// Expected global_scales.size(): 1 for a whole-tensor span.
  std::size_t global_scale_count() const noexcept;
  /// Index into global_scales for micro-block b of row r.
  std::size_t span_index(std::size_t r, std::size_t b) const noexcept;
};

using QuantizedTensor = std::variant<PerTensorQuant, PerGroupQuant, TwoLevelQuant>;

enum class Scheme : std::uint8_t { per_tensor, per_group, two_level };

/// CLI names: "tensor", "group", "mx2".
std::string_view to_string(Scheme scheme) noexcept;
Scheme parse_scheme(std::string_view name);

struct SchemeParams {
  std::size_t group_size = kDefaultGroupSize;
  TwoLevelOptions two_level;
};

QuantizedTensor quantize(const Tensor& x, Scheme scheme, Fp8Format format, const SchemeParams& params = {});

/// Scale max|x| / delta_max (1.0 for all-zero input).
float per_tensor_scale(const Tensor& x, Fp8Format format);

PerTensorQuant quantize_per_tensor(const Tensor& x, Fp8Format format);

/// Encodes x / scale with a caller-provided scale (e.g. a predicted one).
PerTensorQuant quantize_per_tensor_with_scale(const Tensor& x, Fp8Format format, float scale);

PerGroupQuant quantize_per_group(const Tensor& x, Fp8Format format, std::size_t group_size = kDefaultGroupSize);

TwoLevelQuant quantize_two_level(const Tensor& x, Fp8Format format, const TwoLevelOptions& options = {});

Tensor dequantize(const PerTensorQuant& q);
Tensor dequantize(const PerGroupQuant& q);
Tensor dequantize(const TwoLevelQuant& q);
Tensor dequantize(const QuantizedTensor& q);

/// Same formulas evaluated in double. Each product code * s (* ss) is exact
/// in binary64, so these are the exact values the codes and scales denote.
std::vector<double> dequantize_f64(const PerTensorQuant& q);
std::vector<double> dequantize_f64(const PerGroupQuant& q);
std::vector<double> dequantize_f64(const TwoLevelQuant& q);

}  // namespace mossq
