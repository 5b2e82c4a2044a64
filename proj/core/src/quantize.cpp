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

#include "mossq/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mossq/error.hpp"

namespace mossq {

namespace {

float scale_for(float max_abs_value, Fp8Format format) {
  return max_abs_value > 0.0f ? max_abs_value / delta_max(format) : 1.0f;
}

// Encodes values[i] / divisor into out[i]; returns the number of clipped codes.
std::size_t encode_run(std::span<const float> values, float divisor, Fp8Format format, std::span<std::uint8_t> out) {
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto r = fp8_encode_checked(values[i] / divisor, format);
    out[i] = r.code.bits;
    clipped += r.clipped ? 1 : 0;
  }
  return clipped;
}

void check_input(const Tensor& x) {
  checked_numel(x.shape());
  require_finite(x.data());
}

}  // namespace

std::size_t PerGroupQuant::groups_per_row() const noexcept {
  const std::size_t cols = shape.empty() ? 0 : shape.back();
  return (cols + group_size - 1) / group_size;
}

std::size_t TwoLevelQuant::blocks_per_row() const noexcept { return shape.back() / kMicroBlock; }

std::size_t TwoLevelQuant::spans_per_row() const noexcept {
  return options.level1_span == 0 ? 1 : shape.back() / options.level1_span;
}

std::size_t TwoLevelQuant::global_scale_count() const noexcept {
  if (options.level1_span == 0) return 1;
  return shape.back() == 0 ? 0 : (codes.size() / shape.back()) * spans_per_row();
}

std::size_t TwoLevelQuant::span_index(std::size_t r, std::size_t b) const noexcept {
  if (options.level1_span == 0) return 0;
  return r * spans_per_row() + (b * kMicroBlock) / options.level1_span;
}

float per_tensor_scale(const Tensor& x, Fp8Format format) { return scale_for(max_abs(x.data()), format); }

PerTensorQuant quantize_per_tensor(const Tensor& x, Fp8Format format) {
  check_input(x);
  return quantize_per_tensor_with_scale(x, format, per_tensor_scale(x, format));
}

PerTensorQuant quantize_per_tensor_with_scale(const Tensor& x, Fp8Format format, float scale) {
  check_input(x);
  if (!(scale > 0.0f) || !std::isfinite(scale)) fail(Errc::invalid_argument, "scale must be finite and positive");
  PerTensorQuant q{x.shape(), format, std::vector<std::uint8_t>(x.size()), scale, 0};
  q.clipped = encode_run(x.data(), scale, format, q.codes);
  return q;
}

PerGroupQuant quantize_per_group(const Tensor& x, Fp8Format format, std::size_t group_size) {
  if (group_size < 1) fail(Errc::invalid_argument, "group_size must be at least 1");
  check_input(x);
  PerGroupQuant q{x.shape(), format, group_size, std::vector<std::uint8_t>(x.size()), {}, 0};
  const std::size_t cols = x.cols();
  const std::size_t gpr = q.groups_per_row();
  q.scales.resize(x.rows() * gpr);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    for (std::size_t g = 0; g < gpr; ++g) {
      const std::size_t begin = g * group_size;
      const std::size_t len = std::min(group_size, cols - begin);
      const auto group = row.subspan(begin, len);
      const float s = scale_for(max_abs(group), format);
      q.scales[r * gpr + g] = s;
      q.clipped += encode_run(group, s, format, std::span(q.codes).subspan(r * cols + begin, len));
    }
  }
  return q;
}

TwoLevelQuant quantize_two_level(const Tensor& x, Fp8Format format, const TwoLevelOptions& options) {
  check_input(x);
  const std::size_t cols = x.cols();
  if (cols % kMicroBlock != 0) {
    fail(Errc::invalid_argument, "innermost dimension " + std::to_string(cols) + " is not a multiple of 32");
  }
  if (options.level1_span != 0 && (options.level1_span % kMicroBlock != 0 || cols % options.level1_span != 0)) {
    fail(Errc::invalid_argument, "level-1 span must be a multiple of 32 that divides the innermost dimension");
  }

  TwoLevelQuant q{x.shape(), format, options, std::vector<std::uint8_t>(x.size()), {}, {}, 0};
  const std::size_t rows = x.rows();
  const std::size_t bpr = q.blocks_per_row();
  const std::size_t spr = q.spans_per_row();
  const float dmax = delta_max(format);

  // Level-2 raw scales s_i.
  std::vector<float> block_scale(rows * bpr);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t b = 0; b < bpr; ++b) {
      block_scale[r * bpr + b] = max_abs(x.row(r).subspan(b * kMicroBlock, kMicroBlock)) / dmax;
    }
  }

  // Level-1 s = max_i s_i over each span.
  q.global_scales.assign(options.level1_span == 0 ? 1 : rows * spr, 0.0f);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t b = 0; b < bpr; ++b) {
      float& s = q.global_scales[q.span_index(r, b)];
      s = std::max(s, block_scale[r * bpr + b]);
    }
  }
  for (float& s : q.global_scales) {
    if (s == 0.0f) s = 1.0f;
  }

  q.micro_scales.resize(rows * bpr);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t b = 0; b < bpr; ++b) {
      const float s = q.global_scales[q.span_index(r, b)];
      const float si = block_scale[r * bpr + b];
      const E8m0Code ss = si > 0.0f ? e8m0_encode(si / s, options.rounding) : E8m0Code{kE8m0Bias};
      q.micro_scales[r * bpr + b] = ss;
      const float divisor = s * e8m0_decode(ss);
      q.clipped += encode_run(x.row(r).subspan(b * kMicroBlock, kMicroBlock), divisor, format,
                              std::span(q.codes).subspan(r * cols + b * kMicroBlock, kMicroBlock));
    }
  }
  return q;
}

std::string_view to_string(Scheme scheme) noexcept {
  switch (scheme) {
    case Scheme::per_tensor: return "tensor";
    case Scheme::per_group: return "group";
    case Scheme::two_level: return "mx2";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "tensor" || name == "per_tensor") return Scheme::per_tensor;
  if (name == "group" || name == "per_group") return Scheme::per_group;
  if (name == "mx2" || name == "two_level") return Scheme::two_level;
  fail(Errc::invalid_argument, "unknown scheme '" + std::string(name) + "'");
}

QuantizedTensor quantize(const Tensor& x, Scheme scheme, Fp8Format format, const SchemeParams& params) {
  switch (scheme) {
    case Scheme::per_tensor: return quantize_per_tensor(x, format);
    case Scheme::per_group: return quantize_per_group(x, format, params.group_size);
    case Scheme::two_level: return quantize_two_level(x, format, params.two_level);
  }
  fail(Errc::invalid_argument, "unknown scheme");
}

Tensor dequantize(const PerTensorQuant& q) {
  std::vector<float> out(q.codes.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fp8_decode(q.codes[i], q.format) * q.scale;
  return Tensor(q.shape, std::move(out));
}

Tensor dequantize(const PerGroupQuant& q) {
  std::vector<float> out(q.codes.size());
  const std::size_t cols = q.shape.back();
  const std::size_t gpr = q.groups_per_row();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t r = i / cols;
    const std::size_t g = (i % cols) / q.group_size;
    out[i] = fp8_decode(q.codes[i], q.format) * q.scales[r * gpr + g];
  }
  return Tensor(q.shape, std::move(out));
}

Tensor dequantize(const TwoLevelQuant& q) {
  std::vector<float> out(q.codes.size());
  const std::size_t cols = q.shape.back();
  const std::size_t bpr = q.blocks_per_row();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t r = i / cols;
    const std::size_t b = (i % cols) / kMicroBlock;
    out[i] = fp8_decode(q.codes[i], q.format) * q.global_scales[q.span_index(r, b)] *
             e8m0_decode(q.micro_scales[r * bpr + b]);
  }
  return Tensor(q.shape, std::move(out));
}

Tensor dequantize(const QuantizedTensor& q) {
  return std::visit([](const auto& v) { return dequantize(v); }, q);
}

std::vector<double> dequantize_f64(const PerTensorQuant& q) {
  std::vector<double> out(q.codes.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = double{fp8_decode(q.codes[i], q.format)} * q.scale;
  return out;
}

std::vector<double> dequantize_f64(const PerGroupQuant& q) {
  std::vector<double> out(q.codes.size());
  const std::size_t cols = q.shape.back();
  const std::size_t gpr = q.groups_per_row();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t r = i / cols;
    const std::size_t g = (i % cols) / q.group_size;
    out[i] = double{fp8_decode(q.codes[i], q.format)} * q.scales[r * gpr + g];
  }
  return out;
}

std::vector<double> dequantize_f64(const TwoLevelQuant& q) {
  std::vector<double> out(q.codes.size());
  const std::size_t cols = q.shape.back();
  const std::size_t bpr = q.blocks_per_row();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t r = i / cols;
    const std::size_t b = (i % cols) / kMicroBlock;
    out[i] = double{fp8_decode(q.codes[i], q.format)} * q.global_scales[q.span_index(r, b)] *
             e8m0_decode(q.micro_scales[r * bpr + b]);
  }
  return out;
}

}  // namespace mossq
