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

#include "mossq/qgemm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "mossq/error.hpp"

namespace mossq {

namespace {

std::array<double, 256> decode_table(Fp8Format format) {
  std::array<double, 256> t{};
  for (int c = 0; c < 256; ++c) t[c] = fp8_decode(static_cast<std::uint8_t>(c), format);
  return t;
}

// Decoded E8M0 values by code; rejects the reserved code up front.
std::array<double, 256> e8m0_table(std::span<const E8m0Code> a, std::span<const E8m0Code> b) {
  for (auto codes : {a, b}) {
    for (E8m0Code c : codes) {
      if (c.bits == 255) fail(Errc::invalid_value, "E8M0 code 255 is reserved");
    }
  }
  std::array<double, 256> t{};
  for (int c = 0; c < 255; ++c) t[c] = e8m0_decode(E8m0Code{static_cast<std::uint8_t>(c)});
  return t;
}

void check_block_size(std::size_t k, std::size_t block, const char* what) {
  if (block == 0 || k % block != 0) {
    fail(Errc::invalid_argument, std::string(what) + ": K=" + std::to_string(k) + " is not a multiple of " +
                                     std::to_string(block));
  }
}

}  // namespace

Tensor MatrixF64::to_tensor() const {
  std::vector<float> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = static_cast<float>(data[i]);
  return Tensor({rows, cols}, std::move(out));
}

MxGemmOperands::MxGemmOperands(TwoLevelQuant activation, PerTensorQuant weight)
    : activation_(std::move(activation)), weight_(std::move(weight)) {
  k_ = activation_.shape.back();
  if (weight_.shape.back() != k_) {
    fail(Errc::shape_mismatch, "inner dimensions differ: " + std::to_string(k_) + " vs " +
                                   std::to_string(weight_.shape.back()));
  }
  check_block_size(k_, kMicroBlock, "mx GEMM");
  const std::size_t span = activation_.options.level1_span;
  if (span != 0 && span != k_) fail(Errc::invalid_argument, "mx GEMM needs one level-1 scale per activation row or tensor");
  m_ = activation_.codes.size() / k_;
  n_ = weight_.codes.size() / k_;
  weight_micro_scales_.assign(n_ * (k_ / kMicroBlock), E8m0Code{static_cast<std::uint8_t>(kE8m0Bias)});
}

GemmResult gemm_mx_epilogue(const MxGemmOperands& ops) {
  const auto& act = ops.activation();
  const auto& wq = ops.weight();
  const std::size_t m = ops.m(), n = ops.n(), k = ops.k();
  const std::size_t blocks = k / kMicroBlock;
  const auto act_lut = decode_table(act.format);
  const auto w_lut = decode_table(wq.format);
  const auto w_ss = ops.weight_micro_scales();
  const auto ss_lut = e8m0_table(act.micro_scales, w_ss);

  GemmResult r;
  r.output = MatrixF64{m, n, std::vector<double>(m * n)};
  GemmCounters& c = r.counters;
  for (std::size_t i = 0; i < m; ++i) {
    const std::uint8_t* x = act.codes.data() + i * k;
    const double s_x = act.global_scales[act.span_index(i, 0)];
    for (std::size_t j = 0; j < n; ++j) {
      const std::uint8_t* w = wq.codes.data() + j * k;
      double acc = 0.0;
      for (std::size_t b = 0; b < blocks; ++b) {
        double partial = 0.0;
        for (std::size_t kk = b * kMicroBlock; kk < (b + 1) * kMicroBlock; ++kk) partial += act_lut[x[kk]] * w_lut[w[kk]];
        const double block_scale = ss_lut[act.micro_scales[i * blocks + b].bits] * ss_lut[w_ss[j * blocks + b].bits];
        acc += partial * block_scale;
        ++c.tensor_path_scale_applications;
      }
      c.mac_count += k;
      r.output.data[i * n + j] = acc * (double{wq.scale} * s_x);
      ++c.epilogue_dequant_multiplies;
    }
  }
  return r;
}

GemmResult gemm_pergroup_mainloop(const PerGroupQuant& a, const PerGroupQuant& b) {
  const std::size_t k = a.shape.back();
  if (b.shape.back() != k) fail(Errc::shape_mismatch, "inner dimensions differ");
  if (a.group_size != b.group_size) fail(Errc::invalid_argument, "operands use different group sizes");
  const std::size_t gs = a.group_size;
  check_block_size(k, gs, "per-group GEMM");
  const std::size_t m = a.codes.size() / k, n = b.codes.size() / k;
  const std::size_t groups = k / gs;
  const auto a_lut = decode_table(a.format);
  const auto b_lut = decode_table(b.format);

  GemmResult r;
  r.output = MatrixF64{m, n, std::vector<double>(m * n)};
  GemmCounters& c = r.counters;
  for (std::size_t i = 0; i < m; ++i) {
    const std::uint8_t* x = a.codes.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const std::uint8_t* w = b.codes.data() + j * k;
      double acc = 0.0;
      for (std::size_t g = 0; g < groups; ++g) {
        double partial = 0.0;
        for (std::size_t kk = g * gs; kk < (g + 1) * gs; ++kk) partial += a_lut[x[kk]] * b_lut[w[kk]];
        acc += partial * (double{a.scales[i * groups + g]} * b.scales[j * groups + g]);
        ++c.mainloop_dequant_multiplies;
      }
      c.mac_count += k;
      r.output.data[i * n + j] = acc;
    }
  }
  return r;
}

GemmCounters predicted_counters(GemmKind kind, std::size_t m, std::size_t n, std::size_t k, std::size_t group_size) {
  GemmCounters c;
  c.mac_count = static_cast<std::uint64_t>(m) * n * k;
  if (kind == GemmKind::mx_epilogue) {
    check_block_size(k, kMicroBlock, "mx GEMM");
    c.epilogue_dequant_multiplies = static_cast<std::uint64_t>(m) * n;
    c.tensor_path_scale_applications = static_cast<std::uint64_t>(m) * n * (k / kMicroBlock);
  } else {
    check_block_size(k, group_size, "per-group GEMM");
    c.mainloop_dequant_multiplies = static_cast<std::uint64_t>(m) * n * (k / group_size);
  }
  return c;
}

MatrixF64 gemm_oracle(std::span<const double> a, std::span<const double> b, std::size_t m, std::size_t n,
                      std::size_t k, std::size_t block) {
  if (a.size() != m * k || b.size() != n * k) fail(Errc::shape_mismatch, "operand sizes do not match m, n, k");
  if (block == 0) fail(Errc::invalid_argument, "block must be positive");
  MatrixF64 out{m, n, std::vector<double>(m * n)};
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t begin = 0; begin < k; begin += block) {
        double partial = 0.0;
        const std::size_t end = std::min(k, begin + block);
        for (std::size_t kk = begin; kk < end; ++kk) partial += a[i * k + kk] * b[j * k + kk];
        acc += partial;
      }
      out.data[i * n + j] = acc;
    }
  }
  return out;
}

MatrixF64 gemm_oracle(const Tensor& a, const Tensor& b, std::size_t block) {
  if (a.cols() != b.cols()) fail(Errc::shape_mismatch, "inner dimensions differ");
  std::vector<double> ad(a.data().begin(), a.data().end());
  std::vector<double> bd(b.data().begin(), b.data().end());
  return gemm_oracle(ad, bd, a.rows(), b.rows(), a.cols(), block);
}

double relative_frobenius_error(const MatrixF64& got, const MatrixF64& ref) {
  if (got.rows != ref.rows || got.cols != ref.cols) fail(Errc::shape_mismatch, "matrix shapes differ");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.data.size(); ++i) {
    const double d = got.data[i] - ref.data[i];
    num += d * d;
    den += ref.data[i] * ref.data[i];
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num / den);
}

}  // namespace mossq
