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

// Reference quantized GEMM kernels, C = A * B^T with both operands stored
// row-major along the shared inner dimension K (activations M x K, weights
// N x K). Accumulation is binary64 in a fixed order: K-blocks in ascending
// order, elements ascending within a block.
//
// Two dataflows are provided:
//  * gemm_mx_epilogue: two-level activations and per-tensor weights. Inside
//    the K loop only E8M0 block scales are applied (the tensor-core path);
//    the FP32 factors s_W * s_x are applied once per output in the epilogue.
//  * gemm_pergroup_mainloop: per-group scaled operands. Each group's partial
//    sum must be dequantized by s_a[g] * s_b[g] inside the K loop.
// Counters record where every scale multiplication happens.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mossq/quantize.hpp"
#include "mossq/tensor.hpp"

namespace mossq {

struct MatrixF64 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double at(std::size_t r, std::size_t c) const noexcept { return data[r * cols + c]; }
  Tensor to_tensor() const;
};

struct GemmCounters {
  std::uint64_t mainloop_dequant_multiplies = 0;
  std::uint64_t epilogue_dequant_multiplies = 0;
  std::uint64_t tensor_path_scale_applications = 0;  // E8M0 block scales inside the MMA
  std::uint64_t mac_count = 0;

  friend bool operator==(const GemmCounters&, const GemmCounters&) = default;
};

struct GemmResult {
  MatrixF64 output;
  GemmCounters counters;
};

/// Operands of the epilogue-dequant kernel. The weight carries one unit
/// (code 127) E8M0 micro-scale per 32-block so both operands present the same
/// microscaled layout to the block loop.
class MxGemmOperands {
 public:
  /// activation: M x K two-level (level-1 span whole tensor or K);
  /// weight: N x K per-tensor. Throws on K mismatch or K % 32 != 0.
  MxGemmOperands(TwoLevelQuant activation, PerTensorQuant weight);

  const TwoLevelQuant& activation() const noexcept { return activation_; }
  const PerTensorQuant& weight() const noexcept { return weight_; }
  std::span<const E8m0Code> weight_micro_scales() const noexcept { return weight_micro_scales_; }

  std::size_t m() const noexcept { return m_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }

 private:
  TwoLevelQuant activation_;
  PerTensorQuant weight_;
  std::vector<E8m0Code> weight_micro_scales_;
  std::size_t m_ = 0;
  std::size_t n_ = 0;
  std::size_t k_ = 0;
};

GemmResult gemm_mx_epilogue(const MxGemmOperands& operands);

/// a: M x K, b: N x K, both per-group with the same group size dividing K.
GemmResult gemm_pergroup_mainloop(const PerGroupQuant& a, const PerGroupQuant& b);

enum class GemmKind : std::uint8_t { mx_epilogue, pergroup_mainloop };

/// Counter values the kernels produce for a shape, without running them.
GemmCounters predicted_counters(GemmKind kind, std::size_t m, std::size_t n, std::size_t k,
                                std::size_t group_size = kDefaultGroupSize);

/// Full-precision reference: C[i][j] = sum_k a[i][k] b[j][k] in binary64,
/// summed per `block` of K and then across blocks in ascending order.
MatrixF64 gemm_oracle(std::span<const double> a, std::span<const double> b, std::size_t m, std::size_t n,
                      std::size_t k, std::size_t block = kMicroBlock);
MatrixF64 gemm_oracle(const Tensor& a, const Tensor& b, std::size_t block = kMicroBlock);

/// ||got - ref||_F / ||ref||_F (0 when both are zero).
double relative_frobenius_error(const MatrixF64& got, const MatrixF64& ref);

}  // namespace mossq
