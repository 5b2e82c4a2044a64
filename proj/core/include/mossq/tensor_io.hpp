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

// Binary tensor container (".mosst"). Layout, little-endian throughout:
//
//   offset  size        field
//   0       8           magic "MOSSTNSR"
//   8       1           version (currently 1)
//   9       1           dtype tag: 0 f32, 1 fp8-e4m3, 2 fp8-e5m2, 3 e8m0
//   10      4           ndim (u32)
//   14      8 * ndim    dims (u64 each)
//   ...     numel * w   payload, w = 4 for f32 and 1 for code dtypes

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "mossq/tensor.hpp"

namespace mossq {

inline constexpr char kTensorFileMagic[8] = {'M', 'O', 'S', 'S', 'T', 'N', 'S', 'R'};
inline constexpr std::uint8_t kTensorFileVersion = 1;

enum class DType : std::uint8_t { f32 = 0, fp8_e4m3 = 1, fp8_e5m2 = 2, e8m0 = 3 };

std::size_t element_width(DType dtype) noexcept;

/// One-byte codes (FP8 or E8M0) with a shape.
struct CodeArray {
  DType dtype = DType::fp8_e4m3;
  Shape shape;
  std::vector<std::uint8_t> codes;

  friend bool operator==(const CodeArray&, const CodeArray&) = default;
};

using TensorFile = std::variant<Tensor, CodeArray>;

std::vector<std::uint8_t> encode_tensor_file(const Tensor& t);
std::vector<std::uint8_t> encode_tensor_file(const CodeArray& c);

/// Errors: bad_magic, version_mismatch, unsupported_dtype, truncated (short
/// header or payload, and trailing bytes).
TensorFile decode_tensor_file(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
void write_codes(const std::filesystem::path& path, const CodeArray& c);
TensorFile read_tensor_file(const std::filesystem::path& path);

/// Reads a file that must hold f32 data.
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace mossq
