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

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace mossq {

using Shape = std::vector<std::size_t>;

/// Product of the dimensions. Throws invalid_shape for an empty shape or a
/// zero dimension.
std::size_t checked_numel(const Shape& shape);

/// Dense row-major float32 tensor with value semantics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);  // zero-filled
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// Length of the innermost axis; quantization groups run along it.
  std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }
  /// Product of all but the innermost axis.
  std::size_t rows() const noexcept { return cols() == 0 ? 0 : size() / cols(); }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }
  std::span<const float> row(std::size_t r) const noexcept { return data().subspan(r * cols(), cols()); }

  float operator[](std::size_t i) const noexcept { return data_[i]; }
  float& operator[](std::size_t i) noexcept { return data_[i]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// Largest absolute element (0 for an all-zero tensor).
float max_abs(std::span<const float> values) noexcept;

/// Throws invalid_value if any element is NaN or infinite.
void require_finite(std::span<const float> values);

bool bitwise_equal(const Tensor& a, const Tensor& b) noexcept;

struct Gaussian {};
struct Laplace {};
/// Standard normal samples where a fraction `rate` of positions (chosen
/// independently per element) are replaced by +/- `magnitude` (in units of the
/// unit standard deviation).
struct OutlierInjected {
  double rate = 0.001;
  double magnitude = 50.0;
};
using Distribution = std::variant<Gaussian, Laplace, OutlierInjected>;

/// Deterministic synthetic tensor for a fixed (shape, seed, dist).
Tensor tensor_randn(const Shape& shape, std::uint64_t seed, const Distribution& dist = Gaussian{});

}  // namespace mossq
